"""scenesmith: headless procedural scene synthesis.

Natural-language scene descriptions become deterministic, executable action
plans: objects are decomposed out of the text, matched to procedural APIs or
static assets by embedding similarity, parameterized, laid out by procedural
generators, and executed into a scene graph that exports to scene-json and
OBJ.
"""

__version__ = "0.1.0"

from .actions import ActionPlan, RunReport, deserialize_plan, execute_plan, serialize_plan, validate_plan
from .geometry import Aabb, Transform, Vec3, compute_aabb, compute_framing_camera
from .planner import PipelineConfig, PipelineError, PromptToggles, run_pipeline
from .registry import Registry, load_registry
from .scene import AssetInstance, SceneGraph, export_scene, import_scene_json
from .terrain import Heightfield, TerrainParams, generate_heightfield, sample_height

__all__ = [
    "ActionPlan",
    "Aabb",
    "AssetInstance",
    "Heightfield",
    "PipelineConfig",
    "PipelineError",
    "PromptToggles",
    "Registry",
    "RunReport",
    "SceneGraph",
    "TerrainParams",
    "Transform",
    "Vec3",
    "compute_aabb",
    "compute_framing_camera",
    "deserialize_plan",
    "execute_plan",
    "export_scene",
    "generate_heightfield",
    "import_scene_json",
    "load_registry",
    "run_pipeline",
    "sample_height",
    "serialize_plan",
    "validate_plan",
]
