"""Staged planning pipeline: decompose, retrieve, parameterize, place.

Each agent call is prompted through the same five-part template (role, task,
document, format, examples), every part independently toggleable so the
ablation harness can knock components out without touching the parser or the
executor. Agent outputs are strict JSON; malformed or invalid responses are
re-prompted with the error appended, at most three attempts per stage.

The pipeline is a pure function of (query, config, cassette, seed): with a
replay backend and a fixed seed, plan bytes, scene bytes and report bytes
are identical across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .actions import (
    ActionPlan,
    GenerateTerrain,
    ImportAsset,
    InvokeApi,
    PlaceLayout,
    RunReport,
    execute_plan,
    validate_plan,
)
from .errors import SceneSmithError
from .geometry import Transform
from .jsonutil import canonical_dumps
from .layout import (
    RELATION_KINDS,
    LayoutSpec,
    ScatterSpec,
    SpatialRelation,
    generate,
    resolve_relation,
)
from .scene import DiscRegion, RectRegion
from .llm import BackendConfig, ChatMessage, make_backend
from .registry import (
    DEFAULT_EMBEDDING_DIM,
    ParamSpec,
    PluginDescriptor,
    Registry,
    fallback_value,
    fill_defaults,
    load_registry,
    missing_required,
    validate_params,
)
from .retrieval import ApiHit, AssetHit, MockEmbedder, Retriever, make_embedder
from .rng import derive_seed
from .terrain import TerrainParams

MAX_ATTEMPTS = 3


class EmptyTemplate(SceneSmithError):
    code = "empty_template"


class PipelineError(SceneSmithError):
    code = "pipeline_error"

    def __init__(self, stage: str, message: str, attempts: list[str] | None = None, plan: ActionPlan | None = None):
        self.stage = stage
        self.attempts = attempts or []
        self.partial_plan = plan
        super().__init__(f"[{stage}] {message}")


@dataclass
class ClarificationRequest:
    plugin: str
    missing: list[str]
    questions: list[str]

    def to_dict(self) -> dict:
        return {"plugin": self.plugin, "missing": list(self.missing), "questions": list(self.questions)}


@dataclass(frozen=True)
class PromptToggles:
    role: bool = True
    task: bool = True
    document: bool = True
    format: bool = True
    examples: bool = True

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "task": self.task,
            "document": self.document,
            "format": self.format,
            "examples": self.examples,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PromptToggles":
        return cls(**{k: bool(v) for k, v in d.items() if k in ("role", "task", "document", "format", "examples")})


@dataclass(frozen=True)
class PromptTemplate:
    """Five-part agent prompt: role, task, document, format, examples."""

    role: str = ""
    task: str = ""
    document: str = ""
    format: str = ""
    examples: str = ""


def build_prompt(template: PromptTemplate, toggles: PromptToggles = PromptToggles()) -> str:
    sections: list[str] = []
    if toggles.role and template.role:
        sections.append("# Role\n" + template.role)
    if toggles.task and template.task:
        sections.append("# Task\n" + template.task)
    if toggles.document and template.document:
        sections.append("# Document\n" + template.document)
    if toggles.format and template.format:
        sections.append("# Format\n" + template.format)
    if toggles.examples and template.examples:
        sections.append("# Examples\n" + template.examples)
    if not sections:
        raise EmptyTemplate("no prompt components enabled")
    return "\n\n".join(sections)


@dataclass
class ObjectPlan:
    name: str
    module_hints: dict[str, str] = field(default_factory=dict)
    count_hint: int | None = None
    description: str = ""

    def query_text(self) -> str:
        return f"{self.name}: {self.description}" if self.description else self.name


@dataclass
class PlannerState:
    query: str
    objects: list[ObjectPlan] = field(default_factory=list)
    relations: list[SpatialRelation] = field(default_factory=list)
    plan: ActionPlan | None = None
    end_flag: bool = False
    retries: dict[str, int] = field(default_factory=dict)


@dataclass
class PipelineConfig:
    backend: BackendConfig
    registry_path: str
    seed: int = 0
    toggles: PromptToggles = field(default_factory=PromptToggles)
    embedder_kind: str = "mock"
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    embedder_endpoint: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(
            backend=BackendConfig.from_dict(d["backend"]),
            registry_path=d["registry_path"],
            seed=int(d.get("seed", 0)),
            toggles=PromptToggles.from_dict(d.get("prompt_toggles", {})),
            embedder_kind=d.get("embedder", "mock"),
            embedding_dim=int(d.get("embedding_dim", DEFAULT_EMBEDDING_DIM)),
            embedder_endpoint=d.get("embedder_endpoint"),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Agent templates

_DECOMPOSE_FORMAT = (
    'Reply with JSON only: {"objects": [{"name": str, "modules": {module: description}, '
    '"count": int, "description": str}]}\n'
    'If the request is too ambiguous to plan, reply {"clarification": '
    '{"missing": [str], "questions": [str]}} instead.'
)

_DECOMPOSE_EXAMPLES = (
    'Input: "a quiet meadow with a few rocks"\n'
    'Output: {"objects": [{"name": "terrain", "modules": {"terrain": "flat grassy meadow"}, '
    '"count": 1, "description": "flat grassy meadow terrain"}, '
    '{"name": "rock", "modules": {"assets": "weathered granite boulders"}, '
    '"count": 4, "description": "weathered granite boulders"}]}'
)

_HYPER_FORMAT = (
    'Reply with JSON only: {"values": {param_name: value}}. Use only documented '
    "parameter names; every value must respect its range or options."
)

_HYPER_EXAMPLES = (
    'Input: "a very tall old tree"\n'
    'Output: {"values": {"height": 32.0, "trunk_radius": 0.9}}'
)

_RELATION_FORMAT = (
    'Reply with JSON only: {"relations": [{"subject": str, "kind": str, "anchor": str, '
    '"params": {}}]}. kind must be one of: ' + ", ".join(RELATION_KINDS) + "."
)

_RELATION_EXAMPLES = (
    'Objects: terrain, rock\n'
    'Output: {"relations": [{"subject": "rock", "kind": "on", "anchor": "terrain", '
    '"params": {"count": 4, "min_separation": 2.0}}]}'
)


def _registry_document(registry: Registry) -> str:
    lines = ["Available procedural APIs:"]
    for name in sorted(registry.descriptors):
        d = registry.descriptors[name]
        lines.append(f"- {name} ({d.capability}): {d.description}")
    if registry.assets:
        lines.append("Available static assets:")
        for aid in sorted(registry.assets):
            a = registry.assets[aid]
            lines.append(f"- {aid}: {a.name} [{a.category}]")
    return "\n".join(lines)


def _descriptor_document(desc: PluginDescriptor) -> str:
    return canonical_dumps(desc.to_dict()).rstrip("\n")


def decompose_template(registry: Registry) -> PromptTemplate:
    return PromptTemplate(
        role="You are the scene decomposition agent of a procedural 3D scene engine.",
        task=(
            "Break the scene description into a rough list of objects. For each object "
            "give the responsible module hints, an instance count, and a concrete "
            "description suitable for retrieval. Include a terrain object when the "
            "scene implies ground."
        ),
        document=_registry_document(registry),
        format=_DECOMPOSE_FORMAT,
        examples=_DECOMPOSE_EXAMPLES,
    )


def hyperparam_template(desc: PluginDescriptor) -> PromptTemplate:
    return PromptTemplate(
        role="You are the hyperparameter generator: you turn object descriptions into valid API parameters.",
        task=(
            f"Choose parameter values for the {desc.name!r} API so the result matches the "
            "object description. Omit parameters you are unsure about; defaults exist."
        ),
        document=_descriptor_document(desc),
        format=_HYPER_FORMAT,
        examples=_HYPER_EXAMPLES,
    )


def relation_template(registry: Registry) -> PromptTemplate:
    return PromptTemplate(
        role="You are the asset placement agent: you define spatial relationships among scene objects.",
        task=(
            "For each object that needs placing, emit one relation describing where it "
            "goes relative to an anchor (another object, a region, or the terrain)."
        ),
        document=_registry_document(registry),
        format=_RELATION_FORMAT,
        examples=_RELATION_EXAMPLES,
    )


# Layout parameter documentation used by the per-relation hyperparameter
# call. These are engine-internal placement descriptors, not registry files.
_COUNT = ParamSpec("count", "int", "number of placements", range=(0, 10000), default=1)
_MIN_SEP = ParamSpec("min_separation", "float", "minimum pairwise distance in meters", range=(0.001, 1000), default=0.5)

RELATION_DESCRIPTORS: dict[str, PluginDescriptor] = {
    "near": PluginDescriptor(
        name="layout_near",
        capability="assets-placement",
        description="scatter the subject in a ring around the anchor",
        params=(
            _COUNT,
            _MIN_SEP,
            ParamSpec("dist_min", "float", "inner ring radius in meters", range=(0, 10000), default=0.0),
            ParamSpec("dist_max", "float", "outer ring radius in meters", range=(0.001, 10000), default=5.0),
        ),
    ),
    "on": PluginDescriptor(
        name="layout_on_terrain",
        capability="assets-placement",
        description="scatter the subject across the terrain, snapped to the ground",
        params=(_COUNT, _MIN_SEP),
    ),
    "inside": PluginDescriptor(
        name="layout_inside",
        capability="assets-placement",
        description="scatter the subject inside a named region",
        params=(_COUNT, _MIN_SEP),
    ),
    "along": PluginDescriptor(
        name="layout_along",
        capability="assets-placement",
        description="place the subject at even arc-length intervals along a path",
        params=(
            ParamSpec("spacing", "float", "arc-length spacing in meters", range=(0.001, 10000), default=5.0),
            ParamSpec("lateral_offset", "float", "offset from the path in meters", range=(-1000, 1000), default=0.0),
            ParamSpec("align_to_tangent", "bool", "rotate yaw to follow the path", default=True),
        ),
    ),
    "avoid": PluginDescriptor(
        name="layout_avoid",
        capability="assets-placement",
        description="scatter the subject over the domain while keeping clear of the anchor",
        params=(
            _COUNT,
            _MIN_SEP,
            ParamSpec("clearance", "float", "exclusion radius around the anchor in meters", range=(0.001, 10000), default=1.0),
        ),
    ),
    "surround": PluginDescriptor(
        name="layout_surround",
        capability="assets-placement",
        description="place the subject evenly on a circle around the anchor",
        params=(
            _COUNT,
            ParamSpec("radius", "float", "circle radius in meters", range=(0.001, 10000), default=5.0),
        ),
    ),
}


# ---------------------------------------------------------------------------
# Strict-JSON parsing with bounded re-prompting

def _extract_json(text: str) -> Any:
    stripped = text.strip()
    if stripped.startswith("```"):
        lines = stripped.splitlines()
        body = [ln for ln in lines if not ln.strip().startswith("```")]
        stripped = "\n".join(body).strip()
    try:
        return json.loads(stripped)
    except json.JSONDecodeError as e:
        raise ValueError(f"response is not valid JSON: {e.msg} at line {e.lineno}") from e


def _parse_objects(payload: Any) -> list[ObjectPlan] | ClarificationRequest:
    if not isinstance(payload, dict):
        raise ValueError("expected a JSON object")
    if "clarification" in payload:
        c = payload["clarification"]
        return ClarificationRequest(
            plugin="",
            missing=[str(m) for m in c.get("missing", [])],
            questions=[str(q) for q in c.get("questions", [])],
        )
    objects = payload.get("objects")
    if not isinstance(objects, list) or not objects:
        raise ValueError('expected a non-empty "objects" array')
    plans = []
    for i, o in enumerate(objects):
        if not isinstance(o, dict) or not o.get("name"):
            raise ValueError(f'objects[{i}] needs a non-empty "name"')
        count = o.get("count")
        if count is not None and (not isinstance(count, int) or isinstance(count, bool) or count < 0):
            raise ValueError(f'objects[{i}].count must be a non-negative integer')
        modules = o.get("modules", {})
        if not isinstance(modules, dict):
            raise ValueError(f'objects[{i}].modules must be an object')
        plans.append(
            ObjectPlan(
                name=str(o["name"]),
                module_hints={str(k): str(v) for k, v in modules.items()},
                count_hint=count,
                description=str(o.get("description", "")),
            )
        )
    names = [p.name for p in plans]
    if len(set(names)) != len(names):
        raise ValueError("object names must be unique")
    return plans


def _parse_values(payload: Any) -> dict[str, Any]:
    if not isinstance(payload, dict) or not isinstance(payload.get("values"), dict):
        raise ValueError('expected {"values": {...}}')
    return dict(payload["values"])


def _parse_relations(payload: Any, object_names: set[str]) -> list[SpatialRelation]:
    if not isinstance(payload, dict) or not isinstance(payload.get("relations"), list):
        raise ValueError('expected {"relations": [...]}')
    rels = []
    for i, r in enumerate(payload["relations"]):
        if not isinstance(r, dict):
            raise ValueError(f"relations[{i}] must be an object")
        kind = r.get("kind")
        if kind not in RELATION_KINDS:
            raise ValueError(f"relations[{i}].kind {kind!r} is not one of {list(RELATION_KINDS)}")
        subject = r.get("subject")
        if subject not in object_names:
            raise ValueError(f"relations[{i}].subject {subject!r} is not a planned object")
        rels.append(SpatialRelation.from_dict(r))
    return rels


class Planner:
    """Binds a registry, an LLM backend, and an embedder into the pipeline."""

    def __init__(
        self,
        registry: Registry,
        backend,
        embedder=None,
        toggles: PromptToggles = PromptToggles(),
    ):
        self.registry = registry
        self.backend = backend
        self.embedder = embedder or MockEmbedder()
        self.toggles = toggles
        self.retriever = Retriever(registry, self.embedder)

    # -- agent calls --------------------------------------------------------

    def _call(self, template: PromptTemplate, payload: str, parse: Callable[[str], Any], stage: str):
        """Prompt, parse, and re-prompt with the parse error appended.

        Returns (parsed, attempts_used). Raises PipelineError after
        MAX_ATTEMPTS failed attempts.
        """
        system = build_prompt(template, self.toggles)
        messages = [ChatMessage("system", system), ChatMessage("user", payload)]
        attempt_log: list[str] = []
        for attempt in range(1, MAX_ATTEMPTS + 1):
            response = self.backend.complete(messages)
            try:
                return parse(response), attempt
            except ValueError as e:
                attempt_log.append(f"attempt {attempt}: {e}")
                messages = messages + [
                    ChatMessage("assistant", response),
                    ChatMessage("user", f"Your reply was rejected: {e}. Reply again following the format exactly."),
                ]
        raise PipelineError(stage, f"no valid response after {MAX_ATTEMPTS} attempts", attempt_log)

    def decompose(self, query: str) -> tuple[list[ObjectPlan] | ClarificationRequest, int]:
        if not query.strip():
            raise ValueError("query must be non-empty")
        return self._call(
            decompose_template(self.registry),
            query,
            lambda text: _parse_objects(_extract_json(text)),
            "decompose",
        )

    def generate_hyperparams(self, desc: PluginDescriptor, description: str) -> tuple[dict[str, Any], int]:
        """LLM-proposed values, validated; violations are fed back for up to
        MAX_ATTEMPTS tries. Returns accepted (not yet defaulted) values."""
        template = hyperparam_template(desc)
        system = build_prompt(template, self.toggles)
        messages = [ChatMessage("system", system), ChatMessage("user", description)]
        attempt_log: list[str] = []
        for attempt in range(1, MAX_ATTEMPTS + 1):
            response = self.backend.complete(messages)
            try:
                values = _parse_values(_extract_json(response))
            except ValueError as e:
                attempt_log.append(f"attempt {attempt}: {e}")
                messages = messages + [
                    ChatMessage("assistant", response),
                    ChatMessage("user", f"Your reply was rejected: {e}. Reply again following the format exactly."),
                ]
                continue
            assignment, violations = validate_params(desc, values)
            if assignment is not None:
                return dict(assignment.values), attempt
            problems = "; ".join(f"{v.param}: {v.reason}" for v in violations)
            attempt_log.append(f"attempt {attempt}: {problems}")
            messages = messages + [
                ChatMessage("assistant", response),
                ChatMessage("user", f"Some values were invalid: {problems}. Fix them and reply again."),
            ]
        raise PipelineError("hyperparams", f"no valid parameters after {MAX_ATTEMPTS} attempts", attempt_log)

    def extract_relations(self, objects: list[ObjectPlan]) -> tuple[list[SpatialRelation], int]:
        if not objects:
            raise ValueError("at least one object is required")
        names = {o.name for o in objects}
        listing = "\n".join(
            f"- {o.name} (count {o.count_hint if o.count_hint is not None else 1}): {o.description}" for o in objects
        )
        return self._call(
            relation_template(self.registry),
            f"Objects in the scene:\n{listing}",
            lambda text: _parse_relations(_extract_json(text), names),
            "relations",
        )


def _terrain_params_from_values(values: dict[str, Any], seed: int) -> TerrainParams:
    known = {
        "size_x",
        "size_y",
        "resolution",
        "base_elevation",
        "elevation_range",
        "slope",
        "slope_direction_deg",
        "roughness",
        "octaves",
    }
    kwargs = {k: v for k, v in values.items() if k in known}
    return TerrainParams(seed=seed, **kwargs)


def _complete_values(
    planner: Planner,
    desc: PluginDescriptor,
    proposed: dict[str, Any],
    report: RunReport,
    clarifier: Callable[[ClarificationRequest], dict[str, Any]] | None,
) -> dict[str, Any]:
    """Fill defaults; resolve required-without-default params by asking the
    clarifier, or fall back to feasible values with a logged assumption."""
    values = dict(fill_defaults(desc, proposed).values)
    missing = missing_required(desc, values)
    if missing and clarifier is not None:
        request = ClarificationRequest(
            plugin=desc.name,
            missing=[p.name for p in missing],
            questions=[f"What value should {p.name!r} take? ({p.description})" for p in missing],
        )
        answers = clarifier(request) or {}
        merged = {**values, **{k: v for k, v in answers.items() if desc.param(k) is not None}}
        assignment, violations = validate_params(desc, merged)
        if assignment is not None:
            values = dict(assignment.values)
        else:
            report.assumptions.append(
                f"{desc.name}: clarification answers invalid ({[v.to_dict() for v in violations]}), using fallbacks"
            )
        missing = missing_required(desc, values)
    for p in missing:
        fb = fallback_value(p)
        values[p.name] = fb
        report.assumptions.append(f"{desc.name}.{p.name}: no value provided, assuming {fb!r}")
    return values


def run_pipeline(
    query: str,
    config: PipelineConfig,
    scene=None,
    clarifier: Callable[[ClarificationRequest], dict[str, Any]] | None = None,
    registry: Registry | None = None,
    backend=None,
) -> tuple[Any, ActionPlan, RunReport]:
    """Full Planner pass: decompose -> per-object retrieval and parameter
    generation -> relation extraction -> layout resolution -> execution.

    Editing an existing scene reuses the same path: pass the scene in and the
    plan executes against it. ``registry`` and ``backend`` override the
    config-derived ones (preloaded registries, preloaded scripted mocks).
    """
    registry = registry if registry is not None else load_registry(Path(config.registry_path), config.embedding_dim)
    backend = backend if backend is not None else make_backend(config.backend)
    embedder = make_embedder(config.embedder_kind, config.embedding_dim, config.embedder_endpoint)
    planner = Planner(registry, backend, embedder, config.toggles)
    state = PlannerState(query=query)
    report = RunReport()
    seed = config.seed

    # Stage: decomposition. Editing framing applies only when there is
    # something to edit; an empty session scene gets the plain prompt.
    is_edit = scene is not None and (scene.instances or scene.terrain is not None)
    user_query = _edit_query(query, scene) if is_edit else query
    decomposed, attempts = planner.decompose(user_query)
    report.stages.append({"stage": "decompose", "attempts": attempts, "retries": attempts - 1})
    if isinstance(decomposed, ClarificationRequest):
        if clarifier is None:
            raise PipelineError("decompose", "clarification required but no clarifier available")
        answers = clarifier(decomposed)
        answer_text = json.dumps(answers, sort_keys=True)
        decomposed, attempts = planner.decompose(f"{user_query}\nClarified details: {answer_text}")
        report.stages.append({"stage": "decompose", "attempts": attempts, "retries": attempts - 1})
        if isinstance(decomposed, ClarificationRequest):
            raise PipelineError("decompose", "still ambiguous after clarification")
    state.objects = decomposed

    plan = ActionPlan(seed=seed)
    terrain_extent: tuple[float, float] | None = None
    source_action_index: dict[str, int] = {}
    # Where each planned object will sit when the plan executes: origin (or
    # the import transform) until a layout is resolved for it, then the
    # centroid of its generated placement. Relations anchored to same-plan
    # objects resolve through this.
    planned_positions: dict[str, tuple[float, float]] = {}

    # Stage: per-object retrieval plus hyperparameter generation. Terrain is
    # special: it is not embedding-retrievable, so terrain-hinted objects go
    # straight to the dedicated terrain plugin when one is registered.
    terrain_plugin = next(
        (d for _, d in sorted(registry.descriptors.items()) if d.capability == "terrain"), None
    )
    for i, obj in enumerate(state.objects):
        if terrain_plugin is not None and _is_terrain_object(obj):
            hit = ApiHit(plugin_name=terrain_plugin.name, score=1.0)
        else:
            hit = planner.retriever.retrieve(obj.query_text(), derive_seed(seed, "retrieve", i))
        if isinstance(hit, ApiHit):
            desc = registry.descriptors[hit.plugin_name]
            proposed, attempts = planner.generate_hyperparams(desc, obj.query_text())
            report.stages.append(
                {"stage": "hyperparams", "object": obj.name, "plugin": desc.name, "attempts": attempts, "retries": attempts - 1}
            )
            values = _complete_values(planner, desc, proposed, report, clarifier)
            if desc.capability == "terrain":
                params = _terrain_params_from_values(values, derive_seed(seed, "terrain", i))
                plan.actions.append(GenerateTerrain(params=params))
                terrain_extent = (params.size_x, params.size_y)
            else:
                count = obj.count_hint if obj.count_hint is not None else 1
                plan.actions.append(
                    InvokeApi(plugin=desc.name, values=values, count=count, object_ref=obj.name)
                )
                source_action_index[obj.name] = len(plan.actions) - 1
                planned_positions[obj.name] = (0.0, 0.0)
        else:
            assert isinstance(hit, AssetHit)
            plan.actions.append(
                ImportAsset(asset_id=hit.asset_id, transform=Transform(), object_ref=obj.name)
            )
            source_action_index[obj.name] = len(plan.actions) - 1
            planned_positions[obj.name] = (0.0, 0.0)
        report.stages.append(
            {
                "stage": "retrieve",
                "object": obj.name,
                "hit": hit.plugin_name if isinstance(hit, ApiHit) else hit.asset_id,
                "hit_kind": "api" if isinstance(hit, ApiHit) else "asset",
            }
        )

    # Stage: relation extraction
    relations: list[SpatialRelation] = []
    if state.objects:
        relations, attempts = planner.extract_relations(state.objects)
        report.stages.append({"stage": "relations", "attempts": attempts, "retries": attempts - 1, "count": len(relations)})
    state.relations = relations

    # Stage: per-relation layout hyperparameters and resolution
    placed: set[str] = set()
    exec_scene = scene
    for j, rel in enumerate(relations):
        if rel.subject in placed:
            report.stages.append({"stage": "layout", "subject": rel.subject, "skipped": "already placed"})
            continue
        rel_desc = RELATION_DESCRIPTORS[rel.kind]
        rel_text = f"{rel.subject} {rel.kind} {rel.anchor}: {json.dumps(rel.params, sort_keys=True)}"
        try:
            proposed, attempts = planner.generate_hyperparams(rel_desc, rel_text)
            layout_values = dict(fill_defaults(rel_desc, proposed).values)
            merged = SpatialRelation(
                subject=rel.subject, kind=rel.kind, anchor=rel.anchor, params={**rel.params, **layout_values}
            )
            if "count" not in merged.params or merged.params.get("count") in (None, 0, 1):
                subject_obj = next((o for o in state.objects if o.name == rel.subject), None)
                if subject_obj and subject_obj.count_hint:
                    merged.params["count"] = subject_obj.count_hint
            anchor_scene = exec_scene if exec_scene is not None else _empty_scene(seed)
            if (
                rel.anchor in planned_positions
                and rel.anchor not in anchor_scene.regions
                and not anchor_scene.find(rel.anchor)
            ):
                merged.params["anchor_position"] = list(planned_positions[rel.anchor])
            layout = resolve_relation(merged, anchor_scene, derive_seed(seed, "layout", j), terrain_extent)
            plan.actions.append(PlaceLayout(object_ref=rel.subject, layout=layout, project=(rel.kind == "on")))
            placed.add(rel.subject)
            planned_positions[rel.subject] = _placement_centroid(layout) or planned_positions.get(rel.subject, (0.0, 0.0))
            report.stages.append(
                {"stage": "layout", "subject": rel.subject, "kind": rel.kind, "attempts": attempts, "retries": attempts - 1}
            )
        except PipelineError:
            raise
        except SceneSmithError as e:
            report.stages.append({"stage": "layout", "subject": rel.subject, "kind": rel.kind, "failed": str(e)})

    # Objects asking for several instances that no relation placed get a
    # fallback scatter so counts survive (on the terrain when there is one).
    for i, obj in enumerate(state.objects):
        if obj.name in placed or obj.name not in source_action_index:
            continue
        count = obj.count_hint if obj.count_hint is not None else 1
        if count <= 1:
            continue
        if terrain_extent is not None or (scene is not None and scene.terrain is not None):
            extent = terrain_extent or (scene.terrain.size_x, scene.terrain.size_y)
            region = RectRegion(0.0, 0.0, extent[0], extent[1])
            project = True
        else:
            region = DiscRegion(0.0, 0.0, max(2.0, float(count)))
            project = False
        layout = ScatterSpec(
            region=region, count=count, min_separation=0.5, seed=derive_seed(seed, "fallback-layout", i)
        )
        plan.actions.append(PlaceLayout(object_ref=obj.name, layout=layout, project=project))
        placed.add(obj.name)
        report.stages.append({"stage": "layout", "subject": obj.name, "kind": "fallback-scatter"})
        report.assumptions.append(f"{obj.name}: no relation placed it, scattered {count} instances by default")

    # Re-point source actions at their layouts so instantiation happens once.
    for name in placed:
        idx = source_action_index.get(name)
        if idx is None:
            continue
        action = plan.actions[idx]
        if isinstance(action, InvokeApi):
            plan.actions[idx] = InvokeApi(
                plugin=action.plugin,
                values=action.values,
                count=action.count,
                layout_ref=name,
                object_ref=action.object_ref,
            )
        elif isinstance(action, ImportAsset):
            plan.actions[idx] = ImportAsset(
                asset_id=action.asset_id, transform=None, layout_ref=name, object_ref=action.object_ref
            )

    state.plan = plan
    report.diagnostics = [d.to_dict() for d in validate_plan(plan, registry, scene)]

    # Stage: execution
    exec_scene, exec_report = execute_plan(plan, registry, scene)
    report.outcomes = exec_report.outcomes
    state.end_flag = True
    report.end_flag = True
    report.stages.append({"stage": "execute", "actions": len(plan.actions), "executed": exec_report.executed_count})
    return exec_scene, plan, report


def _placement_centroid(layout: LayoutSpec) -> tuple[float, float] | None:
    placement = generate(layout)
    if not placement.transforms:
        return None
    xs = [t.position.x for t in placement.transforms]
    ys = [t.position.y for t in placement.transforms]
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def _is_terrain_object(obj: ObjectPlan) -> bool:
    if obj.name.strip().lower() == "terrain":
        return True
    return any(hint.strip().lower() == "terrain" for hint in obj.module_hints)


def _empty_scene(seed: int):
    from .scene import SceneGraph

    return SceneGraph(seed=seed)


def _edit_query(query: str, scene) -> str:
    tags: dict[str, int] = {}
    for inst in scene.instances:
        for tag in inst.tags:
            tags[tag] = tags.get(tag, 0) + 1
    summary = ", ".join(f"{name} x{count}" for name, count in sorted(tags.items()))
    terrain_note = "with terrain" if scene.terrain is not None else "no terrain"
    return (
        f"Edit an existing scene ({terrain_note}; contains: {summary or 'nothing'}).\n"
        f"Instruction: {query}\n"
        "Plan only the new or changed objects; do not re-plan existing ones."
    )
