"""Executable action vocabulary, plan serialization, and the plan executor.

Plans are the only artifact downstream tools consume: an ordered list of
GenerateTerrain / InvokeApi / ImportAsset / PlaceLayout actions plus a seed,
serialized as canonical ``plan/1`` JSON (see docs/plan-format.md).

Execution is failure-isolating: a failing action is recorded and skipped so
the proportion of executable actions stays measurable. Everything is
deterministic per plan bytes; no clocks, no ambient randomness.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import SceneSmithError
from .geometry import Transform
from .jsonutil import canonical_bytes
from .layout import LayoutSpec, generate, project_to_terrain, spec_from_dict, spec_to_dict
from .registry import ParamAssignment, Registry, validate_params
from .scene import AssetInstance, SceneGraph
from .terrain import TerrainParams, generate_heightfield

PLAN_SCHEMA = "plan/1"


class PlanParseError(SceneSmithError):
    code = "plan_parse_error"


class VersionUnsupported(SceneSmithError):
    code = "version_unsupported"


@dataclass(frozen=True)
class GenerateTerrain:
    params: TerrainParams
    kind = "generate_terrain"


@dataclass(frozen=True)
class InvokeApi:
    plugin: str
    values: dict[str, Any]
    count: int = 1
    layout_ref: str | None = None  # object_ref of the PlaceLayout that instantiates this
    object_ref: str | None = None
    kind = "invoke_api"

    def assignment(self) -> ParamAssignment:
        return ParamAssignment(self.plugin, self.values)


@dataclass(frozen=True)
class ImportAsset:
    asset_id: str
    transform: Transform | None = None
    layout_ref: str | None = None
    object_ref: str | None = None
    kind = "import_asset"


@dataclass(frozen=True)
class PlaceLayout:
    object_ref: str
    layout: LayoutSpec
    project: bool = False
    kind = "place_layout"


Action = Union[GenerateTerrain, InvokeApi, ImportAsset, PlaceLayout]


@dataclass
class ActionPlan:
    seed: int = 0
    actions: list[Action] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": PLAN_SCHEMA,
            "seed": self.seed,
            "actions": [action_to_dict(a) for a in self.actions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ActionPlan":
        schema = d.get("schema")
        if schema != PLAN_SCHEMA:
            raise VersionUnsupported(f"unsupported plan schema {schema!r}")
        return cls(seed=int(d.get("seed", 0)), actions=[action_from_dict(a) for a in d.get("actions", [])])


def action_to_dict(action: Action) -> dict:
    if isinstance(action, GenerateTerrain):
        return {"kind": action.kind, "params": action.params.to_dict()}
    if isinstance(action, InvokeApi):
        return {
            "kind": action.kind,
            "plugin": action.plugin,
            "values": dict(action.values),
            "count": action.count,
            "layout_ref": action.layout_ref,
            "object_ref": action.object_ref,
        }
    if isinstance(action, ImportAsset):
        return {
            "kind": action.kind,
            "asset_id": action.asset_id,
            "transform": action.transform.to_dict() if action.transform else None,
            "layout_ref": action.layout_ref,
            "object_ref": action.object_ref,
        }
    if isinstance(action, PlaceLayout):
        return {
            "kind": action.kind,
            "object_ref": action.object_ref,
            "layout": spec_to_dict(action.layout),
            "project_to_terrain": action.project,
        }
    raise PlanParseError(f"unknown action type {type(action).__name__}")


def action_from_dict(d: dict) -> Action:
    kind = d.get("kind")
    if kind == "generate_terrain":
        return GenerateTerrain(params=TerrainParams.from_dict(d["params"]))
    if kind == "invoke_api":
        return InvokeApi(
            plugin=d["plugin"],
            values=dict(d.get("values", {})),
            count=int(d.get("count", 1)),
            layout_ref=d.get("layout_ref"),
            object_ref=d.get("object_ref"),
        )
    if kind == "import_asset":
        return ImportAsset(
            asset_id=d["asset_id"],
            transform=Transform.from_dict(d["transform"]) if d.get("transform") else None,
            layout_ref=d.get("layout_ref"),
            object_ref=d.get("object_ref"),
        )
    if kind == "place_layout":
        return PlaceLayout(
            object_ref=d["object_ref"],
            layout=spec_from_dict(d["layout"]),
            project=bool(d.get("project_to_terrain", False)),
        )
    raise PlanParseError(f"unknown action kind {kind!r}")


def serialize_plan(plan: ActionPlan) -> bytes:
    return canonical_bytes(plan.to_dict())


def deserialize_plan(data: bytes | str) -> ActionPlan:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        d = json.loads(data)
    except json.JSONDecodeError as e:
        raise PlanParseError(f"invalid plan json at line {e.lineno}: {e.msg}") from e
    return ActionPlan.from_dict(d)


@dataclass
class Diagnostic:
    index: int
    message: str

    def to_dict(self) -> dict:
        return {"index": self.index, "message": self.message}


def validate_plan(plan: ActionPlan, registry: Registry, scene: SceneGraph | None = None) -> list[Diagnostic]:
    """Reference resolution, ordering, and parameter checks. Pure; returns
    diagnostics instead of raising."""
    diags: list[Diagnostic] = []
    layout_refs = {a.object_ref for a in plan.actions if isinstance(a, PlaceLayout)}
    terrain_available = scene is not None and scene.terrain is not None
    for i, action in enumerate(plan.actions):
        if isinstance(action, GenerateTerrain):
            terrain_available = True
        elif isinstance(action, InvokeApi):
            desc = registry.descriptor(action.plugin)
            if desc is None:
                diags.append(Diagnostic(i, f"plugin {action.plugin!r} is not registered"))
            else:
                _, violations = validate_params(desc, action.values)
                for v in violations:
                    diags.append(Diagnostic(i, f"param {v.param!r}: {v.reason}"))
            if action.layout_ref is not None and action.layout_ref not in layout_refs:
                diags.append(Diagnostic(i, f"layout_ref {action.layout_ref!r} does not resolve to any place_layout"))
            if action.count < 0:
                diags.append(Diagnostic(i, "count must be >= 0"))
        elif isinstance(action, ImportAsset):
            if registry.asset(action.asset_id) is None:
                diags.append(Diagnostic(i, f"asset {action.asset_id!r} is not in the catalog"))
            if action.transform is None and action.layout_ref is None:
                diags.append(Diagnostic(i, "import_asset needs a transform or a layout_ref"))
            if action.transform is not None and action.layout_ref is not None:
                diags.append(Diagnostic(i, "import_asset takes a transform or a layout_ref, not both"))
            if action.layout_ref is not None and action.layout_ref not in layout_refs:
                diags.append(Diagnostic(i, f"layout_ref {action.layout_ref!r} does not resolve to any place_layout"))
        elif isinstance(action, PlaceLayout):
            if action.project and not terrain_available:
                diags.append(Diagnostic(i, "terrain-projected placement before any generate_terrain"))
    return diags


@dataclass
class ActionOutcome:
    index: int
    kind: str
    executed: bool
    error: str | None = None
    instances_created: int = 0

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "executed": self.executed,
            "error": self.error,
            "instances_created": self.instances_created,
        }


@dataclass
class RunReport:
    outcomes: list[ActionOutcome] = field(default_factory=list)
    stages: list[dict] = field(default_factory=list)
    assumptions: list[str] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    end_flag: bool = False  # planner termination: all pending stages done

    @property
    def executed_count(self) -> int:
        return sum(1 for o in self.outcomes if o.executed)

    @property
    def failed_count(self) -> int:
        return sum(1 for o in self.outcomes if not o.executed)

    def all_executed(self) -> bool:
        return all(o.executed for o in self.outcomes)

    def to_dict(self) -> dict:
        return {
            "outcomes": [o.to_dict() for o in self.outcomes],
            "executed_count": self.executed_count,
            "failed_count": self.failed_count,
            "stages": list(self.stages),
            "assumptions": list(self.assumptions),
            "diagnostics": list(self.diagnostics),
            "end_flag": self.end_flag,
        }


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_") or "object"


def _next_index(scene: SceneGraph, slug: str) -> int:
    pattern = re.compile(re.escape(slug) + r"_(\d+)$")
    best = -1
    for inst in scene.instances:
        m = pattern.match(inst.id)
        if m:
            best = max(best, int(m.group(1)))
    return best + 1


@dataclass
class _PendingSource:
    asset_ref: str
    tags: set[str]


def execute_plan(
    plan: ActionPlan, registry: Registry, scene: SceneGraph | None = None
) -> tuple[SceneGraph, RunReport]:
    """Apply actions in order onto a fresh scene (or an existing one, for
    edits). Failing actions are recorded and skipped."""
    if scene is None:
        scene = SceneGraph(seed=plan.seed)
    report = RunReport()
    pending: dict[str, _PendingSource] = {}

    for i, action in enumerate(plan.actions):
        outcome = ActionOutcome(index=i, kind=action.kind, executed=False)
        try:
            if isinstance(action, GenerateTerrain):
                scene.terrain = generate_heightfield(action.params)
            elif isinstance(action, InvokeApi):
                _execute_invoke(action, registry, scene, pending, outcome)
            elif isinstance(action, ImportAsset):
                _execute_import(action, registry, scene, pending, outcome)
            elif isinstance(action, PlaceLayout):
                _execute_place(action, scene, pending, outcome)
            else:
                raise PlanParseError(f"unknown action type {type(action).__name__}")
            outcome.executed = True
        except Exception as e:  # isolation: one bad action never aborts the plan
            outcome.error = f"{type(e).__name__}: {e}"
        report.outcomes.append(outcome)
    return scene, report


def _execute_invoke(
    action: InvokeApi,
    registry: Registry,
    scene: SceneGraph,
    pending: dict[str, _PendingSource],
    outcome: ActionOutcome,
) -> None:
    desc = registry.descriptor(action.plugin)
    if desc is None:
        raise PlanParseError(f"plugin {action.plugin!r} is not registered")
    _, violations = validate_params(desc, action.values)
    if violations:
        raise PlanParseError(f"invalid params: {[v.to_dict() for v in violations]}")
    object_name = action.object_ref or action.plugin
    asset_ref = f"plugin:{action.plugin}"
    tags = {action.plugin, object_name}
    if action.layout_ref is not None:
        pending[action.layout_ref] = _PendingSource(asset_ref=asset_ref, tags=tags)
        return
    if action.count == 0:
        # parameterless effect (materials, weather): recorded, no geometry
        scene.metadata[f"invoke:{action.plugin}"] = json.dumps(action.values, sort_keys=True)
        return
    slug = _slug(object_name)
    start = _next_index(scene, slug)
    for k in range(action.count):
        inst = AssetInstance(id=f"{slug}_{start + k}", asset_ref=asset_ref, tags=set(tags))
        scene.add_instance(inst)
        outcome.instances_created += 1


def _execute_import(
    action: ImportAsset,
    registry: Registry,
    scene: SceneGraph,
    pending: dict[str, _PendingSource],
    outcome: ActionOutcome,
) -> None:
    asset = registry.asset(action.asset_id)
    if asset is None:
        raise PlanParseError(f"asset {action.asset_id!r} is not in the catalog")
    object_name = action.object_ref or asset.name
    asset_ref = f"asset:{action.asset_id}"
    # catalog tags stay in the registry; instance tags carry object identity
    # only, so relation anchors resolve by the planned object name
    tags = {action.asset_id, object_name}
    if action.layout_ref is not None:
        pending[action.layout_ref] = _PendingSource(asset_ref=asset_ref, tags=tags)
        return
    if action.transform is None:
        raise PlanParseError("import_asset needs a transform or a layout_ref")
    slug = _slug(object_name)
    idx = _next_index(scene, slug)
    inst = AssetInstance(id=f"{slug}_{idx}", asset_ref=asset_ref, transform=action.transform, tags=set(tags))
    scene.add_instance(inst)
    outcome.instances_created = 1


def _execute_place(
    action: PlaceLayout,
    scene: SceneGraph,
    pending: dict[str, _PendingSource],
    outcome: ActionOutcome,
) -> None:
    placement = generate(action.layout)
    if action.project:
        if scene.terrain is None:
            raise PlanParseError("terrain-projected placement but the scene has no terrain")
        placement = project_to_terrain(placement, scene.terrain)
    source = pending.get(action.object_ref)
    asset_ref = source.asset_ref if source else action.object_ref
    tags = (source.tags if source else set()) | {action.object_ref}
    slug = _slug(action.object_ref)
    start = _next_index(scene, slug)
    projected = bool(placement.meta.get("projected"))
    for k, tr in enumerate(placement.transforms):
        inst = AssetInstance(
            id=f"{slug}_{start + k}",
            asset_ref=asset_ref,
            transform=tr,
            tags=set(tags),
            projected=projected,
        )
        scene.add_instance(inst)
        outcome.instances_created += 1
