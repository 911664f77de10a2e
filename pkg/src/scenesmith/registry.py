"""Plugin descriptors, parameter validation, and the static-asset catalog.

Descriptors are the machine-readable API documentation the planner prompts
with: name, capability, description, parameter specs (kind, range, options,
default, unit) and advisory constraint strings. One JSON file per plugin,
``"schema": "plugin/1"``. The asset catalog is JSON-lines; embeddings are
either float arrays, base64-packed float32, or derived from name/tags by the
configured embedder at index time.

Out-of-range values are rejected, not clamped: silent clamping would hide
prompt defects and corrupt success-rate semantics downstream.
"""

from __future__ import annotations

import base64
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import SceneSmithError

PLUGIN_SCHEMA = "plugin/1"
DEFAULT_EMBEDDING_DIM = 768

# Closed capability vocabulary. Dynamic rows exist in the vocabulary even
# though no dynamic plugin ships in the sample registry.
CAPABILITIES = frozenset(
    {
        "terrain",
        "weather",
        "vegetation",
        "buildings",
        "blocks",
        "cities",
        "people",
        "water",
        "snow",
        "assets-placement",
        "materials",
        "dynamic-people",
        "dynamic-vegetation",
        "dynamic-vehicles",
    }
)

PARAM_KINDS = ("float", "int", "bool", "enum", "string")


class ParseError(SceneSmithError):
    code = "parse_error"

    def __init__(self, path: str, message: str, line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")


class SchemaError(SceneSmithError):
    code = "schema_error"

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class DuplicateName(SceneSmithError):
    code = "duplicate_name"


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    description: str = ""
    range: tuple[float, float] | None = None
    options: tuple[str, ...] | None = None
    default: Any = None
    unit: str | None = None

    @property
    def required(self) -> bool:
        """Params without a default must be supplied (or clarified)."""
        return self.default is None

    def validate_spec(self) -> None:
        if self.kind not in PARAM_KINDS:
            raise SchemaError("kind", f"unknown param kind {self.kind!r}")
        if self.kind in ("float", "int"):
            if self.range is None:
                raise SchemaError("range", f"numeric param {self.name!r} needs a range")
            lo, hi = self.range
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise SchemaError("range", f"bad range for {self.name!r}")
        if self.kind == "enum" and not self.options:
            raise SchemaError("options", f"enum param {self.name!r} needs options")
        if self.default is not None:
            problem = check_value(self, self.default)
            if problem is not None:
                raise SchemaError("default", f"{self.name!r}: {problem}")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "kind": self.kind, "description": self.description}
        if self.range is not None:
            d["range"] = [self.range[0], self.range[1]]
        if self.options is not None:
            d["options"] = list(self.options)
        if self.default is not None:
            d["default"] = self.default
        if self.unit is not None:
            d["unit"] = self.unit
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ParamSpec":
        rng = d.get("range")
        opts = d.get("options")
        spec = cls(
            name=d["name"],
            kind=d["kind"],
            description=d.get("description", ""),
            range=(float(rng[0]), float(rng[1])) if rng is not None else None,
            options=tuple(opts) if opts is not None else None,
            default=d.get("default"),
            unit=d.get("unit"),
        )
        spec.validate_spec()
        return spec


@dataclass(frozen=True)
class PluginDescriptor:
    name: str
    capability: str
    description: str
    params: tuple[ParamSpec, ...] = ()
    constraints: tuple[str, ...] = ()

    def validate_spec(self) -> None:
        if not self.name:
            raise SchemaError("name", "plugin name must be non-empty")
        if self.capability not in CAPABILITIES:
            raise SchemaError("capability", f"unknown capability {self.capability!r}")
        seen = set()
        for p in self.params:
            if p.name in seen:
                raise SchemaError("params", f"duplicate param name {p.name!r}")
            seen.add(p.name)
            p.validate_spec()

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def to_dict(self) -> dict:
        return {
            "schema": PLUGIN_SCHEMA,
            "name": self.name,
            "capability": self.capability,
            "description": self.description,
            "params": [p.to_dict() for p in self.params],
            "constraints": list(self.constraints),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PluginDescriptor":
        if d.get("schema") != PLUGIN_SCHEMA:
            raise SchemaError("schema", f"unsupported plugin schema {d.get('schema')!r}")
        desc = cls(
            name=d.get("name", ""),
            capability=d.get("capability", ""),
            description=d.get("description", ""),
            params=tuple(ParamSpec.from_dict(p) for p in d.get("params", [])),
            constraints=tuple(d.get("constraints", [])),
        )
        desc.validate_spec()
        return desc


@dataclass
class AssetRecord:
    id: str
    name: str
    category: str = ""
    tags: tuple[str, ...] = ()
    embedding: np.ndarray | None = None
    preview_path: str | None = None

    def text(self) -> str:
        """Text the mock embedder derives the asset vector from."""
        parts = [self.name, self.category, *self.tags]
        return " ".join(p for p in parts if p)

    def to_dict(self, embed_as: str = "floats") -> dict:
        d: dict[str, Any] = {
            "id": self.id,
            "name": self.name,
            "category": self.category,
            "tags": list(self.tags),
        }
        if self.preview_path:
            d["preview_path"] = self.preview_path
        if self.embedding is not None:
            if embed_as == "floats":
                d["embedding"] = [float(v) for v in self.embedding]
            else:
                packed = struct.pack(f"<{len(self.embedding)}f", *map(float, self.embedding))
                d["embedding_b64"] = base64.b64encode(packed).decode("ascii")
        return d


@dataclass(frozen=True)
class ParamAssignment:
    plugin_name: str
    values: Mapping[str, Any]

    def to_dict(self) -> dict:
        return {"plugin_name": self.plugin_name, "values": dict(self.values)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ParamAssignment":
        return cls(plugin_name=d["plugin_name"], values=dict(d["values"]))


@dataclass(frozen=True)
class Violation:
    param: str
    reason: str

    def to_dict(self) -> dict:
        return {"param": self.param, "reason": self.reason}


@dataclass
class Registry:
    descriptors: dict[str, PluginDescriptor] = field(default_factory=dict)
    assets: dict[str, AssetRecord] = field(default_factory=dict)

    def descriptor(self, name: str) -> PluginDescriptor | None:
        return self.descriptors.get(name)

    def asset(self, asset_id: str) -> AssetRecord | None:
        return self.assets.get(asset_id)


def levenshtein(a: str, b: str) -> int:
    """Plain edit distance, used for nearest-option hints on enum typos."""
    if a == b:
        return 0
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def nearest_option(value: str, options: Iterable[str]) -> str:
    return min(options, key=lambda opt: (levenshtein(value.lower(), opt.lower()), opt))


def check_value(spec: ParamSpec, value: Any) -> str | None:
    """None if the value satisfies the spec, else a human-readable reason."""
    if spec.kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return f"expected a number, got {type(value).__name__}"
        v = float(value)
        if not math.isfinite(v):
            return "must be finite"
        lo, hi = spec.range  # type: ignore[misc]
        if v < lo:
            return f"below min {lo:g}"
        if v > hi:
            return f"above max {hi:g}"
        return None
    if spec.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            else:
                return f"expected an integer, got {type(value).__name__}"
        lo, hi = spec.range  # type: ignore[misc]
        if value < lo:
            return f"below min {lo:g}"
        if value > hi:
            return f"above max {hi:g}"
        return None
    if spec.kind == "bool":
        if not isinstance(value, bool):
            return f"expected a boolean, got {type(value).__name__}"
        return None
    if spec.kind == "enum":
        if not isinstance(value, str):
            return f"expected one of {list(spec.options or ())}"
        if value not in (spec.options or ()):
            hint = nearest_option(value, spec.options or ())
            return f"not one of {list(spec.options or ())}; did you mean {hint!r}?"
        return None
    if spec.kind == "string":
        if not isinstance(value, str):
            return f"expected a string, got {type(value).__name__}"
        return None
    return f"unknown param kind {spec.kind!r}"


def _coerce(spec: ParamSpec, value: Any) -> Any:
    if spec.kind == "float" and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if spec.kind == "int" and isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def validate_params(
    spec: PluginDescriptor, values: Mapping[str, Any]
) -> tuple[ParamAssignment | None, list[Violation]]:
    """Check every provided value against its ParamSpec.

    Unknown names are rejected. Returns (assignment, []) when all values
    pass, else (None, violations). Never raises on bad input.
    """
    violations: list[Violation] = []
    accepted: dict[str, Any] = {}
    for name, value in values.items():
        pspec = spec.param(name)
        if pspec is None:
            violations.append(Violation(name, "unknown parameter"))
            continue
        problem = check_value(pspec, value)
        if problem is not None:
            violations.append(Violation(name, problem))
        else:
            accepted[name] = _coerce(pspec, value)
    if violations:
        return None, violations
    return ParamAssignment(spec.name, accepted), []


def missing_required(spec: PluginDescriptor, values: Mapping[str, Any]) -> list[ParamSpec]:
    return [p for p in spec.params if p.required and p.name not in values]


def fill_defaults(spec: PluginDescriptor, partial: Mapping[str, Any]) -> ParamAssignment:
    """Complete a valid partial assignment with descriptor defaults.

    Params that have no default (required ones) are left to the caller:
    they trigger clarification upstream. The result passes validate_params.
    """
    assignment, violations = validate_params(spec, partial)
    if assignment is None:
        raise ValueError(f"partial assignment invalid: {[v.to_dict() for v in violations]}")
    values = dict(assignment.values)
    for p in spec.params:
        if p.name not in values and p.default is not None:
            values[p.name] = _coerce(p, p.default)
    return ParamAssignment(spec.name, values)


def fallback_value(spec: ParamSpec) -> Any:
    """Feasible stand-in for a required param in non-interactive runs:
    range midpoint, first option, false, or empty string."""
    if spec.kind == "float":
        lo, hi = spec.range  # type: ignore[misc]
        return (lo + hi) / 2.0
    if spec.kind == "int":
        lo, hi = spec.range  # type: ignore[misc]
        return int((lo + hi) // 2)
    if spec.kind == "bool":
        return False
    if spec.kind == "enum":
        return (spec.options or ("",))[0]
    return ""


def load_descriptor_file(path: Path) -> PluginDescriptor:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(str(path), f"cannot read: {e}") from e
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.msg, line=e.lineno) from e
    return PluginDescriptor.from_dict(d)


def _decode_embedding(rec: Mapping[str, Any]) -> np.ndarray | None:
    if "embedding" in rec:
        return np.asarray(rec["embedding"], dtype=np.float64)
    if "embedding_b64" in rec:
        raw = base64.b64decode(rec["embedding_b64"])
        vec = np.asarray(struct.unpack(f"<{len(raw) // 4}f", raw), dtype=np.float64)
        # float32 packing loses a little precision; restore exact unit norm
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise SchemaError("embedding", "zero embedding vector")
        return vec / norm
    return None


def load_asset_catalog(path: Path, embedding_dim: int = DEFAULT_EMBEDDING_DIM) -> dict[str, AssetRecord]:
    assets: dict[str, AssetRecord] = {}
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ParseError(str(path), f"cannot read: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(str(path), e.msg, line=lineno) from e
        asset_id = rec.get("id")
        if not asset_id:
            raise SchemaError("id", f"{path}:{lineno}: asset id missing")
        if asset_id in assets:
            raise DuplicateName(f"asset id {asset_id!r} appears twice in {path}")
        emb = _decode_embedding(rec)
        if emb is not None:
            if len(emb) != embedding_dim:
                raise SchemaError("embedding", f"asset {asset_id!r}: dimension {len(emb)} != {embedding_dim}")
            norm = float(np.linalg.norm(emb))
            if abs(norm - 1.0) > 1e-6:
                raise SchemaError("embedding", f"asset {asset_id!r}: embedding norm {norm} not 1")
        assets[asset_id] = AssetRecord(
            id=asset_id,
            name=rec.get("name", asset_id),
            category=rec.get("category", ""),
            tags=tuple(rec.get("tags", [])),
            embedding=emb,
            preview_path=rec.get("preview_path"),
        )
    return assets


def load_registry(root: Path, embedding_dim: int = DEFAULT_EMBEDDING_DIM) -> Registry:
    """Load descriptors from <root>/plugins/*.json and the optional asset
    catalog <root>/assets.jsonl. File order does not matter."""
    root = Path(root)
    plugins_dir = root / "plugins"
    registry = Registry()
    if plugins_dir.is_dir():
        for path in sorted(plugins_dir.glob("*.json")):
            desc = load_descriptor_file(path)
            if desc.name in registry.descriptors:
                raise DuplicateName(f"plugin {desc.name!r} defined more than once")
            registry.descriptors[desc.name] = desc
    catalog = root / "assets.jsonl"
    if catalog.is_file():
        registry.assets = load_asset_catalog(catalog, embedding_dim)
    return registry


def registry_to_dict(registry: Registry) -> dict:
    return {
        "descriptors": {name: d.to_dict() for name, d in sorted(registry.descriptors.items())},
        "assets": {aid: a.to_dict() for aid, a in sorted(registry.assets.items())},
    }
