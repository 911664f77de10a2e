"""Executability / success metrics and the dataset-driven evaluation harness.

ER@1 is the percentage of cases whose every proposed action executed; SR@1
is the percentage of executed cases whose programmatic checks all pass. The
success denominator is the executed count, not the total, so a case must
first run before it can be judged correct. Correctness here is programmatic
(declared checks per case), standing in for human judgment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .actions import RunReport
from .errors import SceneSmithError
from .jsonutil import canonical_bytes
from .planner import PipelineConfig, PipelineError, PromptToggles, run_pipeline
from .scene import Region, SceneGraph

EVAL_SCHEMA = "eval/1"


class EmptyOutcomes(SceneSmithError):
    code = "empty_outcomes"


class DatasetError(SceneSmithError):
    code = "dataset_error"


@dataclass
class EvalCase:
    id: str
    description: str
    checks: list[dict[str, Any]]
    cassette: str | None = None  # per-case transcript for replay runs
    toggles: PromptToggles | None = None

    def __post_init__(self) -> None:
        if not self.checks:
            raise DatasetError(f"case {self.id!r} has no checks")


@dataclass
class CaseOutcome:
    case_id: str
    executed: bool
    correct: bool
    detail: str = ""

    def __post_init__(self) -> None:
        if self.correct and not self.executed:
            raise ValueError("correct implies executed")

    def to_dict(self) -> dict:
        return {"case_id": self.case_id, "executed": self.executed, "correct": self.correct, "detail": self.detail}


@dataclass
class EvalReport:
    er_at_1: float
    sr_at_1: float
    outcomes: list[CaseOutcome] = field(default_factory=list)
    sr_undefined: bool = False  # nothing executed; sr reported as 0 by convention

    def to_dict(self) -> dict:
        return {
            "er_at_1": self.er_at_1,
            "sr_at_1": self.sr_at_1,
            "sr_undefined": self.sr_undefined,
            "outcomes": [o.to_dict() for o in self.outcomes],
        }

    def to_markdown(self) -> str:
        lines = [
            "# Evaluation report",
            "",
            f"- ER@1: {self.er_at_1:.2f}",
            f"- SR@1: {self.sr_at_1:.2f}" + (" (no executed cases)" if self.sr_undefined else ""),
            "",
            "| case | executed | correct | detail |",
            "|------|----------|---------|--------|",
        ]
        for o in self.outcomes:
            lines.append(f"| {o.case_id} | {o.executed} | {o.correct} | {o.detail} |")
        return "\n".join(lines) + "\n"


def compute_metrics(outcomes: list[CaseOutcome]) -> tuple[float, float, bool]:
    """(ER@1, SR@1, sr_undefined). ER = 100*executed/total,
    SR = 100*correct/executed, guarded when nothing executed."""
    if not outcomes:
        raise EmptyOutcomes("cannot compute metrics over zero outcomes")
    total = len(outcomes)
    executed = sum(1 for o in outcomes if o.executed)
    correct = sum(1 for o in outcomes if o.correct)
    er = 100.0 * executed / total
    if executed == 0:
        return er, 0.0, True
    return er, 100.0 * correct / executed, False


# ---------------------------------------------------------------------------
# Programmatic checks

def _check_action_present(check: dict, scene: SceneGraph, report: RunReport) -> str | None:
    wanted = check["action"]
    for o in report.outcomes:
        if o.kind == wanted and o.executed:
            return None
    return f"no executed action of kind {wanted!r}"


def _matching_instances(scene: SceneGraph, tag: str | None):
    if tag is None:
        return list(scene.instances)
    return scene.find(tag)


def _check_instance_count(check: dict, scene: SceneGraph, report: RunReport) -> str | None:
    instances = _matching_instances(scene, check.get("tag"))
    n = len(instances)
    lo = check.get("min", 0)
    hi = check.get("max")
    if n < lo:
        return f"instance count {n} below min {lo}"
    if hi is not None and n > hi:
        return f"instance count {n} above max {hi}"
    return None


def _check_instances_in_region(check: dict, scene: SceneGraph, report: RunReport) -> str | None:
    region = Region.from_dict(check["region"])
    instances = _matching_instances(scene, check.get("tag"))
    outliers = [i.id for i in instances if not region.contains(i.transform.position.x, i.transform.position.y)]
    if outliers:
        return f"{len(outliers)} instance(s) outside the region: {outliers[:3]}"
    return None


def _check_metadata_present(check: dict, scene: SceneGraph, report: RunReport) -> str | None:
    key = check["key"]
    if key not in scene.metadata:
        return f"metadata key {key!r} missing"
    return None


CHECKS: dict[str, Callable[[dict, SceneGraph, RunReport], str | None]] = {
    "action_present": _check_action_present,
    "instance_count": _check_instance_count,
    "instances_in_region": _check_instances_in_region,
    "metadata_present": _check_metadata_present,
}


def judge_case(case: EvalCase, scene: SceneGraph | None, report: RunReport | None) -> CaseOutcome:
    """executed := every plan action executed; correct := executed and every
    declared check passes."""
    if scene is None or report is None:
        return CaseOutcome(case.id, executed=False, correct=False, detail="pipeline failed before execution")
    if not report.outcomes or not report.all_executed():
        failed = [o.kind for o in (report.outcomes or []) if not o.executed]
        return CaseOutcome(case.id, executed=False, correct=False, detail=f"failed actions: {failed}")
    for check in case.checks:
        kind = check.get("kind")
        fn = CHECKS.get(kind)
        if fn is None:
            return CaseOutcome(case.id, executed=True, correct=False, detail=f"unknown check kind {kind!r}")
        problem = fn(check, scene, report)
        if problem is not None:
            return CaseOutcome(case.id, executed=True, correct=False, detail=problem)
    return CaseOutcome(case.id, executed=True, correct=True)


def load_dataset(path: str | Path) -> list[EvalCase]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetError(f"cannot load dataset {path}: {e}") from e
    if data.get("schema") != EVAL_SCHEMA:
        raise DatasetError(f"unsupported dataset schema {data.get('schema')!r}")
    cases = data.get("cases", [])
    if not cases:
        raise DatasetError("dataset has no cases")
    out = []
    for c in cases:
        toggles = PromptToggles.from_dict(c["prompt_toggles"]) if c.get("prompt_toggles") else None
        out.append(
            EvalCase(
                id=c["id"],
                description=c["description"],
                checks=list(c["checks"]),
                cassette=c.get("cassette"),
                toggles=toggles,
            )
        )
    return out


def run_suite(dataset_path: str | Path, config: PipelineConfig) -> EvalReport:
    """Run the pipeline once per case and aggregate outcomes.

    Cases may name their own cassette (resolved relative to the dataset file)
    and may override prompt toggles, which is how the prompt-component
    ablation harness is driven.
    """
    dataset_path = Path(dataset_path)
    cases = load_dataset(dataset_path)
    outcomes: list[CaseOutcome] = []
    for case in cases:
        case_config = config
        if case.cassette is not None:
            cassette = str((dataset_path.parent / case.cassette).resolve())
            backend = _replace_cassette(config.backend, cassette)
            case_config = PipelineConfig(
                backend=backend,
                registry_path=config.registry_path,
                seed=config.seed,
                toggles=case.toggles or config.toggles,
                embedder_kind=config.embedder_kind,
                embedding_dim=config.embedding_dim,
                embedder_endpoint=config.embedder_endpoint,
            )
        elif case.toggles is not None:
            case_config = PipelineConfig(
                backend=config.backend,
                registry_path=config.registry_path,
                seed=config.seed,
                toggles=case.toggles,
                embedder_kind=config.embedder_kind,
                embedding_dim=config.embedding_dim,
                embedder_endpoint=config.embedder_endpoint,
            )
        try:
            scene, _plan, report = run_pipeline(case.description, case_config)
        except PipelineError as e:
            outcomes.append(CaseOutcome(case.id, executed=False, correct=False, detail=str(e)))
            continue
        outcomes.append(judge_case(case, scene, report))
    er, sr, undefined = compute_metrics(outcomes)
    return EvalReport(er_at_1=er, sr_at_1=sr, outcomes=outcomes, sr_undefined=undefined)


def _replace_cassette(backend, cassette: str):
    from .llm import BackendConfig

    return BackendConfig(
        kind=backend.kind,
        model=backend.model,
        temperature=backend.temperature,
        endpoint=backend.endpoint,
        api_key_env=backend.api_key_env,
        cassette_path=cassette,
        record=backend.record,
        timeout=backend.timeout,
    )


def save_report(report: EvalReport, json_path: str | Path, markdown_path: str | Path | None = None) -> None:
    Path(json_path).write_bytes(canonical_bytes(report.to_dict()))
    if markdown_path is not None:
        Path(markdown_path).write_text(report.to_markdown(), encoding="utf-8")
