"""Operator entry point.

All randomness flows from --seed; there are no hidden entropy sources, so a
generate run with a replay cassette is bit-reproducible. Exit code 0 means
the pipeline ran and every planned action executed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import SceneSmithError
from .evaluation import run_suite, save_report
from .jsonutil import canonical_bytes
from .llm import BackendConfig
from .planner import ClarificationRequest, PipelineConfig, PipelineError, PromptToggles, run_pipeline
from .registry import DEFAULT_EMBEDDING_DIM, load_registry, registry_to_dict
from .retrieval import MockEmbedder
from .actions import serialize_plan
from .scene import export_scene, export_scene_json, import_scene_json


def _backend_config(args: argparse.Namespace) -> BackendConfig:
    return BackendConfig(
        kind=args.backend,
        model=getattr(args, "model", "default") or "default",
        cassette_path=getattr(args, "cassette", None),
        endpoint=getattr(args, "endpoint", None),
        api_key_env=getattr(args, "api_key_env", None),
        record=bool(getattr(args, "record", False)),
    )


def _toggles(args: argparse.Namespace) -> PromptToggles:
    return PromptToggles(
        role=not getattr(args, "disable_role", False),
        task=not getattr(args, "disable_task", False),
        document=not getattr(args, "disable_document", False),
        format=not getattr(args, "disable_format", False),
        examples=not getattr(args, "disable_examples", False),
    )


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_file(args.config)
    return PipelineConfig(
        backend=_backend_config(args),
        registry_path=args.registry,
        seed=args.seed,
        toggles=_toggles(args),
    )


def _write_outputs(out_dir: Path, scene, plan, report) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scene.json").write_bytes(export_scene_json(scene))
    (out_dir / "plan.json").write_bytes(serialize_plan(plan))
    (out_dir / "scene.obj").write_bytes(export_scene(scene, "obj"))
    (out_dir / "report.json").write_bytes(canonical_bytes(report.to_dict()))


def _stdin_clarifier(request: ClarificationRequest) -> dict:
    print(f"clarification needed for {request.plugin}:", file=sys.stderr)
    answers = {}
    for name, question in zip(request.missing, request.questions):
        print(f"  {question}", file=sys.stderr)
        line = sys.stdin.readline()
        if not line:
            break
        line = line.strip()
        try:
            answers[name] = json.loads(line)
        except json.JSONDecodeError:
            answers[name] = line
    return answers


def cmd_generate(args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    scene, plan, report = run_pipeline(args.prompt, config)
    _write_outputs(Path(args.out), scene, plan, report)
    print(f"wrote scene with {len(scene.instances)} instances to {args.out}")
    return 0 if report.all_executed() else 1


def cmd_edit(args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    scene = import_scene_json(Path(args.scene).read_bytes())
    clarifier = None if args.assume_defaults else _stdin_clarifier
    scene, plan, report = run_pipeline(args.prompt, config, scene=scene, clarifier=clarifier)
    out_dir = Path(args.out) if args.out else Path(args.scene).parent
    _write_outputs(out_dir, scene, plan, report)
    print(f"scene now has {len(scene.instances)} instances; outputs in {out_dir}")
    return 0 if report.all_executed() else 1


def cmd_eval_run(args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    report = run_suite(args.dataset, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_report(report, out, args.markdown)
    print(f"ER@1 {report.er_at_1:.2f}  SR@1 {report.sr_at_1:.2f}  ({len(report.outcomes)} cases)")
    return 0


def cmd_registry_validate(args: argparse.Namespace) -> int:
    registry = load_registry(Path(args.dir))
    print(f"ok: {len(registry.descriptors)} plugins, {len(registry.assets)} assets")
    return 0


def cmd_registry_index(args: argparse.Namespace) -> int:
    registry = load_registry(Path(args.dir), args.dim)
    embedder = MockEmbedder(args.dim)
    lines = []
    for aid, asset in sorted(registry.assets.items()):
        if asset.embedding is None:
            asset.embedding = embedder.embed_text(asset.text())
        lines.append(json.dumps(asset.to_dict(embed_as=args.encoding), sort_keys=True))
    out = Path(args.out) if args.out else Path(args.dir) / "assets_indexed.jsonl"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"indexed {len(lines)} assets -> {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(_pipeline_config(args), data_dir=args.data_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    scene = import_scene_json(Path(args.scene).read_bytes())
    data = export_scene(scene, args.format)
    if args.out:
        Path(args.out).write_bytes(data)
        print(f"wrote {args.out}")
    else:
        sys.stdout.buffer.write(data)
    return 0


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", default="replay", choices=["replay", "scripted-mock", "http"])
    p.add_argument("--cassette", help="transcript file (or directory of transcripts) for replay/record")
    p.add_argument("--model", default="default")
    p.add_argument("--endpoint", help="chat-completions endpoint for the http backend")
    p.add_argument("--api-key-env", dest="api_key_env", help="environment variable holding the API key")
    p.add_argument("--record", action="store_true", help="record http exchanges into the cassette")
    p.add_argument("--registry", default="registry", help="registry directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="pipeline config JSON (overrides the flags above)")
    for comp in ("role", "task", "document", "format", "examples"):
        p.add_argument(f"--disable-{comp}", action="store_true", dest=f"disable_{comp}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenesmith", description="Headless procedural scene synthesis.")
    parser.add_argument("--version", action="version", version=f"scenesmith {__version__}")
    parser.add_argument("--json-errors", action="store_true", help="machine-parsable error JSON on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="turn a prompt into scene/plan/obj/report files")
    p.add_argument("--prompt", required=True)
    p.add_argument("--out", required=True)
    _add_backend_flags(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("edit", help="apply an instruction to an existing scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--out")
    p.add_argument("--assume-defaults", action="store_true", help="never ask; fall back on feasible values")
    _add_backend_flags(p)
    p.set_defaults(fn=cmd_edit)

    p_eval = sub.add_parser("eval", help="evaluation harness")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)
    p = eval_sub.add_parser("run", help="run a dataset and write the metric report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--markdown")
    _add_backend_flags(p)
    p.set_defaults(fn=cmd_eval_run)

    p_reg = sub.add_parser("registry", help="registry tools")
    reg_sub = p_reg.add_subparsers(dest="registry_command", required=True)
    p = reg_sub.add_parser("validate", help="load and validate a registry directory")
    p.add_argument("dir")
    p.set_defaults(fn=cmd_registry_validate)
    p = reg_sub.add_parser("index", help="embed the asset catalog and write an indexed JSONL")
    p.add_argument("dir")
    p.add_argument("--out")
    p.add_argument("--dim", type=int, default=DEFAULT_EMBEDDING_DIM)
    p.add_argument("--encoding", default="floats", choices=["floats", "b64"])
    p.set_defaults(fn=cmd_registry_index)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--ui-dir", dest="ui_dir")
    _add_backend_flags(p)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("export", help="re-export a scene file")
    p.add_argument("--scene", required=True)
    p.add_argument("--format", default="obj", choices=["obj", "scene-json"])
    p.add_argument("--out")
    p.set_defaults(fn=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as e:
        _report_error(args, e.payload() | {"stage": e.stage, "attempts": e.attempts})
        return 1
    except SceneSmithError as e:
        _report_error(args, e.payload())
        return 1
    except OSError as e:
        _report_error(args, {"error": "io_error", "message": str(e)})
        return 1


def _report_error(args: argparse.Namespace, payload: dict) -> None:
    if getattr(args, "json_errors", False):
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    else:
        print(f"error: {payload.get('message')}", file=sys.stderr)


if __name__ == "__main__":
    raise SystemExit(main())
