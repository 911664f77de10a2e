#!/usr/bin/env python3
"""Regenerate every replay cassette under transcripts/.

Each scenario drives the real pipeline with a scripted FIFO of agent
responses while a recorder captures (request hash, response) pairs. Run this
whenever prompt templates, registry texts, or the stage order change; the
frozen cassettes are what CI replays.

Usage: python tools/make_cassettes.py [--root <repo-root>]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from scenesmith.llm import BackendConfig, RecordingBackend, ScriptedBackend, Transcript
from scenesmith.planner import PipelineConfig, PipelineError, PromptToggles, run_pipeline
from scenesmith.registry import load_registry


def _config(seed: int, toggles: PromptToggles | None = None) -> PipelineConfig:
    return PipelineConfig(
        backend=BackendConfig(kind="scripted-mock"),
        registry_path=str(ROOT / "registry"),
        seed=seed,
        toggles=toggles or PromptToggles(),
    )


def record(name: str, query: str, queue: list[str], seed: int, scene=None, toggles=None, expect_error=False):
    registry = load_registry(ROOT / "registry")
    path = ROOT / "transcripts" / name
    path.parent.mkdir(parents=True, exist_ok=True)
    backend = RecordingBackend(ScriptedBackend(queue, model="default"), Transcript(), path)
    try:
        scene_out, plan, report = run_pipeline(
            query, _config(seed, toggles), scene=scene, registry=registry, backend=backend
        )
    except PipelineError as e:
        if not expect_error:
            raise
        print(f"  {name}: recorded (pipeline error as designed: {e})")
        return None
    executed = report.executed_count
    print(f"  {name}: {len(plan.actions)} actions, {executed} executed, {len(scene_out.instances)} instances")
    return scene_out


J = json.dumps

FOREST_QUEUE = [
    J({"objects": [
        {"name": "terrain", "modules": {"terrain": "rolling forest ground"}, "count": 1,
         "description": "rolling forest terrain with gentle relief"},
        {"name": "pine tree", "modules": {"vegetation": "pine trees"}, "count": 40,
         "description": "tall pine tree conifer"},
        {"name": "lake", "modules": {"water": "still lake"}, "count": 1,
         "description": "alpine lake water surface"},
    ]}),
    J({"values": {"size_x": 150.0, "size_y": 150.0, "resolution": 65, "base_elevation": 2.0,
                  "elevation_range": 10.0, "roughness": 0.5, "octaves": 4}}),
    J({"relations": [
        {"subject": "pine tree", "kind": "on", "anchor": "terrain", "params": {}},
        {"subject": "lake", "kind": "on", "anchor": "terrain", "params": {"count": 1}},
    ]}),
    J({"values": {"count": 40, "min_separation": 2.0}}),
    J({"values": {"count": 1, "min_separation": 0.5}}),
]

EDIT_QUEUE = [
    J({"objects": [{"name": "rock", "modules": {"assets": "granite boulders"}, "count": 10,
                    "description": "weathered granite boulder rocks"}]}),
    J({"relations": [{"subject": "rock", "kind": "near", "anchor": "lake",
                      "params": {"dist_min": 2.0, "dist_max": 9.0}}]}),
    J({"values": {"count": 10, "min_separation": 1.0}}),
]

CLARIFY_QUEUE = [
    J({"objects": [{"name": "house", "modules": {"buildings": "cabin"}, "count": 1,
                    "description": "procedural house cabin rectangular footprint gabled roof"}]}),
    J({"values": {"roof_style": "gabled", "footprint_x": 7.0}}),
    J({"relations": []}),
]

EVAL_CASES = {
    "eval/oak_hill.json": (
        "a lone oak tree on a small hill",
        [
            J({"objects": [
                {"name": "terrain", "modules": {"terrain": "small grassy hill"}, "count": 1,
                 "description": "small grassy hill terrain"},
                {"name": "oak tree", "modules": {"vegetation": "oak"}, "count": 1,
                 "description": "broadleaf oak tree"},
            ]}),
            J({"values": {"size_x": 60.0, "size_y": 60.0, "resolution": 33, "elevation_range": 6.0,
                          "roughness": 0.6, "octaves": 3}}),
            J({"relations": [{"subject": "oak tree", "kind": "on", "anchor": "terrain", "params": {"count": 1}}]}),
            J({"values": {"count": 1, "min_separation": 0.5}}),
        ],
    ),
    "eval/pine_single.json": (
        "a single pine tree",
        [
            J({"objects": [{"name": "pine tree", "modules": {"vegetation": "pine"}, "count": 1,
                            "description": "tall pine tree conifer"}]}),
            J({"relations": []}),
        ],
    ),
    "eval/wildflowers.json": (
        "a wildflower meadow patch",
        [
            J({"objects": [{"name": "wildflowers", "modules": {"vegetation": "ground cover"}, "count": 1,
                            "description": "wildflower patch ground cover meadow species"}]}),
            J({"values": {"density": 0.8, "species_mix": "meadow", "patch_radius": 6.0}}),
            J({"relations": []}),
        ],
    ),
    "eval/bench_fountain.json": (
        "a wooden bench by a stone fountain",
        [
            J({"objects": [
                {"name": "fountain", "modules": {"assets": "fountain"}, "count": 1,
                 "description": "stone park fountain"},
                {"name": "bench", "modules": {"assets": "bench"}, "count": 1,
                 "description": "wooden park bench"},
            ]}),
            J({"relations": [{"subject": "bench", "kind": "near", "anchor": "fountain",
                              "params": {"dist_min": 1.0, "dist_max": 3.0}}]}),
            J({"values": {"count": 1, "min_separation": 0.5}}),
        ],
    ),
    "eval/lake_hills.json": (
        "a small lake in rolling hills",
        [
            J({"objects": [
                {"name": "terrain", "modules": {"terrain": "rolling hills"}, "count": 1,
                 "description": "rolling hills terrain"},
                {"name": "lake", "modules": {"water": "lake"}, "count": 1,
                 "description": "alpine lake water surface"},
            ]}),
            J({"values": {"size_x": 80.0, "size_y": 80.0, "resolution": 33, "elevation_range": 8.0,
                          "roughness": 0.5}}),
            J({"relations": [{"subject": "lake", "kind": "on", "anchor": "terrain", "params": {"count": 1}}]}),
            J({"values": {"count": 1, "min_separation": 0.5}}),
        ],
    ),
    "eval/boulders3.json": (
        "three granite boulders",
        [
            J({"objects": [{"name": "boulder", "modules": {"assets": "rocks"}, "count": 3,
                            "description": "weathered granite boulder rocks"}]}),
            J({"relations": []}),
        ],
    ),
    "eval/snowy_ridge.json": (
        "a snowy mountain ridge",
        [
            J({"objects": [
                {"name": "terrain", "modules": {"terrain": "steep ridge"}, "count": 1,
                 "description": "steep mountain ridge terrain"},
                {"name": "snow", "modules": {"snow": "snow layer"}, "count": 0,
                 "description": "snow cover effect over the whole ridge"},
            ]}),
            J({"values": {"size_x": 120.0, "size_y": 120.0, "resolution": 33, "base_elevation": 1400.0,
                          "elevation_range": 60.0, "roughness": 0.8, "slope": 0.4, "octaves": 5}}),
            J({"values": {"coverage": 0.9, "melt_line_elevation": 1300.0}}),
            J({"relations": []}),
        ],
    ),
    "eval/cabin_meadow.json": (
        "a wooden cabin on a meadow",
        [
            J({"objects": [
                {"name": "terrain", "modules": {"terrain": "flat meadow"}, "count": 1,
                 "description": "flat grassy meadow terrain"},
                {"name": "cabin", "modules": {"buildings": "cabin"}, "count": 1,
                 "description": "procedural house cabin rectangular footprint gabled roof"},
            ]}),
            J({"values": {"size_x": 50.0, "size_y": 50.0, "resolution": 17}}),
            J({"values": {"roof_style": "gabled"}}),
            J({"relations": [{"subject": "cabin", "kind": "on", "anchor": "terrain", "params": {"count": 1}}]}),
            J({"values": {"count": 1, "min_separation": 1.0}}),
        ],
    ),
    "eval/bad_params.json": (
        "an impossible tree",
        [
            J({"objects": [{"name": "tree", "modules": {"vegetation": "tree"}, "count": 1,
                            "description": "parametric tree generator conifer broadleaf adjustable"}]}),
            J({"values": {"height": -5.0}}),
            J({"values": {"height": -5.0}}),
            J({"values": {"height": -5.0}}),
        ],
    ),
    "eval/lamp_row.json": (
        "exactly seven street lamps in a row",
        [
            J({"objects": [{"name": "street lamp", "modules": {"assets": "lamps"}, "count": 2,
                            "description": "cast iron street lamp"}]}),
            J({"relations": [{"subject": "street lamp", "kind": "along", "anchor": "row",
                              "params": {"path": [[0.0, 0.0], [10.0, 0.0]], "spacing": 5.0}}]}),
            J({"values": {"spacing": 5.0, "lateral_offset": 0.0, "align_to_tangent": True}}),
        ],
    ),
}


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--root", default=str(ROOT))
    parser.parse_args()

    print("golden cassettes:")
    forest_scene = record("golden_forest_lake.json", "a pine forest by a lake", list(FOREST_QUEUE), seed=42)
    record("golden_edit_rocks.json", "add 10 rocks near the lake", list(EDIT_QUEUE), seed=42, scene=forest_scene)
    record("clarify_house.json", "a small cabin, details open", list(CLARIFY_QUEUE), seed=42)

    print("eval cassettes:")
    for name, (query, queue) in EVAL_CASES.items():
        toggles = PromptToggles(examples=False) if name.endswith("wildflowers.json") else None
        record(name, query, list(queue), seed=42, toggles=toggles,
               expect_error=name.endswith("bad_params.json"))


if __name__ == "__main__":
    main()
