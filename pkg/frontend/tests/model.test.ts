import { describe, expect, it } from "vitest";

import type { PlanJson, ReportJson, SceneJson, SessionStatus } from "../src/api.js";
import { buildSessionView, parseAnswer, viewsEqual } from "../src/model.js";

const STATUS: SessionStatus = {
  id: "s0001",
  state: "done",
  instance_count: 2,
  has_terrain: true,
  pending_clarification: null,
  error: null,
  executed_count: 2,
  failed_count: 1,
};

const SCENE: SceneJson = {
  schema: "scene/1",
  seed: 42,
  metadata: {},
  regions: {},
  terrain: {
    size_x: 10,
    size_y: 10,
    resolution: 2,
    heights: [
      [0, 0],
      [0, 0],
    ],
    tags: [],
  },
  instances: [
    {
      id: "tree_0",
      asset_ref: "plugin:parametric_tree",
      transform: { position: [1, 2, 0], rotation: [0, 0, 0], scale: [1, 1, 1] },
      tags: ["tree"],
      projected: true,
    },
    {
      id: "lake_0",
      asset_ref: "asset:alpine_lake_01",
      transform: { position: [5, 5, 0], rotation: [0, 0, 0], scale: [1, 1, 1] },
      tags: ["lake"],
      projected: false,
    },
  ],
};

const PLAN: PlanJson = {
  schema: "plan/1",
  seed: 42,
  actions: [
    { kind: "generate_terrain", params: {} },
    { kind: "invoke_api", plugin: "parametric_tree", count: 1 },
    { kind: "import_asset", asset_id: "alpine_lake_01" },
  ],
};

const REPORT: ReportJson = {
  outcomes: [
    { index: 0, kind: "generate_terrain", executed: true, error: null, instances_created: 0 },
    { index: 1, kind: "invoke_api", executed: true, error: null, instances_created: 1 },
    { index: 2, kind: "import_asset", executed: false, error: "asset missing", instances_created: 0 },
  ],
  executed_count: 2,
  failed_count: 1,
  stages: [],
  assumptions: ["tree.variant: no value provided, assuming 0"],
  diagnostics: [],
  end_flag: true,
};

describe("buildSessionView", () => {
  it("counts instances from the scene payload, not the status", () => {
    const view = buildSessionView({ ...STATUS, instance_count: 999 }, SCENE, PLAN, REPORT);
    expect(view.instanceCount).toBe(2);
  });

  it("badge counts equal the report failures", () => {
    const view = buildSessionView(STATUS, SCENE, PLAN, REPORT);
    expect(view.actions).toHaveLength(3);
    expect(view.actions.filter((a) => !a.executed)).toHaveLength(REPORT.failed_count);
    expect(view.actions[2].error).toBe("asset missing");
    expect(view.failedCount).toBe(1);
  });

  it("labels actions readably", () => {
    const view = buildSessionView(STATUS, SCENE, PLAN, REPORT);
    expect(view.actions.map((a) => a.label)).toEqual([
      "generate terrain",
      "invoke parametric_tree x1",
      "import alpine_lake_01",
    ]);
  });

  it("carries clarification questions through untouched", () => {
    const status: SessionStatus = {
      ...STATUS,
      state: "awaiting_clarification",
      pending_clarification: { plugin: "procedural_house", missing: ["floors"], questions: ["How many floors?"] },
    };
    const view = buildSessionView(status, SCENE, null, null);
    expect(view.busy).toBe(true);
    expect(view.pendingQuestions?.missing).toEqual(["floors"]);
  });

  it("no plan yet means no badges", () => {
    const view = buildSessionView(STATUS, SCENE, null, null);
    expect(view.actions).toEqual([]);
    expect(view.executedCount).toBe(0);
  });

  it("rebuilding from the same payloads yields an identical view", () => {
    const a = buildSessionView(STATUS, SCENE, PLAN, REPORT);
    const b = buildSessionView(
      JSON.parse(JSON.stringify(STATUS)),
      JSON.parse(JSON.stringify(SCENE)),
      JSON.parse(JSON.stringify(PLAN)),
      JSON.parse(JSON.stringify(REPORT)),
    );
    expect(viewsEqual(a, b)).toBe(true);
  });
});

describe("parseAnswer", () => {
  it("parses numbers, booleans and strings", () => {
    expect(parseAnswer("2")).toBe(2);
    expect(parseAnswer("2.5")).toBe(2.5);
    expect(parseAnswer("true")).toBe(true);
    expect(parseAnswer("false")).toBe(false);
    expect(parseAnswer(" summer ")).toBe("summer");
    expect(parseAnswer("")).toBe("");
  });
});
