import { describe, expect, it } from "vitest";

import type { InstanceJson, SceneJson, TerrainJson } from "../src/api.js";
import {
  buildViewportScene,
  fitTransform,
  instanceWireframe,
  project,
  terrainWireframe,
} from "../src/viewport.js";

const FLAT_TERRAIN: TerrainJson = {
  size_x: 10,
  size_y: 10,
  resolution: 3,
  heights: [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ],
  tags: [],
};

function inst(x: number, y: number, z: number): InstanceJson {
  return {
    id: "i",
    asset_ref: "a",
    transform: { position: [x, y, z], rotation: [0, 0, 0], scale: [2, 2, 2] },
    tags: [],
    projected: false,
  };
}

describe("project", () => {
  it("is the documented isometric mapping", () => {
    const [sx, sy] = project(1, 0, 0);
    expect(sx).toBeCloseTo(Math.cos(Math.PI / 6), 12);
    expect(sy).toBeCloseTo(Math.sin(Math.PI / 6), 12);
  });

  it("raises points with z", () => {
    const [, flat] = project(3, 4, 0);
    const [, up] = project(3, 4, 5);
    expect(up).toBeLessThan(flat); // canvas y grows downward
  });

  it("x and y are symmetric about the vertical axis", () => {
    const [ax] = project(2, 0, 0);
    const [bx] = project(0, 2, 0);
    expect(ax).toBeCloseTo(-bx, 12);
  });
});

describe("terrainWireframe", () => {
  it("draws every grid edge at full resolution", () => {
    const segments = terrainWireframe(FLAT_TERRAIN, 24);
    // 3x3 grid: 3 rows x 2 cols horizontal + 3 cols x 2 rows vertical
    expect(segments).toHaveLength(12);
  });

  it("decimates large grids", () => {
    const res = 129;
    const heights = Array.from({ length: res }, () => Array.from({ length: res }, () => 0));
    const big: TerrainJson = { size_x: 100, size_y: 100, resolution: res, heights, tags: [] };
    const segments = terrainWireframe(big, 24);
    expect(segments.length).toBeLessThan(2 * 33 * 33);
    expect(segments.length).toBeGreaterThan(0);
  });
});

describe("instanceWireframe", () => {
  it("emits 12 box edges", () => {
    expect(instanceWireframe(inst(0, 0, 0))).toHaveLength(12);
  });

  it("box spans scale around the position", () => {
    const segments = instanceWireframe(inst(10, 10, 5));
    const xs = segments.flatMap(([x1, , x2]) => [x1, x2]);
    expect(Math.max(...xs) - Math.min(...xs)).toBeGreaterThan(0);
  });
});

describe("buildViewportScene", () => {
  it("one wireframe box per instance", () => {
    const scene: SceneJson = {
      schema: "scene/1",
      seed: 0,
      metadata: {},
      regions: {},
      terrain: FLAT_TERRAIN,
      instances: [inst(1, 1, 0), inst(5, 5, 0), inst(9, 9, 0)],
    };
    const vp = buildViewportScene(scene);
    expect(vp.instances).toHaveLength(3 * 12);
    expect(vp.terrain.length).toBeGreaterThan(0);
  });

  it("empty scene still yields sane bounds", () => {
    const vp = buildViewportScene({
      schema: "scene/1",
      seed: 0,
      metadata: {},
      regions: {},
      terrain: null,
      instances: [],
    });
    expect(vp.bounds.maxX).toBeGreaterThan(vp.bounds.minX);
  });
});

describe("fitTransform", () => {
  it("maps bounds into the canvas with the margin respected", () => {
    const to = fitTransform({ minX: -10, minY: -5, maxX: 10, maxY: 5 }, 800, 600, 16);
    const corners = [
      to(-10, -5),
      to(10, 5),
      to(-10, 5),
      to(10, -5),
    ];
    for (const [x, y] of corners) {
      expect(x).toBeGreaterThanOrEqual(16 - 1e-9);
      expect(x).toBeLessThanOrEqual(800 - 16 + 1e-9);
      expect(y).toBeGreaterThanOrEqual(16 - 1e-9);
      expect(y).toBeLessThanOrEqual(600 - 16 + 1e-9);
    }
  });
});
