/**
 * Minimal 3D viewport: isometric projection of instance proxy boxes and the
 * terrain wireframe, no external renderer. The projection math is pure so
 * tests can pin it without a canvas.
 */

import type { SceneJson, TerrainJson, InstanceJson } from "./api.js";

export type Segment = [number, number, number, number]; // x1, y1, x2, y2 in world-projected space

const COS30 = Math.cos(Math.PI / 6);
const SIN30 = Math.sin(Math.PI / 6);
const Z_SCALE = 1.0;

/**
 * Isometric projection: world (x, y, z) -> screen-plane (sx, sy) with canvas
 * y growing downward. +x runs down-right, +y down-left, +z straight up.
 */
export function project(x: number, y: number, z: number): [number, number] {
  const sx = (x - y) * COS30;
  const sy = (x + y) * SIN30 - z * Z_SCALE;
  return [sx, sy];
}

function pushLine(out: Segment[], a: [number, number, number], b: [number, number, number]): void {
  const [x1, y1] = project(a[0], a[1], a[2]);
  const [x2, y2] = project(b[0], b[1], b[2]);
  out.push([x1, y1, x2, y2]);
}

/** Grid wireframe decimated to at most `maxLines` rows/columns per axis. */
export function terrainWireframe(terrain: TerrainJson, maxLines = 24): Segment[] {
  const res = terrain.resolution;
  const step = Math.max(1, Math.ceil((res - 1) / maxLines));
  const dx = terrain.size_x / (res - 1);
  const dy = terrain.size_y / (res - 1);
  const at = (ix: number, iy: number): [number, number, number] => [
    ix * dx,
    iy * dy,
    terrain.heights[iy][ix],
  ];
  const segments: Segment[] = [];
  for (let iy = 0; iy < res; iy += step) {
    for (let ix = 0; ix + step < res; ix += step) {
      pushLine(segments, at(ix, iy), at(Math.min(ix + step, res - 1), iy));
    }
  }
  for (let ix = 0; ix < res; ix += step) {
    for (let iy = 0; iy + step < res; iy += step) {
      pushLine(segments, at(ix, iy), at(ix, Math.min(iy + step, res - 1)));
    }
  }
  return segments;
}

const BOX_EDGES: Array<[number, number]> = [
  [0, 1], [1, 3], [3, 2], [2, 0],
  [4, 5], [5, 7], [7, 6], [6, 4],
  [0, 4], [1, 5], [2, 6], [3, 7],
];

/** Twelve projected edges of the instance's axis-aligned proxy box. */
export function instanceWireframe(inst: InstanceJson): Segment[] {
  const [px, py, pz] = inst.transform.position;
  const [sx, sy, sz] = inst.transform.scale;
  const corners: Array<[number, number, number]> = [];
  for (const dx of [-sx / 2, sx / 2]) {
    for (const dy of [-sy / 2, sy / 2]) {
      for (const dz of [-sz / 2, sz / 2]) {
        corners.push([px + dx, py + dy, pz + dz]);
      }
    }
  }
  const segments: Segment[] = [];
  for (const [a, b] of BOX_EDGES) {
    pushLine(segments, corners[a], corners[b]);
  }
  return segments;
}

export interface ViewportScene {
  terrain: Segment[];
  instances: Segment[];
  bounds: { minX: number; minY: number; maxX: number; maxY: number };
}

export function buildViewportScene(scene: SceneJson): ViewportScene {
  const terrain = scene.terrain ? terrainWireframe(scene.terrain) : [];
  const instances = scene.instances.flatMap(instanceWireframe);
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const [x1, y1, x2, y2] of [...terrain, ...instances]) {
    minX = Math.min(minX, x1, x2);
    minY = Math.min(minY, y1, y2);
    maxX = Math.max(maxX, x1, x2);
    maxY = Math.max(maxY, y1, y2);
  }
  if (!Number.isFinite(minX)) {
    minX = minY = -1;
    maxX = maxY = 1;
  }
  return { terrain, instances, bounds: { minX, minY, maxX, maxY } };
}

/** Fit world-projected segments into a canvas with a margin. */
export function fitTransform(
  bounds: ViewportScene["bounds"],
  width: number,
  height: number,
  margin = 16,
): (x: number, y: number) => [number, number] {
  const spanX = Math.max(bounds.maxX - bounds.minX, 1e-6);
  const spanY = Math.max(bounds.maxY - bounds.minY, 1e-6);
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const offX = (width - spanX * scale) / 2;
  const offY = (height - spanY * scale) / 2;
  return (x, y) => [(x - bounds.minX) * scale + offX, (y - bounds.minY) * scale + offY];
}

export function drawScene(canvas: HTMLCanvasElement, scene: SceneJson): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const vp = buildViewportScene(scene);
  const toCanvas = fitTransform(vp.bounds, canvas.width, canvas.height);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.lineWidth = 1;
  ctx.strokeStyle = "#3d5a45";
  for (const [x1, y1, x2, y2] of vp.terrain) {
    const [ax, ay] = toCanvas(x1, y1);
    const [bx, by] = toCanvas(x2, y2);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
  ctx.strokeStyle = "#d8a657";
  for (const [x1, y1, x2, y2] of vp.instances) {
    const [ax, ay] = toCanvas(x1, y1);
    const [bx, by] = toCanvas(x2, y2);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
}
