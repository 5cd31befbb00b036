// Box geometry shared with the renderer and gesture handling.
//
// Corner order matches the service's corner math exactly (counter-clockwise
// from the front-left); the fixture test pins this against the service's
// debug endpoint to < 0.5 px.

import type { Box } from "./types.js";

export type Point2 = [number, number];

export function boxCorners(box: Box): Point2[] {
  const c = Math.cos(box.yaw);
  const s = Math.sin(box.yaw);
  const hl = box.length / 2;
  const hw = box.width / 2;
  const local: Point2[] = [
    [hl, hw],
    [-hl, hw],
    [-hl, -hw],
    [hl, -hw],
  ];
  return local.map(([u, v]) => [box.cx + u * c - v * s, box.cy + u * s + v * c]);
}

/** Midpoint of the heading edge, pushed outward; anchors the rotation handle. */
export function rotationHandle(box: Box, offsetMeters: number): Point2 {
  const c = Math.cos(box.yaw);
  const s = Math.sin(box.yaw);
  const u = box.length / 2 + offsetMeters;
  return [box.cx + u * c, box.cy + u * s];
}

/** Sensor point -> box-frame coordinates (u along length, v along width). */
export function toBoxFrame(box: Box, x: number, y: number): Point2 {
  const c = Math.cos(box.yaw);
  const s = Math.sin(box.yaw);
  const dx = x - box.cx;
  const dy = y - box.cy;
  return [dx * c + dy * s, -dx * s + dy * c];
}

export function fromBoxFrame(box: Box, u: number, v: number): Point2 {
  const c = Math.cos(box.yaw);
  const s = Math.sin(box.yaw);
  return [box.cx + u * c - v * s, box.cy + u * s + v * c];
}

export function pointInBox(box: Box, x: number, y: number): boolean {
  const [u, v] = toBoxFrame(box, x, y);
  return Math.abs(u) <= box.length / 2 && Math.abs(v) <= box.width / 2;
}

const MIN_DIM = 0.05; // meters; keeps resize gestures from degenerate boxes

/** Resize by dragging corner `index` while the opposite corner stays pinned. */
export function resizeByCorner(box: Box, index: number, x: number, y: number): Box {
  const corners = boxCorners(box);
  const opposite = corners[(index + 2) % 4];
  const [uo, vo] = toBoxFrame(box, opposite[0], opposite[1]);
  const [up, vp] = toBoxFrame(box, x, y);
  const length = Math.max(MIN_DIM, Math.abs(up - uo));
  const width = Math.max(MIN_DIM, Math.abs(vp - vo));
  const [cx, cy] = fromBoxFrame(box, (up + uo) / 2, (vp + vo) / 2);
  return { ...box, cx, cy, width, length };
}

export function rotateTo(box: Box, x: number, y: number): Box {
  const yaw = Math.atan2(y - box.cy, x - box.cx);
  return { ...box, yaw: normalizeYaw(yaw) };
}

export function translateBy(box: Box, dx: number, dy: number): Box {
  return { ...box, cx: box.cx + dx, cy: box.cy + dy };
}

export function normalizeYaw(yaw: number): number {
  let w = yaw % Math.PI;
  if (w < 0) w += Math.PI;
  return w;
}

/** Index of the corner within `tolMeters` of the point, or -1. */
export function hitCorner(box: Box, x: number, y: number, tolMeters: number): number {
  const corners = boxCorners(box);
  for (let i = 0; i < corners.length; i++) {
    const [px, py] = corners[i];
    if (Math.hypot(px - x, py - y) <= tolMeters) return i;
  }
  return -1;
}

export function hitRotationHandle(
  box: Box, x: number, y: number, offsetMeters: number, tolMeters: number,
): boolean {
  const [hx, hy] = rotationHandle(box, offsetMeters);
  return Math.hypot(hx - x, hy - y) <= tolMeters;
}
