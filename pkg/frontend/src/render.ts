// Canvas painting of the top view: points, highlights, boxes, handles.

import { boxCorners, rotationHandle } from "./geometry.js";
import { ROTATION_HANDLE_OFFSET } from "./gestures.js";
import { sensorToScreen, ViewState } from "./transform.js";
import type { AnnotationPayload, Box, FramePayload } from "./types.js";

const GROUND_COLOR = "#2d3338";
const POINT_COLOR = "#cfd8dc";
const CLUSTER_COLOR = "#ffee58";
const PROPOSAL_COLOR = "#ffca28";
const TRACKED_COLOR = "#ab47bc";
const SELECTED_COLOR = "#ffffff";
const FALLBACK_CLASS_COLOR = "#b0bec5";

export interface SceneState {
  frame: FramePayload | null;
  annotations: AnnotationPayload[];
  selectedId: string | null;
  trackedIds: Set<string>;
  proposalBox: Box | null;     // one-click result awaiting confirm
  previewBox: Box | null;      // live gesture preview
  clusterDisplayIndices: Set<number>;
  classColors: Record<string, string>;
}

export function renderScene(
  ctx: CanvasRenderingContext2D, view: ViewState, scene: SceneState,
): void {
  ctx.fillStyle = "#15191c";
  ctx.fillRect(0, 0, view.canvasWidth, view.canvasHeight);
  if (!scene.frame) return;
  drawPoints(ctx, view, scene);
  for (const ann of scene.annotations) {
    const selected = ann.annotation_id === scene.selectedId;
    const color = scene.trackedIds.has(ann.annotation_id)
      ? TRACKED_COLOR
      : scene.classColors[ann.box.label] ?? FALLBACK_CLASS_COLOR;
    const boxToDraw =
      selected && scene.previewBox !== null ? scene.previewBox : ann.box;
    drawBox(ctx, view, boxToDraw, color, selected);
    if (selected) drawHandles(ctx, view, boxToDraw);
  }
  if (scene.proposalBox) {
    drawBox(ctx, view, scene.proposalBox, PROPOSAL_COLOR, true, [6, 4]);
    drawHandles(ctx, view, scene.proposalBox);
  }
}

function drawPoints(
  ctx: CanvasRenderingContext2D, view: ViewState, scene: SceneState,
): void {
  const frame = scene.frame!;
  const pts = frame.points;
  const prelabelColor = new Map<number, string>();
  for (const p of frame.prelabels) {
    if (p.display_index !== null) {
      prelabelColor.set(
        p.display_index, scene.classColors[p.label] ?? FALLBACK_CLASS_COLOR);
    }
  }
  for (let i = 0; i < pts.length; i++) {
    const [sx, sy] = sensorToScreen(view, pts[i][0], pts[i][1]);
    if (sx < -2 || sy < -2 || sx > view.canvasWidth + 2 || sy > view.canvasHeight + 2) {
      continue;
    }
    let color: string;
    let size = 1;
    if (scene.clusterDisplayIndices.has(i)) {
      color = CLUSTER_COLOR;
      size = 2;
    } else if (frame.ground[i]) {
      color = GROUND_COLOR; // ground stays visible but dimmed
    } else {
      color = prelabelColor.get(i) ?? POINT_COLOR;
      if (prelabelColor.has(i)) size = 2;
    }
    ctx.fillStyle = color;
    ctx.fillRect(sx - size / 2, sy - size / 2, size, size);
  }
}

function drawBox(
  ctx: CanvasRenderingContext2D, view: ViewState, box: Box,
  color: string, emphasized: boolean, dash: number[] = [],
): void {
  const corners = boxCorners(box).map(([x, y]) => sensorToScreen(view, x, y));
  ctx.strokeStyle = color;
  ctx.lineWidth = emphasized ? 2 : 1.25;
  ctx.setLineDash(dash);
  ctx.beginPath();
  ctx.moveTo(corners[0][0], corners[0][1]);
  for (let i = 1; i <= corners.length; i++) {
    const [x, y] = corners[i % corners.length];
    ctx.lineTo(x, y);
  }
  ctx.stroke();
  ctx.setLineDash([]);
  // heading tick from the center through the front edge
  const [cx, cy] = sensorToScreen(view, box.cx, box.cy);
  const frontX = (corners[0][0] + corners[3][0]) / 2;
  const frontY = (corners[0][1] + corners[3][1]) / 2;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(frontX, frontY);
  ctx.stroke();
}

function drawHandles(ctx: CanvasRenderingContext2D, view: ViewState, box: Box): void {
  ctx.fillStyle = SELECTED_COLOR;
  for (const [x, y] of boxCorners(box)) {
    const [sx, sy] = sensorToScreen(view, x, y);
    ctx.fillRect(sx - 4, sy - 4, 8, 8);
  }
  const [hx, hy] = rotationHandle(box, ROTATION_HANDLE_OFFSET);
  const [sx, sy] = sensorToScreen(view, hx, hy);
  ctx.beginPath();
  ctx.arc(sx, sy, 5, 0, 2 * Math.PI);
  ctx.fill();
}
