// Drag-gesture state machine over a selected box.
//
// A gesture begins on pointer-down over a handle (or the box body), updates a
// local preview while the pointer moves, and commits exactly ONE adjustment —
// with the matching op kind — on pointer-up. Operation counting depends on
// that one-to-one mapping, so no intermediate requests are ever sent.

import {
  hitCorner,
  hitRotationHandle,
  pointInBox,
  resizeByCorner,
  rotateTo,
  translateBy,
} from "./geometry.js";
import type { Box, GestureOp } from "./types.js";

export const ROTATION_HANDLE_OFFSET = 0.8; // meters beyond the heading edge

export interface GestureCommit {
  op: GestureOp;
  box: Box;
}

type ActiveGesture =
  | { kind: "resize"; corner: number; original: Box }
  | { kind: "rotate"; original: Box }
  | { kind: "translate"; original: Box; startX: number; startY: number };

export class GestureController {
  private active: ActiveGesture | null = null;
  private previewBox: Box | null = null;
  private movedMeters = 0;

  constructor(private handleTolMeters: number = 0.4) {}

  /** Try to start a gesture at a sensor-space point; true if one began. */
  begin(box: Box, x: number, y: number): boolean {
    const corner = hitCorner(box, x, y, this.handleTolMeters);
    if (corner >= 0) {
      this.active = { kind: "resize", corner, original: box };
    } else if (hitRotationHandle(box, x, y, ROTATION_HANDLE_OFFSET, this.handleTolMeters)) {
      this.active = { kind: "rotate", original: box };
    } else if (pointInBox(box, x, y)) {
      this.active = { kind: "translate", original: box, startX: x, startY: y };
    } else {
      return false;
    }
    this.previewBox = box;
    this.movedMeters = 0;
    return true;
  }

  get dragging(): boolean {
    return this.active !== null;
  }

  /** Current preview while dragging (render-only, never sent per-move). */
  get preview(): Box | null {
    return this.previewBox;
  }

  move(x: number, y: number): Box | null {
    if (!this.active) return null;
    const g = this.active;
    if (g.kind === "resize") {
      this.previewBox = resizeByCorner(g.original, g.corner, x, y);
    } else if (g.kind === "rotate") {
      this.previewBox = rotateTo(g.original, x, y);
    } else {
      this.previewBox = translateBy(g.original, x - g.startX, y - g.startY);
    }
    this.movedMeters = Math.max(
      this.movedMeters,
      Math.hypot(this.previewBox.cx - g.original.cx, this.previewBox.cy - g.original.cy) +
        Math.abs(this.previewBox.yaw - g.original.yaw),
    );
    return this.previewBox;
  }

  /** Finish the gesture; returns the single commit, or null for a no-op tap. */
  end(x: number, y: number): GestureCommit | null {
    if (!this.active) return null;
    const g = this.active;
    const box = this.move(x, y);
    this.active = null;
    this.previewBox = null;
    if (box === null) return null;
    const changed =
      box.cx !== g.original.cx ||
      box.cy !== g.original.cy ||
      box.width !== g.original.width ||
      box.length !== g.original.length ||
      box.yaw !== g.original.yaw;
    if (!changed) return null;
    const op: GestureOp =
      g.kind === "resize" ? "resize" : g.kind === "rotate" ? "rotate" : "translate";
    return { op, box };
  }

  cancel(): void {
    this.active = null;
    this.previewBox = null;
  }
}
