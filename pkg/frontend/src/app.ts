// Annotation workflow state machine, kept DOM-free so the flow is testable
// against a scripted mock service.
//
// Flow per frame: click a point -> service proposes a box -> annotator
// adjusts via handles (each completed drag = one logged operation) and
// confirms -> advance pulls tracked proposals for the next frame -> repeat.
// The completion screen shows the session's efficiency metrics.

import { GestureController } from "./gestures.js";
import { ServiceError, ApiClient } from "./client.js";
import type {
  AnnotationPayload,
  Box,
  FramePayload,
  MetricsReport,
  SessionState,
  UiConfig,
} from "./types.js";

export interface LostTask {
  annotation_id: string;
  reason: string;
}

export interface AppEvents {
  onChange(): void;
  onNotice(text: string): void;
  onError(code: string, message: string): void;
  onCompleted(metrics: MetricsReport | null): void;
}

const NO_CAMERA = "no camera view";

export class App {
  frame: FramePayload | null = null;
  session: SessionState | null = null;
  config: UiConfig | null = null;
  selectedId: string | null = null;
  proposalBox: Box | null = null;
  proposalLabel = "car";
  clusterDisplayIndices = new Set<number>();
  trackedIds = new Set<string>();
  lostTasks: LostTask[] = [];
  cropUrl: string | null = null;
  cropNote: string | null = null;
  completed = false;
  busy = false; // one in-flight mutating request at a time

  readonly gestures = new GestureController();

  constructor(private client: ApiClient, private events: AppEvents) {}

  get annotations(): AnnotationPayload[] {
    if (!this.session || !this.frame) return [];
    return this.session.annotations.filter(
      (a) => a.frame_id === this.frame!.frame_id);
  }

  get currentFrame(): number {
    return this.session ? this.session.current_frame : 0;
  }

  async start(sequenceId?: string): Promise<void> {
    this.config = await this.client.getConfig();
    if (!sequenceId) {
      const seqs = await this.client.listSequences();
      if (seqs.sequences.length === 0) {
        this.events.onNotice("no sequences available");
        return;
      }
      sequenceId = seqs.sequences[0].id;
    }
    this.session = await this.client.createSession(sequenceId);
    this.frame = await this.client.getFrame(sequenceId, 0);
    this.events.onChange();
  }

  private async withBusy<T>(work: () => Promise<T>): Promise<T | null> {
    if (this.busy) return null;
    this.busy = true;
    try {
      return await work();
    } catch (err) {
      if (err instanceof ServiceError) {
        this.events.onError(err.code, err.message);
        return null;
      }
      throw err;
    } finally {
      this.busy = false;
      this.events.onChange();
    }
  }

  /** One-click annotation: a sensor-space click becomes a box proposal. */
  async clickAt(x: number, y: number): Promise<void> {
    if (!this.session || !this.frame || this.completed) return;
    await this.withBusy(async () => {
      const res = await this.client.click(
        this.session!.session_id, this.currentFrame, x, y);
      this.proposalBox = { ...res.box, label: this.proposalLabel };
      this.selectedId = null;
      this.markCluster(res.cluster_indices);
    });
  }

  /** Store the adjusted proposal as a new annotation. */
  async confirmProposal(): Promise<void> {
    if (!this.session || !this.proposalBox) return;
    await this.withBusy(async () => {
      const res = await this.client.createAnnotation(
        this.session!.session_id, this.currentFrame,
        this.proposalBox!, this.proposalLabel, "one_click");
      this.applyAnnotation(res.annotation);
      this.selectedId = res.annotation.annotation_id;
      this.proposalBox = null;
      this.clusterDisplayIndices.clear();
      await this.refreshCrop();
    });
  }

  cancelProposal(): void {
    this.proposalBox = null;
    this.clusterDisplayIndices.clear();
    this.events.onChange();
  }

  selectAt(x: number, y: number): string | null {
    for (const ann of this.annotations) {
      const dx = x - ann.box.cx;
      const dy = y - ann.box.cy;
      const c = Math.cos(ann.box.yaw);
      const s = Math.sin(ann.box.yaw);
      const u = dx * c + dy * s;
      const v = -dx * s + dy * c;
      if (Math.abs(u) <= ann.box.length / 2 && Math.abs(v) <= ann.box.width / 2) {
        return ann.annotation_id;
      }
    }
    return null;
  }

  selectedAnnotation(): AnnotationPayload | null {
    return this.annotations.find((a) => a.annotation_id === this.selectedId) ?? null;
  }

  /** Pointer down in sensor space: begin a gesture or change the selection. */
  pointerDown(x: number, y: number): boolean {
    if (this.busy) return false;
    const target = this.proposalBox ?? this.selectedAnnotation()?.box ?? null;
    if (target && this.gestures.begin(target, x, y)) {
      this.events.onChange();
      return true;
    }
    const hit = this.selectAt(x, y);
    if (hit !== this.selectedId) {
      this.selectedId = hit;
      void this.refreshCrop();
      this.events.onChange();
    }
    return false;
  }

  pointerMove(x: number, y: number): void {
    if (this.gestures.dragging) {
      this.gestures.move(x, y);
      if (this.proposalBox && this.gestures.preview) {
        this.proposalBox = this.gestures.preview;
      }
      this.events.onChange();
    }
  }

  /** Pointer up: commits at most one adjustment request (one log event). */
  async pointerUp(x: number, y: number): Promise<void> {
    const commit = this.gestures.end(x, y);
    if (!commit) {
      this.events.onChange();
      return;
    }
    if (this.proposalBox) {
      // proposal adjustments stay local until the annotator confirms
      this.proposalBox = commit.box;
      this.events.onChange();
      return;
    }
    const selected = this.selectedAnnotation();
    if (!selected || !this.session) return;
    await this.withBusy(async () => {
      const res = await this.client.adjustAnnotation(
        this.session!.session_id, selected.annotation_id,
        this.currentFrame, commit.op, commit.box);
      this.applyAnnotation(res.annotation);
    });
  }

  async assignClass(label: string): Promise<void> {
    if (this.proposalBox) {
      this.proposalLabel = label;
      this.proposalBox = { ...this.proposalBox, label };
      this.events.onChange();
      return;
    }
    const selected = this.selectedAnnotation();
    if (!selected || !this.session) return;
    await this.withBusy(async () => {
      const res = await this.client.assignClass(
        this.session!.session_id, selected.annotation_id, this.currentFrame, label);
      this.applyAnnotation(res.annotation);
    });
  }

  async deleteSelected(): Promise<void> {
    const selected = this.selectedAnnotation();
    if (!selected || !this.session) return;
    await this.withBusy(async () => {
      await this.client.deleteAnnotation(
        this.session!.session_id, selected.annotation_id);
      this.session!.annotations = this.session!.annotations.filter(
        (a) => a.annotation_id !== selected.annotation_id);
      this.trackedIds.delete(selected.annotation_id);
      this.selectedId = null;
      this.cropUrl = null;
    });
  }

  /** Advance to the next frame; tracked proposals arrive for adjustment. */
  async advanceFrame(): Promise<void> {
    if (!this.session || this.completed) return;
    await this.withBusy(async () => {
      const next = this.currentFrame + 1;
      const res = await this.client.advance(this.session!.session_id, next);
      if (res.done) {
        this.completed = true;
        this.events.onCompleted(res.metrics ?? null);
        return;
      }
      this.session!.current_frame = res.frame!;
      this.frame = await this.client.getFrame(this.session!.sequence, res.frame!);
      this.trackedIds = new Set(
        (res.proposals ?? []).map((p) => p.annotation.annotation_id));
      this.lostTasks = res.lost ?? [];
      for (const p of res.proposals ?? []) {
        this.applyAnnotation(p.annotation);
      }
      this.selectedId = res.proposals?.[0]?.annotation.annotation_id ?? null;
      this.proposalBox = null;
      this.clusterDisplayIndices.clear();
      if (this.lostTasks.length > 0) {
        this.events.onNotice(
          `${this.lostTasks.length} track(s) lost; re-annotate manually`);
      }
      await this.refreshCrop();
    });
  }

  async saveSession(): Promise<void> {
    if (!this.session) return;
    await this.withBusy(async () => {
      const res = await this.client.save(this.session!.session_id);
      this.events.onNotice(`saved to ${res.path}`);
    });
  }

  /** Confirmation crop for the selected annotation; pass-through from the
   * service, never recomputed client-side. */
  async refreshCrop(): Promise<void> {
    this.cropUrl = null;
    this.cropNote = null;
    const selected = this.selectedAnnotation();
    if (!selected || !this.session) return;
    try {
      const crop = await this.client.getCrop(
        this.session.session_id, selected.annotation_id);
      this.cropUrl = crop.image_url;
      this.cropRect = crop.rect;
    } catch (err) {
      if (err instanceof ServiceError) {
        this.cropNote = NO_CAMERA;
        return;
      }
      throw err;
    }
  }

  cropRect: [number, number, number, number] | null = null;

  private markCluster(fullIndices: number[]): void {
    this.clusterDisplayIndices.clear();
    if (!this.frame) return;
    const position = new Map<number, number>();
    this.frame.index_map.forEach((full, display) => position.set(full, display));
    for (const i of fullIndices) {
      const d = position.get(i);
      if (d !== undefined) this.clusterDisplayIndices.add(d);
    }
  }

  private applyAnnotation(ann: AnnotationPayload): void {
    if (!this.session) return;
    const list = this.session.annotations;
    const at = list.findIndex((a) => a.annotation_id === ann.annotation_id);
    if (at >= 0) list[at] = ann;
    else list.push(ann);
  }
}
