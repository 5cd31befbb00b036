// Wire types mirroring the annotation service's JSON payloads (snake_case).

export interface Box {
  cx: number;
  cy: number;
  width: number;
  length: number;
  yaw: number;
  label: string;
  z_min?: number | null;
  z_max?: number | null;
}

export interface PreLabel {
  index: number;
  display_index: number | null;
  label: string;
  instance: number;
}

export interface FramePayload {
  sequence: string;
  frame: number;
  frame_id: string;
  dt: number;
  n_full: number;
  index_map: number[];
  points: [number, number, number][];
  ground: boolean[];
  prelabels: PreLabel[];
  instances: { instance: number; label: string; count: number }[];
  image_available: boolean;
}

export interface AnnotationPayload {
  annotation_id: string;
  frame_id: string;
  box: Box;
  source: "manual" | "one_click" | "tracked";
  created_ms: number;
  modified_ms: number;
}

export interface SessionState {
  session_id: string;
  sequence: string;
  frame_ids: string[];
  current_frame: number;
  dt: number;
  annotations: AnnotationPayload[];
  tracks: { annotation_id: string; rigid: boolean; position: [number, number] }[];
  params: Record<string, unknown>;
}

export interface ClickResponse {
  box: Box;
  seed: number;
  cluster_indices: number[];
}

export interface AdvanceResponse {
  done: boolean;
  frame?: number;
  proposals?: {
    annotation: AnnotationPayload;
    from_annotation: string;
    cluster_indices: number[];
  }[];
  lost?: { annotation_id: string; reason: string }[];
  metrics?: MetricsReport | null;
}

export interface MetricsReport {
  instance_count: number;
  total_time_ms: number;
  mean_time_s: number;
  total_ops: number;
  mean_ops: number;
}

export interface CropResponse {
  rect: [number, number, number, number];
  image_url: string;
}

export interface UiConfig {
  class_labels: string[];
  class_colors: Record<string, string>;
  rigid_classes: string[];
  display_cap: number;
  click_snap_radius: number;
}

export interface ServiceError {
  error: { code: string; message: string };
}

export type GestureOp = "resize" | "rotate" | "translate";
