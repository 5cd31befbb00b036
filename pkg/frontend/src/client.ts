// Thin typed wrapper over the annotation service HTTP API.
//
// The UI never computes annotation geometry authoritatively: every stored
// box comes back from these calls.

import type {
  AdvanceResponse,
  AnnotationPayload,
  Box,
  ClickResponse,
  CropResponse,
  FramePayload,
  GestureOp,
  MetricsReport,
  SessionState,
  UiConfig,
} from "./types.js";

export class ServiceError extends Error {
  code: string;
  status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

async function parseResponse<T>(res: Response): Promise<T> {
  if (res.ok) {
    return (await res.json()) as T;
  }
  let code = "http_error";
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && body.error) {
      code = body.error.code;
      message = body.error.message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ServiceError(code, message, res.status);
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return parseResponse<T>(res);
  }

  getConfig(): Promise<UiConfig> {
    return this.request("GET", "/api/config");
  }

  listSequences(): Promise<{ sequences: { id: string; n_frames: number; dt: number }[] }> {
    return this.request("GET", "/api/sequences");
  }

  getFrame(sequence: string, frame: number): Promise<FramePayload> {
    return this.request("GET", `/api/sequences/${sequence}/frames/${frame}`);
  }

  createSession(sequence: string): Promise<SessionState> {
    return this.request("POST", "/api/sessions", { sequence });
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request("GET", `/api/sessions/${sessionId}`);
  }

  click(sessionId: string, frame: number, x: number, y: number): Promise<ClickResponse> {
    return this.request("POST", `/api/sessions/${sessionId}/click`, { frame, x, y });
  }

  createAnnotation(
    sessionId: string, frame: number, box: Box, label: string,
    source: "manual" | "one_click" | "tracked" = "one_click",
  ): Promise<{ annotation: AnnotationPayload }> {
    return this.request("POST", `/api/sessions/${sessionId}/annotations`,
                        { frame, box, label, source });
  }

  /** One call per completed gesture, carrying the gesture kind for op counting. */
  adjustAnnotation(
    sessionId: string, annotationId: string, frame: number, op: GestureOp, box: Box,
  ): Promise<{ annotation: AnnotationPayload }> {
    return this.request("PATCH", `/api/sessions/${sessionId}/annotations/${annotationId}`,
                        { op, frame, box });
  }

  assignClass(
    sessionId: string, annotationId: string, frame: number, label: string,
  ): Promise<{ annotation: AnnotationPayload }> {
    return this.request("PATCH", `/api/sessions/${sessionId}/annotations/${annotationId}`,
                        { op: "class_assign", frame, label });
  }

  deleteAnnotation(sessionId: string, annotationId: string): Promise<{ deleted: string }> {
    return this.request("DELETE", `/api/sessions/${sessionId}/annotations/${annotationId}`);
  }

  advance(sessionId: string, toFrame: number): Promise<AdvanceResponse> {
    return this.request("POST", `/api/sessions/${sessionId}/advance`, { to_frame: toFrame });
  }

  getCrop(sessionId: string, annotationId: string): Promise<CropResponse> {
    return this.request("GET", `/api/sessions/${sessionId}/annotations/${annotationId}/crop`);
  }

  getMetrics(sessionId: string): Promise<{ metrics: MetricsReport | null }> {
    return this.request("GET", `/api/sessions/${sessionId}/metrics`);
  }

  replayCheck(sessionId: string): Promise<{ ok: boolean }> {
    return this.request("GET", `/api/sessions/${sessionId}/replay_check`);
  }

  save(sessionId: string): Promise<{ path: string }> {
    return this.request("POST", `/api/sessions/${sessionId}/save`, {});
  }
}
