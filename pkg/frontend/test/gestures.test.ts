// The one-event-per-gesture contract, checked two ways: the gesture state
// machine commits once per drag, and the full click-adjust-confirm flow
// produces an exact request transcript against a scripted mock service.

import { beforeEach, describe, expect, it } from "vitest";

import { App } from "../src/app.js";
import { ApiClient } from "../src/client.js";
import { GestureController } from "../src/gestures.js";
import { dispatchKey } from "../src/shortcuts.js";
import type { Box } from "../src/types.js";

function box(partial: Partial<Box> = {}): Box {
  return { cx: 8, cy: 0, width: 1.8, length: 4.4, yaw: 0, label: "car",
           z_min: 0.3, z_max: 1.6, ...partial };
}

describe("GestureController", () => {
  it("a drag commits exactly once with the matching op", () => {
    const g = new GestureController();
    const b = box();
    expect(g.begin(b, b.cx + 0.1, b.cy + 0.1)).toBe(true); // body -> translate
    g.move(b.cx + 0.5, b.cy + 0.1);
    g.move(b.cx + 1.0, b.cy + 0.4);
    const commit = g.end(b.cx + 1.0, b.cy + 0.4);
    expect(commit).not.toBeNull();
    expect(commit!.op).toBe("translate");
    expect(commit!.box.cx).toBeCloseTo(b.cx + 0.9, 9);
    expect(commit!.box.cy).toBeCloseTo(b.cy + 0.3, 9);
    // the gesture is over; nothing further to commit
    expect(g.end(0, 0)).toBeNull();
  });

  it("corner drags are resize, knob drags are rotate", () => {
    const g = new GestureController();
    const b = box();
    expect(g.begin(b, b.cx + b.length / 2, b.cy + b.width / 2)).toBe(true);
    expect(g.end(b.cx + b.length / 2 + 0.4, b.cy + b.width / 2 + 0.2)!.op).toBe("resize");
    expect(g.begin(b, b.cx + b.length / 2 + 0.8, b.cy)).toBe(true);
    expect(g.end(b.cx, b.cy + 5)!.op).toBe("rotate");
  });

  it("a zero-movement tap commits nothing", () => {
    const g = new GestureController();
    const b = box();
    g.begin(b, b.cx, b.cy);
    expect(g.end(b.cx, b.cy)).toBeNull();
  });

  it("misses outside every handle do not start a gesture", () => {
    const g = new GestureController();
    expect(g.begin(box(), 50, 50)).toBe(false);
    expect(g.dragging).toBe(false);
  });
});

// ------------------------------------------------------------ mock transcript

interface Recorded {
  method: string;
  path: string;
  body: any;
}

function mockService() {
  const transcript: Recorded[] = [];
  let annotationCounter = 0;
  const fetchFn = (async (url: string, init?: RequestInit) => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    transcript.push({ method, path: url, body });
    const respond = (payload: unknown) =>
      new Response(JSON.stringify(payload), { status: 200 });
    if (url === "/api/config") {
      return respond({
        class_labels: ["car", "pedestrian"], class_colors: { car: "#4f9dff" },
        rigid_classes: ["car"], display_cap: 60000, click_snap_radius: 1.0,
      });
    }
    if (url === "/api/sequences") {
      return respond({ sequences: [{ id: "seq0", n_frames: 2, dt: 0.1 }] });
    }
    if (url.match(/frames\/\d+$/)) {
      return respond({
        sequence: "seq0", frame: 0, frame_id: "f0", dt: 0.1, n_full: 3,
        index_map: [0, 1, 2],
        points: [[8, 0, 1], [8.2, 0, 1], [30, 30, 0]],
        ground: [false, false, true], prelabels: [], instances: [],
        image_available: false,
      });
    }
    if (url === "/api/sessions") {
      return respond({
        session_id: "s1", sequence: "seq0", frame_ids: ["f0", "f1"],
        current_frame: 0, dt: 0.1, annotations: [], tracks: [], params: {},
      });
    }
    if (url.endsWith("/click")) {
      return respond({ box: box(), seed: 0, cluster_indices: [0, 1] });
    }
    if (url.endsWith("/annotations") && method === "POST") {
      annotationCounter += 1;
      return respond({
        annotation: {
          annotation_id: `a${annotationCounter}`, frame_id: "f0",
          box: body.box, source: body.source, created_ms: 1, modified_ms: 1,
        },
      });
    }
    if (method === "PATCH") {
      const aid = url.split("/").pop();
      return respond({
        annotation: {
          annotation_id: aid, frame_id: "f0",
          box: body.box ?? box({ label: body.label }),
          source: "one_click", created_ms: 1, modified_ms: 2,
        },
      });
    }
    if (url.endsWith("/crop")) {
      return new Response(
        JSON.stringify({ error: { code: "not_visible", message: "no camera" } }),
        { status: 404 });
    }
    if (url.endsWith("/advance")) {
      return respond({ done: true, metrics: null });
    }
    throw new Error(`mock service has no route for ${method} ${url}`);
  }) as unknown as typeof fetch;
  return { fetchFn, transcript };
}

describe("click-adjust-confirm flow against the scripted mock service", () => {
  let transcript: Recorded[];
  let app: App;
  const notices: string[] = [];

  beforeEach(async () => {
    const mock = mockService();
    transcript = mock.transcript;
    app = new App(new ApiClient("", mock.fetchFn), {
      onChange: () => {},
      onNotice: (t) => notices.push(t),
      onError: (c, m) => notices.push(`${c}:${m}`),
      onCompleted: () => {},
    });
    await app.start();
    transcript.length = 0; // startup calls are not part of the flow
  });

  it("emits the exact request sequence, one PATCH per gesture", async () => {
    await app.clickAt(8.05, 0.02);             // 1. click
    expect(app.proposalBox).not.toBeNull();
    await app.confirmProposal();               // 2. create

    // gesture: drag the box body 0.5 m forward, many pointer moves
    app.pointerDown(8.1, 0.1);
    app.pointerMove(8.2, 0.1);
    app.pointerMove(8.4, 0.1);
    app.pointerMove(8.6, 0.1);
    await app.pointerUp(8.6, 0.1);             // 3. one translate PATCH

    // gesture: rotate via the knob
    const b = app.selectedAnnotation()!.box;
    app.pointerDown(b.cx + b.length / 2 + 0.8, b.cy);
    app.pointerMove(b.cx + 2, b.cy + 1);
    await app.pointerUp(b.cx + 2, b.cy + 2);   // 4. one rotate PATCH

    await app.assignClass("pedestrian");       // 5. one class_assign PATCH

    const flow = transcript.map((r) => `${r.method} ${r.path.split("/api/")[1]}`);
    expect(flow).toEqual([
      "POST sessions/s1/click",
      "POST sessions/s1/annotations",
      "GET sessions/s1/annotations/a1/crop",
      "PATCH sessions/s1/annotations/a1",
      "PATCH sessions/s1/annotations/a1",
      "PATCH sessions/s1/annotations/a1",
    ]);
    const patches = transcript.filter((r) => r.method === "PATCH");
    expect(patches.map((p) => p.body.op)).toEqual(["translate", "rotate", "class_assign"]);
    // the translate PATCH carries the full adjusted box, moved by the drag
    expect(patches[0].body.box.cx).toBeCloseTo(8.5, 6);
  });

  it("adjusting a proposal before confirm stays local (no requests)", async () => {
    await app.clickAt(8.0, 0.0);
    transcript.length = 0;
    app.pointerDown(8.0, 0.0);
    app.pointerMove(8.3, 0.0);
    await app.pointerUp(8.3, 0.0);
    expect(transcript).toEqual([]);
    expect(app.proposalBox!.cx).toBeCloseTo(8.3, 9);
  });

  it("rotation drag converts to a yaw delta in the PATCH", async () => {
    await app.clickAt(8.0, 0.0);
    await app.confirmProposal();
    transcript.length = 0;
    const b = app.selectedAnnotation()!.box;
    app.pointerDown(b.cx + b.length / 2 + 0.8, b.cy);
    // drag the knob to 10 degrees above the axis
    const r = 3.0;
    const target: [number, number] = [
      b.cx + r * Math.cos(Math.PI / 18), b.cy + r * Math.sin(Math.PI / 18)];
    app.pointerMove(target[0], target[1]);
    await app.pointerUp(target[0], target[1]);
    const patch = transcript.find((t) => t.method === "PATCH")!;
    expect(patch.body.op).toBe("rotate");
    expect(patch.body.box.yaw).toBeCloseTo(Math.PI / 18, 6);
  });

  it("structured service errors surface as guidance, not crashes", async () => {
    const mock = mockService();
    const failing = (async (url: string, init?: RequestInit) => {
      if ((url as string).endsWith("/click")) {
        return new Response(JSON.stringify({
          error: { code: "seed_on_ground", message: "click an object point" },
        }), { status: 422 });
      }
      return mock.fetchFn(url as any, init);
    }) as unknown as typeof fetch;
    const messages: string[] = [];
    const a = new App(new ApiClient("", failing), {
      onChange: () => {},
      onNotice: () => {},
      onError: (code, msg) => messages.push(`${code}:${msg}`),
      onCompleted: () => {},
    });
    await a.start();
    await a.clickAt(1, 1);
    expect(messages).toEqual(["seed_on_ground:click an object point"]);
    expect(a.proposalBox).toBeNull();
  });

  it("keyboard shortcuts dispatch the same actions as buttons", () => {
    const calls: string[] = [];
    const actions = {
      advanceFrame: () => calls.push("advance"),
      confirmProposal: () => calls.push("confirm"),
      cancelProposal: () => calls.push("cancel"),
      deleteSelected: () => calls.push("delete"),
      assignClass: (l: string) => calls.push(`class:${l}`),
      saveSession: () => calls.push("save"),
    };
    for (const key of ["n", "Enter", "Escape", "Delete", "2", "s"]) {
      dispatchKey(key, actions);
    }
    expect(calls).toEqual(
      ["advance", "confirm", "cancel", "delete", "class:pedestrian", "save"]);
    expect(dispatchKey("q", actions)).toBe(false);
  });
});
