// DOM bootstrap: canvas events, side panel, shortcut bindings.

import { App } from "./app.js";
import { ApiClient } from "./client.js";
import { renderScene } from "./render.js";
import { bindShortcuts } from "./shortcuts.js";
import { defaultView, panByPixels, screenToSensor, zoomAround, ViewState } from "./transform.js";
import type { MetricsReport } from "./types.js";

const canvas = document.getElementById("topview") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const noticeEl = document.getElementById("notice")!;
const frameEl = document.getElementById("frame-label")!;
const taskListEl = document.getElementById("task-list")!;
const cropImg = document.getElementById("crop-image") as HTMLImageElement;
const cropNoteEl = document.getElementById("crop-note")!;
const classSelect = document.getElementById("class-select") as HTMLSelectElement;
const completionEl = document.getElementById("completion")!;

let view: ViewState = defaultView(canvas.width, canvas.height);

function resize(): void {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  view = { ...view, canvasWidth: canvas.width, canvasHeight: canvas.height };
  redraw();
}

function redraw(): void {
  renderScene(ctx, view, {
    frame: app.frame,
    annotations: app.annotations,
    selectedId: app.selectedId,
    trackedIds: app.trackedIds,
    proposalBox: app.proposalBox,
    previewBox: app.gestures.preview,
    clusterDisplayIndices: app.clusterDisplayIndices,
    classColors: app.config?.class_colors ?? {},
  });
  frameEl.textContent = app.session
    ? `frame ${app.currentFrame + 1} / ${app.session.frame_ids.length}`
    : "loading";
  taskListEl.innerHTML = "";
  for (const task of app.lostTasks) {
    const li = document.createElement("li");
    li.textContent = `${task.annotation_id}: ${task.reason}`;
    taskListEl.appendChild(li);
  }
  updateCrop();
}

function updateCrop(): void {
  if (app.cropUrl && app.cropRect) {
    cropImg.src = app.cropUrl;
    cropImg.style.display = "block";
    cropNoteEl.textContent = "";
    cropImg.onload = () => {
      const [u0, v0, u1, v1] = app.cropRect!;
      // crop by shifting the image inside a clipped container, native aspect
      cropImg.style.clipPath =
        `inset(${v0}px ${cropImg.naturalWidth - u1}px ` +
        `${cropImg.naturalHeight - v1}px ${u0}px)`;
      cropImg.style.transform = `translate(${-u0}px, ${-v0}px)`;
    };
  } else {
    cropImg.style.display = "none";
    cropNoteEl.textContent = app.cropNote ?? "";
  }
}

const app = new App(new ApiClient(""), {
  onChange: redraw,
  onNotice(text: string) {
    noticeEl.textContent = text;
  },
  onError(code: string, message: string) {
    noticeEl.textContent = `${code}: ${message}`;
  },
  onCompleted(metrics: MetricsReport | null) {
    completionEl.style.display = "block";
    completionEl.innerHTML = metrics
      ? `<h2>sequence complete</h2>
         <p>${metrics.instance_count} instances annotated</p>
         <p>${metrics.mean_time_s.toFixed(2)} s and
            ${metrics.mean_ops.toFixed(2)} operations per instance</p>`
      : "<h2>sequence complete</h2><p>no annotations recorded</p>";
  },
});

// ------------------------------------------------------------ canvas events

let panning = false;
let lastPointer: [number, number] = [0, 0];

canvas.addEventListener("pointerdown", (ev) => {
  const [x, y] = screenToSensor(view, ev.offsetX, ev.offsetY);
  if (ev.button === 1 || ev.shiftKey) {
    panning = true;
    lastPointer = [ev.offsetX, ev.offsetY];
    return;
  }
  if (!app.pointerDown(x, y) && app.selectedId === null && !app.proposalBox) {
    void app.clickAt(x, y); // empty-space click: one-click annotation
  }
  canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (panning) {
    view = panByPixels(view, ev.offsetX - lastPointer[0], ev.offsetY - lastPointer[1]);
    lastPointer = [ev.offsetX, ev.offsetY];
    redraw();
    return;
  }
  const [x, y] = screenToSensor(view, ev.offsetX, ev.offsetY);
  app.pointerMove(x, y);
});

canvas.addEventListener("pointerup", (ev) => {
  if (panning) {
    panning = false;
    return;
  }
  const [x, y] = screenToSensor(view, ev.offsetX, ev.offsetY);
  void app.pointerUp(x, y);
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  view = zoomAround(view, ev.offsetX, ev.offsetY, ev.deltaY < 0 ? 1.15 : 1 / 1.15);
  redraw();
});

// ------------------------------------------------------------- UI controls

document.getElementById("btn-advance")!.addEventListener("click", () => {
  void app.advanceFrame();
});
document.getElementById("btn-confirm")!.addEventListener("click", () => {
  void app.confirmProposal();
});
document.getElementById("btn-cancel")!.addEventListener("click", () => {
  app.cancelProposal();
});
document.getElementById("btn-delete")!.addEventListener("click", () => {
  void app.deleteSelected();
});
document.getElementById("btn-save")!.addEventListener("click", () => {
  void app.saveSession();
});
classSelect.addEventListener("change", () => {
  void app.assignClass(classSelect.value);
});

bindShortcuts(window, {
  advanceFrame: () => void app.advanceFrame(),
  confirmProposal: () => void app.confirmProposal(),
  cancelProposal: () => app.cancelProposal(),
  deleteSelected: () => void app.deleteSelected(),
  assignClass: (label) => void app.assignClass(label),
  saveSession: () => void app.saveSession(),
});

window.addEventListener("resize", resize);

void app.start().then(() => {
  if (app.config) {
    classSelect.innerHTML = app.config.class_labels
      .map((l) => `<option value="${l}">${l}</option>`)
      .join("");
  }
  resize();
});
