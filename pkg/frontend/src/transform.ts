// Screen <-> sensor coordinate mapping for the top view.
//
// Sensor frame: x forward, y left, meters. On screen the sensor +x axis
// points up and +y points left, so driving direction reads upward.

export interface ViewState {
  panX: number; // sensor meters at the canvas center
  panY: number;
  zoom: number; // pixels per meter, > 0
  canvasWidth: number;
  canvasHeight: number;
}

export function defaultView(width: number, height: number): ViewState {
  return { panX: 10, panY: 0, zoom: 18, canvasWidth: width, canvasHeight: height };
}

export function sensorToScreen(view: ViewState, x: number, y: number): [number, number] {
  const sx = view.canvasWidth / 2 - (y - view.panY) * view.zoom;
  const sy = view.canvasHeight / 2 - (x - view.panX) * view.zoom;
  return [sx, sy];
}

export function screenToSensor(view: ViewState, sx: number, sy: number): [number, number] {
  const x = view.panX + (view.canvasHeight / 2 - sy) / view.zoom;
  const y = view.panY + (view.canvasWidth / 2 - sx) / view.zoom;
  return [x, y];
}

export function zoomAround(view: ViewState, sx: number, sy: number, factor: number): ViewState {
  // keep the sensor point under the cursor fixed while zooming
  const [x, y] = screenToSensor(view, sx, sy);
  const zoom = Math.min(400, Math.max(1, view.zoom * factor));
  const next = { ...view, zoom };
  const [nx, ny] = screenToSensor(next, sx, sy);
  return { ...next, panX: next.panX + (x - nx), panY: next.panY + (y - ny) };
}

export function panByPixels(view: ViewState, dxPx: number, dyPx: number): ViewState {
  return {
    ...view,
    panX: view.panX + dyPx / view.zoom,
    panY: view.panY + dxPx / view.zoom,
  };
}
