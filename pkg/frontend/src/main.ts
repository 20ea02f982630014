/** DOM wiring for the seed-annotation tool. */
import { AnnotationApi, ApiError } from "./api.js";
import { overlayFromRle } from "./overlay.js";
import { hasBothSeedClasses } from "./rasterize.js";
import { initialViewState, screenToImage, segmentWithStrokes, zoomAround,
         ViewState } from "./state.js";
import type { MaskRle, SeedLabel, Stroke } from "./types.js";

const api = new AnnotationApi("");

const el = {
  file: document.getElementById("file") as HTMLInputElement,
  canvas: document.getElementById("canvas") as HTMLCanvasElement,
  segment: document.getElementById("segment") as HTMLButtonElement,
  undo: document.getElementById("undo") as HTMLButtonElement,
  clear: document.getElementById("clear") as HTMLButtonElement,
  radius: document.getElementById("radius") as HTMLInputElement,
  opacity: document.getElementById("opacity") as HTMLInputElement,
  status: document.getElementById("status") as HTMLSpanElement,
  hint: document.getElementById("hint") as HTMLSpanElement,
  models: document.getElementById("models") as HTMLSelectElement,
  classify: document.getElementById("classify") as HTMLButtonElement,
  result: document.getElementById("result") as HTMLSpanElement,
};

let view: ViewState | null = null;
let bitmap: ImageBitmap | null = null;
let strokes: Stroke[] = [];
let activeStroke: Stroke | null = null;
let overlayCanvas: HTMLCanvasElement | null = null;
let lastRle: MaskRle | null = null;
let panning = false;
let panStart = { x: 0, y: 0, panX: 0, panY: 0 };

function currentLabel(): SeedLabel {
  const checked = document.querySelector<HTMLInputElement>(
    "input[name='label']:checked");
  return (checked?.value as SeedLabel) ?? "fg";
}

function setStatus(text: string) {
  el.status.textContent = text;
}

function setHint(text: string) {
  el.hint.textContent = text;
}

function refreshControls() {
  const ready = view !== null && !view.busy;
  const bothClasses = view !== null &&
    hasBothSeedClasses(strokes, view.width, view.height);
  el.segment.disabled = !ready || !bothClasses;
  el.undo.disabled = !ready || strokes.length === 0;
  el.clear.disabled = el.undo.disabled;
  el.classify.disabled = !ready || view?.maskRevision === null ||
    el.models.value === "";
  setHint(view === null
    ? "upload an image to start"
    : bothClasses ? "" : "draw at least one foreground and one background scribble");
}

function strokeColor(label: SeedLabel, alpha: number): string {
  return label === "fg" ? `rgba(80, 220, 100, ${alpha})` : `rgba(235, 80, 80, ${alpha})`;
}

function render() {
  const ctx = el.canvas.getContext("2d")!;
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.clearRect(0, 0, el.canvas.width, el.canvas.height);
  if (!view || !bitmap) return;
  ctx.setTransform(view.zoom, 0, 0, view.zoom, view.panX, view.panY);
  ctx.imageSmoothingEnabled = view.zoom < 1;
  ctx.drawImage(bitmap, 0, 0);
  if (overlayCanvas && view.maskRevision !== null) {
    ctx.drawImage(overlayCanvas, 0, 0);
  }
  for (const stroke of strokes.concat(activeStroke ? [activeStroke] : [])) {
    ctx.strokeStyle = strokeColor(stroke.label, 0.85);
    ctx.fillStyle = ctx.strokeStyle;
    ctx.lineWidth = Math.max(2 * stroke.radius, 1 / view.zoom);
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.beginPath();
    stroke.points.forEach((p, i) =>
      i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y));
    if (stroke.points.length === 1) {
      const p = stroke.points[0];
      ctx.arc(p.x, p.y, Math.max(stroke.radius, 0.5 / view.zoom), 0, 2 * Math.PI);
      ctx.fill();
    } else {
      ctx.stroke();
    }
  }
}

function rebuildOverlay() {
  if (!view || !lastRle) {
    overlayCanvas = null;
    return;
  }
  const rgba = overlayFromRle(lastRle, {
    color: [64, 160, 255],
    opacity: view.overlayOpacity,
  });
  overlayCanvas = document.createElement("canvas");
  overlayCanvas.width = lastRle.width;
  overlayCanvas.height = lastRle.height;
  overlayCanvas.getContext("2d")!
    .putImageData(new ImageData(rgba, lastRle.width, lastRle.height), 0, 0);
}

function fitView() {
  if (!view) return;
  const box = el.canvas.getBoundingClientRect();
  el.canvas.width = box.width;
  el.canvas.height = box.height;
  const zoom = Math.min(box.width / view.width, box.height / view.height);
  view = { ...view, zoom, panX: (box.width - view.width * zoom) / 2,
           panY: (box.height - view.height * zoom) / 2 };
}

async function loadFile(file: File) {
  const bytes = await file.arrayBuffer();
  const created = await api.createSession(bytes);
  bitmap = await createImageBitmap(new Blob([bytes]));
  view = initialViewState(created.session_id, created.width, created.height,
                          created.revision);
  strokes = [];
  lastRle = null;
  overlayCanvas = null;
  fitView();
  setStatus(`session ${created.session_id} · ${created.width}x${created.height} `
            + `· revision ${created.revision}`);
  el.result.textContent = "";
  refreshControls();
  render();
}

async function runSegmentation() {
  if (!view) return;
  view = { ...view, busy: true };
  refreshControls();
  setStatus("segmenting...");
  try {
    const outcome = await segmentWithStrokes(api, view.sessionId, strokes,
                                             view.width, view.height);
    lastRle = outcome.rle;
    view = {
      ...view,
      busy: false,
      revision: outcome.revision,
      maskRevision: outcome.rle.revision,
      energy: outcome.rle.energy,
      rounds: outcome.rle.rounds,
    };
    rebuildOverlay();
    setStatus(`revision ${view.revision} · energy ${outcome.rle.energy.toFixed(2)} `
              + `· rounds ${outcome.rle.rounds}`
              + (outcome.retried ? " · retried once after a seed conflict" : ""));
  } catch (error) {
    view = { ...view, busy: false };
    setStatus(error instanceof ApiError
      ? `server error ${error.status}: ${error.message}`
      : `error: ${String(error)}`);
  }
  refreshControls();
  render();
}

async function runClassification() {
  if (!view || el.models.value === "") return;
  try {
    const outcome = await api.classify(view.sessionId, el.models.value);
    const score = outcome.nearest_distance !== null
      ? `distance ${outcome.nearest_distance.toFixed(3)}`
      : "kernel density argmax";
    el.result.textContent = `${outcome.class_name} (${outcome.classifier}, ${score})`;
  } catch (error) {
    el.result.textContent = error instanceof ApiError
      ? `error ${error.status}: ${error.message}`
      : String(error);
  }
}

function canvasPoint(event: PointerEvent): { x: number; y: number } {
  const box = el.canvas.getBoundingClientRect();
  return { x: event.clientX - box.left, y: event.clientY - box.top };
}

function pointerDown(event: PointerEvent) {
  if (!view || view.busy) return;
  el.canvas.setPointerCapture(event.pointerId);
  const screen = canvasPoint(event);
  if (event.button === 2 || event.shiftKey) {
    panning = true;
    panStart = { x: screen.x, y: screen.y, panX: view.panX, panY: view.panY };
    return;
  }
  const p = screenToImage(view, screen.x, screen.y);
  if (p.x < 0 || p.y < 0 || p.x >= view.width || p.y >= view.height) return;
  activeStroke = {
    label: currentLabel(),
    radius: Number(el.radius.value),
    points: [p],
  };
  render();
}

function pointerMove(event: PointerEvent) {
  if (!view) return;
  const screen = canvasPoint(event);
  if (panning) {
    view = { ...view, panX: panStart.panX + screen.x - panStart.x,
             panY: panStart.panY + screen.y - panStart.y };
    render();
    return;
  }
  if (!activeStroke) return;
  const p = screenToImage(view, screen.x, screen.y);
  const last = activeStroke.points[activeStroke.points.length - 1];
  if (Math.hypot(p.x - last.x, p.y - last.y) >= 0.75 / view.zoom) {
    activeStroke.points.push(p);
    render();
  }
}

function pointerUp() {
  if (panning) {
    panning = false;
    return;
  }
  if (activeStroke) {
    strokes.push(activeStroke);
    activeStroke = null;
    refreshControls();
    render();
  }
}

async function loadModels() {
  try {
    const names = await api.models();
    el.models.innerHTML = "";
    for (const name of names) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      el.models.appendChild(option);
    }
  } catch {
    // no models directory is fine; classification stays disabled
  }
}

el.file.addEventListener("change", () => {
  const file = el.file.files?.[0];
  if (file) {
    loadFile(file).catch((error) => setStatus(`upload failed: ${error}`));
  }
});
el.segment.addEventListener("click", () => void runSegmentation());
el.classify.addEventListener("click", () => void runClassification());
el.undo.addEventListener("click", () => {
  strokes.pop();
  refreshControls();
  render();
});
el.clear.addEventListener("click", () => {
  strokes = [];
  refreshControls();
  render();
});
el.opacity.addEventListener("input", () => {
  if (view) {
    view = { ...view, overlayOpacity: Number(el.opacity.value) / 100 };
    rebuildOverlay();
    render();
  }
});
el.canvas.addEventListener("pointerdown", pointerDown);
el.canvas.addEventListener("pointermove", pointerMove);
el.canvas.addEventListener("pointerup", pointerUp);
el.canvas.addEventListener("contextmenu", (event) => event.preventDefault());
el.canvas.addEventListener("wheel", (event) => {
  if (!view) return;
  event.preventDefault();
  const box = el.canvas.getBoundingClientRect();
  view = zoomAround(view, event.deltaY < 0 ? 1.2 : 1 / 1.2,
                    event.clientX - box.left, event.clientY - box.top);
  render();
}, { passive: false });
window.addEventListener("resize", () => {
  fitView();
  render();
});

refreshControls();
void loadModels();
