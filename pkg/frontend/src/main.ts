// DOM wiring for the click-to-measure viewer.

import { decodePlane, fetchDemo } from "./api.js";
import { canvasToImage, renderImage, renderOverlay, SOURCE_COLORS } from "./overlay.js";
import {
  assessmentReadout,
  fusedReadout,
  SourceName,
  ViewerController,
  ViewerState,
} from "./state.js";

const ZOOM = 6;
const base = (window as any).MEAF_SERVICE_URL ?? "";

const canvas = document.getElementById("viewer") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const readout = document.getElementById("readout")!;
const sourceTable = document.getElementById("sources")!;
const slotA = document.getElementById("slot-a")!;
const slotB = document.getElementById("slot-b")!;
const assessBtn = document.getElementById("assess") as HTMLButtonElement;
const assessOut = document.getElementById("assessment")!;
const demoSelect = document.getElementById("demo-index") as HTMLSelectElement;
const windowCenter = document.getElementById("wl-center") as HTMLInputElement;
const windowWidth = document.getElementById("wl-width") as HTMLInputElement;

function render(state: ViewerState) {
  if (state.image) {
    canvas.width = state.image.width * ZOOM;
    canvas.height = state.image.height * ZOOM;
    renderImage(ctx, state.image, state.window, ZOOM);
    renderOverlay(ctx, state, ZOOM);
  }
  banner.textContent = state.error ?? (state.pending ? "measuring…" : "");
  banner.className = state.error ? "banner error" : "banner";
  if (state.response) {
    readout.textContent = `fused: ${fusedReadout(state.response)}`;
    const rows = Object.entries(state.response.sources).map(([name, m]) => {
      const color = SOURCE_COLORS[name as SourceName] ?? "#999";
      return `<tr><td><span class="swatch" style="background:${color}"></span>${name}</td>` +
        `<td>${m.long.mm.toFixed(2)}</td><td>${m.short.mm.toFixed(2)}</td></tr>`;
    });
    const f = state.response.fused;
    rows.push(`<tr><td><span class="swatch" style="background:${SOURCE_COLORS.fused}"></span>fused</td>` +
      `<td>${f.long.mm.toFixed(2)}</td><td>${f.short.mm.toFixed(2)}</td></tr>`);
    sourceTable.innerHTML =
      `<tr><th>source</th><th>long mm</th><th>short mm</th></tr>${rows.join("")}`;
  } else {
    readout.textContent = "click inside the lesion to measure";
    sourceTable.innerHTML = "";
  }
  slotA.textContent = state.slots.A ? `${state.slots.A.fusedLongMm.toFixed(2)} mm` : "empty";
  slotB.textContent = state.slots.B ? `${state.slots.B.fusedLongMm.toFixed(2)} mm` : "empty";
  assessBtn.disabled = !(state.slots.A && state.slots.B);
  assessOut.textContent = state.assessment ? assessmentReadout(state.assessment) : "";
}

const controller = new ViewerController(base, render);

canvas.addEventListener("click", (ev) => {
  const [x, y] = canvasToImage(ev, ZOOM);
  void controller.handleClick(x, y);
});

document.getElementById("capture-a")!.addEventListener("click",
  () => controller.captureSlot("A"));
document.getElementById("capture-b")!.addEventListener("click",
  () => controller.captureSlot("B"));
assessBtn.addEventListener("click", () => void controller.assessPair());

for (const el of [windowCenter, windowWidth]) {
  el.addEventListener("input", () => {
    controller.setWindow(parseFloat(windowCenter.value), parseFloat(windowWidth.value));
  });
}

async function loadDemo(index: number) {
  try {
    const item = await fetchDemo(base, index);
    controller.loadImage({
      plane: decodePlane(item.image.b64, item.image.width, item.image.height),
      width: item.image.width,
      height: item.image.height,
      spacingMmPerPx: item.spacing_mm_per_px,
      datasetIndex: item.index,
    });
  } catch (err) {
    banner.textContent = `failed to load demo image: ${String(err)}`;
    banner.className = "banner error";
  }
}

demoSelect.addEventListener("change", () => void loadDemo(parseInt(demoSelect.value, 10)));

async function boot() {
  try {
    const resp = await fetch(`${base}/demo`);
    if (resp.ok) {
      const listing = (await resp.json()) as { count: number };
      demoSelect.innerHTML = Array.from(
        { length: listing.count },
        (_, i) => `<option value="${i}">demo ${i}</option>`).join("");
      await loadDemo(0);
      return;
    }
  } catch {
    // fall through to the banner below
  }
  banner.textContent = "service has no demo data; start it with --demo-data";
  banner.className = "banner error";
}

void boot();
