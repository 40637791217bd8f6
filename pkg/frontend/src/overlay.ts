// Canvas rendering: grayscale image with display-only window/level, then the
// measurement overlay.  Image pixels are drawn nearest-neighbor (no
// smoothing) so boundaries can be inspected honestly.  Overlay coordinates
// are the service's original-image coordinates mapped through the canvas
// zoom only.

import { LoadedImage, SourceName, ViewerState } from "./state.js";

export const SOURCE_COLORS: Record<SourceName | "fused", string> = {
  segmentation: "#3b82f6", // blue, like the segmentation-derived diameters
  heatmap: "#eab308",      // yellow
  regression: "#22c55e",   // green
  fused: "#f97316",        // orange readout color
};

export function renderImage(ctx: CanvasRenderingContext2D, img: LoadedImage,
                            window_: { center: number; width: number },
                            zoom: number) {
  const { width, height, plane } = img;
  const off = new OffscreenCanvas(width, height);
  const octx = off.getContext("2d")!;
  const data = octx.createImageData(width, height);
  const lo = window_.center - window_.width / 2;
  const scale = 255 / Math.max(window_.width, 1e-6);
  for (let i = 0; i < plane.length; i++) {
    const v = Math.max(0, Math.min(255, (plane[i] - lo) * scale));
    data.data[4 * i] = data.data[4 * i + 1] = data.data[4 * i + 2] = v;
    data.data[4 * i + 3] = 255;
  }
  octx.putImageData(data, 0, 0);
  ctx.save();
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, width * zoom, height * zoom);
  ctx.drawImage(off, 0, 0, width * zoom, height * zoom);
  ctx.restore();
}

function drawSegment(ctx: CanvasRenderingContext2D, a: [number, number],
                     b: [number, number], color: string, zoom: number) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(a[0] * zoom, a[1] * zoom);
  ctx.lineTo(b[0] * zoom, b[1] * zoom);
  ctx.stroke();
  for (const p of [a, b]) {
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(p[0] * zoom, p[1] * zoom, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export function renderOverlay(ctx: CanvasRenderingContext2D, state: ViewerState,
                              zoom: number) {
  const resp = state.response;
  if (!resp) return; // overlays only exist once a response is present
  ctx.save();
  // LOI box
  ctx.strokeStyle = "#d946ef";
  ctx.lineWidth = 1;
  ctx.setLineDash([6, 4]);
  ctx.strokeRect(resp.loi.x0 * zoom, resp.loi.y0 * zoom,
                 (resp.loi.x1 - resp.loi.x0) * zoom,
                 (resp.loi.y1 - resp.loi.y0) * zoom);
  // detected box
  ctx.strokeStyle = "#10b981";
  ctx.setLineDash([3, 3]);
  ctx.strokeRect(resp.box.x0 * zoom, resp.box.y0 * zoom,
                 (resp.box.x1 - resp.box.x0) * zoom,
                 (resp.box.y1 - resp.box.y0) * zoom);
  ctx.setLineDash([]);
  // segmentation contour
  if (resp.contour.length > 1) {
    ctx.strokeStyle = SOURCE_COLORS.segmentation;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(resp.contour[0][0] * zoom, resp.contour[0][1] * zoom);
    for (const [x, y] of resp.contour.slice(1)) ctx.lineTo(x * zoom, y * zoom);
    ctx.closePath();
    ctx.stroke();
  }
  // per-source diameter segments
  for (const name of ["segmentation", "heatmap", "regression"] as SourceName[]) {
    const m = resp.sources[name];
    if (!m || !state.overlays[name]) continue;
    drawSegment(ctx, m.long.a, m.long.b, SOURCE_COLORS[name], zoom);
    drawSegment(ctx, m.short.a, m.short.b, SOURCE_COLORS[name], zoom);
  }
  if (state.overlays.fused) {
    drawSegment(ctx, resp.fused.long.a, resp.fused.long.b, SOURCE_COLORS.fused, zoom);
    drawSegment(ctx, resp.fused.short.a, resp.fused.short.b, SOURCE_COLORS.fused, zoom);
  }
  // click marker
  if (state.click) {
    ctx.fillStyle = "#ef4444";
    ctx.beginPath();
    ctx.arc(state.click[0] * zoom, state.click[1] * zoom, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.restore();
}

export function canvasToImage(ev: { offsetX: number; offsetY: number },
                              zoom: number): [number, number] {
  return [ev.offsetX / zoom, ev.offsetY / zoom];
}
