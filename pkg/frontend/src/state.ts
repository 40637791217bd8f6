// Viewer state machine, kept free of DOM so it is unit-testable.
// One measure request in flight at a time; a newer click aborts the old
// request.  Service errors keep the previous overlay and surface a banner.

import {
  AssessResponse,
  MeasureRequest,
  MeasureResponse,
  ServiceError,
  assess,
  measure,
} from "./api.js";

export interface LoadedImage {
  plane: Float32Array;
  width: number;
  height: number;
  spacingMmPerPx: number;
  datasetIndex?: number;
}

export type SourceName = "segmentation" | "heatmap" | "regression";

export interface LongitudinalSlot {
  label: string;
  fusedLongMm: number;
}

export interface ViewerState {
  image: LoadedImage | null;
  window: { center: number; width: number };
  click: [number, number] | null;
  response: MeasureResponse | null;
  overlays: Record<SourceName | "fused", boolean>;
  error: string | null;
  pending: boolean;
  slots: { A: LongitudinalSlot | null; B: LongitudinalSlot | null };
  assessment: AssessResponse | null;
}

export function initialState(): ViewerState {
  return {
    image: null,
    window: { center: 0.5, width: 1.0 },
    click: null,
    response: null,
    overlays: { segmentation: true, heatmap: true, regression: true, fused: true },
    error: null,
    pending: false,
    slots: { A: null, B: null },
    assessment: null,
  };
}

export function clickInsideImage(state: ViewerState, x: number, y: number): boolean {
  if (!state.image) return false;
  return x >= 0 && y >= 0 && x <= state.image.width - 1 && y <= state.image.height - 1;
}

export function buildMeasureRequest(img: LoadedImage,
                                    click: [number, number]): MeasureRequest {
  const image =
    img.datasetIndex !== undefined
      ? { dataset_index: img.datasetIndex }
      : { b64: encodePlane(img.plane), width: img.width, height: img.height };
  return { image, click, spacing_mm_per_px: img.spacingMmPerPx };
}

export function encodePlane(plane: Float32Array): string {
  const bytes = new Uint8Array(plane.buffer, plane.byteOffset, plane.byteLength);
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}

// Readouts are verbatim payload fields formatted for display; no arithmetic
// beyond string formatting happens here.
export function fusedReadout(resp: MeasureResponse): string {
  return `long ${resp.fused.long.mm.toFixed(2)} mm | short ${resp.fused.short.mm.toFixed(2)} mm`;
}

export function assessmentReadout(a: AssessResponse): string {
  const sign = a.percent_change > 0 ? "+" : a.percent_change < 0 ? "−" : "";
  return `${a.response_class} (${sign}${Math.abs(a.percent_change).toFixed(1)}%)`;
}

export class ViewerController {
  state: ViewerState = initialState();
  private inflight: AbortController | null = null;

  constructor(private base: string,
              private onChange: (s: ViewerState) => void = () => {}) {}

  private emit() {
    this.onChange(this.state);
  }

  loadImage(img: LoadedImage) {
    this.state.image = img;
    this.state.click = null;
    this.state.response = null;
    this.state.error = null;
    this.state.assessment = null;
    this.emit();
  }

  setWindow(center: number, width: number) {
    this.state.window = { center, width };
    this.emit();
  }

  toggleOverlay(name: SourceName | "fused", on: boolean) {
    this.state.overlays[name] = on;
    this.emit();
  }

  /** Click in image coordinates; out-of-image clicks send nothing. */
  async handleClick(x: number, y: number): Promise<void> {
    if (!this.state.image || !clickInsideImage(this.state, x, y)) return;
    if (this.inflight) this.inflight.abort();
    const ctl = new AbortController();
    this.inflight = ctl;
    this.state.click = [x, y];
    this.state.pending = true;
    this.state.error = null;
    this.emit();
    try {
      const resp = await measure(
        this.base, buildMeasureRequest(this.state.image, [x, y]), ctl.signal);
      if (ctl !== this.inflight) return; // a newer click superseded this one
      this.state.response = resp; // replaces any previous overlay
      this.state.pending = false;
    } catch (err) {
      if (ctl !== this.inflight) return;
      this.state.pending = false;
      if (err instanceof DOMException && err.name === "AbortError") return;
      // non-blocking banner; the previous overlay stays on screen
      this.state.error =
        err instanceof ServiceError
          ? `measurement failed (${err.status})`
          : `service unreachable: ${String(err)}`;
    } finally {
      if (ctl === this.inflight) this.inflight = null;
      this.emit();
    }
  }

  /** Copy the current fused measurement into longitudinal slot A or B. */
  captureSlot(which: "A" | "B") {
    if (!this.state.response) return;
    this.state.slots[which] = {
      label: which,
      fusedLongMm: this.state.response.fused.long.mm,
    };
    this.state.assessment = null;
    this.emit();
  }

  clearSlot(which: "A" | "B") {
    this.state.slots[which] = null;
    this.state.assessment = null;
    this.emit();
  }

  get assessReady(): boolean {
    return this.state.slots.A !== null && this.state.slots.B !== null;
  }

  async assessPair(): Promise<void> {
    const { A, B } = this.state.slots;
    if (!A || !B) return;
    try {
      this.state.assessment = await assess(this.base, A.fusedLongMm, B.fusedLongMm);
      this.state.error = null;
    } catch (err) {
      this.state.error =
        err instanceof ServiceError
          ? `assessment failed (${err.status})`
          : `service unreachable: ${String(err)}`;
    }
    this.emit();
  }
}
