// Types mirroring the measurement service JSON and a thin fetch client.
// The UI never recomputes lengths or classes: every number it shows is a
// field of these payloads.

export interface AxisMeasurement {
  a: [number, number];
  b: [number, number];
  px: number;
  mm: number;
}

export interface SourceMeasurement {
  long: AxisMeasurement;
  short: AxisMeasurement;
  source: string;
  flags: string[];
}

export interface MeasureResponse {
  box: { x0: number; y0: number; x1: number; y1: number };
  loi: { x0: number; y0: number; x1: number; y1: number };
  contour: [number, number][];
  sources: Record<string, SourceMeasurement>;
  fused: SourceMeasurement;
  flags: string[];
  latency_ms: number;
}

export interface AssessResponse {
  response_class: string;
  percent_change: number;
  baseline_long_mm: number;
  followup_long_mm: number;
}

export interface DemoItem {
  index: number;
  image: { b64: string; width: number; height: number };
  spacing_mm_per_px: number;
  suggested_click: [number, number];
}

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function post<T>(base: string, path: string, body: unknown,
                       signal?: AbortSignal): Promise<T> {
  const resp = await fetch(base + path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
    signal,
  });
  if (!resp.ok) {
    const text = await resp.text();
    throw new ServiceError(resp.status, text);
  }
  return (await resp.json()) as T;
}

export interface MeasureRequest {
  image:
    | { b64: string; width: number; height: number }
    | { dataset_index: number };
  click: [number, number];
  spacing_mm_per_px: number;
}

export function measure(base: string, req: MeasureRequest,
                        signal?: AbortSignal): Promise<MeasureResponse> {
  return post<MeasureResponse>(base, "/measure", req, signal);
}

export function assess(base: string, baselineMm: number,
                       followupMm: number): Promise<AssessResponse> {
  return post<AssessResponse>(base, "/assess", {
    baseline_long_mm: baselineMm,
    followup_long_mm: followupMm,
  });
}

export async function fetchDemo(base: string, index: number): Promise<DemoItem> {
  const resp = await fetch(`${base}/demo/${index}`);
  if (!resp.ok) throw new ServiceError(resp.status, await resp.text());
  return (await resp.json()) as DemoItem;
}

export function decodePlane(b64: string, width: number,
                            height: number): Float32Array {
  const raw = atob(b64);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  const plane = new Float32Array(bytes.buffer);
  if (plane.length !== width * height) {
    throw new Error(`plane holds ${plane.length} values, expected ${width * height}`);
  }
  return plane;
}
