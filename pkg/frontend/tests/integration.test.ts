// End-to-end round trip against a live service.
//
// Start the backend with demo data, then run with MEAF_SERVICE_URL set:
//
//   meaformer serve --step1 s1.meaf --step2 s2.meaf --demo-data demo.mead &
//   MEAF_SERVICE_URL=http://127.0.0.1:8008 npm test
//
// Skipped when the variable is absent so the unit suite stays hermetic.

import { describe, expect, it } from "vitest";

import { assess, fetchDemo, measure } from "../src/api.js";
import { buildMeasureRequest, fusedReadout, assessmentReadout } from "../src/state.js";
import { decodePlane } from "../src/api.js";

const base = process.env.MEAF_SERVICE_URL;
const suite = base ? describe : describe.skip;

suite("live service round trip", () => {
  it("scripted click: displayed lengths equal the payload fields exactly", async () => {
    const t0 = Date.now();
    const item = await fetchDemo(base!, 0);
    const img = {
      plane: decodePlane(item.image.b64, item.image.width, item.image.height),
      width: item.image.width,
      height: item.image.height,
      spacingMmPerPx: item.spacing_mm_per_px,
      datasetIndex: item.index,
    };
    const resp = await measure(
      base!, buildMeasureRequest(img, item.suggested_click));
    const elapsed = Date.now() - t0;

    expect(Object.keys(resp.sources).sort()).toEqual(
      ["heatmap", "regression", "segmentation"]);
    // the rendered readout is string formatting over payload fields only
    const readout = fusedReadout(resp);
    expect(readout).toBe(
      `long ${resp.fused.long.mm.toFixed(2)} mm | short ${resp.fused.short.mm.toFixed(2)} mm`);
    expect(resp.contour.length).toBeGreaterThan(4);
    expect(elapsed).toBeLessThan(2000);
  }, 15000);

  it("longitudinal pair 20 -> 13 mm renders PR", async () => {
    const a = await assess(base!, 20, 13);
    expect(a.response_class).toBe("PR");
    expect(assessmentReadout(a)).toBe("PR (−35.0%)");
  });
});
