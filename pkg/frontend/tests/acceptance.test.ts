/** Secondary-component acceptance: the figure layer reproduces the
 * energy/error/spectrum panels from real solver output, and the exact-decay
 * overlay on the accuracy-benchmark run agrees with the computed kinetic
 * energy to better than 1e-3 relative. */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { describe, expect, it } from "vitest";

import { parseTimeSeries } from "../src/csv.js";
import { renderEnergy, renderEnergyOverlay, renderErrors } from "../src/figures.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixture = join(here, "fixtures", "criterion5_timeseries.csv");

describe("acceptance: figure panels from the accuracy-benchmark run", () => {
  const ts = parseTimeSeries(readFileSync(fixture, "utf-8"));

  it("renders the energy panel", () => {
    const svg = renderEnergy(ts, ["ke"]);
    expect(svg).toContain("<polyline");
    expect(svg).toContain("temporal development");
  });

  it("renders the error-growth panel on a log axis", () => {
    const svg = renderErrors(ts);
    expect(svg).toContain("error against the exact solution");
  });

  it("overlay gap against the exact decay stays below 1e-3", () => {
    const { svg, maxRelativeGap } = renderEnergyOverlay(ts, 1e-2);
    expect(svg).toContain("exact decay");
    console.log(`criterion 11: max relative overlay gap = ${maxRelativeGap.toExponential(3)}`);
    expect(maxRelativeGap).toBeLessThan(1e-3);
  });
});
