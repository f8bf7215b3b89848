import { describe, expect, it } from "vitest";

import { TIMESERIES_HEADER, parseSpectrum, parseTimeSeries } from "../src/csv.js";
import {
  renderDissipation,
  renderEnergy,
  renderEnergyOverlay,
  renderSpectrum,
  renderVorticity,
} from "../src/figures.js";
import { decayCurve, latticeKeDecayRate, maxRelativeGap } from "../src/overlays.js";
import { parseSnapshot } from "../src/snapshot.js";
import { linearScale, logScale, ticks } from "../src/svg.js";

function syntheticSeries(n: number, nu: number, noise = 0): string {
  const rate = latticeKeDecayRate(nu);
  const rows = [TIMESERIES_HEADER];
  for (let i = 0; i < n; i++) {
    const t = 0.01 * i;
    const ke = Math.exp(-rate * t) * (1 + noise * Math.sin(20 * t));
    rows.push(
      [t, ke, 1, 1, 0.1, 0.01, -rate * ke, 1e-14, 1e-15, 1e-4, 1e-3].join(","),
    );
  }
  return rows.join("\n") + "\n";
}

describe("scales", () => {
  it("maps linearly and logarithmically", () => {
    const lin = linearScale([0, 10], [0, 100]);
    expect(lin(5)).toBeCloseTo(50, 12);
    const log = logScale([1, 100], [0, 2]);
    expect(log(10)).toBeCloseTo(1, 12);
  });

  it("produces round ticks", () => {
    const t = ticks([0, 1], 5);
    expect(t[0]).toBeCloseTo(0, 12);
    expect(t).toContain(0.4);
  });
});

describe("figure rendering", () => {
  it("draws a line per requested column with legend and axes", () => {
    const ts = parseTimeSeries(syntheticSeries(3, 1e-2));
    const svg = renderEnergy(ts, ["ke", "enstrophy"]);
    expect(svg).toContain("<svg");
    expect((svg.match(/<polyline/g) ?? []).length).toBe(2);
    expect(svg).toContain("ke");
  });

  it("keeps a 3-row series to 3 plotted points", () => {
    const ts = parseTimeSeries(syntheticSeries(3, 1e-2));
    const svg = renderEnergy(ts);
    const pts = /points="([^"]+)"/.exec(svg)![1].trim().split(" ");
    expect(pts.length).toBe(3);
  });

  it("renders the dissipation balance with the -dKE/dt overlay", () => {
    const ts = parseTimeSeries(syntheticSeries(10, 1e-2));
    const svg = renderDissipation(ts);
    expect(svg).toContain("-dKE/dt");
    expect((svg.match(/<polyline/g) ?? []).length).toBe(4);
  });

  it("renders spectra with the Kolmogorov guide on request", () => {
    const spec = parseSpectrum(
      "kappa,energy\n# t = 10.0, grid_ke = 0.111\n0,0\n1,0.1\n2,0.03\n3,0.01\n4,0.004\n",
    );
    expect(renderSpectrum(spec)).not.toContain("k^-5/3");
    expect(renderSpectrum(spec, true)).toContain("k^-5/3");
  });

  it("renders a vorticity heatmap with one cell per sample", () => {
    const header = {
      dim: 2,
      box: [
        [0, 1],
        [0, 1],
      ],
      m: [4, 4],
      t: 0,
      fields: ["u1", "u2", "omega"],
      dtype: "<f8",
      order: "C",
    };
    const zeros = new Float64Array(16);
    const omega = Float64Array.from({ length: 16 }, (_, i) => Math.sin(i));
    const buf = Buffer.concat([
      Buffer.from("HDIVILES1\n", "latin1"),
      Buffer.from(JSON.stringify(header) + "\n"),
      Buffer.from(zeros.buffer.slice(0)),
      Buffer.from(zeros.buffer.slice(0)),
      Buffer.from(omega.buffer),
    ]);
    const svg = renderVorticity(parseSnapshot(buf));
    expect((svg.match(/<rect/g) ?? []).length).toBe(16 + 1); // cells + background
  });
});

describe("decay overlay", () => {
  it("reports zero gap for exact synthetic decay", () => {
    const ts = parseTimeSeries(syntheticSeries(50, 1e-2));
    const { maxRelativeGap: gap } = renderEnergyOverlay(ts, 1e-2);
    expect(gap).toBeLessThan(1e-12);
  });

  it("measures an injected perturbation", () => {
    const ts = parseTimeSeries(syntheticSeries(50, 1e-2, 5e-3));
    const { maxRelativeGap: gap } = renderEnergyOverlay(ts, 1e-2);
    expect(gap).toBeGreaterThan(1e-3);
    expect(gap).toBeLessThan(1.1e-2);
  });

  it("computes gaps against explicit references", () => {
    const t = [0, 1, 2];
    const ref = decayCurve(t, 2.0, 0.5);
    const data = ref.map((v, i) => (i === 1 ? v * 1.01 : v));
    expect(maxRelativeGap(data, ref)).toBeCloseTo(0.01, 6);
  });
});
