import { describe, expect, it } from "vitest";

import { TIMESERIES_HEADER, column, parseChannelStats, parseSpectrum, parseTimeSeries } from "../src/csv.js";

const SAMPLE =
  TIMESERIES_HEADER +
  "\n0.0,1.0,78.9,4500.0,0.1,0.01,0.0,0.0,1e-15,nan,nan\n" +
  "0.5,0.9,70.0,4100.0,0.09,0.009,-0.2,1e-14,2e-15,0.001,0.01\n";

describe("time-series parsing", () => {
  it("reads columns by name", () => {
    const ts = parseTimeSeries(SAMPLE);
    expect(ts.length).toBe(2);
    expect(column(ts, "t")).toEqual([0.0, 0.5]);
    expect(column(ts, "ke")).toEqual([1.0, 0.9]);
    expect(Number.isNaN(column(ts, "err_l2")[0])).toBe(true);
    expect(column(ts, "err_l2")[1]).toBeCloseTo(0.001, 12);
  });

  it("rejects foreign headers", () => {
    expect(() => parseTimeSeries("time,energy\n0,1\n")).toThrow(/header/);
  });

  it("rejects ragged rows", () => {
    expect(() => parseTimeSeries(TIMESERIES_HEADER + "\n0.0,1.0\n")).toThrow(/fields/);
  });

  it("rejects unknown column lookups", () => {
    const ts = parseTimeSeries(SAMPLE);
    expect(() => column(ts, "vorticity")).toThrow(/missing column/);
  });
});

describe("spectrum parsing", () => {
  it("reads the metadata comment and rows", () => {
    const spec = parseSpectrum(
      "kappa,energy\n# t = 10.0, grid_ke = 0.123\n0,0.0\n1,0.1\n2,0.02\n",
    );
    expect(spec.t).toBe(10.0);
    expect(spec.gridKe).toBeCloseTo(0.123, 15);
    expect(spec.kappa).toEqual([0, 1, 2]);
    expect(spec.energy[1]).toBeCloseTo(0.1, 15);
  });
});

describe("channel statistics parsing", () => {
  it("reads scalars and profile columns", () => {
    const text =
      "# tau_w=1.0,u_tau=1.0,re_tau=180.0,nu=0.005\n" +
      "x2,y_plus,u_mean,u_plus\n" +
      "-0.9,18.0,0.095,19.0\n-0.5,90.0,0.375,75.0\n";
    const prof = parseChannelStats(text);
    expect(prof.meta.get("re_tau")).toBe("180.0");
    expect(prof.data.get("y_plus")).toEqual([18.0, 90.0]);
  });
});
