/** Figure builders: each consumes parsed files and returns an SVG string. */

import { TimeSeries, column, Spectrum, ChannelProfile } from "./csv.js";
import { Snapshot, axisCoords } from "./snapshot.js";
import {
  Frame,
  Series,
  diverging,
  extent,
  makeFrame,
  positiveExtent,
  renderFigure,
  seriesColor,
  svgDocument,
} from "./svg.js";
import { decayCurve, kolmogorovGuide, latticeKeDecayRate, maxRelativeGap } from "./overlays.js";

function seriesFromColumns(ts: TimeSeries, names: string[], logY: boolean): {
  frame: Frame;
  series: Series[];
} {
  const t = column(ts, "t");
  const all: number[] = [];
  names.forEach((n) => all.push(...column(ts, n)));
  const yDomain = logY ? positiveExtent(all) : extent(all);
  const frame = makeFrame(extent(t), yDomain, { logY });
  const series = names.map((n, i) => ({
    label: n,
    xs: t,
    ys: column(ts, n),
    color: seriesColor(i),
  }));
  return { frame, series };
}

/** Kinetic energy, enstrophy, palinstrophy history (one quantity per call
 * keeps scales readable; pass several to overlay them). */
export function renderEnergy(ts: TimeSeries, names = ["ke"], logY = false): string {
  const { frame, series } = seriesFromColumns(ts, names, logY);
  return renderFigure(frame, series, "temporal development", "t", names.join(", "));
}

/** Velocity error growth on a log axis. */
export function renderErrors(ts: TimeSeries, logY = true): string {
  const { frame, series } = seriesFromColumns(ts, ["err_l2", "err_h1"], logY);
  return renderFigure(frame, series, "error against the exact solution", "t", "error");
}

/** Viscous/upwind dissipation rates next to the measured -dKE/dt. */
export function renderDissipation(ts: TimeSeries): string {
  const t = column(ts, "t");
  const visc = column(ts, "eps_visc");
  const upw = column(ts, "eps_upw");
  const total = visc.map((v, i) => v + upw[i]);
  const minus_dke = column(ts, "dke_dt").map((v) => -v);
  const all = [...visc, ...upw, ...total, ...minus_dke];
  const frame = makeFrame(extent(t), extent(all));
  const series: Series[] = [
    { label: "viscous", xs: t, ys: visc, color: seriesColor(0) },
    { label: "upwind", xs: t, ys: upw, color: seriesColor(1) },
    { label: "total", xs: t, ys: total, color: seriesColor(2) },
    { label: "-dKE/dt", xs: t, ys: minus_dke, color: seriesColor(3), dashed: true },
  ];
  return renderFigure(frame, series, "dissipation-rate balance", "t", "dissipation rate");
}

export interface OverlayResult {
  svg: string;
  maxRelativeGap: number;
}

/** Kinetic energy with the closed-form lattice decay overlay. */
export function renderEnergyOverlay(ts: TimeSeries, nu: number, rate?: number): OverlayResult {
  const t = column(ts, "t");
  const ke = column(ts, "ke");
  const reference = decayCurve(t, ke[0], rate ?? latticeKeDecayRate(nu));
  const gap = maxRelativeGap(ke, reference);
  const frame = makeFrame(extent(t), extent([...ke, ...reference]));
  const series: Series[] = [
    { label: "ke (computed)", xs: t, ys: ke, color: seriesColor(0) },
    { label: "exact decay", xs: t, ys: reference, color: seriesColor(1), dashed: true },
  ];
  const svg = renderFigure(frame, series, "kinetic energy vs exact decay", "t", "ke");
  return { svg, maxRelativeGap: gap };
}

/** Shell-averaged energy spectrum, optionally with the -5/3 guide. */
export function renderSpectrum(spec: Spectrum, guide = false): string {
  const kappa = spec.kappa.filter((k) => k > 0);
  const energy = spec.energy.slice(spec.kappa[0] === 0 ? 1 : 0);
  const floor = Math.max(...energy) * 1e-14;
  const shown = energy.map((e) => Math.max(e, floor));
  const frame = makeFrame(positiveExtent(kappa), positiveExtent(shown), {
    logX: true,
    logY: true,
  });
  const series: Series[] = [
    { label: `E(k), t=${spec.t}`, xs: kappa, ys: shown, color: seriesColor(0) },
  ];
  if (guide) {
    const i0 = energy.indexOf(Math.max(...energy));
    series.push({
      label: "k^-5/3 guide",
      xs: kappa,
      ys: kolmogorovGuide(kappa, kappa[i0], energy[i0]),
      color: seriesColor(5),
      dashed: true,
    });
  }
  return renderFigure(frame, series, "kinetic-energy spectrum", "k", "E(k)");
}

/** Law-of-the-wall profile: U+ against y+ on a semilog axis. */
export function renderWall(profile: ChannelProfile): string {
  const yp = profile.data.get("y_plus")!;
  const up = profile.data.get("u_plus")!;
  const half = Math.floor(yp.length / 2);
  const xs = yp.slice(0, half);
  const ys = up.slice(0, half);
  const positive = xs.map((v, i) => [v, ys[i]] as const).filter(([v]) => v > 0);
  const frame = makeFrame(
    positiveExtent(positive.map(([v]) => v)),
    extent(positive.map(([, u]) => u)),
    { logX: true },
  );
  const series: Series[] = [
    {
      label: "U+",
      xs: positive.map(([v]) => v),
      ys: positive.map(([, u]) => u),
      color: seriesColor(0),
    },
  ];
  return renderFigure(frame, series, "mean profile in wall units", "y+", "U+");
}

/** 2D vorticity heatmap from a field snapshot. */
export function renderVorticity(snapshot: Snapshot): string {
  if (snapshot.header.dim !== 2) {
    throw new Error("vorticity heatmaps are rendered for 2D snapshots only");
  }
  const omega = snapshot.fields.get("omega");
  if (!omega) throw new Error("snapshot has no vorticity field");
  const [m1, m2] = snapshot.header.m;
  const size = 480;
  const margin = 40;
  const cw = size / m1;
  const ch = size / m2;
  let vmax = 0;
  omega.forEach((v) => (vmax = Math.max(vmax, Math.abs(v))));
  const cells: string[] = [];
  for (let i = 0; i < m1; i++) {
    for (let j = 0; j < m2; j++) {
      const v = omega[i * m2 + j];
      const px = margin + i * cw;
      const py = margin + (m2 - 1 - j) * ch;
      cells.push(
        `<rect x="${px.toFixed(2)}" y="${py.toFixed(2)}" width="${(cw + 0.5).toFixed(2)}" ` +
          `height="${(ch + 0.5).toFixed(2)}" fill="${diverging(v, vmax)}"/>`,
      );
    }
  }
  cells.push(
    `<text x="${margin + size / 2}" y="24" font-size="13" text-anchor="middle">` +
      `vorticity, t=${snapshot.header.t} (max |w| = ${vmax.toPrecision(3)})</text>`,
  );
  return svgDocument(size + 2 * margin, size + 2 * margin, cells.join("\n"));
}
