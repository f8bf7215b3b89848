/** Minimal SVG figure construction: scales, axes, polylines, heatmap cells.
 * Figures are plain SVG strings, so rendering needs no DOM. */

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
  log: boolean;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const f = ((v: number) => r0 + ((v - d0) / (d1 - d0 || 1)) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  f.log = false;
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const d0 = Math.log10(domain[0]);
  const d1 = Math.log10(domain[1]);
  const [r0, r1] = range;
  const f = ((v: number) => r0 + ((Math.log10(v) - d0) / (d1 - d0 || 1)) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  f.log = true;
  return f;
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) throw new Error("no finite values to plot");
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

export function positiveExtent(values: number[]): [number, number] {
  const positive = values.filter((v) => Number.isFinite(v) && v > 0);
  if (!positive.length) throw new Error("log axis needs positive values");
  return extent(positive);
}

export function ticks([lo, hi]: [number, number], n = 6): number[] {
  const raw = (hi - lo) / Math.max(n, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((s) => s * mag).find((s) => (hi - lo) / s <= n) ?? mag * 10;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * step; v += step) out.push(v);
  return out;
}

export function logTicks([lo, hi]: [number, number]): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-12); Math.pow(10, e) <= hi * (1 + 1e-12); e++) {
    out.push(Math.pow(10, e));
  }
  return out.length ? out : [lo, hi];
}

const fmt = (v: number) => {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) return String(Number(v.toPrecision(4)));
  return v.toExponential(0).replace("+", "");
};

export interface Frame {
  width: number;
  height: number;
  margin: { left: number; right: number; top: number; bottom: number };
  x: Scale;
  y: Scale;
}

export function makeFrame(
  xDomain: [number, number],
  yDomain: [number, number],
  opts: { width?: number; height?: number; logX?: boolean; logY?: boolean } = {},
): Frame {
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const margin = { left: 64, right: 16, top: 28, bottom: 44 };
  const xr: [number, number] = [margin.left, width - margin.right];
  const yr: [number, number] = [height - margin.bottom, margin.top];
  const x = opts.logX ? logScale(xDomain, xr) : linearScale(xDomain, xr);
  const y = opts.logY ? logScale(yDomain, yr) : linearScale(yDomain, yr);
  return { width, height, margin, x, y };
}

export function polyline(frame: Frame, xs: number[], ys: number[]): string {
  const pts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    const xv = xs[i];
    const yv = ys[i];
    if (!Number.isFinite(xv) || !Number.isFinite(yv)) continue;
    if (frame.y.log && yv <= 0) continue;
    if (frame.x.log && xv <= 0) continue;
    pts.push(`${frame.x(xv).toFixed(2)},${frame.y(yv).toFixed(2)}`);
  }
  return pts.join(" ");
}

export function axesLabeled(frame: Frame, xLabel: string, yLabel: string): string {
  const { margin, width, height, x, y } = frame;
  const parts: string[] = [];
  const x0 = margin.left;
  const x1 = width - margin.right;
  const y0 = height - margin.bottom;
  const y1 = margin.top;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);
  const xt = x.log ? logTicks(x.domain) : ticks(x.domain);
  for (const v of xt) {
    const px = x(v);
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${px}" y="${y0 + 18}" font-size="11" text-anchor="middle">${fmt(v)}</text>`,
    );
  }
  const yt = y.log ? logTicks(y.domain) : ticks(y.domain);
  for (const v of yt) {
    const py = y(v);
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 8}" y="${py + 4}" font-size="11" text-anchor="end">${fmt(v)}</text>`,
    );
  }
  if (xLabel) {
    parts.push(
      `<text x="${(x0 + x1) / 2}" y="${height - 8}" font-size="12" text-anchor="middle">${xLabel}</text>`,
    );
  }
  if (yLabel) {
    parts.push(
      `<text x="14" y="${(y0 + y1) / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 ${(y0 + y1) / 2})">${yLabel}</text>`,
    );
  }
  return parts.join("\n");
}

export interface Series {
  label: string;
  xs: number[];
  ys: number[];
  color: string;
  dashed?: boolean;
}

const PALETTE = ["#1f6fb4", "#d1493e", "#3b9c4f", "#8d5bb8", "#c98a1f", "#4a4a4a"];

export function seriesColor(index: number): string {
  return PALETTE[index % PALETTE.length];
}

export function renderFigure(frame: Frame, series: Series[], title: string, xLabel: string, yLabel: string): string {
  const body: string[] = [];
  body.push(axesLabeled(frame, xLabel, yLabel));
  series.forEach((s) => {
    const dash = s.dashed ? ' stroke-dasharray="6 4"' : "";
    body.push(
      `<polyline fill="none" stroke="${s.color}" stroke-width="1.5"${dash} points="${polyline(frame, s.xs, s.ys)}"/>`,
    );
  });
  // legend
  series.forEach((s, i) => {
    const lx = frame.width - frame.margin.right - 150;
    const ly = frame.margin.top + 14 * (i + 1);
    const dash = s.dashed ? ' stroke-dasharray="6 4"' : "";
    body.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" y2="${ly - 4}" stroke="${s.color}" stroke-width="1.5"${dash}/>`);
    body.push(`<text x="${lx + 28}" y="${ly}" font-size="11">${s.label}</text>`);
  });
  body.push(
    `<text x="${frame.width / 2}" y="16" font-size="13" text-anchor="middle">${title}</text>`,
  );
  return svgDocument(frame.width, frame.height, body.join("\n"));
}

export function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n${body}\n</svg>\n`
  );
}

/** Symmetric blue-white-red colormap for signed fields. */
export function diverging(v: number, vmax: number): string {
  const t = Math.max(-1, Math.min(1, vmax > 0 ? v / vmax : 0));
  const lerp = (a: number, b: number, s: number) => Math.round(a + (b - a) * s);
  if (t < 0) {
    const s = 1 + t;
    return `rgb(${lerp(33, 255, s)},${lerp(102, 255, s)},${lerp(172, 255, s)})`;
  }
  const s = 1 - t;
  return `rgb(${lerp(178, 255, s)},${lerp(24, 255, s)},${lerp(43, 255, s)})`;
}
