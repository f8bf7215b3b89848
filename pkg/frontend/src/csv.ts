/** Readers for the solver's CSV outputs.
 *
 * The time-series contract is the fixed 11-column header below; spectrum
 * files carry a `kappa,energy` header plus one comment line with `t` and the
 * sampled-grid kinetic energy; channel-statistics files start with one
 * comment line of scalars.
 */

import { readFileSync } from "node:fs";

export const TIMESERIES_HEADER =
  "t,ke,enstrophy,palinstrophy,eps_visc,eps_upw,dke_dt,budget_residual,div_max,err_l2,err_h1";

export interface TimeSeries {
  columns: string[];
  /** column name -> values, one entry per record */
  data: Map<string, number[]>;
  length: number;
}

export function parseTimeSeries(text: string): TimeSeries {
  const lines = text.trim().split(/\r?\n/);
  if (lines[0] !== TIMESERIES_HEADER) {
    throw new Error(`unexpected time-series header: ${lines[0]}`);
  }
  const columns = lines[0].split(",");
  const data = new Map<string, number[]>(columns.map((c) => [c, []]));
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new Error(`row ${i} has ${parts.length} fields, expected ${columns.length}`);
    }
    parts.forEach((tok, j) => data.get(columns[j])!.push(Number(tok)));
  }
  return { columns, data, length: lines.length - 1 };
}

export function readTimeSeries(path: string): TimeSeries {
  return parseTimeSeries(readFileSync(path, "utf-8"));
}

export function column(ts: TimeSeries, name: string): number[] {
  const col = ts.data.get(name);
  if (!col) throw new Error(`missing column ${name}`);
  return col;
}

export interface Spectrum {
  t: number;
  gridKe: number;
  kappa: number[];
  energy: number[];
}

export function parseSpectrum(text: string): Spectrum {
  const lines = text.trim().split(/\r?\n/);
  if (lines[0] !== "kappa,energy") {
    throw new Error(`unexpected spectrum header: ${lines[0]}`);
  }
  const meta = /t = ([^,]+), grid_ke = (.+)$/.exec(lines[1]);
  if (!meta) throw new Error("spectrum file lacks its metadata comment");
  const kappa: number[] = [];
  const energy: number[] = [];
  for (let i = 2; i < lines.length; i++) {
    const [k, e] = lines[i].split(",");
    kappa.push(Number(k));
    energy.push(Number(e));
  }
  return { t: Number(meta[1]), gridKe: Number(meta[2]), kappa, energy };
}

export function readSpectrum(path: string): Spectrum {
  return parseSpectrum(readFileSync(path, "utf-8"));
}

export interface ChannelProfile {
  meta: Map<string, string>;
  columns: string[];
  data: Map<string, number[]>;
}

export function parseChannelStats(text: string): ChannelProfile {
  const lines = text.trim().split(/\r?\n/);
  if (!lines[0].startsWith("#")) {
    throw new Error("channel statistics must start with a scalar comment line");
  }
  const meta = new Map<string, string>();
  for (const item of lines[0].slice(1).split(",")) {
    const [key, value] = item.split("=");
    if (key && value !== undefined) meta.set(key.trim(), value.trim());
  }
  const columns = lines[1].split(",");
  const data = new Map<string, number[]>(columns.map((c) => [c, []]));
  for (let i = 2; i < lines.length; i++) {
    lines[i].split(",").forEach((tok, j) => data.get(columns[j])!.push(Number(tok)));
  }
  return { meta, columns, data };
}

export function readChannelStats(path: string): ChannelProfile {
  return parseChannelStats(readFileSync(path, "utf-8"));
}
