/** Reader for HDIVILES1 field snapshots: a magic line, one JSON header line,
 * then raw little-endian float64 blocks in C order, one per named field. */

import { readFileSync } from "node:fs";

const MAGIC = "HDIVILES1\n";

export interface SnapshotHeader {
  dim: number;
  box: [number, number][];
  m: number[];
  t: number;
  fields: string[];
  dtype: string;
  order: string;
}

export interface Snapshot {
  header: SnapshotHeader;
  fields: Map<string, Float64Array>;
}

export function parseSnapshot(buf: Buffer): Snapshot {
  if (buf.subarray(0, MAGIC.length).toString("latin1") !== MAGIC) {
    throw new Error("not an HDIVILES1 snapshot");
  }
  const nl = buf.indexOf(0x0a, MAGIC.length);
  if (nl < 0) throw new Error("snapshot header line is unterminated");
  const header = JSON.parse(buf.subarray(MAGIC.length, nl).toString("utf-8")) as SnapshotHeader;
  if (header.dtype !== "<f8") throw new Error(`unsupported dtype ${header.dtype}`);

  const count = header.m.reduce((a, b) => a * b, 1);
  const fields = new Map<string, Float64Array>();
  let offset = nl + 1;
  for (const name of header.fields) {
    const bytes = count * 8;
    if (offset + bytes > buf.length) {
      throw new Error(`snapshot block for ${name} is truncated`);
    }
    // copy to guarantee alignment for the Float64Array view
    const block = Buffer.alloc(bytes);
    buf.copy(block, 0, offset, offset + bytes);
    fields.set(name, new Float64Array(block.buffer, 0, count));
    offset += bytes;
  }
  return { header, fields };
}

export function readSnapshot(path: string): Snapshot {
  return parseSnapshot(readFileSync(path));
}

/** Value at grid index (i, j) of a 2D C-ordered field. */
export function at2d(snapshot: Snapshot, name: string, i: number, j: number): number {
  const [, m2] = snapshot.header.m;
  const field = snapshot.fields.get(name);
  if (!field) throw new Error(`snapshot has no field ${name}`);
  return field[i * m2 + j];
}

/** Cell-centered sample coordinates along one axis. */
export function axisCoords(header: SnapshotHeader, axis: number): number[] {
  const [lo, hi] = header.box[axis];
  const m = header.m[axis];
  return Array.from({ length: m }, (_, j) => lo + ((j + 0.5) * (hi - lo)) / m);
}
