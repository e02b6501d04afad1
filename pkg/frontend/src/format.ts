/**
 * Readers for the binary pattern container and its JSON sidecars.
 *
 * Container layout (little endian): "ULBD" magic, u16 version, u64
 * n_samples, u32 n_points, f32 window min/max, then per sample a u16
 * label followed by n_points f32 intensities.
 */

import * as fs from "fs";

export interface UlbdDataset {
  nSamples: number;
  nPoints: number;
  twoThetaMin: number;
  twoThetaMax: number;
  labels: Int32Array;
  /** row-major [nSamples, nPoints] */
  data: Float32Array;
}

export const ULBD_MAGIC = "ULBD";
export const ULBD_VERSION = 1;
const HEADER_BYTES = 26;

export function parseUlbd(buf: Buffer, name = "<buffer>"): UlbdDataset {
  if (buf.length < HEADER_BYTES) {
    throw new Error(`${name}: truncated header (${buf.length} bytes)`);
  }
  if (buf.toString("latin1", 0, 4) !== ULBD_MAGIC) {
    throw new Error(`${name}: bad magic at offset 0`);
  }
  const version = buf.readUInt16LE(4);
  if (version !== ULBD_VERSION) {
    throw new Error(`${name}: unsupported format version ${version}`);
  }
  const nSamples = Number(buf.readBigUInt64LE(6));
  const nPoints = buf.readUInt32LE(14);
  const twoThetaMin = buf.readFloatLE(18);
  const twoThetaMax = buf.readFloatLE(22);
  const record = 2 + 4 * nPoints;
  const expected = HEADER_BYTES + nSamples * record;
  if (buf.length !== expected) {
    throw new Error(
      `${name}: header declares ${nSamples} samples of ${nPoints} points ` +
        `(${expected} bytes), file has ${buf.length}`
    );
  }
  const labels = new Int32Array(nSamples);
  const data = new Float32Array(nSamples * nPoints);
  // record payloads are not 4-byte aligned; copy through a scratch buffer
  const scratch = Buffer.alloc(nPoints * 4);
  const view = new Float32Array(scratch.buffer, 0, nPoints);
  let off = HEADER_BYTES;
  for (let i = 0; i < nSamples; i++) {
    labels[i] = buf.readUInt16LE(off);
    off += 2;
    buf.copy(scratch, 0, off, off + 4 * nPoints);
    data.set(view, i * nPoints);
    off += 4 * nPoints;
  }
  return { nSamples, nPoints, twoThetaMin, twoThetaMax, labels, data };
}

export function readUlbd(path: string): UlbdDataset {
  return parseUlbd(fs.readFileSync(path), path);
}

export function metaPathFor(datasetPath: string): string {
  return datasetPath.replace(/\.[^./\\]+$/, "") + ".meta.json";
}

export function readMeta(datasetPath: string): Record<string, unknown> {
  return JSON.parse(fs.readFileSync(metaPathFor(datasetPath), "utf8"));
}

/** Class report written by the generator's `classes` command. */
export interface ClassReport {
  family: string;
  n_classes: number;
  class_of: Record<string, number>;
  theoretical_topk_pct: Record<string, number>;
}

export function readClassReport(path: string): ClassReport {
  const report = JSON.parse(fs.readFileSync(path, "utf8"));
  for (const field of ["class_of", "n_classes", "theoretical_topk_pct"]) {
    if (!(field in report)) {
      throw new Error(`${path}: not a class report (missing ${field})`);
    }
  }
  return report as ClassReport;
}
