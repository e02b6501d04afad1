/**
 * Dataset preparation: label mapping, contrast transform, and the
 * first-convolution patch extraction done once on load.
 */

import { UlbdDataset } from "./format";
import { ModelConfig, patchCount } from "./model";

export type LabelMode = "space-group" | "extinction-class";

export interface Prepared {
  /** flat [nSamples, positions, k] patch tensor data */
  patches: Float32Array;
  positions: number;
  kernel: number;
  nSamples: number;
  /** dense class indices 0..nClasses-1 */
  indices: Int32Array;
  /** class index -> original label value */
  labelValues: number[];
}

export function mapLabels(
  raw: Int32Array,
  mode: LabelMode,
  classOf?: Record<string, number>
): Int32Array {
  if (mode === "space-group") {
    return raw;
  }
  if (!classOf) {
    throw new Error("extinction-class mode needs a class report");
  }
  const mapped = new Int32Array(raw.length);
  for (let i = 0; i < raw.length; i++) {
    const cls = classOf[String(raw[i])];
    if (cls === undefined) {
      throw new Error(`label ${raw[i]} missing from the class map`);
    }
    mapped[i] = cls;
  }
  return mapped;
}

/** Dense re-indexing against a fixed universe so train/test agree. */
export function labelUniverse(...labelSets: Int32Array[]): number[] {
  const seen = new Set<number>();
  for (const labels of labelSets) {
    for (const l of labels) seen.add(l);
  }
  return [...seen].sort((a, b) => a - b);
}

export function prepare(
  ds: UlbdDataset,
  labels: Int32Array,
  universe: number[],
  cfg: ModelConfig
): Prepared {
  const index = new Map(universe.map((v, i) => [v, i]));
  const indices = new Int32Array(ds.nSamples);
  for (let i = 0; i < ds.nSamples; i++) {
    const idx = index.get(labels[i]);
    if (idx === undefined) {
      throw new Error(`label ${labels[i]} outside the training universe`);
    }
    indices[i] = idx;
  }
  const k = cfg.conv1Kernel;
  const s = cfg.conv1Stride;
  const positions = patchCount(ds.nPoints, cfg);
  const patches = new Float32Array(ds.nSamples * positions * k);
  const gamma = cfg.inputGamma;
  const transformed = new Float32Array(ds.nPoints);
  for (let i = 0; i < ds.nSamples; i++) {
    const row = ds.data.subarray(i * ds.nPoints, (i + 1) * ds.nPoints);
    if (gamma === 1.0) {
      transformed.set(row);
    } else if (gamma === 0.5) {
      for (let j = 0; j < ds.nPoints; j++) transformed[j] = Math.sqrt(row[j]);
    } else {
      for (let j = 0; j < ds.nPoints; j++) transformed[j] = Math.pow(row[j], gamma);
    }
    for (let p = 0; p < positions; p++) {
      patches.set(
        transformed.subarray(p * s, p * s + k),
        (i * positions + p) * k
      );
    }
  }
  return {
    patches,
    positions,
    kernel: k,
    nSamples: ds.nSamples,
    indices,
    labelValues: universe,
  };
}
