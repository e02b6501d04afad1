/** Top-k accuracy and confusion counts over softmax outputs. */

export interface Evaluation {
  nSamples: number;
  /** topk[k-1] = fraction with the true class among the k best scores */
  topk: number[];
  labels: number[];
  /** confusion[i][j]: true label i predicted (top-1) as label j */
  confusion: number[][];
}

export function rankRow(probs: ArrayLike<number>): number[] {
  const order = Array.from({ length: probs.length }, (_v, i) => i);
  // descending probability; ties toward the smaller class index
  order.sort((a, b) => probs[b] - probs[a] || a - b);
  return order;
}

export function evaluate(
  probs: Float32Array,
  nClasses: number,
  trueIndices: Int32Array,
  labelValues: number[],
  maxK = 5
): Evaluation {
  const n = trueIndices.length;
  if (probs.length !== n * nClasses) {
    throw new Error("probability matrix shape mismatch");
  }
  const k = Math.min(maxK, nClasses);
  const hits = new Array(maxK).fill(0);
  const confusion = Array.from({ length: nClasses }, () =>
    new Array(nClasses).fill(0)
  );
  for (let i = 0; i < n; i++) {
    const order = rankRow(probs.subarray(i * nClasses, (i + 1) * nClasses));
    confusion[trueIndices[i]][order[0]] += 1;
    const rank = order.indexOf(trueIndices[i]);
    for (let j = rank; j < maxK; j++) {
      if (rank < k) hits[j] += 1;
    }
  }
  return {
    nSamples: n,
    topk: hits.map((h) => h / n),
    labels: labelValues,
    confusion,
  };
}
