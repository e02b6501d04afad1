"""Classifier-agnostic evaluation plus a nearest-neighbor separability probe.

The k-NN baseline runs on raw rendered vectors (no feature extraction):
it exists to show the datasets are separable, not to compete with a
trained model.  All ranking is deterministic; ties break toward the
smaller label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .artifact import Dataset

__all__ = [
    "PredictionSet",
    "EvalError",
    "topk_accuracy",
    "confusion",
    "knn_classify",
    "map_labels",
    "evaluation_report",
]


class EvalError(ValueError):
    """Invalid evaluation input."""


@dataclass
class PredictionSet:
    """Per-sample ranked label lists (descending score) with true labels."""

    true_labels: np.ndarray  # (n,) int
    ranked: list[np.ndarray]  # n arrays of distinct labels, best first

    def __post_init__(self):
        self.true_labels = np.asarray(self.true_labels, dtype=np.int64)
        if len(self.true_labels) != len(self.ranked):
            raise EvalError("true_labels and ranked lists disagree in length")
        for row in self.ranked:
            if len(np.unique(row)) != len(row):
                raise EvalError("ranked label list contains duplicates")

    @property
    def n_samples(self) -> int:
        return len(self.true_labels)


def topk_accuracy(p: PredictionSet, k: int) -> float:
    """Fraction of samples whose true label appears in the first k guesses."""
    if k < 1:
        raise EvalError(f"k={k} must be >= 1")
    if p.n_samples == 0:
        raise EvalError("empty prediction set")
    hits = sum(
        1 for true, row in zip(p.true_labels, p.ranked) if true in row[:k]
    )
    return hits / p.n_samples


def confusion(p: PredictionSet) -> tuple[np.ndarray, np.ndarray]:
    """(labels, matrix): rows = true label, columns = top-1 prediction."""
    if p.n_samples == 0:
        raise EvalError("empty prediction set")
    top1 = np.array([row[0] for row in p.ranked], dtype=np.int64)
    labels = np.unique(np.concatenate([p.true_labels, top1]))
    index = {int(lbl): i for i, lbl in enumerate(labels)}
    matrix = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for true, pred in zip(p.true_labels, top1):
        matrix[index[int(true)], index[int(pred)]] += 1
    return labels, matrix


def knn_classify(
    train: Dataset,
    test: Dataset,
    neighbors: int = 5,
    chunk: int = 256,
) -> PredictionSet:
    """Euclidean k-NN with inverse-distance-weighted votes.

    Neighbor selection sorts on (distance, label), so the result does not
    depend on training-sample order; vote ties rank the smaller label first.
    """
    if train.n_samples == 0:
        raise EvalError("empty training set")
    if neighbors < 1:
        raise EvalError(f"neighbors={neighbors} must be >= 1")
    if train.n_points != test.n_points:
        raise EvalError(
            f"n_points mismatch: train {train.n_points}, test {test.n_points}"
        )
    x_train = train.data.astype(np.float64)
    labels_train = train.labels.astype(np.int64)
    universe = np.unique(labels_train)
    label_pos = {int(lbl): i for i, lbl in enumerate(universe)}
    sq_train = np.einsum("ij,ij->i", x_train, x_train)
    k = min(neighbors, train.n_samples)

    ranked: list[np.ndarray] = []
    for start in range(0, test.n_samples, chunk):
        block = test.data[start : start + chunk].astype(np.float64)
        sq_block = np.einsum("ij,ij->i", block, block)
        d2 = sq_block[:, None] + sq_train[None, :] - 2.0 * (block @ x_train.T)
        np.maximum(d2, 0.0, out=d2)
        for i in range(len(block)):
            order = np.lexsort((labels_train, d2[i]))[:k]
            weights = 1.0 / np.maximum(np.sqrt(d2[i][order]), 1e-12)
            votes = np.zeros(len(universe))
            for j, w in zip(order, weights):
                votes[label_pos[int(labels_train[j])]] += w
            # descending votes, ascending label on ties; labels with zero
            # votes keep their label-order tail so ranked lists are complete
            rank = np.lexsort((universe, -votes))
            ranked.append(universe[rank])
    return PredictionSet(
        true_labels=test.labels.astype(np.int64), ranked=ranked
    )


def map_labels(p: PredictionSet, mapping: dict[int, int]) -> PredictionSet:
    """Relabel truth and rankings (e.g. by extinction class); rankings are
    deduplicated keeping the best occurrence of each mapped label."""
    try:
        new_true = np.array([mapping[int(t)] for t in p.true_labels], dtype=np.int64)
    except KeyError as exc:
        raise EvalError(f"label {exc.args[0]} missing from the relabel map") from None
    new_ranked = []
    for row in p.ranked:
        seen = set()
        out = []
        for lbl in row:
            if int(lbl) not in mapping:
                raise EvalError(f"label {int(lbl)} missing from the relabel map")
            m = mapping[int(lbl)]
            if m not in seen:
                seen.add(m)
                out.append(m)
        new_ranked.append(np.array(out, dtype=np.int64))
    return PredictionSet(true_labels=new_true, ranked=new_ranked)


def evaluation_report(p: PredictionSet, max_k: int = 5) -> dict:
    """JSON-ready report: per-k accuracies plus the confusion matrix."""
    labels, matrix = confusion(p)
    return {
        "n_samples": p.n_samples,
        "topk_accuracy": {
            str(k): topk_accuracy(p, k) for k in range(1, max_k + 1)
        },
        "confusion": {
            "labels": [int(x) for x in labels],
            "matrix": matrix.tolist(),
        },
    }
