"""Graph Connection Weights importance for directed feature graphs."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graph import FeatureGraph
from .masked_net import MaskedNet


@dataclass(frozen=True)
class ImportanceReport:
    scores: np.ndarray  # length p, indexed by original feature
    ranking: np.ndarray  # feature indices, best first

    def to_csv(self, path, feature_names: list[str] | None = None) -> None:
        rank = np.empty(len(self.ranking), dtype=np.int64)
        rank[self.ranking] = np.arange(1, len(self.ranking) + 1)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["feature_name", "score", "rank"])
            for j in self.ranking:
                name = feature_names[j] if feature_names else str(j)
                w.writerow([name, repr(float(self.scores[j])), int(rank[j])])


def rank_scores(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score; equal scores keep ascending index order."""
    return np.lexsort((np.arange(len(scores)), -np.asarray(scores)))


def gcw_scores(net: MaskedNet, g: FeatureGraph, p: int) -> ImportanceReport:
    """Per-feature sum of absolute weights touching its input node and its hidden neuron.

    For vertex j this is the masked row j of W_in (outgoing edges), the masked
    column j of W_in (incoming edges) and row j of the next layer's weights.
    The diagonal weight therefore counts in both of the first two sums.
    """
    a = g.adjacency
    if net.mask.shape != a.shape or not np.array_equal(net.mask, a):
        raise ValueError("network mask does not match the graph adjacency")
    w = np.abs(net.weights[0] * a)
    vertex_scores = w.sum(axis=1) + w.sum(axis=0) + np.abs(net.weights[1]).sum(axis=1)
    scores = np.zeros(p)
    scores[np.asarray(g.vertices, dtype=np.int64)] = vertex_scores
    return ImportanceReport(scores, rank_scores(scores))
