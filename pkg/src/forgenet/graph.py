"""Feature graphs harvested from tree splits.

Every internal node whose direct child is also internal contributes the
directed edge (parent split feature -> child split feature).  The forest graph
is the union of the per-tree graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .data import Dataset, DataError
from .forest import LEAF, Forest, Tree


@dataclass(frozen=True)
class FeatureGraph:
    vertices: list[int]
    edges: frozenset = field(default_factory=frozenset)
    self_loops: bool = True

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError("graph vertices must be unique")
        pos = {v: i for i, v in enumerate(self.vertices)}
        for u, v in self.edges:
            if u not in pos or v not in pos:
                raise ValueError(f"edge ({u}, {v}) references a non-vertex")

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def adjacency(self) -> np.ndarray:
        """Binary |V| x |V| mask; A[i, j] = 1 iff vertices[i] -> vertices[j]."""
        k = len(self.vertices)
        pos = {v: i for i, v in enumerate(self.vertices)}
        a = np.eye(k) if self.self_loops else np.zeros((k, k))
        for u, v in self.edges:
            a[pos[u], pos[v]] = 1.0
        return a

    def write_edges(self, path, feature_names: list[str] | None = None) -> None:
        name = (lambda j: feature_names[j]) if feature_names else str
        with open(path, "w", encoding="utf-8") as fh:
            for u, v in sorted(self.edges):
                fh.write(f"{name(u)},{name(v)}\n")

    def write_adjacency(self, path, feature_names: list[str] | None = None) -> None:
        names = [feature_names[v] if feature_names else str(v) for v in self.vertices]
        a = self.adjacency.astype(int)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("," + ",".join(names) + "\n")
            for name, row in zip(names, a):
                fh.write(name + "," + ",".join(map(str, row)) + "\n")


def read_edges(path, vertices: Iterable[int], feature_names: list[str] | None = None,
               self_loops: bool = True) -> FeatureGraph:
    lookup = {n: j for j, n in enumerate(feature_names)} if feature_names else None
    edges = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = line.split(",")
            edges.add((lookup[u], lookup[v]) if lookup else (int(u), int(v)))
    return FeatureGraph(list(vertices), frozenset(edges), self_loops)


def tree_to_graph(tree: Tree) -> tuple[set[int], set[tuple[int, int]]]:
    internal = tree.feature != LEAF
    vertices = {int(f) for f in tree.feature[internal]}
    edges = set()
    for i in np.flatnonzero(internal):
        u = int(tree.feature[i])
        for c in (tree.left[i], tree.right[i]):
            if tree.feature[c] != LEAF:
                edges.add((u, int(tree.feature[c])))
    return vertices, edges


def merge_graphs(parts: Iterable[tuple[set, set]], self_loops: bool = True) -> FeatureGraph:
    vertices: set[int] = set()
    edges: set[tuple[int, int]] = set()
    for v, e in parts:
        vertices |= set(v)
        edges |= set(e)
    return FeatureGraph(sorted(vertices), frozenset(edges), self_loops)


def forest_graph(forest: Forest, self_loops: bool = True) -> FeatureGraph:
    return merge_graphs((tree_to_graph(t) for t in forest.trees), self_loops)


def reduce_dataset(d: Dataset, g: FeatureGraph) -> Dataset:
    """Keep only the graph's features, in the graph's vertex order."""
    if not g.vertices:
        raise DataError("forest selected no features")
    cols = np.asarray(g.vertices)
    if cols.min() < 0 or cols.max() >= d.p:
        raise DataError(f"graph vertex out of range for dataset with p={d.p}")
    return Dataset(d.x[:, cols], d.y, [d.feature_names[j] for j in cols])
