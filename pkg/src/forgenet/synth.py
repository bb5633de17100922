"""Synthetic benchmark: scale-free feature graph, graph-distance covariance,
Gaussian features and a nonmonotone thresholded outcome."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import shortest_path

from .data import Dataset, write_csv


@dataclass
class SynthSpec:
    p: int = 500
    n: int = 400
    n_cores: int = 1
    p0: int = 15
    ba_m: int = 2
    base_corr: float = 0.6
    beta_range: float = 0.15
    hub_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_cores < 1 or self.p0 % self.n_cores:
            raise ValueError(f"p0={self.p0} must be a positive multiple of n_cores={self.n_cores}")
        if not 0.0 < self.base_corr < 1.0:
            raise ValueError("base_corr must lie in (0, 1)")

    @property
    def per_core(self) -> int:
        return self.p0 // self.n_cores


@dataclass
class SynthOutput:
    data: Dataset
    true_graph: nx.Graph
    cores: np.ndarray
    true_predictors: np.ndarray
    relevant: np.ndarray
    beta: np.ndarray
    beta0: float
    threshold: float
    jitter: float
    spec: SynthSpec = field(default_factory=SynthSpec)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(self.data, out / "features.csv", out / "labels.csv")
        names = self.data.feature_names
        with open(out / "true_graph.edges", "w", encoding="utf-8") as fh:
            for u, v in sorted(self.true_graph.edges()):
                fh.write(f"{names[u]},{names[v]}\n")
        np.savetxt(out / "true_predictors.txt", self.true_predictors, fmt="%d")
        np.savetxt(out / "relevant.txt", self.relevant, fmt="%d")
        manifest = {
            "spec": asdict(self.spec),
            "cores": self.cores.tolist(),
            "beta": self.beta.tolist(),
            "beta0": self.beta0,
            "threshold": self.threshold,
            "jitter": self.jitter,
            "n_edges": self.true_graph.number_of_edges(),
            "n_relevant": int(len(self.relevant)),
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


def ba_graph(p: int, m: int = 2, seed=0) -> nx.Graph:
    """Preferential attachment grown from a complete graph on m+1 nodes."""
    if m < 1 or p <= m:
        raise ValueError(f"need p > m >= 1, got p={p}, m={m}")
    rng = np.random.default_rng(seed)
    g = nx.complete_graph(m + 1)
    # every node appears once per incident edge, so uniform draws are degree-proportional
    ends = [v for e in g.edges() for v in e]
    for new in range(m + 1, p):
        targets: list[int] = []
        while len(targets) < m:
            t = ends[int(rng.integers(len(ends)))]
            if t not in targets:
                targets.append(t)
        g.add_node(new)
        for t in targets:
            g.add_edge(new, t)
            ends.extend((new, t))
    return g


def _pair_from_index(k: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    # invert the row-major enumeration of the strict upper triangle
    k = np.asarray(k, dtype=np.int64)
    total = p * (p - 1) // 2
    rem = total - 1 - k
    r = ((np.sqrt(8.0 * rem + 1.0) - 1.0) / 2.0).astype(np.int64)
    # fix float rounding so that r(r+1)/2 <= rem < (r+1)(r+2)/2
    r = np.where(r * (r + 1) // 2 > rem, r - 1, r)
    r = np.where((r + 1) * (r + 2) // 2 <= rem, r + 1, r)
    i = p - 2 - r
    j = k + i + 1 - (total - (p - i) * (p - i - 1) // 2)
    return i, j


def er_graph(p: int, n_edges: int, seed=0) -> nx.Graph:
    """Exactly ``n_edges`` distinct pairs drawn uniformly without replacement."""
    total = p * (p - 1) // 2
    if not 0 <= n_edges <= total:
        raise ValueError(f"n_edges={n_edges} outside [0, {total}] for p={p}")
    rng = np.random.default_rng(seed)
    g = nx.empty_graph(p)
    if n_edges:
        i, j = _pair_from_index(np.sort(rng.choice(total, size=n_edges, replace=False)), p)
        g.add_edges_from(zip(i.tolist(), j.tolist()))
    return g


def shortest_paths(g: nx.Graph) -> np.ndarray:
    """All-pairs hop counts (breadth-first search per source)."""
    adj = nx.to_scipy_sparse_array(g, nodelist=range(g.number_of_nodes()), format="csr")
    dist = shortest_path(adj, method="D", directed=False, unweighted=True)
    if not np.all(np.isfinite(dist)):
        raise ValueError("graph is disconnected")
    return dist.astype(np.int64)


def covariance(dist: np.ndarray, base: float = 0.6) -> tuple[np.ndarray, float]:
    """``base ** dist`` plus the diagonal jitter needed to make it factorizable."""
    sigma = np.power(float(base), np.asarray(dist, dtype=np.float64))
    try:
        np.linalg.cholesky(sigma)
        return sigma, 0.0
    except np.linalg.LinAlgError:
        jitter = abs(float(np.linalg.eigvalsh(sigma)[0])) + 1e-8
        return sigma + jitter * np.eye(len(sigma)), jitter


def sample_mvn(sigma: np.ndarray, n: int, seed=0) -> np.ndarray:
    chol = np.linalg.cholesky(sigma)
    z = np.random.default_rng(seed).standard_normal((n, len(sigma)))
    return z @ chol.T


def hub_nodes(g: nx.Graph, per_core: int, fraction: float = 0.05) -> list[int]:
    nodes = sorted(g.nodes(), key=lambda v: (-g.degree(v), v))
    top = nodes[: max(1, math.ceil(fraction * len(nodes)))]
    return [v for v in top if g.degree(v) >= per_core - 1]


def select_true_predictors(g: nx.Graph, n_cores: int, per_core: int, seed=0,
                           hub_fraction: float = 0.05, max_tries: int = 100):
    """Pick cores among the hubs, then ``per_core - 1`` distinct neighbors of each."""
    rng = np.random.default_rng(seed)
    hubs = hub_nodes(g, per_core, hub_fraction)
    if len(hubs) < n_cores:
        raise ValueError(f"only {len(hubs)} hub node(s) available for {n_cores} core(s)")
    for _ in range(max_tries):
        cores = [int(c) for c in rng.choice(hubs, size=n_cores, replace=False)]
        chosen = set(cores)
        ok = True
        for c in cores:
            pool = sorted(set(g.neighbors(c)) - chosen)
            if len(pool) < per_core - 1:
                ok = False
                break
            chosen.update(int(v) for v in rng.choice(pool, size=per_core - 1, replace=False))
        if ok:
            return np.array(cores), np.array(sorted(chosen))
    raise ValueError("could not find enough distinct neighbors for the selected cores")


def minmax(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    span = v.max() - v.min()
    return (v - v.min()) / span if span > 0 else np.zeros_like(v)


def outcome_transform(s: np.ndarray) -> np.ndarray:
    """Nonmonotone link: 0.7 * minmax(tanh s) + 0.3 * minmax(s^2)."""
    s = np.asarray(s, dtype=np.float64)
    return 0.7 * minmax(np.tanh(s)) + 0.3 * minmax(s * s)


def generate_outcome(x_true: np.ndarray, beta_range: float = 0.15, seed=0):
    """Return (y, beta, beta0, threshold); the threshold is the median of g."""
    x_true = np.asarray(x_true, dtype=np.float64)
    rng = np.random.default_rng(seed)
    beta = rng.uniform(-beta_range, beta_range, size=x_true.shape[1])
    beta0 = float(rng.uniform(-beta_range, beta_range))
    g = outcome_transform(beta0 + x_true @ beta)
    t = float(np.median(g))
    return (g > t).astype(np.int64), beta, beta0, t


def relevant_features(g: nx.Graph, true_set) -> np.ndarray:
    out = set(int(v) for v in true_set)
    for v in list(out):
        out.update(g.neighbors(v))
    return np.array(sorted(out))


def simulate(spec: SynthSpec) -> SynthOutput:
    s_graph, s_x, s_true, s_y = np.random.SeedSequence(spec.seed).spawn(4)
    g = ba_graph(spec.p, spec.ba_m, s_graph)
    sigma, jitter = covariance(shortest_paths(g), spec.base_corr)
    x = sample_mvn(sigma, spec.n, s_x)
    cores, true_set = select_true_predictors(g, spec.n_cores, spec.per_core, s_true,
                                             spec.hub_fraction)
    y, beta, beta0, t = generate_outcome(x[:, true_set], spec.beta_range, s_y)
    return SynthOutput(
        data=Dataset(x, y),
        true_graph=g,
        cores=cores,
        true_predictors=true_set,
        relevant=relevant_features(g, true_set),
        beta=beta,
        beta0=beta0,
        threshold=t,
        jitter=jitter,
        spec=spec,
    )
