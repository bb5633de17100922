"""forgeNet composition: forest -> feature graph -> reduced data -> masked network."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, DataError, apply_zscore, zscore_stats
from .forest import Forest, predict_proba as forest_predict_proba, train_gbm, train_rf, used_features
from .graph import FeatureGraph, forest_graph, read_edges, reduce_dataset
from .importance import ImportanceReport, gcw_scores
from .masked_net import MaskedNet, NetConfig, init_net

BUNDLE_VERSION = "forgenet-v1"
# fixed offsets that derive every stage seed from one master seed
FOREST_SEED_OFFSET = 0
NET_SEED_OFFSET = 1
SPLIT_SEED_OFFSET = 2


@dataclass(eq=False)
class ForgeNetModel:
    forest: Forest
    graph: FeatureGraph
    net: MaskedNet
    mean: np.ndarray
    sd: np.ndarray
    feature_names: list[str]
    normalize: bool = True
    seed: int = 0
    loss_trace: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return len(self.feature_names)

    def _prepare(self, x, feature_names=None) -> np.ndarray:
        """Normalize and select the graph columns of a full-width matrix.

        With ``feature_names`` the columns of ``x`` are matched by name, so
        they may be permuted and features outside the graph may be missing.
        """
        x = np.asarray(x, dtype=np.float64)
        cols = np.asarray(self.graph.vertices, dtype=np.int64)
        if feature_names is None:
            if x.ndim != 2 or x.shape[1] != self.p:
                raise DataError(f"expected {self.p} columns, got array of shape {x.shape}")
            sub = x[:, cols]
        else:
            where = {name: j for j, name in enumerate(feature_names)}
            missing = [self.feature_names[v] for v in cols if self.feature_names[v] not in where]
            if missing:
                raise DataError(f"input lacks graph features: {missing[:5]}")
            sub = x[:, [where[self.feature_names[v]] for v in cols]]
        if self.normalize:
            sub = apply_zscore(sub, self.mean[cols], self.sd[cols])
        return sub

    def predict(self, x, feature_names=None) -> np.ndarray:
        return self.net.predict_proba(self._prepare(x, feature_names))

    def forest_predict(self, x) -> np.ndarray:
        """Class-1 probability of the forest stage alone on raw full-width input."""
        x = np.asarray(x, dtype=np.float64)
        if self.normalize:
            x = apply_zscore(x, self.mean, self.sd)
        return forest_predict_proba(self.forest, x)

    def feature_importance(self) -> ImportanceReport:
        return gcw_scores(self.net, self.graph, self.p)

    # ---- bundle I/O --------------------------------------------------------

    def save(self, model_dir) -> None:
        out = Path(model_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "forest.json").write_text(self.forest.to_json())
        self.graph.write_edges(out / "graph.edges", self.feature_names)
        (out / "net.json").write_text(self.net.to_json())
        with open(out / "norm.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["feature_name", "mean", "sd"])
            for name, m, s in zip(self.feature_names, self.mean, self.sd):
                w.writerow([name, repr(float(m)), repr(float(s))])
        manifest = {
            "version": BUNDLE_VERSION,
            "seed": self.seed,
            "normalize": self.normalize,
            "self_loops": self.graph.self_loops,
            "forest_kind": self.forest.kind,
            "vertices": [self.feature_names[v] for v in self.graph.vertices],
            "loss_trace": self.loss_trace,
            "config": self.config,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))

    @classmethod
    def load(cls, model_dir) -> "ForgeNetModel":
        src = Path(model_dir)
        manifest = json.loads((src / "manifest.json").read_text())
        if manifest.get("version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported model bundle {manifest.get('version')!r}")
        names, mean, sd = [], [], []
        with open(src / "norm.csv", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            for name, m, s in reader:
                names.append(name)
                mean.append(float(m))
                sd.append(float(s))
        lookup = {n: j for j, n in enumerate(names)}
        vertices = [lookup[v] for v in manifest["vertices"]]
        graph = read_edges(src / "graph.edges", vertices, names, manifest["self_loops"])
        return cls(
            forest=Forest.from_json((src / "forest.json").read_text()),
            graph=graph,
            net=MaskedNet.from_json((src / "net.json").read_text()),
            mean=np.array(mean),
            sd=np.array(sd),
            feature_names=names,
            normalize=manifest["normalize"],
            seed=manifest["seed"],
            loss_trace=manifest["loss_trace"],
            config=manifest.get("config", {}),
        )


def train_forest(d: Dataset, kind: str, params: dict | None, seed: int) -> Forest:
    params = dict(params or {})
    params.pop("seed", None)
    kind = kind.upper()
    if kind == "RF":
        return train_rf(d, seed=seed, **params)
    if kind == "GBM":
        return train_gbm(d, seed=seed, **params)
    raise ValueError(f"unknown forest kind {kind!r}")


def fit(
    d_train: Dataset,
    forest_kind: str = "RF",
    forest_params: dict | None = None,
    net_cfg: NetConfig | None = None,
    seed: int = 0,
    normalize: bool = True,
    self_loops: bool = True,
) -> ForgeNetModel:
    """Train the forest on (normalized) training data, embed its graph in a masked net."""
    if normalize:
        mean, sd = zscore_stats(d_train.x)
        d = d_train.with_x(apply_zscore(d_train.x, mean, sd))
    else:
        mean, sd = np.zeros(d_train.p), np.ones(d_train.p)
        d = d_train
    forest = train_forest(d, forest_kind, forest_params, seed + FOREST_SEED_OFFSET)
    graph = forest_graph(forest, self_loops)
    reduced = reduce_dataset(d, graph)
    cfg = replace(net_cfg or NetConfig(), seed=seed + NET_SEED_OFFSET)
    net = init_net(graph.adjacency, cfg)
    trace = net.fit(reduced.x, reduced.y)
    config = {"forest_kind": forest.kind, "forest_params": forest.params,
              "net": asdict(cfg), "seed": seed, "normalize": normalize,
              "self_loops": self_loops}
    return ForgeNetModel(forest, graph, net, mean, sd, list(d_train.feature_names),
                         normalize, seed, trace, config)


def predict(m: ForgeNetModel, x_test, feature_names=None) -> np.ndarray:
    return m.predict(x_test, feature_names)


def feature_importance(m: ForgeNetModel) -> ImportanceReport:
    return m.feature_importance()
