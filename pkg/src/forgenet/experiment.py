"""Replicated simulation benchmark comparing forgeNet with its baselines.

Each replicate draws one synthetic dataset and one stratified split from
seeds that depend only on (master_seed, replicate), so every method sees
the same data.  Results go to ``replicates.csv`` (one row per method and
replicate), ``summary.csv`` (mean and standard error per metric) and
``manifest.json``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import networkx as nx
import numpy as np

from .baselines import lrl_predict, lrl_selected, train_lrl
from .data import SplitPair, stratified_split, zscore_split
from .forest import feature_importances, predict_proba as forest_predict_proba
from .graph import FeatureGraph
from .importance import gcw_scores
from .masked_net import NetConfig, init_net
from .metrics import pr_auc, recall_at_precision, roc_auc, set_precision_recall
from .pipeline import fit as fit_forgenet, train_forest
from .synth import SynthOutput, SynthSpec, er_graph, simulate

log = logging.getLogger(__name__)

METHODS = ("forgenet_rf", "forgenet_gbm", "rf", "gbm", "lrl", "gedfn_true", "gedfn_mis")
METRICS = ("test_auc", "feature_pr_auc", "recall_at_lrl_precision",
           "set_precision", "set_recall", "n_selected")
ROW_FIELDS = ("replicate", "method", "status") + METRICS + ("runtime_s", "note")
SUMMARY_FIELDS = ("method", "metric", "n", "mean", "se", "flag")


@dataclass
class ExperimentConfig:
    synth: SynthSpec = field(default_factory=SynthSpec)
    replicates: int = 10
    test_fraction: float = 0.2
    methods: tuple = METHODS
    output_dir: str = "experiment_out"
    master_seed: int = 0
    rf_params: dict = field(default_factory=lambda: {"n_trees": 1000})
    gbm_params: dict = field(default_factory=lambda: {"n_trees": 100, "max_depth": 3,
                                                      "learning_rate": 0.1})
    net: NetConfig = field(default_factory=NetConfig)
    lrl_folds: int = 5

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        self.methods = tuple(m for m in METHODS if m in set(self.methods))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        if "synth" in raw:
            raw["synth"] = SynthSpec(**raw["synth"])
        if "net" in raw:
            raw["net"] = NetConfig(**raw["net"])
        if "methods" in raw:
            raw["methods"] = tuple(raw["methods"])
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    summary: list
    replicate_info: list = field(default_factory=list)

    def write(self, out_dir=None) -> Path:
        out = Path(out_dir or self.config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(self.rows, out / "replicates.csv")
        write_summary(self.summary, out / "summary.csv")
        manifest = {"config": self.config.to_dict(), "replicates": self.replicate_info,
                    "numpy": np.__version__}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
        return out


def replicate_seeds(master_seed: int, replicate: int) -> dict:
    """Data, split and model seeds for one replicate; never method dependent."""
    state = np.random.SeedSequence([master_seed, replicate]).generate_state(3)
    return {"data": int(state[0]), "split": int(state[1]), "model": int(state[2] % 2**31)}


def _undirected_graph(g: nx.Graph, p: int) -> FeatureGraph:
    edges = set()
    for u, v in g.edges():
        edges.add((int(u), int(v)))
        edges.add((int(v), int(u)))
    return FeatureGraph(list(range(p)), frozenset(edges), self_loops=True)


class _Replicate:
    """Fits one method at a time on a shared dataset and split."""

    def __init__(self, cfg: ExperimentConfig, out: SynthOutput, split: SplitPair, seed: int):
        self.cfg = cfg
        self.out = out
        self.split = split
        self.z = zscore_split(split)
        self.seed = seed
        self.labels = np.isin(np.arange(out.data.p), out.relevant).astype(int)

    def forgenet(self, kind: str):
        params = self.cfg.rf_params if kind == "RF" else self.cfg.gbm_params
        m = fit_forgenet(self.split.train, kind, params, self.cfg.net, seed=self.seed)
        return m.predict(self.split.test.x), m.feature_importance().scores, None

    def forest(self, kind: str):
        params = self.cfg.rf_params if kind == "RF" else self.cfg.gbm_params
        f = train_forest(self.z.train, kind, params, self.seed)
        return forest_predict_proba(f, self.z.test.x), feature_importances(f), None

    def lrl(self):
        m = train_lrl(self.z.train, cv_folds=self.cfg.lrl_folds, seed=self.seed)
        return lrl_predict(m, self.z.test.x), np.abs(m.coefficients), lrl_selected(m)

    def gedfn(self, graph: nx.Graph):
        g = _undirected_graph(graph, self.out.data.p)
        net = init_net(g.adjacency, replace(self.cfg.net, seed=self.seed))
        net.fit(self.z.train.x, self.z.train.y)
        return net.predict_proba(self.z.test.x), gcw_scores(net, g, g.size).scores, None

    def fit(self, method: str):
        if method == "forgenet_rf":
            return self.forgenet("RF")
        if method == "forgenet_gbm":
            return self.forgenet("GBM")
        if method == "rf":
            return self.forest("RF")
        if method == "gbm":
            return self.forest("GBM")
        if method == "lrl":
            return self.lrl()
        if method == "gedfn_true":
            return self.gedfn(self.out.true_graph)
        if method == "gedfn_mis":
            mis = er_graph(self.out.data.p, self.out.true_graph.number_of_edges(), self.seed)
            return self.gedfn(mis)
        raise ValueError(f"unknown method {method!r}")


def _empty_row(rep: int, method: str) -> dict:
    row = {k: "" for k in ROW_FIELDS}
    row.update(replicate=rep, method=method)
    return row


def run_replicate(cfg: ExperimentConfig, rep: int):
    seeds = replicate_seeds(cfg.master_seed, rep)
    out = simulate(replace(cfg.synth, seed=seeds["data"]))
    split = stratified_split(out.data, cfg.test_fraction, seeds["split"])
    job = _Replicate(cfg, out, split, seeds["model"])
    rows, scores = [], {}
    lrl_set = None
    for method in cfg.methods:
        row = _empty_row(rep, method)
        t0 = time.perf_counter()
        try:
            probs, imp, selected = job.fit(method)
            row["test_auc"] = roc_auc(probs, split.test.y)
            row["feature_pr_auc"] = pr_auc(imp, job.labels)
            row["status"] = "ok"
            scores[method] = imp
            if selected is not None:
                lrl_set = selected
                prec, rec = set_precision_recall(selected, set(out.relevant.tolist()), out.data.p)
                row.update(set_precision=prec, set_recall=rec, n_selected=len(selected))
        except Exception as exc:  # isolate per-method failures
            log.warning("replicate %d, method %s failed: %s", rep, method, exc)
            row.update(status="failed", note=f"{type(exc).__name__}: {exc}")
        row["runtime_s"] = time.perf_counter() - t0
        rows.append(row)
    if lrl_set is not None:
        prec = next(r["set_precision"] for r in rows if r["method"] == "lrl")
        for row in rows:
            if row["method"] == "lrl" or row["status"] != "ok":
                continue
            if not lrl_set:
                row["note"] = "empty_lrl_selection"
                continue
            row["recall_at_lrl_precision"] = recall_at_precision(
                scores[row["method"]], job.labels, prec)
    info = {"replicate": rep, "seeds": seeds, "n_relevant": int(len(out.relevant)),
            "n_edges": out.true_graph.number_of_edges(), "jitter": out.jitter}
    return rows, info


def summarize(rows) -> list:
    """Mean and standard error (sd / sqrt(r)) of every metric per method.

    Methods without a successful replicate are dropped with a warning.  A
    single observation gets SE 0 and the flag ``single_replicate``.
    """
    methods = list(dict.fromkeys(r["method"] for r in rows))
    table = []
    for method in methods:
        ok = [r for r in rows if r["method"] == method and r["status"] == "ok"]
        if not ok:
            log.warning("method %s has no successful replicate; omitted from summary", method)
            continue
        for metric in METRICS:
            vals = np.array([float(r[metric]) for r in ok if r[metric] != ""])
            if vals.size == 0:
                continue
            if vals.size == 1 or np.all(vals == vals[0]):
                se = 0.0  # exact, rounding in the mean would leave ~1e-17
            else:
                se = float(vals.std(ddof=1) / math.sqrt(vals.size))
            table.append({"method": method, "metric": metric, "n": int(vals.size),
                          "mean": float(vals.mean()), "se": se,
                          "flag": "single_replicate" if vals.size == 1 else ""})
    return table


def run(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    rows, infos = [], []
    for rep in range(cfg.replicates):
        t0 = time.perf_counter()
        r, info = run_replicate(cfg, rep)
        rows.extend(r)
        infos.append(info)
        log.info("replicate %d/%d done in %.1fs", rep + 1, cfg.replicates,
                 time.perf_counter() - t0)
    report = ExperimentReport(cfg, rows, summarize(rows), infos)
    if write:
        report.write()
    return report


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_rows(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in ROW_FIELDS])


def read_rows(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["replicate"] = int(r["replicate"])
    return rows


def write_summary(table, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for r in table:
            w.writerow([_fmt(r[k]) for k in SUMMARY_FIELDS])


def regenerate_summary(replicates_csv, summary_csv) -> list:
    """Recompute ``summary.csv`` from a persisted ``replicates.csv``."""
    table = summarize(read_rows(replicates_csv))
    write_summary(table, summary_csv)
    return table
