"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that pytest prints in an
"acceptance criteria" section at the end of the run.
"""

import time

import numpy as np
import pytest

from forgenet.cli import main as cli_main
from forgenet.data import Dataset
from forgenet.experiment import ExperimentConfig, read_rows, run
from forgenet.forest import train_rf, used_features
from forgenet.graph import forest_graph
from forgenet.masked_net import NetConfig, init_net
from forgenet.metrics import pr_auc, recall_at_precision, roc_auc
from forgenet.synth import SynthSpec, covariance, generate_outcome, outcome_transform, shortest_paths

from test_graph import brute_force_edges
from test_masked_net import finite_difference_errors, random_mask
from test_metrics import brute_force_auc

import networkx as nx

DESK = SynthSpec(p=500, n=400, p0=15, n_cores=1)
MASTER_SEED = 0
TIME_LIMIT_S = 15 * 60


def test_criterion_1_gradients(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(3):
        rng = np.random.default_rng(seed)
        net = init_net(random_mask(20, 0.2, seed),
                       NetConfig(hidden_dims=[8, 4], dropout_keep=1.0, seed=seed))
        for b in net.biases:
            b[...] = rng.normal(0, 0.1, b.shape)
        x = rng.standard_normal((8, 20))
        y = rng.integers(0, 2, 8)
        worst = max(worst, *finite_difference_errors(net, x, y, h=1e-5))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 10
    acceptance("1", ok, f"max rel err {worst:.2e} (< 1e-4), {elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_2_mask_invariance(acceptance):
    rng = np.random.default_rng(0)
    a = random_mask(20, 0.15, 0)
    net = init_net(a, NetConfig(hidden_dims=[8, 4], batch_size=32, epochs=20, seed=0))
    x = rng.standard_normal((320, 20))
    y = rng.integers(0, 2, 320)
    net.fit(x, y)  # 10 batches x 20 epochs
    leak = float(np.abs(net.w_in[a == 0]).max())
    ok = net.step == 200 and leak == 0.0
    acceptance("2", ok, f"{net.step} Adam steps, max |w_in| off mask = {leak!r}")
    assert ok


def test_criterion_3_graph_forest_consistency(acceptance):
    rng = np.random.default_rng(3)
    bad = 0
    for seed in range(20):
        x = rng.standard_normal((60, 30))
        y = (x[:, :4] @ rng.normal(size=4) + 0.5 * rng.standard_normal(60) > 0).astype(int)
        f = train_rf(Dataset(x, y), n_trees=int(rng.integers(1, 15)),
                     max_depth=int(rng.integers(1, 7)), seed=seed)
        g = forest_graph(f)
        if set(g.vertices) != used_features(f) or set(g.edges) != brute_force_edges(f):
            bad += 1
    acceptance("3", bad == 0, f"{20 - bad}/20 forests: V == used features, edges == tree walk")
    assert bad == 0


def test_criterion_4_metric_oracles(acceptance):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        scores = rng.integers(0, 8, n).astype(float)
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        worst = max(worst, abs(roc_auc(scores, labels) - brute_force_auc(scores, labels)))
    ap = pr_auc([0.9, 0.8, 0.7, 0.6], [1, 0, 0, 1])
    rec = recall_at_precision([0.9, 0.8, 0.7, 0.6], [1, 0, 0, 1], 0.5)
    ok = worst <= 1e-12 and abs(ap - 0.75) <= 1e-12 and rec == 1.0
    acceptance("4", ok, f"AUC max dev {worst:.1e}, PR-AUC {ap!r}, recall@0.5 {rec!r}")
    assert ok


def test_criterion_5_synthetic_generator(acceptance):
    sigma, jitter = covariance(shortest_paths(nx.path_graph(3)), 0.6)
    expected = np.array([[1, 0.6, 0.36], [0.6, 1, 0.6], [0.36, 0.6, 1]])
    cov_ok = np.array_equal(sigma, 0.6 ** np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]]))
    cov_ok = cov_ok and np.allclose(sigma, expected, rtol=0, atol=1e-15) and jitter == 0.0
    g = outcome_transform(np.array([-1.0, 0.0, 1.0]))
    g_ok = np.allclose(g, [0.3, 0.35, 1.0], rtol=0, atol=1e-6)
    rng = np.random.default_rng(5)
    gaps = []
    for seed in range(20):
        n = int(rng.integers(2, 400))
        y, *_ = generate_outcome(rng.standard_normal((n, 15)), 0.15, seed)
        gaps.append(abs(int(y.sum()) - int(n - y.sum())))
    ok = cov_ok and g_ok and max(gaps) <= 1
    acceptance("5", ok, f"chain covariance exact={cov_ok}, g={np.round(g, 6).tolist()}, "
                        f"max class gap {max(gaps)}")
    assert ok


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk_a")
    cfg = ExperimentConfig(synth=DESK, replicates=10, master_seed=MASTER_SEED,
                           output_dir=str(out))
    t0 = time.perf_counter()
    report = run(cfg)
    return report, out, time.perf_counter() - t0


def _paired(report, method):
    rows = {r["replicate"]: r for r in report.rows if r["method"] == method}
    return np.array([rows[k]["test_auc"] for k in sorted(rows)], dtype=float)


def _se(v):
    return float(np.std(v, ddof=1) / np.sqrt(len(v)))


def test_criterion_6_desk_scale_benchmark(desk_run, acceptance):
    report, _, elapsed = desk_run
    assert all(r["status"] == "ok" for r in report.rows)
    fn, rf = _paired(report, "forgenet_rf"), _paired(report, "rf")
    true, mis = _paired(report, "gedfn_true"), _paired(report, "gedfn_mis")
    a = fn.mean() >= 0.65
    b = fn.mean() >= rf.mean() - 0.02
    c = true.mean() >= mis.mean()
    t = elapsed < TIME_LIMIT_S
    acceptance("6a", a, f"forgeNet(RF) mean AUC {fn.mean():.4f} +/- {_se(fn):.4f} (>= 0.65)")
    acceptance("6b", b, f"forgeNet(RF) {fn.mean():.4f} vs RF {rf.mean():.4f} "
                        f"(paired diff {np.mean(fn - rf):+.4f}, >= -0.02)")
    acceptance("6c", c, f"GEDFN-true {true.mean():.4f} vs GEDFN-mis {mis.mean():.4f}")
    acceptance("6t", t, f"runtime {elapsed:.0f}s for 10 replicates, 7 methods (< 900s)")
    assert a and b and c and t


def test_criterion_7_feature_selection(desk_run, acceptance):
    report, _, _ = desk_run
    rows = sorted((r for r in report.rows if r["method"] == "forgenet_rf"),
                  key=lambda r: r["replicate"])
    ap = np.array([r["feature_pr_auc"] for r in rows], dtype=float)
    frac = np.array([i["n_relevant"] / DESK.p for i in report.replicate_info])
    se = _se(ap)
    margin = ap.mean() - frac.mean()
    ok = margin >= 3 * se
    acceptance("7", ok, f"PR-AUC {ap.mean():.4f} +/- {se:.4f} vs random {frac.mean():.4f} "
                        f"(excess {margin / se:.1f} SE, >= 3)")
    assert ok


def test_criterion_8_real_data_scope(tmp_path, acceptance):
    # the real-data benchmark is out of scope; what is supported is the
    # train/predict path on user-supplied CSV files, exercised here
    rng = np.random.default_rng(8)
    x = rng.standard_normal((60, 40))
    y = (x[:, 0] + x[:, 1] > 0).astype(int)
    header = ",".join(f"gene{j}" for j in range(40))
    np.savetxt(tmp_path / "x.csv", x, delimiter=",", header=header, comments="")
    np.savetxt(tmp_path / "y.csv", y, fmt="%d")
    code = cli_main(["train", "--features", str(tmp_path / "x.csv"), "--labels",
                     str(tmp_path / "y.csv"), "--model-dir", str(tmp_path / "m"),
                     "--n-trees", "50", "--epochs", "20"])
    code = code or cli_main(["predict", "--features", str(tmp_path / "x.csv"),
                             "--model-dir", str(tmp_path / "m"), "--out", str(tmp_path / "p.csv")])
    probs = np.loadtxt(tmp_path / "p.csv", skiprows=1) if code == 0 else np.array([])
    ok = code == 0 and probs.shape == (60,)
    acceptance("8", ok, "real-data AUC not reproduced (no data); CSV train/predict path works")
    assert ok


def test_criterion_9_determinism(desk_run, tmp_path, acceptance):
    report, first_dir, _ = desk_run
    cfg = ExperimentConfig(synth=DESK, replicates=10, master_seed=MASTER_SEED,
                           output_dir=str(tmp_path))
    run(cfg)
    a = (first_dir / "summary.csv").read_bytes()
    b = (tmp_path / "summary.csv").read_bytes()
    rows_a = [(r["method"], r["test_auc"]) for r in read_rows(first_dir / "replicates.csv")]
    rows_b = [(r["method"], r["test_auc"]) for r in read_rows(tmp_path / "replicates.csv")]
    ok = a == b and rows_a == rows_b
    acceptance("9", ok, f"summary.csv identical across runs ({len(a)} bytes)")
    assert ok
