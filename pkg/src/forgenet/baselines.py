"""Lasso-penalized logistic regression fitted by proximal gradient descent."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .data import Dataset, DataError, stratified_folds
from .forest import sigmoid
from .metrics import roc_auc

log = logging.getLogger(__name__)


@dataclass(eq=False)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    lam: float
    cv_auc: np.ndarray | None = None
    lambdas: np.ndarray | None = None

    def to_json(self) -> str:
        return json.dumps({
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
            "lambda": self.lam,
        })

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        doc = json.loads(text)
        return cls(np.array(doc["coefficients"], dtype=np.float64), doc["intercept"], doc["lambda"])


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def objective(x, y, beta, b0, lam) -> float:
    z = b0 + np.asarray(x) @ beta
    return _smooth_loss(z, np.asarray(y, dtype=np.float64)) + lam * float(np.abs(beta).sum())


def lipschitz(x) -> float:
    """Gradient Lipschitz bound of the mean logistic loss in (intercept, beta)."""
    aug = np.column_stack([np.ones(len(x)), x])
    return float(np.linalg.norm(aug, 2) ** 2 / (4.0 * len(x)))


def _smooth_loss(z, y) -> float:
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def fit_lasso_logistic(x, y, lam, beta=None, b0=None, step=None,
                       tol=1e-7, max_iter=10000, trace=None, backtrack=True):
    """Proximal gradient descent; the intercept is not penalized.

    The step starts at 1/L.  With ``backtrack`` each iteration first tries
    twice the previous step and halves it until the usual sufficient-decrease
    condition holds, which keeps the objective monotone.  Stops once the
    relative objective change drops below ``tol``.  When ``trace`` is a list,
    every objective value is appended to it.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = x.shape
    if beta is None:
        beta = np.zeros(p)
    if b0 is None:
        rate = np.clip(y.mean(), 1e-12, 1 - 1e-12)
        b0 = float(np.log(rate / (1.0 - rate)))
    min_step = 1.0 / lipschitz(x) if step is None else step
    beta = beta.copy()
    z = b0 + x @ beta
    f = _smooth_loss(z, y)
    obj = f + lam * np.abs(beta).sum()
    if trace is not None:
        trace.append(obj)
    t = min_step
    for _ in range(max_iter):
        r = sigmoid(z) - y
        g0 = r.mean()
        g = (x.T @ r) / n
        t = 2.0 * t if backtrack else min_step
        while True:
            nb0 = b0 - t * g0
            nbeta = soft_threshold(beta - t * g, t * lam)
            nz = nb0 + x @ nbeta
            nf = _smooth_loss(nz, y)
            db0, dbeta = nb0 - b0, nbeta - beta
            bound = f + g0 * db0 + g @ dbeta + (db0 * db0 + dbeta @ dbeta) / (2.0 * t)
            if not backtrack or t <= min_step or nf <= bound + 1e-15 * abs(f):
                break
            t = max(0.5 * t, min_step)
        b0, beta, z, f = nb0, nbeta, nz, nf
        new = f + lam * np.abs(beta).sum()
        if trace is not None:
            trace.append(new)
        done = abs(obj - new) <= tol * max(abs(obj), 1e-300)
        obj = new
        if done:
            break
    return beta, float(b0)


def lambda_max(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.max(np.abs(x.T @ (y - y.mean()))) / len(y))


def lambda_grid(x, y, n_lambdas: int = 50, ratio: float = 1e-4) -> np.ndarray:
    lmax = lambda_max(x, y)
    return lmax * np.logspace(0.0, np.log10(ratio), n_lambdas)


def fit_path(x, y, lambdas, tol=1e-7, max_iter=10000):
    """Warm-started fits along a decreasing lambda sequence."""
    step = 1.0 / lipschitz(x)
    beta, b0 = None, None
    path = []
    for lam in lambdas:
        beta, b0 = fit_lasso_logistic(x, y, lam, beta, b0, step, tol, max_iter)
        path.append((beta, b0))
    return path


def _check_standardized(x):
    mean = np.abs(x.mean(axis=0)).max()
    sd = x.std(axis=0, ddof=1)
    sd = sd[sd > 0]
    if mean > 1e-6 or (sd.size and np.abs(sd - 1.0).max() > 1e-6):
        log.warning("lasso input does not look standardized; penalty is scale dependent")


def train_lrl(d: Dataset, lambdas=None, cv_folds: int = 5, seed: int = 0,
              tol=1e-7, max_iter=10000) -> LinearModel:
    """Pick lambda by stratified CV on mean validation ROC-AUC, then refit on all data.

    Ties in CV AUC go to the larger lambda (earlier grid position).
    """
    y = d.y.astype(np.float64)
    if len(np.unique(d.y)) < 2:
        raise DataError("lasso logistic regression needs both classes present")
    _check_standardized(d.x)
    lambdas = lambda_grid(d.x, y) if lambdas is None else np.sort(np.asarray(lambdas, float))[::-1]
    folds = stratified_folds(d.y, cv_folds, seed)
    auc = np.zeros((cv_folds, len(lambdas)))
    for k in range(cv_folds):
        tr, va = folds != k, folds == k
        path = fit_path(d.x[tr], y[tr], lambdas, tol, max_iter)
        for i, (beta, b0) in enumerate(path):
            auc[k, i] = roc_auc(b0 + d.x[va] @ beta, d.y[va])
    mean_auc = auc.mean(axis=0)
    best = int(np.argmax(mean_auc))
    beta, b0 = fit_path(d.x, y, lambdas[: best + 1], tol, max_iter)[-1]
    return LinearModel(beta, b0, float(lambdas[best]), mean_auc, lambdas)


def lrl_predict(m: LinearModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != len(m.coefficients):
        raise ValueError(f"expected {len(m.coefficients)} columns, got shape {x.shape}")
    return sigmoid(m.intercept + x @ m.coefficients)


def lrl_selected(m: LinearModel) -> set[int]:
    return {int(i) for i in np.flatnonzero(m.coefficients != 0)}
