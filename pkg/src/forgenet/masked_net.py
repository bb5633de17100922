"""Graph-embedded feedforward network.

The first layer is ``relu(X @ (W_in * A) + b_in)`` with ``A`` a square binary
mask over the selected features: input ``i`` feeds hidden neuron ``j`` only when
``A[i, j] == 1``.  Dense ReLU layers follow, then a 2-way softmax.  Training is
mini-batch Adam on mean cross-entropy.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset

FORMAT_VERSION = "forgenet-net-v1"
BETA1, BETA2, EPS = 0.9, 0.999, 1e-8
PROB_FLOOR = 1e-12


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class NetConfig:
    hidden_dims: list[int] = field(default_factory=lambda: [64, 16])
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    dropout_keep: float = 0.9
    seed: int = 0

    def __post_init__(self):
        self.hidden_dims = [int(h) for h in self.hidden_dims]
        if any(h <= 0 for h in self.hidden_dims):
            raise ValueError(f"hidden_dims must be positive, got {self.hidden_dims}")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ValueError(f"dropout_keep must lie in (0, 1], got {self.dropout_keep}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass(eq=False)
class MaskedNet:
    mask: np.ndarray
    # weights[0] is W_in (|V| x |V|), then one matrix per hidden layer, then the output layer
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: NetConfig
    adam_m: list[np.ndarray] = field(default_factory=list)
    adam_v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if not self.adam_m:
            self.adam_m = [np.zeros_like(p) for p in self.params]
            self.adam_v = [np.zeros_like(p) for p in self.params]

    @property
    def n_inputs(self) -> int:
        return self.mask.shape[0]

    @property
    def params(self) -> list[np.ndarray]:
        return self.weights + self.biases

    @property
    def w_in(self) -> np.ndarray:
        return self.weights[0]

    # ---- forward / backward -------------------------------------------------

    def forward(self, x, train_mode: bool = False, rng=None):
        """Return (probabilities n x 2, cache for backprop).

        In train mode inverted dropout is applied to every hidden activation;
        ``rng`` may be a Generator or an integer seed.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} input columns, got shape {x.shape}")
        keep = self.config.dropout_keep
        use_dropout = train_mode and keep < 1.0
        if use_dropout and not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)

        acts, pre, drops = [x], [], []
        h = x
        n_layers = len(self.weights)
        for k in range(n_layers):
            w = self.weights[0] * self.mask if k == 0 else self.weights[k]
            z = h @ w + self.biases[k]
            if k == n_layers - 1:
                logits = z
                break
            pre.append(z)
            h = np.maximum(z, 0.0)
            if use_dropout:
                d = (rng.random(h.shape) < keep) / keep
                h = h * d
                drops.append(d)
            else:
                drops.append(None)
            acts.append(h)
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs = e / e.sum(axis=1, keepdims=True)
        return probs, (acts, pre, drops)

    def loss_and_grads(self, x, y, train_mode: bool = False, rng=None):
        """Mean cross-entropy and gradients for ``weights + biases`` (same order as ``params``)."""
        y = np.asarray(y).astype(np.int64)
        if len(y) == 0:
            raise ValueError("empty batch")
        probs, (acts, pre, drops) = self.forward(x, train_mode, rng)
        n = len(y)
        rows = np.arange(n)
        loss = float(-np.mean(np.log(np.maximum(probs[rows, y], PROB_FLOOR))))
        if not np.isfinite(loss) or not np.all(np.isfinite(probs)):
            raise TrainingDiverged("non-finite activations in forward pass")

        delta = probs.copy()
        delta[rows, y] -= 1.0
        delta /= n
        gw = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        for k in range(len(self.weights) - 1, -1, -1):
            gw[k] = acts[k].T @ delta
            gb[k] = delta.sum(axis=0)
            if k == 0:
                gw[0] *= self.mask
                break
            delta = delta @ self.weights[k].T
            if drops[k - 1] is not None:
                delta = delta * drops[k - 1]
            delta = delta * (pre[k - 1] > 0)
        return loss, gw + gb

    def adam_step(self, grads, lr: float | None = None) -> "MaskedNet":
        """One Adam update in place; masked W_in entries stay exactly zero."""
        lr = self.config.learning_rate if lr is None else lr
        self.step += 1
        t = self.step
        c1 = 1.0 - BETA1 ** t
        c2 = 1.0 - BETA2 ** t
        params = self.params
        for i, (p, g) in enumerate(zip(params, grads)):
            m = self.adam_m[i]
            v = self.adam_v[i]
            m *= BETA1
            m += (1.0 - BETA1) * g
            v *= BETA2
            v += (1.0 - BETA2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + EPS)
        self.weights[0] *= self.mask
        return self

    # ---- training / prediction ---------------------------------------------

    def fit(self, x, y, epochs: int | None = None) -> list[float]:
        """Mini-batch Adam; returns the mean training loss of every epoch."""
        cfg = self.config
        epochs = cfg.epochs if epochs is None else epochs
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y).astype(np.int64)
        rng = np.random.default_rng(cfg.seed)
        trace = []
        for epoch in range(epochs):
            order = rng.permutation(len(y))
            total = 0.0
            for step, start in enumerate(range(0, len(y), cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                try:
                    loss, grads = self.loss_and_grads(x[idx], y[idx], train_mode=True, rng=rng)
                except TrainingDiverged as exc:
                    raise TrainingDiverged(f"{exc} at epoch {epoch}, step {step}") from None
                self.adam_step(grads)
                total += loss * len(idx)
            trace.append(total / len(y))
        return trace

    def predict_proba(self, x) -> np.ndarray:
        return self.forward(x, train_mode=False)[0][:, 1]

    # ---- serialization -----------------------------------------------------

    def to_json(self) -> str:
        rows, cols = np.nonzero(self.mask)
        doc = {
            "version": FORMAT_VERSION,
            "config": asdict(self.config),
            "n_inputs": self.n_inputs,
            "mask": [[int(i), int(j)] for i, j in zip(rows, cols)],
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "step": self.step,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "MaskedNet":
        doc = json.loads(text)
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported network format {doc.get('version')!r}")
        k = doc["n_inputs"]
        mask = np.zeros((k, k))
        for i, j in doc["mask"]:
            mask[i, j] = 1.0
        weights = [np.array(w, dtype=np.float64).reshape(-1, len(b))
                   for w, b in zip(doc["weights"], doc["biases"])]
        biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
        weights[0] = weights[0].reshape(k, k)
        return cls(mask, weights, biases, NetConfig(**doc["config"]), step=doc["step"])


def init_net(mask, cfg: NetConfig | None = None) -> MaskedNet:
    """He-style uniform initialization; each W_in column is scaled by its masked fan-in."""
    cfg = cfg or NetConfig()
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
        raise ValueError(f"mask must be square, got shape {mask.shape}")
    if not np.all((mask == 0) | (mask == 1)):
        raise ValueError("mask must be binary")
    k = mask.shape[0]
    rng = np.random.default_rng(cfg.seed)

    fan_in = np.maximum(mask.sum(axis=0), 1.0)
    limit = np.sqrt(6.0 / fan_in)
    w_in = rng.uniform(-1.0, 1.0, size=(k, k)) * limit[None, :] * mask
    weights, biases = [w_in], [np.zeros(k)]
    dims = [k] + list(cfg.hidden_dims) + [2]
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / d_in)
        weights.append(rng.uniform(-lim, lim, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return MaskedNet(mask, weights, biases, cfg)


def train(net: MaskedNet, d: Dataset, cfg: NetConfig | None = None) -> tuple[MaskedNet, list[float]]:
    if cfg is not None:
        net.config = cfg
    trace = net.fit(d.x, d.y)
    return net, trace
