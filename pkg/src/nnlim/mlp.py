"""Multilayer perceptron written on NumPy: ReLU hidden layers, sigmoid output.

Includes (weighted) cross-entropy, exact backpropagation, Adam, a training
loop with early stopping and a plain-text model format.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import SchemaMismatchError, get_schema
from .metrics import classification_report

P_CLAMP = 1e-12
MODEL_TAG = "NNLIM-MODEL v1"
ACTIVATIONS = ("relu", "sigmoid")

# hidden widths of the tested architectures; model 5 is model 4 with wce (omega = 5)
ARCHITECTURES = {
    1: (16384, 16384),
    2: (2048, 1024, 512),
    3: (512, 256, 256, 128),
    4: (256, 128, 64, 64, 32),
    5: (256, 128, 64, 64, 32),
}


class ModelFormatError(ValueError):
    pass


@dataclass
class Layer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str


@dataclass
class Network:
    layers: list
    schema: str = "f1d_v1"

    def __post_init__(self):
        for k, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if b.W.shape[1] != a.W.shape[0]:
                raise ValueError(f"layer {k + 1} expects {b.W.shape[1]} inputs, previous layer gives {a.W.shape[0]}")
        for L in self.layers:
            if L.activation not in ACTIVATIONS or L.b.shape != (L.W.shape[0],):
                raise ValueError("bad layer definition")
        if self.layers[-1].activation != "sigmoid" or self.layers[-1].W.shape[0] != 1:
            raise ValueError("the output layer must be a single sigmoid unit")

    @property
    def d(self):
        return self.layers[0].W.shape[1]

    def params(self):
        """Flat list [W1, b1, W2, b2, ...] (views, not copies)."""
        out = []
        for L in self.layers:
            out += [L.W, L.b]
        return out

    def copy(self):
        return Network([Layer(L.W.copy(), L.b.copy(), L.activation) for L in self.layers], self.schema)


@dataclass(frozen=True)
class Hyperparams:
    hidden: tuple = ARCHITECTURES[4]
    loss: str = "ce"  # ce | wce
    omega: float = 1.0
    batch_size: int = 256
    epochs: int = 10
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 5
    eval_every: int = 20
    seed: int = 0
    tau: float = 0.5

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0 or self.patience < 0 or self.eval_every < 1:
            raise ValueError("batch_size, eval_every >= 1 and epochs, patience >= 0 are required")
        if self.loss not in ("ce", "wce"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if any(w < 1 for w in self.hidden):
            raise ValueError("hidden widths must be >= 1")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def fresh(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


@dataclass
class TrainHistory:
    evaluations: list = field(default_factory=list)  # dicts: index, batch, train_loss, test_loss, metrics
    stop_reason: str = "epochs_exhausted"
    best_index: int = -1
    domain_metrics: dict = field(default_factory=dict)  # filled by transfer.retrain


def init(hidden, d, seed=0, schema="f1d_v1") -> Network:
    """He-normal weights (variance 2 / fan_in) and zero biases."""
    if any(w < 1 for w in hidden) or d < 1:
        raise ValueError("widths must be >= 1")
    rng = np.random.default_rng(seed)
    dims = [d] + list(hidden) + [1]
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        act = "sigmoid" if k == len(dims) - 2 else "relu"
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        layers.append(Layer(W, np.zeros(fan_out), act))
    return Network(layers, schema)


def _sigmoid(z):
    # split form avoids overflow in exp for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_input(net, X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != net.d:
        raise ValueError(f"input has {X.shape[1]} features, network expects {net.d}")
    return X, single


def _forward_cache(net, X):
    acts = [X]
    zs = []
    a = X
    for L in net.layers:
        z = a @ L.W.T + L.b
        zs.append(z)
        a = np.maximum(z, 0.0) if L.activation == "relu" else _sigmoid(z)
        acts.append(a)
    return zs, acts


def forward(net: Network, x):
    """Probabilities clamped to [1e-12, 1 - 1e-12]; scalar for a single vector."""
    X, single = _check_input(net, x)
    _, acts = _forward_cache(net, X)
    p = np.clip(acts[-1][:, 0], P_CLAMP, 1.0 - P_CLAMP)
    return float(p[0]) if single else p


def loss(p, y, kind="ce", omega=1.0):
    """Mean of ``-(omega y log p + (1 - y) log(1 - p))``; ``ce`` is ``omega = 1``."""
    if kind == "ce":
        omega = 1.0
    elif kind != "wce":
        raise ValueError(f"unknown loss {kind!r}")
    p = np.atleast_1d(np.asarray(p, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(-np.mean(omega * y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def backward(net: Network, X, y, kind="ce", omega=1.0):
    """Loss and exact gradients ``[dW1, db1, ...]`` for a batch.

    Uses ``dL/dz = omega y (p - 1) + (1 - y) p`` at the sigmoid input, with
    the unclamped sigmoid; ReLU has subgradient 0 at 0.
    """
    if kind == "ce":
        omega = 1.0
    X, _ = _check_input(net, X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    zs, acts = _forward_cache(net, X)
    n = X.shape[0]
    p = acts[-1][:, 0]
    value = loss(np.clip(p, P_CLAMP, 1.0 - P_CLAMP), y, "wce", omega)
    delta = ((omega * y * (p - 1.0) + (1.0 - y) * p) / n)[:, None]
    grads = [None] * (2 * len(net.layers))
    for k in range(len(net.layers) - 1, -1, -1):
        grads[2 * k] = delta.T @ acts[k]
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ net.layers[k].W) * (zs[k - 1] > 0.0)
    return value, grads


def adam_step(params, grads, state: AdamState, alpha=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place Adam update of ``params``; returns the advanced state."""
    if len(params) != len(state.m) or any(p.shape != m.shape for p, m in zip(params, state.m)):
        raise ValueError("Adam state does not match the parameters")
    t = state.t + 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= alpha * (m / c1) / (np.sqrt(v / c2) + eps)
    state.t = t
    return state


def predict(net: Network, x, tau=0.5):
    p = forward(net, x)
    return int(p >= tau) if np.ndim(p) == 0 else (p >= tau).astype(np.int8)


def _evaluate(net, ds, hyper):
    p = forward(net, ds.X)
    return loss(p, ds.y, hyper.loss, hyper.omega), classification_report(p >= hyper.tau, ds.y)


def train(net: Network, train_ds, test_ds, hyper: Hyperparams = Hyperparams()):
    """Mini-batch Adam with early stopping on ``test_ds`` loss.

    The monitored loss is evaluated every ``eval_every`` batches and at the
    end of each epoch; training stops after ``patience`` consecutive
    evaluations without improvement.  Returns the best-evaluation network.
    """
    for ds in (train_ds, test_ds):
        if ds.schema != net.schema:
            raise SchemaMismatchError(f"dataset schema {ds.schema!r} vs network schema {net.schema!r}")
    if len(train_ds) == 0 or len(test_ds) == 0:
        raise ValueError("training and monitoring sets must be non-empty")
    net = net.copy()
    params = net.params()
    state = AdamState.fresh(params)
    rng = np.random.default_rng(hyper.seed)
    history = TrainHistory()
    best_loss, best_net, stale = np.inf, net.copy(), 0
    n, bs = len(train_ds), hyper.batch_size
    batch = 0

    def evaluate(train_loss):
        nonlocal best_loss, best_net, stale
        test_loss, report = _evaluate(net, test_ds, hyper)
        history.evaluations.append({"index": len(history.evaluations), "batch": batch,
                                    "train_loss": train_loss, "test_loss": test_loss, **report})
        if test_loss < best_loss:
            best_loss, best_net, stale = test_loss, net.copy(), 0
            history.best_index = len(history.evaluations) - 1
            return False
        stale += 1
        return stale > hyper.patience

    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        stop = False
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            value, grads = backward(net, train_ds.X[idx], train_ds.y[idx], hyper.loss, hyper.omega)
            adam_step(params, grads, state, hyper.alpha, hyper.beta1, hyper.beta2, hyper.eps)
            batch += 1
            if batch % hyper.eval_every == 0 and evaluate(value):
                stop = True
                break
        if stop:
            history.stop_reason = "early_stopped"
            break
        if batch % hyper.eval_every != 0 and evaluate(value):
            history.stop_reason = "early_stopped"
            break
    return best_net, history


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def save_model(net: Network, path, meta=None):
    """Text format; ``meta`` adds ``key=value`` tokens (no spaces) to the description line."""
    extra = "".join(f" {k}={v}" for k, v in (meta or {}).items())
    with open(path, "w") as fh:
        fh.write(MODEL_TAG + "\n")
        fh.write(f"schema={net.schema} d={net.d} layers={len(net.layers)}{extra}\n")
        for L in net.layers:
            rows, cols = L.W.shape
            fh.write(f"layer {rows} {cols} {L.activation}\n")
            for row in L.W.tolist():
                fh.write(" ".join(map(repr, row)) + "\n")
            fh.write(" ".join(map(repr, L.b.tolist())) + "\n")


def _numbers(line, count, lineno):
    parts = line.split()
    if len(parts) != count:
        raise ModelFormatError(f"line {lineno}: expected {count} numbers, got {len(parts)}")
    try:
        return [float(v) for v in parts]
    except ValueError as err:
        raise ModelFormatError(f"line {lineno}: {err}") from None


def load_model(path, expected_schema=None) -> Network:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != MODEL_TAG:
        raise ModelFormatError(f"line 1: expected '{MODEL_TAG}'")
    if len(lines) < 2:
        raise ModelFormatError("line 2: missing model description")
    try:
        head = dict(tok.split("=", 1) for tok in lines[1].split())
        schema, d, n_layers = head["schema"], int(head["d"]), int(head["layers"])
    except (KeyError, ValueError):
        raise ModelFormatError(f"line 2: malformed description {lines[1]!r}") from None
    try:
        get_schema(schema)
    except ValueError as err:
        raise ModelFormatError(f"line 2: {err}") from None
    if expected_schema is not None and schema != expected_schema:
        raise SchemaMismatchError(f"model schema {schema!r}, expected {expected_schema!r}")
    pos, layers, fan_in = 2, [], d
    for _ in range(n_layers):
        if pos >= len(lines):
            raise ModelFormatError(f"line {pos + 1}: file ends inside the layer list")
        parts = lines[pos].split()
        try:
            if parts[0] != "layer":
                raise ValueError
            rows, cols, act = int(parts[1]), int(parts[2]), parts[3]
        except (IndexError, ValueError):
            raise ModelFormatError(f"line {pos + 1}: malformed layer line {lines[pos]!r}") from None
        if cols != fan_in or rows < 1 or act not in ACTIVATIONS:
            raise ModelFormatError(f"line {pos + 1}: layer {rows}x{cols} {act} does not chain (expected {fan_in} inputs)")
        if pos + rows + 1 >= len(lines):
            raise ModelFormatError(f"line {len(lines) + 1}: file ends inside a layer")
        W = np.array([_numbers(lines[pos + 1 + r], cols, pos + 2 + r) for r in range(rows)])
        b = np.array(_numbers(lines[pos + 1 + rows], rows, pos + 2 + rows))
        layers.append(Layer(W, b, act))
        pos += rows + 2
        fan_in = rows
    if any(line.strip() for line in lines[pos:]):
        raise ModelFormatError(f"line {pos + 1}: unexpected trailing content")
    try:
        return Network(layers, schema)
    except ValueError as err:
        raise ModelFormatError(str(err)) from None
