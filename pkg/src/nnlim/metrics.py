"""Classifier metrics, L1 solution errors and convergence tables."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import eval_nodes_1d, eval_nodes_2d, gauss_quadrature


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


def confusion(pred, truth) -> Confusion:
    pred = np.asarray(pred).astype(bool).ravel()
    truth = np.asarray(truth).astype(bool).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} labels")
    return Confusion(
        tp=int(np.sum(pred & truth)),
        tn=int(np.sum(~pred & ~truth)),
        fp=int(np.sum(pred & ~truth)),
        fn=int(np.sum(~pred & truth)),
    )


@dataclass(frozen=True)
class Score:
    """A ratio in [0, 1]; ``degenerate`` marks a zero denominator (value 0)."""

    value: float
    degenerate: bool = False

    def __float__(self):
        return self.value


def _ratio(num, den):
    return Score(num / den, False) if den else Score(0.0, True)


def accuracy(c: Confusion) -> Score:
    return _ratio(c.tp + c.tn, c.total)


def recall(c: Confusion) -> Score:
    return _ratio(c.tp, c.tp + c.fn)


def precision(c: Confusion) -> Score:
    return _ratio(c.tp, c.tp + c.fp)


def classification_report(pred, truth):
    c = confusion(pred, truth)
    return {
        "accuracy": accuracy(c).value,
        "recall": recall(c).value,
        "precision": precision(c).value,
    }


def l1_error(sol, exact):
    """Per-variable L1 error against ``exact`` using p + 2 Gauss points per direction."""
    p = sol.degree
    nodes, weights = gauss_quadrature(p + 2)
    if sol.coeffs.ndim == 3:
        mesh = sol.mesh
        x = mesh.x_min + (np.arange(mesh.n_cells)[:, None] + 0.5 * (1.0 + nodes)) * mesh.h
        uh = eval_nodes_1d(sol.coeffs, nodes)
        ue = np.asarray(exact(x), dtype=float)
        ue = np.broadcast_to(ue if ue.ndim == 3 else ue[None], uh.shape)
        return (np.abs(uh - ue) @ weights).sum(axis=1) * 0.5 * mesh.h
    mesh = sol.mesh
    xc, yc = mesh.centers
    X = xc[:, None, None, None] + 0.5 * mesh.dx * nodes[None, None, :, None]
    Y = yc[None, :, None, None] + 0.5 * mesh.dy * nodes[None, None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    uh = eval_nodes_2d(sol.coeffs, nodes, nodes)
    ue = np.asarray(exact(X, Y), dtype=float)
    ue = np.broadcast_to(ue if ue.ndim == 5 else ue[None], uh.shape)
    w2 = weights[:, None] * weights[None, :]
    return (np.abs(uh - ue) * w2).sum(axis=(1, 2, 3, 4)) * 0.25 * mesh.dx * mesh.dy


def convergence_table(errors, ns):
    """Rows ``(N, error, rate)`` with rate = ln(e_prev / e) / ln(N / N_prev); first rate 0."""
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("grid sizes must be strictly increasing")
    if any(not e > 0 for e in errors):
        raise ValueError("errors must be positive")
    rows = []
    for k, (n, e) in enumerate(zip(ns, errors)):
        rate = 0.0 if k == 0 else math.log(errors[k - 1] / e) / math.log(n / ns[k - 1])
        rows.append((n, float(e), rate))
    return rows


def write_convergence_csv(path, blocks, caption):
    """``blocks`` maps a label such as ``order=3 limiter=hio`` to table rows."""
    with open(path, "w") as fh:
        fh.write(f"# caption={caption}\n")
        for label, rows in blocks.items():
            fh.write(f"# {label}\n")
            fh.write("N,error,rate\n")
            for n, e, r in rows:
                fh.write(f"{n},{e!r},{r!r}\n")
