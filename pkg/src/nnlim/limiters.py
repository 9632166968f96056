"""Classical DG limiters: Minmod, TVB and the hierarchical moment limiter (HIO).

Every limiter returns a :class:`LimiterOutcome`; cell averages are never
modified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .core import (
    ModalSolution1D,
    ModalSolution2D,
    cons_to_prim,
    eval_nodes_1d,
    eval_nodes_2d,
    gauss_quadrature,
    modal_to_nodal_1d,
    nodal_to_modal_1d,
    prim_to_cons,
)

CHANGE_TOL = 1e-14


@dataclass
class LimiterOutcome:
    solution: ModalSolution1D | ModalSolution2D
    changed: np.ndarray  # bool per cell
    max_deviation: np.ndarray  # per cell, max |u_lim - u| over evaluation nodes
    flagged: np.ndarray | None = None  # detector decision when it differs from ``changed``

    @property
    def changed_cells(self):
        """Flat indices (1D) or (i, j) pairs (2D) of modified cells."""
        if self.changed.ndim == 1:
            return set(np.flatnonzero(self.changed).tolist())
        return {tuple(ij) for ij in np.argwhere(self.changed).tolist()}


def minmod(a, b, c):
    """Smallest-magnitude argument if all three share a sign, else 0."""
    if (a > 0 and b > 0 and c > 0) or (a < 0 and b < 0 and c < 0):
        return min((a, b, c), key=abs)
    return 0.0


def hio_kappa(degree):
    """Neighbour-difference scaling per mode (index 0 unused) for the baseline limiter.

    Unit scaling is the least restrictive choice of the moment limiter; it
    leaves smooth extrema untouched at p = 2.
    """
    return np.array([0.0] + [1.0] * degree)


def restrictive_kappa(degree):
    """Scaling ``1 / (2 (2m - 1))``, the most restrictive moment limiter; used for labeling."""
    return np.array([0.0] + [1.0 / (2.0 * (2 * m - 1)) for m in range(1, degree + 1)])


def cell_deviation(old, new):
    """Max abs nodal difference per cell over p + 2 Gauss nodes (all variables)."""
    p = old.shape[-1] - 1
    nodes, _ = gauss_quadrature(p + 2)
    diff = new - old
    if diff.ndim == 3:
        vals = eval_nodes_1d(diff, nodes)
        return np.abs(vals).max(axis=(0, 2))
    vals = eval_nodes_2d(diff, nodes, nodes)
    return np.abs(vals).max(axis=(0, 3, 4))


def _outcome(sol, new_coeffs):
    dev = cell_deviation(sol.coeffs, new_coeffs)
    # averages are copied bitwise from the input
    if new_coeffs.ndim == 3:
        new_coeffs[..., 0] = sol.coeffs[..., 0]
    else:
        new_coeffs[..., 0, 0] = sol.coeffs[..., 0, 0]
    return LimiterOutcome(sol.with_coeffs(new_coeffs), dev > CHANGE_TOL, dev)


def _cell_mask(changed):
    return changed.any(axis=0)


def apply_minmod_1d(sol: ModalSolution1D) -> LimiterOutcome:
    new, _ = kernels.minmod_limit_1d(sol.extended(), -1.0)
    return _outcome(sol, new)


def apply_tvd_1d(sol: ModalSolution1D, M: float) -> LimiterOutcome:
    """TVB-modified Minmod: cells with ``|mean - u^+_{j-1/2}| <= M h^2`` are left alone."""
    if M < 0:
        raise ValueError("M must be non-negative")
    thresh = M * sol.mesh.h**2
    new, _ = kernels.minmod_limit_1d(sol.extended(), thresh)
    return _outcome(sol, new)


def apply_hio_1d(sol: ModalSolution1D, kappa=None) -> LimiterOutcome:
    kappa = hio_kappa(sol.degree) if kappa is None else np.asarray(kappa, dtype=float)
    new, _ = kernels.hio_limit_1d(sol.extended(), kappa)
    return _outcome(sol, new)


def apply_minmod_2d(sol: ModalSolution2D) -> LimiterOutcome:
    new, _ = kernels.minmod_limit_2d(sol.extended())
    return _outcome(sol, new)


def apply_hio_2d(sol: ModalSolution2D, kappa=None) -> LimiterOutcome:
    kappa = hio_kappa(sol.degree) if kappa is None else np.asarray(kappa, dtype=float)
    new, _ = kernels.hio_limit_2d(sol.extended(), kappa)
    return _outcome(sol, new)


def identity_limiter(sol):
    shape = sol.coeffs.shape[1:2] if sol.coeffs.ndim == 3 else sol.coeffs.shape[1:3]
    return LimiterOutcome(sol, np.zeros(shape, bool), np.zeros(shape))


def minmod_cells_1d(sol: ModalSolution1D, mask: np.ndarray) -> np.ndarray:
    """Minmod-limited coefficients in the cells selected by ``mask``, input elsewhere."""
    new, _ = kernels.minmod_limit_1d(sol.extended(), -1.0)
    out = sol.coeffs.copy()
    out[:, mask] = new[:, mask]
    return out


def minmod_cells_2d(sol: ModalSolution2D, mask: np.ndarray) -> np.ndarray:
    new, _ = kernels.minmod_limit_2d(sol.extended())
    out = sol.coeffs.copy()
    out[:, mask] = new[:, mask]
    return out


# ---------------------------------------------------------------------------
# Euler: limiting in primitive variables
# ---------------------------------------------------------------------------

def to_primitive_1d(sol: ModalSolution1D, gamma: float) -> ModalSolution1D:
    """Nodal conversion at p + 1 Gauss points followed by reprojection."""
    return primitive_with_fallback(sol, gamma)[0]


def _unphysical(nodal, gamma):
    """Per cell: some node has non-positive density or pressure."""
    rho, mom, E = nodal
    with np.errstate(divide="ignore", invalid="ignore"):
        p = (gamma - 1.0) * (E - 0.5 * mom * mom / rho)
    return (~(rho > 0) | ~(p > 0)).any(axis=-1)


def admissibility_nodes(degree):
    """Points where the scheme evaluates a cell: both traces and p + 2 Gauss nodes."""
    return np.concatenate([[-1.0], gauss_quadrature(degree + 2)[0], [1.0]])


def unphysical_cells(coeffs, gamma):
    """Cells whose conserved reconstruction is unphysical at a conversion or scheme node."""
    p = coeffs.shape[-1] - 1
    bad = _unphysical(modal_to_nodal_1d(coeffs), gamma)
    return bad | _unphysical(eval_nodes_1d(coeffs, admissibility_nodes(p)), gamma)


def primitive_with_fallback(sol: ModalSolution1D, gamma: float, admissibility: bool = True):
    """Primitive modal coefficients and the mask of cells that needed a fallback.

    A cell with an unphysical state at a conversion node (with
    ``admissibility`` also at any scheme node) gets the constant primitive
    state of its conserved average instead.  Unphysical averages raise
    :class:`PositivityError`.
    """
    fixed = None
    if sol.fixed_ghosts is not None:
        fixed = _convert(sol.fixed_ghosts, lambda u: cons_to_prim(u, gamma))
    nodal = modal_to_nodal_1d(sol.coeffs)
    bad = unphysical_cells(sol.coeffs, gamma) if admissibility else _unphysical(nodal, gamma)
    if bad.any():
        nodal = nodal.copy()
        nodal[:, bad] = sol.coeffs[:, bad, :1]
    prim = nodal_to_modal_1d(cons_to_prim(nodal, gamma), sol.degree)
    return ModalSolution1D(sol.mesh, prim, sol.parity, fixed), bad


def _convert(coeffs, fn):
    p = coeffs.shape[-1] - 1
    nodal = modal_to_nodal_1d(coeffs)
    return nodal_to_modal_1d(fn(nodal), p)


def limit_primitive_1d(sol: ModalSolution1D, limiter: Callable, gamma: float,
                       admissibility: bool = True) -> LimiterOutcome:
    """Run ``limiter`` on primitive variables and map changed cells back.

    Unchanged cells keep their conserved coefficients bitwise; in changed
    cells the conserved averages are restored after the back-conversion so
    the update stays conservative.  Cells that cannot be converted are
    always treated as changed, and a changed cell whose rebuilt state is
    unphysical at a scheme node keeps only its average.

    ``admissibility`` also treats cells as troubled when their conserved
    reconstruction is unphysical at a trace or quadrature node, whatever the
    limiter decides.  Disable it to judge a detector on its own.
    """
    prim, bad = primitive_with_fallback(sol, gamma, admissibility)
    res = limiter(prim)
    mask = res.changed | bad
    new = sol.coeffs.copy()
    if mask.any():
        back = _convert(res.solution.coeffs[:, mask], lambda w: prim_to_cons(w, gamma))
        back[..., 0] = sol.coeffs[:, mask, 0]
        still_bad = unphysical_cells(back, gamma)
        back[:, still_bad, 1:] = 0.0
        new[:, mask] = back
    dev = cell_deviation(sol.coeffs, new)
    flagged = None if res.flagged is None else res.flagged | bad
    return LimiterOutcome(sol.with_coeffs(new), mask, dev, flagged)
