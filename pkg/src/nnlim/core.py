"""Meshes, modal Legendre representation, quadrature and Euler variables.

Solutions are stored modally on the classical Legendre basis with
``P_m(1) = 1``, so mode 0 of every cell is its average.  Coefficient arrays
are laid out as ``(n_vars, n_cells, p + 1)`` in 1D and
``(n_vars, nx, ny, p + 1, p + 1)`` in 2D.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

MAX_MODE = 4
SUPPORTED_DEGREES = (1, 2)


class UnsupportedError(ValueError):
    """Requested degree, mode or quadrature size is outside the supported range."""


class PositivityError(ArithmeticError):
    """Density or pressure became non-positive.

    ``cell`` is the (flat) cell index of the first offending point and ``x``
    its location, when known.
    """

    def __init__(self, message, cell=None, x=None, time=None):
        super().__init__(message)
        self.cell = cell
        self.x = x
        self.time = time


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    GRADIENT_FREE = "gradient_free"
    REFLEXIVE = "reflexive"
    FIXED_TO_INITIAL = "fixed_to_initial"


# ---------------------------------------------------------------------------
# Basis and quadrature
# ---------------------------------------------------------------------------

def legendre_eval(mode, xi):
    """Classical Legendre polynomial ``P_mode`` at ``xi`` (scalar or array)."""
    if not 0 <= mode <= MAX_MODE:
        raise UnsupportedError(f"unsupported degree: mode {mode} not in [0, {MAX_MODE}]")
    xi = np.asarray(xi, dtype=float)
    if mode == 0:
        out = np.ones_like(xi)
    elif mode == 1:
        out = xi.copy()
    elif mode == 2:
        out = 0.5 * (3.0 * xi**2 - 1.0)
    elif mode == 3:
        out = 0.5 * (5.0 * xi**3 - 3.0 * xi)
    else:
        out = (35.0 * xi**4 - 30.0 * xi**2 + 3.0) / 8.0
    return out if out.ndim else float(out)


def legendre_derivative(mode, xi):
    xi = np.asarray(xi, dtype=float)
    if mode == 0:
        out = np.zeros_like(xi)
    elif mode == 1:
        out = np.ones_like(xi)
    elif mode == 2:
        out = 3.0 * xi
    elif mode == 3:
        out = 0.5 * (15.0 * xi**2 - 3.0)
    elif mode == 4:
        out = (140.0 * xi**3 - 60.0 * xi) / 8.0
    else:
        raise UnsupportedError(f"unsupported degree: mode {mode}")
    return out if out.ndim else float(out)


def vandermonde(degree, xi):
    """Matrix ``V[k, m] = P_m(xi_k)``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return np.stack([legendre_eval(m, xi) for m in range(degree + 1)], axis=-1)


def gauss_quadrature(n_points):
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    if not 1 <= n_points <= 8:
        raise UnsupportedError(f"unsupported quadrature size {n_points}; expected 1..8")
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    return nodes, weights


def mass_diagonal(degree):
    """``int_{-1}^{1} P_m^2`` for m = 0..degree."""
    return 2.0 / (2.0 * np.arange(degree + 1) + 1.0)


def stiffness_matrix(degree):
    """``S[m, a] = int P_m P_a'`` on the reference cell: 2 when a > m and a + m is odd."""
    m, a = np.indices((degree + 1, degree + 1))
    return np.where((a > m) & ((a + m) % 2 == 1), 2.0, 0.0)


def _check_degree(degree):
    if degree not in SUPPORTED_DEGREES:
        raise UnsupportedError(f"unsupported degree {degree}; supported: {SUPPORTED_DEGREES}")


# ---------------------------------------------------------------------------
# Meshes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mesh1D:
    x_min: float
    x_max: float
    n_cells: int
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.n_cells < 3:
            raise ValueError("Mesh1D needs at least 3 cells")
        if not self.x_max > self.x_min:
            raise ValueError("Mesh1D needs x_max > x_min")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def h(self):
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self):
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.h

    def to_physical(self, cell, xi):
        return self.x_min + (cell + 0.5 * (1.0 + xi)) * self.h


@dataclass(frozen=True)
class Mesh2D:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("Mesh2D needs at least 3 cells per axis")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("Mesh2D needs positive extents")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self):
        return (self.y_max - self.y_min) / self.ny

    @property
    def centers(self):
        xc = self.x_min + (np.arange(self.nx) + 0.5) * self.dx
        yc = self.y_min + (np.arange(self.ny) + 0.5) * self.dy
        return xc, yc


# ---------------------------------------------------------------------------
# Modal solutions
# ---------------------------------------------------------------------------

@dataclass
class ModalSolution1D:
    """Per-cell Legendre coefficients, shape ``(n_vars, n_cells, p + 1)``.

    ``parity`` gives the sign each variable picks up under reflection (the
    momentum/velocity of an Euler state flips), used by reflexive ghosts.
    ``fixed_ghosts`` (shape ``(n_vars, 2, p + 1)``) backs the
    ``fixed_to_initial`` boundary.
    """

    mesh: Mesh1D
    coeffs: np.ndarray
    parity: tuple = None
    fixed_ghosts: np.ndarray | None = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 3 or self.coeffs.shape[1] != self.mesh.n_cells:
            raise ValueError(f"coefficient array shape {self.coeffs.shape} does not match mesh")
        _check_degree(self.degree)
        if self.parity is None:
            self.parity = (1.0,) * self.n_vars

    @property
    def degree(self):
        return self.coeffs.shape[2] - 1

    @property
    def n_vars(self):
        return self.coeffs.shape[0]

    def with_coeffs(self, coeffs):
        return ModalSolution1D(self.mesh, coeffs, self.parity, self.fixed_ghosts)

    def copy(self):
        return self.with_coeffs(self.coeffs.copy())

    def averages(self):
        return self.coeffs[..., 0]

    def extended(self, coeffs=None):
        """Coefficients with one ghost cell on each side."""
        c = self.coeffs if coeffs is None else coeffs
        return ghost_extend_1d(c, self.mesh.boundary, self.parity, self.fixed_ghosts)


@dataclass
class ModalSolution2D:
    """Tensor-product coefficients, shape ``(n_vars, nx, ny, p + 1, p + 1)``."""

    mesh: Mesh2D
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        c = self.coeffs
        if c.ndim != 5 or c.shape[1:3] != (self.mesh.nx, self.mesh.ny) or c.shape[3] != c.shape[4]:
            raise ValueError(f"coefficient array shape {c.shape} does not match mesh")
        _check_degree(self.degree)

    @property
    def degree(self):
        return self.coeffs.shape[3] - 1

    @property
    def n_vars(self):
        return self.coeffs.shape[0]

    def with_coeffs(self, coeffs):
        return ModalSolution2D(self.mesh, coeffs)

    def copy(self):
        return self.with_coeffs(self.coeffs.copy())

    def averages(self):
        return self.coeffs[..., 0, 0]

    def extended(self, coeffs=None):
        c = self.coeffs if coeffs is None else coeffs
        return ghost_extend_2d(c, self.mesh.boundary)


def _reflect_modes(c):
    """Mirror a cell's modal coefficients about its center: c_m -> (-1)^m c_m."""
    signs = (-1.0) ** np.arange(c.shape[-1])
    return c * signs


def ghost_extend_1d(coeffs, boundary, parity=None, fixed=None):
    """Pad ``coeffs`` (n_vars, n, p+1) with one ghost cell per side."""
    boundary = Boundary(boundary)
    if boundary is Boundary.PERIODIC:
        left, right = coeffs[:, -1:], coeffs[:, :1]
    elif boundary is Boundary.GRADIENT_FREE:
        left, right = coeffs[:, :1], coeffs[:, -1:]
    elif boundary is Boundary.REFLEXIVE:
        sign = np.ones(coeffs.shape[0]) if parity is None else np.asarray(parity, dtype=float)
        left = _reflect_modes(coeffs[:, :1]) * sign[:, None, None]
        right = _reflect_modes(coeffs[:, -1:]) * sign[:, None, None]
    else:
        if fixed is None:
            left, right = coeffs[:, :1], coeffs[:, -1:]
        else:
            left, right = fixed[:, :1], fixed[:, 1:2]
    return np.concatenate([left, coeffs, right], axis=1)


def ghost_extend_2d(coeffs, boundary):
    """Pad ``coeffs`` (n_vars, nx, ny, q, q) with one ghost layer per side."""
    boundary = Boundary(boundary)
    if boundary is Boundary.PERIODIC:
        c = np.concatenate([coeffs[:, -1:], coeffs, coeffs[:, :1]], axis=1)
        return np.concatenate([c[:, :, -1:], c, c[:, :, :1]], axis=2)
    if boundary is Boundary.REFLEXIVE:
        q = coeffs.shape[-1]
        sx = ((-1.0) ** np.arange(q))[:, None]
        sy = ((-1.0) ** np.arange(q))[None, :]
        c = np.concatenate([coeffs[:, :1] * sx, coeffs, coeffs[:, -1:] * sx], axis=1)
        return np.concatenate([c[:, :, :1] * sy, c, c[:, :, -1:] * sy], axis=2)
    c = np.concatenate([coeffs[:, :1], coeffs, coeffs[:, -1:]], axis=1)
    return np.concatenate([c[:, :, :1], c, c[:, :, -1:]], axis=2)


# ---------------------------------------------------------------------------
# Evaluation and projection
# ---------------------------------------------------------------------------

def eval_at(sol, cell, var, xi):
    """Evaluate the modal expansion of ``var`` in ``cell`` at reference ``xi``."""
    if not (0 <= cell < sol.mesh.n_cells and 0 <= var < sol.n_vars):
        raise IndexError(f"cell {cell} / var {var} out of range")
    c = sol.coeffs[var, cell]
    return float(sum(c[m] * legendre_eval(m, xi) for m in range(len(c))))


def eval_nodes_1d(coeffs, xi):
    """All cells at reference points: returns (..., n_points)."""
    V = vandermonde(coeffs.shape[-1] - 1, xi)
    return coeffs @ V.T


def eval_nodes_2d(coeffs, xi, eta):
    """Tensor evaluation: returns (..., len(xi), len(eta))."""
    q = coeffs.shape[-1] - 1
    Vx = vandermonde(q, xi)
    Vy = vandermonde(q, eta)
    return np.einsum("...ab,ia,jb->...ij", coeffs, Vx, Vy)


def _vector_field(f, x, n_vars, *rest):
    vals = np.asarray(f(x, *rest), dtype=float)
    if n_vars == 1 and vals.shape == np.shape(x):
        vals = vals[None]
    return np.broadcast_to(vals, (n_vars,) + np.shape(x))


def project_1d(f: Callable, mesh: Mesh1D, degree: int, n_vars: int = 1, n_quad=None):
    """L2 projection of ``f(x)`` (scalar or stacked vector field) onto the basis."""
    _check_degree(degree)
    n_quad = n_quad or degree + 2
    nodes, weights = gauss_quadrature(n_quad)
    x = mesh.x_min + (np.arange(mesh.n_cells)[:, None] + 0.5 * (1.0 + nodes)) * mesh.h
    vals = _vector_field(f, x, n_vars)  # (n_vars, n, nq)
    V = vandermonde(degree, nodes)
    coeffs = np.einsum("vnk,k,km->vnm", vals, weights, V) / mass_diagonal(degree)
    return coeffs


def project_ic(f, mesh, degree, n_vars=1, n_quad=None):
    """Project an initial condition onto a 1D or 2D modal solution."""
    if isinstance(mesh, Mesh1D):
        return ModalSolution1D(mesh, project_1d(f, mesh, degree, n_vars, n_quad))
    _check_degree(degree)
    n_quad = n_quad or degree + 2
    nodes, weights = gauss_quadrature(n_quad)
    xc, yc = mesh.centers
    X = xc[:, None, None, None] + 0.5 * mesh.dx * nodes[None, None, :, None]
    Y = yc[None, :, None, None] + 0.5 * mesh.dy * nodes[None, None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    vals = np.asarray(f(X, Y), dtype=float)
    if vals.shape == X.shape:
        vals = vals[None]
    vals = np.broadcast_to(vals, (n_vars,) + X.shape)
    V = vandermonde(degree, nodes)
    M = mass_diagonal(degree)
    coeffs = np.einsum("vijkl,k,l,ka,lb->vijab", vals, weights, weights, V, V)
    coeffs /= M[:, None] * M[None, :]
    return ModalSolution2D(mesh, coeffs)


# ---------------------------------------------------------------------------
# Euler variables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EulerParams:
    gamma: float = 1.4

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError("gamma must exceed 1")


def _first_bad(mask):
    idx = np.argwhere(mask)
    return tuple(int(i) for i in idx[0]) if len(idx) else None


def cons_to_prim(state, gamma=1.4):
    """(rho, rho v, E) -> (rho, v, p); leading axis indexes the variable."""
    rho, mom, E = np.asarray(state, dtype=float)
    bad = ~(rho > 0)
    if np.any(bad):
        raise PositivityError("non-positive density", cell=_first_bad(bad))
    v = mom / rho
    p = (gamma - 1.0) * (E - 0.5 * rho * v * v)
    bad = ~(p > 0)
    if np.any(bad):
        raise PositivityError("non-positive pressure", cell=_first_bad(bad))
    return np.stack([rho, v, p])


def prim_to_cons(prim, gamma=1.4):
    rho, v, p = np.asarray(prim, dtype=float)
    if np.any(~(rho > 0)) or np.any(~(p > 0)):
        raise PositivityError("non-positive primitive state")
    return np.stack([rho, rho * v, p / (gamma - 1.0) + 0.5 * rho * v * v])


def sound_speed(prim, gamma=1.4):
    rho, _, p = prim
    return np.sqrt(gamma * p / rho)


def modal_to_nodal_1d(coeffs, n_nodes=None):
    """Values at the ``n_nodes`` Gauss points (default p + 1)."""
    p = coeffs.shape[-1] - 1
    nodes, _ = gauss_quadrature(n_nodes or p + 1)
    return eval_nodes_1d(coeffs, nodes)


def nodal_to_modal_1d(values, degree):
    """Inverse of :func:`modal_to_nodal_1d` at p + 1 Gauss points."""
    nodes, weights = gauss_quadrature(degree + 1)
    V = vandermonde(degree, nodes)
    return (values * weights) @ V / mass_diagonal(degree)
