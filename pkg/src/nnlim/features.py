"""Cell-patch features for the troubled-cell classifier.

1D vectors have 11 entries, 2D vectors 23.  Widths stay raw, value entries
are mapped with :func:`normalize_value` against the patch-average extremes
and difference entries are divided by the same ``|u_max| + |u_min|``.

Difference conventions: in 1D ``du_{i+1} = u_{i+1} - u_i`` and
``du_{i-1} = u_i - u_{i-1}``; in 2D ``du_{i+-1,j} = u_ij - u_{i+-1,j}`` (the
form used by the triangle remap).  Both use ``du_i = (u_{i+1} - u_{i-1}) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ModalSolution1D, ModalSolution2D, legendre_eval

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class FeatureSchema:
    id: str
    entries: tuple  # (name, kind) with kind in {width, value, difference, extremum}

    @property
    def d(self):
        return len(self.entries)

    def indices(self, *kinds):
        return np.array([k for k, (_, kind) in enumerate(self.entries) if kind in kinds], dtype=int)


F1D_V1 = FeatureSchema("f1d_v1", (
    ("h", "width"),
    ("u_i", "value"),
    ("u_ip1", "value"),
    ("u_im1", "value"),
    ("u_imh_plus", "value"),
    ("u_iph_minus", "value"),
    ("u_imh_minus", "value"),
    ("u_iph_plus", "value"),
    ("du_ip1", "difference"),
    ("du_im1", "difference"),
    ("du_i", "difference"),
))

F2D_V1 = FeatureSchema("f2d_v1", (
    ("dx", "width"),
    ("dy", "width"),
    ("u_ij", "value"),
    ("u_ip1j", "value"),
    ("u_im1j", "value"),
    ("u_ijp1", "value"),
    ("u_ijm1", "value"),
    ("u_imhj_in", "value"),
    ("u_iphj_in", "value"),
    ("u_imhj_out", "value"),
    ("u_iphj_out", "value"),
    ("u_ijmh_in", "value"),
    ("u_ijph_in", "value"),
    ("u_ijmh_out", "value"),
    ("u_ijph_out", "value"),
    ("du_ip1j", "difference"),
    ("du_im1j", "difference"),
    ("du_ij_x", "difference"),
    ("du_ijp1", "difference"),
    ("du_ijm1", "difference"),
    ("du_ij_y", "difference"),
    ("u_max", "extremum"),
    ("u_min", "extremum"),
))

SCHEMAS = {s.id: s for s in (F1D_V1, F2D_V1)}


class UnknownSchemaError(ValueError):
    pass


class InvalidPatchError(ValueError):
    pass


class SchemaMismatchError(ValueError):
    pass


def get_schema(schema_id: str) -> FeatureSchema:
    try:
        return SCHEMAS[schema_id]
    except KeyError:
        raise UnknownSchemaError(f"unknown feature schema {schema_id!r}") from None


@dataclass(frozen=True)
class FeatureVector:
    schema: str
    values: np.ndarray


def normalize_value(u, u_max, u_min):
    """``(u - u_min)/D - (u_max - u)/D`` with ``D = |u_max| + |u_min|``; 0 when ``D < 1e-12``.

    Works elementwise on arrays.
    """
    u, u_max, u_min = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (u, u_max, u_min)))
    den = np.abs(u_max) + np.abs(u_min)
    ok = den >= DEGENERATE_TOL
    safe = np.where(ok, den, 1.0)
    out = np.where(ok, ((u - u_min) - (u_max - u)) / safe, 0.0)
    return float(out) if out.ndim == 0 else out


def _scale_differences(d, u_max, u_min):
    den = np.abs(u_max) + np.abs(u_min)
    ok = den >= DEGENERATE_TOL
    return np.where(ok, d / np.where(ok, den, 1.0), 0.0)


def _assemble(raw, schema, u_max, u_min):
    """Normalize raw entries (..., d) into a copy; widths pass through, values are clipped to [-1, 1]."""
    out = np.array(raw, dtype=float, copy=True)
    vals = schema.indices("value", "extremum")
    diffs = schema.indices("difference")
    # traces can overshoot the average extremes; saturate them at the bounds
    out[..., vals] = np.clip(normalize_value(raw[..., vals], u_max[..., None], u_min[..., None]), -1.0, 1.0)
    out[..., diffs] = _scale_differences(raw[..., diffs], u_max[..., None], u_min[..., None])
    return out


def raw_features_1d(sol: ModalSolution1D):
    """Unnormalized features for every cell and variable, shape (V, n, 11)."""
    c = sol.extended()
    signs = (-1.0) ** np.arange(sol.degree + 1)
    u_right = c.sum(axis=-1)  # trace at xi = +1
    u_left = (c * signs).sum(axis=-1)  # trace at xi = -1
    avg = c[..., 0]
    V, n = sol.n_vars, sol.mesh.n_cells
    raw = np.empty((V, n, 11))
    raw[..., 0] = sol.mesh.h
    raw[..., 1] = avg[:, 1:-1]
    raw[..., 2] = avg[:, 2:]
    raw[..., 3] = avg[:, :-2]
    raw[..., 4] = u_left[:, 1:-1]
    raw[..., 5] = u_right[:, 1:-1]
    raw[..., 6] = u_right[:, :-2]
    raw[..., 7] = u_left[:, 2:]
    raw[..., 8] = avg[:, 2:] - avg[:, 1:-1]
    raw[..., 9] = avg[:, 1:-1] - avg[:, :-2]
    raw[..., 10] = 0.5 * (avg[:, 2:] - avg[:, :-2])
    return raw


def features_1d(sol: ModalSolution1D):
    """Normalized f1d_v1 features for every cell and variable, shape (V, n, 11)."""
    raw = raw_features_1d(sol)
    three = raw[..., 1:4]
    return _assemble(raw, F1D_V1, three.max(axis=-1), three.min(axis=-1))


def extract_features_1d(sol: ModalSolution1D, cell: int, var: int = 0) -> FeatureVector:
    n = sol.mesh.n_cells
    if not (0 <= cell < n) or not (0 <= var < sol.n_vars):
        raise IndexError(f"cell {cell} / var {var} out of range (n={n}, vars={sol.n_vars})")
    return FeatureVector(F1D_V1.id, features_1d(sol)[var, cell].copy())


def _face_values(c, xi, axis):
    """Trace of tensor coefficients at xi on the given axis, other coordinate at 0."""
    q = c.shape[-1]
    at_face = np.array([legendre_eval(m, xi) for m in range(q)])
    at_mid = np.array([legendre_eval(m, 0.0) for m in range(q)])
    if axis == 0:
        return np.einsum("...mn,m,n->...", c, at_face, at_mid)
    return np.einsum("...mn,m,n->...", c, at_mid, at_face)


def raw_features_2d(sol: ModalSolution2D):
    """Unnormalized features for every cell and variable, shape (V, nx, ny, 23)."""
    c = sol.extended()
    avg = c[..., 0, 0]
    xl = _face_values(c, -1.0, 0)
    xr = _face_values(c, 1.0, 0)
    yl = _face_values(c, -1.0, 1)
    yr = _face_values(c, 1.0, 1)
    V, nx, ny = sol.n_vars, sol.mesh.nx, sol.mesh.ny
    I = slice(1, -1)
    raw = np.empty((V, nx, ny, 23))
    raw[..., 0] = sol.mesh.dx
    raw[..., 1] = sol.mesh.dy
    raw[..., 2] = avg[:, I, I]
    raw[..., 3] = avg[:, 2:, I]
    raw[..., 4] = avg[:, :-2, I]
    raw[..., 5] = avg[:, I, 2:]
    raw[..., 6] = avg[:, I, :-2]
    raw[..., 7] = xl[:, I, I]
    raw[..., 8] = xr[:, I, I]
    raw[..., 9] = xr[:, :-2, I]
    raw[..., 10] = xl[:, 2:, I]
    raw[..., 11] = yl[:, I, I]
    raw[..., 12] = yr[:, I, I]
    raw[..., 13] = yr[:, I, :-2]
    raw[..., 14] = yl[:, I, 2:]
    raw[..., 15] = raw[..., 2] - raw[..., 3]
    raw[..., 16] = raw[..., 2] - raw[..., 4]
    raw[..., 17] = 0.5 * (raw[..., 3] - raw[..., 4])
    raw[..., 18] = raw[..., 2] - raw[..., 5]
    raw[..., 19] = raw[..., 2] - raw[..., 6]
    raw[..., 20] = 0.5 * (raw[..., 5] - raw[..., 6])
    five = raw[..., 2:7]
    raw[..., 21] = five.max(axis=-1)
    raw[..., 22] = five.min(axis=-1)
    return raw


def features_2d(sol: ModalSolution2D):
    """Normalized f2d_v1 features for every cell and variable, shape (V, nx, ny, 23)."""
    raw = raw_features_2d(sol)
    return _assemble(raw, F2D_V1, raw[..., 21], raw[..., 22])


def extract_features_2d(sol: ModalSolution2D, i: int, j: int, var: int = 0) -> FeatureVector:
    m = sol.mesh
    if not (0 <= i < m.nx and 0 <= j < m.ny and 0 <= var < sol.n_vars):
        raise IndexError(f"cell ({i}, {j}) / var {var} out of range ({m.nx}x{m.ny}, vars={sol.n_vars})")
    return FeatureVector(F2D_V1.id, features_2d(sol)[var, i, j].copy())


@dataclass(frozen=True)
class TrianglePatch:
    """Triangle ``i`` with its three edge neighbours.

    Neighbour ``k`` shares edge ``e_k``; neighbours are ordered by the index of
    the owning element's vertex opposite the shared edge.
    """

    area: float
    u_center: float
    u_neighbors: tuple  # three neighbour averages
    u_edges: tuple  # solution at the three shared-edge midpoints


def raw_remap(patch: TrianglePatch):
    if not patch.area > 0:
        raise InvalidPatchError(f"degenerate triangle: area {patch.area}")
    if len(patch.u_neighbors) != 3 or len(patch.u_edges) != 3:
        raise InvalidPatchError("a triangle patch needs exactly three neighbours and edges")
    ui = float(patch.u_center)
    n1, n2, n3 = (float(v) for v in patch.u_neighbors)
    e1, e2, e3 = (float(v) for v in patch.u_edges)
    s = np.sqrt(patch.area)
    pool = (ui, n1, n2, n3)
    return np.array([
        s, s,
        ui, n1, n2, n3, 0.25 * (ui + n1 + n2 + n3),
        e1, e2, e3, ui,
        e1, e2, e3, ui,
        ui - n1, ui - n2, 0.5 * (n1 - n2),
        ui - n3, 0.0, 0.5 * (n1 - n3),
        max(pool), min(pool),
    ])


def remap_features_triangle(patch: TrianglePatch) -> FeatureVector:
    """Fill the 23 f2d_v1 slots from a triangle patch and normalize them."""
    raw = raw_remap(patch)
    vals = _assemble(raw[None], F2D_V1, raw[None, 21], raw[None, 22])[0]
    vals[19] = 0.0  # placeholder slot, exactly zero
    return FeatureVector(F2D_V1.id, vals)


def remap_many(raws: np.ndarray):
    """Normalize stacked raw remap rows (k, 23)."""
    out = _assemble(raws, F2D_V1, raws[:, 21], raws[:, 22])
    out[:, 19] = 0.0
    return out
