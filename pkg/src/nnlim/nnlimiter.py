"""A trained network used as a troubled-cell detector inside the solvers.

Each cell's features are scored on every copy produced by a symmetry group
and the majority vote decides (ties flag).  Flagged cells receive the Minmod
rebuild; the others are left untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import features as F
from . import limiters
from .core import ModalSolution1D
from .mlp import Network, forward


@dataclass(frozen=True)
class Transform:
    """``x'[k] = sign[k] * x[perm[k]]``."""

    perm: tuple
    sign: tuple

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        return X[..., list(self.perm)] * np.asarray(self.sign)

    def compose(self, other):
        """``self`` after ``other``."""
        perm = tuple(other.perm[p] for p in self.perm)
        sign = tuple(s * other.sign[p] for s, p in zip(self.sign, self.perm))
        return Transform(perm, sign)


@dataclass(frozen=True)
class InvarianceGroup:
    elements: tuple  # Transform instances, identity first

    @property
    def d(self):
        return len(self.elements[0].perm)

    def __len__(self):
        return len(self.elements)


def _transform(d, swaps=(), negate=()):
    perm = list(range(d))
    sign = [1.0] * d
    for a, b, neg in swaps:
        perm[a], perm[b] = b, a
        if neg:
            sign[a] = sign[b] = -1.0
    for k in negate:
        sign[k] = -1.0
    return Transform(tuple(perm), tuple(sign))


def identity_group(d):
    return InvarianceGroup((_transform(d),))


def mirror_map_1d() -> InvarianceGroup:
    """{identity, x -> -x} on f1d_v1 (0-based slots)."""
    mirror = _transform(11, swaps=((2, 3, False), (4, 5, False), (6, 7, False), (8, 9, True)), negate=(10,))
    return InvarianceGroup((_transform(11), mirror))


def odd_mirror_map_1d() -> InvarianceGroup:
    """{identity, mirror with value negation} for a variable that flips sign under x -> -x.

    Negating the field negates every value and difference entry of f1d_v1.
    """
    d = F.F1D_V1.d
    negate = _transform(d, negate=tuple(F.F1D_V1.indices("value", "difference")))
    return InvarianceGroup((_transform(d), negate.compose(mirror_map_1d().elements[1])))


def symmetry_group_2d() -> InvarianceGroup:
    """{identity, x-mirror, y-mirror, both} on f2d_v1 (0-based slots)."""
    mx = _transform(23, swaps=((3, 4, False), (7, 8, False), (9, 10, False), (15, 16, False)), negate=(17,))
    my = _transform(23, swaps=((5, 6, False), (11, 12, False), (13, 14, False), (18, 19, False)), negate=(20,))
    return InvarianceGroup((_transform(23), mx, my, mx.compose(my)))


def default_group(schema):
    return mirror_map_1d() if schema == F.F1D_V1.id else symmetry_group_2d()


def predict_invariant(net: Network, x, group: InvarianceGroup, tau=0.5):
    """Majority vote of ``forward >= tau`` over the group copies; ties give 1."""
    X = np.asarray(x.values if isinstance(x, F.FeatureVector) else x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    votes = np.zeros(X.shape[0], dtype=int)
    for g in group.elements:
        votes += forward(net, g.apply(X)) >= tau
    out = (2 * votes >= len(group)).astype(np.int8)
    return int(out[0]) if single else out


def _check_schema(net, schema):
    if net.schema != schema:
        raise F.SchemaMismatchError(f"network schema {net.schema!r} cannot score {schema!r} features")


def variable_groups(n_vars, parity=None):
    """Per-variable 1D groups; ``parity[v] = -1`` marks a variable odd under x -> -x."""
    parity = (1,) * n_vars if parity is None else tuple(parity)
    return tuple(odd_mirror_map_1d() if s < 0 else mirror_map_1d() for s in parity)


def flag_cells(sol, net: Network, group=None, tau=0.5):
    """Bool per cell: any variable voted troubled.

    ``group`` is one group for all variables or a sequence with one per variable.
    """
    one_d = isinstance(sol, ModalSolution1D)
    schema = F.F1D_V1 if one_d else F.F2D_V1
    _check_schema(net, schema.id)
    group = default_group(schema.id) if group is None else group
    groups = (group,) * sol.n_vars if isinstance(group, InvarianceGroup) else tuple(group)
    if len(groups) != sol.n_vars:
        raise ValueError(f"{len(groups)} groups for {sol.n_vars} variables")
    feats = F.features_1d(sol) if one_d else F.features_2d(sol)
    flags = np.zeros(feats.shape[1:-1], dtype=bool)
    for v, g in enumerate(groups):
        labels = predict_invariant(net, feats[v].reshape(-1, schema.d), g, tau)
        flags |= labels.reshape(flags.shape).astype(bool)
    return flags


def apply_nn_limiter(sol, net: Network, group=None, tau=0.5) -> limiters.LimiterOutcome:
    flags = flag_cells(sol, net, group, tau)
    if isinstance(sol, ModalSolution1D):
        new = limiters.minmod_cells_1d(sol, flags)
    else:
        new = limiters.minmod_cells_2d(sol, flags)
    out = limiters._outcome(sol, new)
    out.flagged = flags
    return out


def make_nn_limiter(net: Network, dim: int, group=None, tau=0.5):
    """Limiter hook ``sol -> LimiterOutcome`` for a 1D or 2D network."""
    expected = F.F1D_V1.id if dim == 1 else F.F2D_V1.id
    _check_schema(net, expected)
    group = default_group(expected) if group is None else group

    def hook(sol):
        return apply_nn_limiter(sol, net, group, tau)

    return hook
