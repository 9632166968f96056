import numpy as np
import pytest

from nnlim.core import Mesh1D, Mesh2D, ModalSolution1D, ModalSolution2D, project_ic
from nnlim.features import SchemaMismatchError, features_1d, features_2d
from nnlim.limiters import apply_minmod_1d, apply_minmod_2d, identity_limiter
from nnlim.mlp import Layer, Network, init
from nnlim.nnlimiter import (
    apply_nn_limiter,
    flag_cells,
    identity_group,
    make_nn_limiter,
    mirror_map_1d,
    odd_mirror_map_1d,
    predict_invariant,
    symmetry_group_2d,
    variable_groups,
)
from nnlim.solvers import make_ic


def const_net(d, logit, schema):
    return Network([Layer(np.zeros((1, d)), np.array([logit]), "sigmoid")], schema)


def rough_1d(seed=0, n=16, p=2, v=1):
    return ModalSolution1D(Mesh1D(0, 1, n), np.random.default_rng(seed).normal(size=(v, n, p + 1)))


def rough_2d(seed=0, n=6, p=2):
    return ModalSolution2D(Mesh2D(0, 1, 0, 1, n, n), np.random.default_rng(seed).normal(size=(1, n, n, p + 1, p + 1)))


def mirror_1d(c):
    return c[:, ::-1] * (-1.0) ** np.arange(c.shape[-1])


@pytest.mark.parametrize("group", [mirror_map_1d(), odd_mirror_map_1d(), symmetry_group_2d()])
def test_elements_are_involutions(group):
    X = np.random.default_rng(1).normal(size=(20, group.d))
    for g in group.elements:
        assert np.array_equal(g.apply(g.apply(X)), X)


def test_2d_group_closed():
    G = symmetry_group_2d().elements
    for a in G:
        for b in G:
            assert a.compose(b) in G


def test_1d_mirror_matches_mirrored_field():
    sol = rough_1d(2)
    X = features_1d(sol)[0]
    Y = features_1d(sol.with_coeffs(mirror_1d(sol.coeffs)))[0][::-1]
    assert np.allclose(mirror_map_1d().elements[1].apply(X), Y, atol=1e-13)


def test_odd_mirror_matches_negated_mirrored_field():
    sol = rough_1d(3)
    X = features_1d(sol)[0]
    Y = features_1d(sol.with_coeffs(-mirror_1d(sol.coeffs)))[0][::-1]
    assert np.allclose(odd_mirror_map_1d().elements[1].apply(X), Y, atol=1e-13)


def test_symmetric_stencil_fixed():
    f = lambda x: np.cos(2 * np.pi * (x - 0.5))
    sol = project_ic(f, Mesh1D(0, 1, 9), 2)
    x = features_1d(sol)[0, 4]
    assert np.allclose(mirror_map_1d().elements[1].apply(x), x, atol=1e-13)


def test_2d_mirrors_match_mirrored_fields():
    sol = rough_2d(4)
    c = sol.coeffs
    q = np.arange(c.shape[-1])
    X = features_2d(sol)[0]
    G = symmetry_group_2d().elements
    cx = c[:, ::-1] * ((-1.0) ** q)[:, None]
    cy = c[:, :, ::-1] * ((-1.0) ** q)[None, :]
    Yx = features_2d(sol.with_coeffs(cx))[0][::-1]
    Yy = features_2d(sol.with_coeffs(cy))[0][:, ::-1]
    assert np.allclose(G[1].apply(X), Yx, atol=1e-13)
    assert np.allclose(G[2].apply(X), Yy, atol=1e-13)


def test_2d_constant_fixed():
    c = np.zeros((1, 4, 4, 3, 3))
    c[..., 0, 0] = 1.5
    x = features_2d(ModalSolution2D(Mesh2D(0, 1, 0, 1, 4, 4), c))[0, 1, 1]
    for g in symmetry_group_2d().elements:
        assert np.array_equal(g.apply(x), x)


def test_predict_invariant_identity_and_tie():
    net = init((6,), 11, seed=0)
    X = np.random.default_rng(0).normal(size=(50, 11))
    from nnlim.mlp import predict
    assert np.array_equal(predict_invariant(net, X, identity_group(11)), predict(net, X))
    # a net that reads only the du_i slot disagrees with its mirror image
    W = np.zeros((1, 11))
    W[0, 10] = 1.0
    sign_net = Network([Layer(W, np.zeros(1), "sigmoid")], "f1d_v1")
    x = np.zeros(11)
    x[10] = 1.0
    assert predict_invariant(sign_net, x, mirror_map_1d()) == 1
    assert predict_invariant(sign_net, -x, mirror_map_1d()) == 1


def test_predict_invariant_mirror_equal():
    net = init((16, 8), 11, seed=7)
    X = np.random.default_rng(7).normal(size=(500, 11))
    M = mirror_map_1d().elements[1]
    assert np.array_equal(predict_invariant(net, X, mirror_map_1d()), predict_invariant(net, M.apply(X), mirror_map_1d()))


def test_never_and_always_flag():
    sol = rough_1d(5)
    never = apply_nn_limiter(sol, const_net(11, -50.0, "f1d_v1"))
    assert np.array_equal(never.solution.coeffs, identity_limiter(sol).solution.coeffs)
    assert not never.flagged.any()
    always = apply_nn_limiter(sol, const_net(11, 50.0, "f1d_v1"))
    assert np.array_equal(always.solution.coeffs, apply_minmod_1d(sol).solution.coeffs)
    s2 = rough_2d(5)
    a2 = apply_nn_limiter(s2, const_net(23, 50.0, "f2d_v1"))
    assert np.array_equal(a2.solution.coeffs, apply_minmod_2d(s2).solution.coeffs)


def test_nn_preserves_averages_and_bounds():
    sol = rough_1d(6)
    out = apply_nn_limiter(sol, init((16,), 11, seed=6))
    assert np.array_equal(out.solution.coeffs[..., 0], sol.coeffs[..., 0])
    from nnlim.core import eval_nodes_1d
    avg = np.pad(sol.coeffs[0, :, 0], 1, mode="wrap")
    lo = np.minimum(np.minimum(avg[:-2], avg[1:-1]), avg[2:])
    hi = np.maximum(np.maximum(avg[:-2], avg[1:-1]), avg[2:])
    tr = eval_nodes_1d(out.solution.coeffs, np.array([-1.0, 1.0]))[0]
    f = out.flagged
    assert (tr[f] >= lo[f, None] - 1e-12).all() and (tr[f] <= hi[f, None] + 1e-12).all()


def test_flag_pattern_mirror_equivariant_any_net():
    sol = rough_1d(8, n=20)
    for seed in range(5):
        net = init((12, 6), 11, seed=seed)
        a = flag_cells(sol, net)
        b = flag_cells(sol.with_coeffs(mirror_1d(sol.coeffs)), net)
        assert np.array_equal(a, b[::-1])


def test_euler_variable_groups_equivariant():
    c = np.random.default_rng(9).normal(size=(3, 12, 3))
    sol = ModalSolution1D(Mesh1D(0, 1, 12), c, (1.0, -1.0, 1.0))
    groups = variable_groups(3, (1, -1, 1))
    mirrored = mirror_1d(c) * np.array([1.0, -1.0, 1.0])[:, None, None]
    for seed in range(5):
        net = init((12, 6), 11, seed=seed)
        a = flag_cells(sol, net, groups)
        b = flag_cells(sol.with_coeffs(mirrored), net, groups)
        assert np.array_equal(a, b[::-1])
    with pytest.raises(ValueError):
        flag_cells(sol, init((4,), 11), groups[:2])


def test_schema_mismatch():
    with pytest.raises(SchemaMismatchError):
        apply_nn_limiter(rough_2d(), init((4,), 11))
    with pytest.raises(SchemaMismatchError):
        make_nn_limiter(init((4,), 11), dim=2)
