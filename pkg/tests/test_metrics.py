import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnlim.core import Mesh1D, Mesh2D, ModalSolution1D, ModalSolution2D, project_ic
from nnlim.metrics import (
    Confusion,
    accuracy,
    classification_report,
    confusion,
    convergence_table,
    l1_error,
    precision,
    recall,
    write_convergence_csv,
)
from nnlim.solvers import gaussian1d


def test_confusion_examples():
    assert confusion([1, 0], [1, 0]) == Confusion(tp=1, tn=1)
    assert confusion([1], [0]) == Confusion(fp=1)
    assert confusion([], []) == Confusion()
    with pytest.raises(ValueError):
        confusion([1, 0], [1])


def test_ratio_examples():
    perfect = confusion([1, 0, 1], [1, 0, 1])
    assert accuracy(perfect).value == recall(perfect).value == precision(perfect).value == 1.0
    neg = confusion([0, 0, 0, 0], [1, 1, 0, 0])
    assert accuracy(neg).value == 0.5 and recall(neg).value == 0.0
    assert precision(neg).degenerate and precision(neg).value == 0.0
    assert recall(Confusion(tp=8, fn=2)).value == 0.8
    assert accuracy(Confusion()).degenerate


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), max_size=200))
def test_accuracy_two_ways(pairs):
    pred = np.array([p for p, _ in pairs], bool)
    truth = np.array([t for _, t in pairs], bool)
    c = confusion(pred, truth)
    assert c.total == len(pairs)
    if pairs:
        assert accuracy(c).value == np.mean(pred == truth)


def test_report_keys():
    assert set(classification_report([1], [1])) == {"accuracy", "recall", "precision"}


def test_l1_polynomial_exact():
    sol = project_ic(lambda x: 1 + x - 2 * x**2, Mesh1D(0, 1, 7), 2)
    assert l1_error(sol, lambda x: 1 + x - 2 * x**2)[0] < 1e-12
    s2 = project_ic(lambda x, y: x * y + y**2, Mesh2D(0, 1, 0, 1, 5, 4), 2)
    assert l1_error(s2, lambda x, y: x * y + y**2)[0] < 1e-12


def test_l1_unit_gap():
    sol = ModalSolution1D(Mesh1D(0, 1, 5), np.zeros((1, 5, 2)))
    assert l1_error(sol, lambda x: 1.0 + 0 * x)[0] == pytest.approx(1.0)


def _dense_l1_gaussian_p1():
    n = 20
    mesh = Mesh1D(0, 1, n)
    sol = project_ic(gaussian1d, mesh, 1)
    m = 100_000
    x = (np.arange(m) + 0.5) / m
    cell = np.minimum((x * n).astype(int), n - 1)
    xi = 2 * (x * n - cell) - 1
    uh = sol.coeffs[0, cell, 0] + sol.coeffs[0, cell, 1] * xi
    return l1_error(sol, gaussian1d)[0], np.abs(uh - gaussian1d(x)).mean()


def test_l1_near_dense_sum():
    got, dense = _dense_l1_gaussian_p1()
    assert got == pytest.approx(dense, rel=0.15)


@pytest.mark.xfail(strict=True, reason="|u_h - u| has kinks inside cells; the 3-point rule is off by 1.1e-3 "
                   "and about 100 Gauss points are needed for 1e-6")
def test_l1_matches_dense_sum_tightly():
    got, dense = _dense_l1_gaussian_p1()
    assert abs(got - dense) < 1e-6


def test_l1_triangle_inequality():
    rng = np.random.default_rng(4)
    mesh = Mesh1D(0, 1, 6)
    for _ in range(20):
        u, v = (ModalSolution1D(mesh, rng.normal(size=(1, 6, 3))) for _ in range(2))
        w = lambda x: np.sin(5 * x)
        from nnlim.core import eval_nodes_1d, gauss_quadrature
        nodes, _ = gauss_quadrature(4)

        def as_field(s):
            def f(x):
                xi = 2 * (x * 6 - np.arange(6)[:, None]) - 1
                return eval_nodes_1d(s.coeffs, nodes)[0]
            return f
        uv = l1_error(u, as_field(v))[0]
        vw = l1_error(v, w)[0]
        uw = l1_error(u, w)[0]
        assert uw <= uv + vw + 1e-12


def test_convergence_examples():
    rows = convergence_table([1.0, 0.5, 0.25], [10, 20, 40])
    assert [r[2] for r in rows] == [0.0, 1.0, 1.0]
    rows = convergence_table([8.0, 1.0], [10, 20])
    assert rows[1][2] == pytest.approx(3.0)
    assert convergence_table([1e-3], [5]) == [(5, 1e-3, 0.0)]
    with pytest.raises(ValueError):
        convergence_table([1.0, 0.0], [1, 2])
    with pytest.raises(ValueError):
        convergence_table([1.0, 1.0], [2, 2])


def test_convergence_csv(tmp_path):
    path = tmp_path / "c.csv"
    write_convergence_csv(path, {"order=2 limiter=none": convergence_table([1.0, 0.25], [10, 20])}, "Gaussian pulse")
    lines = path.read_text().splitlines()
    assert lines[0] == "# caption=Gaussian pulse" and lines[2] == "N,error,rate"
    assert lines[4] == "20,0.25,2.0"
