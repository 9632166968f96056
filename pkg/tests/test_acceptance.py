"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Reference numbers quoted below are the published L1 errors these runs are
compared against.  Runtime budgets include the shared fixture build time.
"""

import math
import time

import numpy as np

from conftest import BUILD_SECONDS, record
from nnlim import dataset as D
from nnlim import mlp
from nnlim.core import cons_to_prim, eval_nodes_1d, gauss_quadrature
from nnlim.mlp import AdamState, Layer, Network, adam_step, backward, forward, init
from nnlim.nnlimiter import mirror_map_1d, predict_invariant, symmetry_group_2d
from nnlim.solvers import SimConfig, initial_solution, run
from nnlim.transfer import generate_rd_dataset, retrain


def elapsed(t0, *fixtures):
    return time.perf_counter() - t0 + sum(BUILD_SECONDS.get(f, 0.0) for f in fixtures)


# 1 -------------------------------------------------------------------------

def _point_losses(net, X, y):
    p = np.clip(forward(net, X), 1e-12, 1 - 1e-12)
    return -(y * np.log(p) + (1 - y) * np.log(1 - p))


def _gradient_errors(net, X, y, h=1e-6):
    """Per point: max |analytic - numeric| over parameters / max |numeric|."""
    analytic = [np.concatenate([g.ravel() for g in backward(net, X[i:i + 1], y[i:i + 1])[1]])
                for i in range(len(X))]
    numeric = []
    for p in net.params():
        flat = p.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            up = _point_losses(net, X, y)
            flat[k] = old - h
            dn = _point_losses(net, X, y)
            flat[k] = old
            numeric.append((up - dn) / (2 * h))
    numeric = np.array(numeric).T
    return np.array([np.abs(a - n).max() / np.abs(n).max() for a, n in zip(analytic, numeric)])


def test_criterion_1_gradient_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = {}
    for d, hidden in ((11, (8, 4)), (23, (16, 8))):
        net = init(hidden, d, seed=1)
        X, y = rng.normal(size=(100, d)), rng.integers(0, 2, 100).astype(float)
        worst[d] = _gradient_errors(net, X, y).max()
    secs = elapsed(t0)
    ok = max(worst.values()) < 1e-6 and secs < 5
    record(1, ok, f"max rel err 11-8-4-1 {worst[11]:.2e}, 23-16-8-1 {worst[23]:.2e} (< 1e-6); {secs:.1f} s (< 5)")
    assert ok


# 2 -------------------------------------------------------------------------

def _adam_reference(theta, g, steps, alpha=0.001, b1=0.9, b2=0.999, eps=1e-8):
    theta, m, v = list(theta), [0.0] * len(theta), [0.0] * len(theta)
    for t in range(1, steps + 1):
        for k in range(len(theta)):
            m[k] = b1 * m[k] + (1 - b1) * g[k]
            v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k]
            mh = m[k] / (1 - b1 ** t)
            vh = v[k] / (1 - b2 ** t)
            theta[k] = theta[k] - alpha * mh / (math.sqrt(vh) + eps)
    return theta


def test_criterion_2_adam_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    params = [rng.normal(size=(4, 3)), rng.normal(size=4)]
    grads = [rng.normal(size=(4, 3)) * 10.0 ** rng.integers(-3, 3, (4, 3)), rng.normal(size=4)]
    expected = [_adam_reference(p.ravel(), g.ravel(), 5) for p, g in zip(params, grads)]
    state = AdamState.fresh(params)
    for _ in range(5):
        adam_step(params, grads, state)
    err = max(np.abs(p.ravel() - np.array(e)).max() for p, e in zip(params, expected))
    secs = elapsed(t0)
    ok = err <= 1e-12 and state.t == 5 and secs < 1
    record(2, ok, f"max |adam - reference| {err:.1e} (<= 1e-12); {secs:.2f} s (< 1)")
    assert ok


# 3 -------------------------------------------------------------------------

def test_criterion_3_solver_order():
    t0 = time.perf_counter()
    rates = {}
    for order, need in ((2, 1.8), (3, 2.7)):
        errs = [run(SimConfig(ic_name="gaussian1d", n=n, degree=order - 1)).l1_error[0] for n in (40, 80, 160)]
        rates[order] = (np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2]), need)
    secs = elapsed(t0)
    ok = all(min(r[:2]) >= r[2] for r in rates.values()) and secs < 60
    text = ", ".join(f"order {o} rates {r[0]:.2f} {r[1]:.2f} (>= {r[2]})" for o, r in rates.items())
    record(3, ok, f"{text}; {secs:.1f} s (< 60)")
    assert ok


# 4 -------------------------------------------------------------------------

REFERENCE_ORDER3 = {"minmod": {40: 1.10e-2, 80: 2.26e-3}, "hio": {40: 8.43e-4, 80: 9.87e-5}}


def test_criterion_4_limiter_ordering():
    t0 = time.perf_counter()
    errs = {lim: {n: run(SimConfig(ic_name="gaussian1d", n=n, degree=2, limiter=lim)).l1_error[0]
                  for n in (20, 40, 60, 80, 100)} for lim in ("hio", "minmod")}
    ordering = all(errs["hio"][n] < errs["minmod"][n] for n in errs["hio"])
    ratios = {(lim, n): errs[lim][n] / ref for lim, refs in REFERENCE_ORDER3.items() for n, ref in refs.items()}
    within = all(1 / 3 <= r <= 3 for r in ratios.values())
    secs = elapsed(t0)
    ok = ordering and within and secs < 120
    text = ", ".join(f"{lim} N={n} {errs[lim][n]:.2e} ({r:.1f}x ref)" for (lim, n), r in ratios.items())
    record(4, ok, f"HIO < Minmod at N=20..100: {ordering}; {text}; within 3x: {within}; {secs:.1f} s (< 120)")
    assert ok


# 5 -------------------------------------------------------------------------

def test_criterion_5_labeling(dataset_1d):
    t0 = time.perf_counter()
    frac = float(dataset_1d.y.mean())
    labeled = set()
    for a in (1.0, -1.0):
        snaps = []
        D._harvest(SimConfig(ic_name="square1d", n=32, degree=2, a=a, limiter="hio"), 1, snaps.append)
        at_projection = int(D.label_cells_1d(snaps[0]).sum())
        # the projection puts both jumps on faces; one step in they sit in the adjacent cells
        labeled |= set(np.flatnonzero(D.label_cells_1d(snaps[1])).tolist())
    jump_adjacent = {7, 8, 23, 24}
    secs = elapsed(t0, "dataset_1d")
    ok = abs(frac - 0.10) <= 0.07 and labeled == jump_adjacent and secs < 120
    record(5, ok, f"positive fraction {frac:.4f} (0.10 +- 0.07); square1d N=32 labels {sorted(labeled)} "
                  f"vs jump-adjacent {sorted(jump_adjacent)} (projected state labels {at_projection}); "
                  f"{secs:.1f} s (< 120)")
    assert ok


# 6 -------------------------------------------------------------------------

def test_criterion_6_detection_metrics(trained_1d):
    net, rep, seed = trained_1d
    secs = BUILD_SECONDS["dataset_1d"] + BUILD_SECONDS["trained_1d"]
    ok = rep["accuracy"] >= 0.90 and rep["recall"] >= 0.70 and rep["precision"] >= 0.70 and secs < 900
    assert [L.W.shape[0] for L in net.layers] == list(mlp.ARCHITECTURES[4]) + [1]
    record(6, ok, f"best seed {seed}: accuracy {rep['accuracy']:.4f} recall {rep['recall']:.4f} "
                  f"precision {rep['precision']:.4f} (>= 0.90/0.70/0.70); {secs:.0f} s (< 900)")
    assert ok


# 7 -------------------------------------------------------------------------

def _positivity_monitor(degree, gamma=1.4):
    nodes = np.concatenate([gauss_quadrature(degree + 2)[0], [-1.0, 1.0]])
    worst = {"rho": np.inf, "p": np.inf}

    def on_step(k, t, sol, outcome):
        W = cons_to_prim(eval_nodes_1d(sol.coeffs, nodes), gamma)
        worst["rho"] = min(worst["rho"], float(W[0].min()))
        worst["p"] = min(worst["p"], float(W[2].min()))

    return worst, on_step


def _never_flag(d=11):
    return Network([Layer(np.zeros((1, d)), np.array([-50.0]), "sigmoid")])


def test_criterion_7_euler_robustness(model_1d):
    t0 = time.perf_counter()
    parts, ok = [], True
    blast = SimConfig(equation="euler1d", ic_name="blast", n=100, degree=1)
    r = run(blast)
    # run() records only positivity failures
    ok &= r.failure is not None
    parts.append(f"blast unlimited: {'positivity failure at t=%.4g' % r.failure['time'] if r.failure else 'completed'}")
    for lim in ("nn", "hio"):
        worst, mon = _positivity_monitor(1)
        r = run(SimConfig(equation="euler1d", ic_name="blast", n=100, degree=1, limiter=lim, model=model_1d), mon)
        good = r.failure is None and abs(r.t - 0.038) < 1e-12 and worst["rho"] > 0 and worst["p"] > 0
        ok &= good
        parts.append(f"blast {lim}: t={r.t:.4g} min rho {worst['rho']:.3g} min p {worst['p']:.3g}")
    for degree in (1, 2):
        r = run(SimConfig(equation="euler1d", ic_name="sod", n=80, degree=degree, limiter="nn", model=model_1d))
        rho = r.solution.coeffs[0, :, 0]
        good = r.failure is None and rho.min() >= 0.12 and rho.max() <= 1.01
        ok &= good
        parts.append(f"sod order {degree + 1} nn: density [{rho.min():.4f}, {rho.max():.4f}]")
    # control: the admissibility safeguard alone with a detector that never flags
    ctrl = run(SimConfig(equation="euler1d", ic_name="blast", n=100, degree=1, limiter="nn", model=_never_flag()))
    secs = elapsed(t0, "dataset_1d", "trained_1d")
    ok &= secs < 600
    record(7, ok, "; ".join(parts) + f"; control never-flag blast "
                  f"{'completes' if ctrl.failure is None else 'fails'}; {secs:.0f} s (< 600)")
    assert ok


# 8 -------------------------------------------------------------------------

def _mirror_euler(c):
    q = c.shape[-1]
    return c[:, ::-1] * ((-1.0) ** np.arange(q)) * np.array([1.0, -1.0, 1.0])[:, None, None]


def test_criterion_8_invariance(dataset_1d, model_1d, dataset_2d, model_2d):
    t0 = time.perf_counter()
    te1 = D.split(dataset_1d)[2]
    g1 = mirror_map_1d()
    same_1d = np.array_equal(predict_invariant(model_1d, te1.X, g1),
                             predict_invariant(model_1d, g1.elements[1].apply(te1.X), g1))
    te2 = D.split(dataset_2d)[2]
    g2 = symmetry_group_2d()
    base = predict_invariant(model_2d, te2.X, g2)
    same_2d = all(np.array_equal(base, predict_invariant(model_2d, g.apply(te2.X), g2)) for g in g2.elements)
    flags_ok, steps = True, 0
    for degree in (1, 2):
        cfg = SimConfig(equation="euler1d", ic_name="sod", n=80, degree=degree, limiter="nn", model=model_1d)
        s0 = initial_solution(cfg)
        A, B = [], []
        run(cfg, lambda k, t, s, o: A.append(o.flagged.copy()))
        run(cfg, lambda k, t, s, o: B.append(o.flagged.copy()), sol=s0.with_coeffs(_mirror_euler(s0.coeffs)))
        flags_ok &= len(A) == len(B) and all(np.array_equal(a[::-1], b) for a, b in zip(A, B))
        steps += len(A)
    secs = elapsed(t0)
    ok = same_1d and same_2d and flags_ok and secs < 120
    record(8, ok, f"1D test set ({len(te1)}) bitwise invariant: {same_1d}; 2D test set ({len(te2)}) under all "
                  f"{len(g2)} symmetries: {same_2d}; mirrored Sod flags mirrored over {steps} steps: {flags_ok}; "
                  f"{secs:.0f} s (< 120)")
    assert ok


# 9 -------------------------------------------------------------------------

def test_criterion_9_smooth_ring(model_2d):
    t0 = time.perf_counter()
    parts, ok = [], True
    for n in (32, 64):
        e = {lim: run(SimConfig(equation="advection2d", ic_name="smoothring2d", n=n, degree=2, limiter=lim,
                                model=model_2d)).l1_error[0] for lim in ("none", "nn", "minmod")}
        good = e["nn"] <= 3 * e["none"] and e["nn"] < e["minmod"]
        ok &= good
        parts.append(f"{n}^2 none {e['none']:.2e} nn {e['nn']:.2e} ({e['nn'] / e['none']:.1f}x) minmod {e['minmod']:.2e}")
    secs = elapsed(t0, "dataset_2d", "trained_2d")
    ok &= secs < 1200
    record(9, ok, "; ".join(parts) + f" (nn within 3x of none and below minmod); {secs:.0f} s (< 1200)")
    assert ok


# 10 ------------------------------------------------------------------------

def test_criterion_10_transfer(dataset_2d, model_2d):
    t0 = time.perf_counter()
    target = generate_rd_dataset("triangular", 10_000, seed=0)
    _, hist = retrain(model_2d, dataset_2d, target, 0.5, mlp.Hyperparams(seed=0))
    m = hist.domain_metrics
    gain = m["after"]["target"]["accuracy"] - m["before"]["target"]["accuracy"]
    drop = m["before"]["source"]["accuracy"] - m["after"]["source"]["accuracy"]
    secs = elapsed(t0, "dataset_2d", "trained_2d")
    ok = gain >= 0.05 and drop <= 0.05 and secs < 600
    record(10, ok, f"triangular accuracy {m['before']['target']['accuracy']:.4f} -> "
                   f"{m['after']['target']['accuracy']:.4f} (gain {gain:+.4f} >= 0.05); source accuracy "
                   f"{m['before']['source']['accuracy']:.4f} -> {m['after']['source']['accuracy']:.4f} "
                   f"(drop {drop:+.4f} <= 0.05); {secs:.0f} s (< 600)")
    assert ok


# 11 ------------------------------------------------------------------------

def test_criterion_11_round_trips(tmp_path):
    t0 = time.perf_counter()
    runs = [("square1d", 1.0, 16, 2), ("sine1d", -1.0, 16, 3)]
    ds = D.generate_dataset_1d(runs=runs)
    D.save_csv(ds, tmp_path / "a.csv")
    D.save_csv(D.generate_dataset_1d(runs=runs), tmp_path / "b.csv")
    loaded = D.load_csv(tmp_path / "a.csv")
    tr, va, _ = D.split(ds)
    hyper = mlp.Hyperparams(hidden=(16, 8), epochs=2, batch_size=32, seed=4)
    net, _ = mlp.train(init(hyper.hidden, 11, 4), tr, va, hyper)
    net_b, _ = mlp.train(init(hyper.hidden, 11, 4), tr, va, hyper)
    mlp.save_model(net, tmp_path / "m.txt")
    mlp.save_model(net_b, tmp_path / "n.txt")
    back = mlp.load_model(tmp_path / "m.txt")
    ds2 = D.generate_dataset_2d(runs=[("ring2d", (1.0, 1.0), 8, 2)], stride=math.inf)
    D.save_csv(ds2, tmp_path / "c.csv")
    loaded2 = D.load_csv(tmp_path / "c.csv")
    net2 = init((8,), 23, 5, "f2d_v1")
    mlp.save_model(net2, tmp_path / "m2.txt")
    checks = {
        "dataset forward": np.array_equal(forward(net, loaded.X), forward(net, ds.X))
        and np.array_equal(loaded.y, ds.y),
        "2d dataset forward": np.array_equal(forward(net2, loaded2.X), forward(net2, ds2.X)),
        "model forward": np.array_equal(forward(back, ds.X), forward(net, ds.X))
        and np.array_equal(forward(mlp.load_model(tmp_path / "m2.txt"), ds2.X), forward(net2, ds2.X)),
        "seeded dataset files": (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes(),
        "seeded model files": (tmp_path / "m.txt").read_bytes() == (tmp_path / "n.txt").read_bytes(),
    }
    secs = elapsed(t0)
    ok = all(checks.values()) and secs < 60
    record(11, ok, ", ".join(f"{k}: {v}" for k, v in checks.items()) + f"; {secs:.1f} s (< 60)")
    assert ok
