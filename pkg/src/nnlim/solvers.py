"""RKDG solvers: 1D/2D linear advection and the 1D Euler equations.

The spatial operators work directly on modal coefficients; SSP Runge-Kutta
stepping applies a limiter hook after every stage.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import limiters
from .core import (
    Boundary,
    Mesh1D,
    Mesh2D,
    ModalSolution1D,
    ModalSolution2D,
    PositivityError,
    cons_to_prim,
    eval_nodes_1d,
    gauss_quadrature,
    legendre_derivative,
    prim_to_cons,
    project_ic,
    sound_speed,
    stiffness_matrix,
)
from .metrics import l1_error


class UnknownICError(KeyError):
    pass


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def _periodic(x):
    return np.mod(x, 1.0)


def gaussian1d(x):
    x = _periodic(x)
    return 1.0 + 3.0 * np.exp(-100.0 * (x - 0.5) ** 2)


def gausshat1d(x):
    x = _periodic(x)
    smooth = 1.0 + np.exp(-((x - 0.25) ** 2) / (2.0 * 0.05**2))
    return np.where(np.abs(x - 0.7) <= 0.1, 2.0, smooth)


def sine1d(x):
    return np.sin(2.0 * np.pi * x)


def square1d(x):
    x = _periodic(x)
    return np.where((x >= 0.25) & (x <= 0.75), 8.0, 2.0)


def halfsine1d(x):
    x = _periodic(x)
    return np.where(x <= 0.3, 0.5 * np.sin(2.0 * np.pi * x), 0.0)


def _piecewise_prim(x, breaks, states, gamma=1.4):
    x = np.asarray(x, float)
    prim = np.empty((3,) + x.shape)
    idx = np.searchsorted(np.asarray(breaks), x, side="left")
    for k, st in enumerate(states):
        sel = idx == k
        for v in range(3):
            prim[v][sel] = st[v] if not callable(st[v]) else st[v](x[sel])
    return prim


def sod_prim(x):
    return _piecewise_prim(x, [0.5], [(1.0, 0.0, 1.0), (0.125, 0.0, 0.1)])


def blast_prim(x):
    return _piecewise_prim(x, [0.1, 0.9], [(1.0, 0.0, 1000.0), (1.0, 0.0, 0.01), (1.0, 0.0, 100.0)])


def shuosher_prim(x):
    return _piecewise_prim(
        x,
        [0.125],
        [(3.857143, 2.629369, 10.3333), (lambda s: 1.0 + 0.2 * np.sin(8.0 * np.pi * s), 0.0, 1.0)],
    )


def _euler_ic(prim_fn, gamma=1.4):
    def f(x):
        return prim_to_cons(prim_fn(x), gamma)

    f.primitive = prim_fn
    return f


def smoothring2d(x, y):
    """``1 + sin(2 pi r)^10`` for the distance r to the domain centre, 1 beyond r = 1/2."""
    x, y = _periodic(x), _periodic(y)
    r = np.hypot(x - 0.5, y - 0.5)
    return np.where(r <= 0.5, 1.0 + np.sin(2.0 * np.pi * r) ** 10, 1.0)


def gausshat2d(x, y):
    x, y = _periodic(x), _periodic(y)
    hat = (np.abs(x - 0.25) <= 0.1) & (np.abs(y - 0.5) <= 0.1)
    bump = 1.0 + np.exp(-100.0 * ((x - 0.75) ** 2 + (y - 0.5) ** 2))
    return np.where(hat, 2.0, np.where(x >= 0.5, bump, 1.0))


def ring2d(x, y):
    x, y = _periodic(x), _periodic(y)
    r = np.hypot(x, y)
    return np.where((r >= 0.25) & (r <= 0.75), 8.0, 2.0)


def gaussian2d(x, y):
    x, y = _periodic(x), _periodic(y)
    return np.exp(-10.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2) ** 2)


IC_REGISTRY = {
    "gaussian1d": gaussian1d,
    "gausshat1d": gausshat1d,
    "sine1d": sine1d,
    "square1d": square1d,
    "halfsine1d": halfsine1d,
    "sod": _euler_ic(sod_prim),
    "blast": _euler_ic(blast_prim),
    "shuosher": _euler_ic(shuosher_prim),
    "smoothring2d": smoothring2d,
    "gausshat2d": gausshat2d,
    "ring2d": ring2d,
    "gaussian2d": gaussian2d,
}

# default problem setup for the Euler cases: (boundary, t_end)
EULER_SETUP = {
    "sod": (Boundary.GRADIENT_FREE, 0.24),
    "blast": (Boundary.REFLEXIVE, 0.038),
    "shuosher": (Boundary.FIXED_TO_INITIAL, 0.178),
}


def make_ic(name, gamma=1.4):
    """Field function for a registered initial condition."""
    if name not in IC_REGISTRY:
        raise UnknownICError(f"unknown initial condition {name!r}; registered: {sorted(IC_REGISTRY)}")
    f = IC_REGISTRY[name]
    if name in EULER_SETUP and gamma != 1.4:
        return _euler_ic(f.primitive, gamma)
    return f


# ---------------------------------------------------------------------------
# Spatial operators
# ---------------------------------------------------------------------------

def _traces(c):
    """Values at xi = +1 and xi = -1 along the last axis."""
    q = c.shape[-1]
    signs = (-1.0) ** np.arange(q)
    return c.sum(axis=-1), c @ signs


def _dg_update(vol, f_right, f_left, degree, h):
    """(2a+1)/h * (vol_a - F_R + (-1)^a F_L) for every mode a."""
    a = np.arange(degree + 1)
    return (2 * a + 1) / h * (vol - f_right[..., None] + ((-1.0) ** a) * f_left[..., None])


def rhs_advection_1d(sol: ModalSolution1D, a: float) -> np.ndarray:
    """Semi-discrete DG operator for u_t + a u_x = 0 with upwind fluxes."""
    p = sol.degree
    c = sol.coeffs
    ext = sol.extended()
    u_r, u_l = _traces(ext)
    # interface k sits between extended cells k and k + 1
    flux = a * (u_r[:, :-1] if a >= 0 else u_l[:, 1:])
    vol = a * (c @ stiffness_matrix(p))
    return _dg_update(vol, flux[:, 1:], flux[:, :-1], p, sol.mesh.h)


def euler_flux(U, gamma):
    rho, mom, E = U
    prim = cons_to_prim(U, gamma)
    v, p = prim[1], prim[2]
    return np.stack([mom, mom * v + p, (E + p) * v]), prim


def rusanov_flux(UL, UR, gamma):
    FL, WL = euler_flux(UL, gamma)
    FR, WR = euler_flux(UR, gamma)
    s = np.maximum(np.abs(WL[1]) + sound_speed(WL, gamma), np.abs(WR[1]) + sound_speed(WR, gamma))
    return 0.5 * (FL + FR) - 0.5 * s * (UR - UL)


def rhs_euler_1d(sol: ModalSolution1D, gamma: float = 1.4) -> np.ndarray:
    """DG operator for the 1D Euler equations with Rusanov interface fluxes."""
    p = sol.degree
    nodes, weights = gauss_quadrature(p + 2)
    U_q = eval_nodes_1d(sol.coeffs, nodes)  # (3, n, nq)
    try:
        F_q, _ = euler_flux(U_q, gamma)
        ext = sol.extended()
        u_r, u_l = _traces(ext)
        flux = rusanov_flux(u_r[:, :-1], u_l[:, 1:], gamma)
    except PositivityError as err:
        cell = err.cell[0] if err.cell else None
        raise PositivityError(str(err), cell=cell) from None
    dV = np.stack([legendre_derivative(m, nodes) for m in range(p + 1)], axis=-1)
    vol = (F_q * weights) @ dV
    return _dg_update(vol, flux[:, 1:], flux[:, :-1], p, sol.mesh.h)


def rhs_advection_2d(sol: ModalSolution2D, a) -> np.ndarray:
    """Tensor-product DG operator for u_t + a . grad u = 0 with upwind fluxes."""
    ax, ay = a
    p = sol.degree
    c = sol.coeffs  # (V, nx, ny, q, q)
    ext = sol.extended()
    S = stiffness_matrix(p)
    q = np.arange(p + 1)
    sgn = (-1.0) ** q
    out = np.zeros_like(c)
    if ax != 0.0:
        # x-face traces keep their Legendre expansion in y: (V, nx+2, ny, q_y)
        ex = ext[:, :, 1:-1]
        tr_r = ex.sum(axis=3)
        tr_l = np.einsum("vijab,a->vijb", ex, sgn)
        flux = ax * (tr_r[:, :-1] if ax >= 0 else tr_l[:, 1:])
        vol = ax * np.einsum("vijmb,ma->vijab", c, S)
        out += (2 * q + 1)[:, None] / sol.mesh.dx * (
            vol - flux[:, 1:, :, None, :] + sgn[:, None] * flux[:, :-1, :, None, :]
        )
    if ay != 0.0:
        ey = ext[:, 1:-1]
        tr_t = ey.sum(axis=4)
        tr_b = np.einsum("vijab,b->vija", ey, sgn)
        flux = ay * (tr_t[:, :, :-1] if ay >= 0 else tr_b[:, :, 1:])
        vol = ay * np.einsum("vijam,mb->vijab", c, S)
        out += (2 * q + 1)[None, :] / sol.mesh.dy * (
            vol - flux[:, :, 1:, :, None] + sgn[None, :] * flux[:, :, :-1, :, None]
        )
    return out


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

def _no_limit(sol):
    return limiters.identity_limiter(sol)


def step(sol, rhs: Callable, dt: float, limiter_hook: Callable | None = None):
    """One SSP-RK step (RK2 for p = 1, RK3 for p = 2), limiting after each stage.

    Returns ``(new_solution, outcome_of_last_stage)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    hook = limiter_hook or _no_limit
    u0 = sol.coeffs
    if sol.degree == 1:
        o1 = hook(sol.with_coeffs(u0 + dt * rhs(sol)))
        s1 = o1.solution
        o2 = hook(sol.with_coeffs(0.5 * u0 + 0.5 * (s1.coeffs + dt * rhs(s1))))
        return o2.solution, o2
    o1 = hook(sol.with_coeffs(u0 + dt * rhs(sol)))
    s1 = o1.solution
    o2 = hook(sol.with_coeffs(0.75 * u0 + 0.25 * (s1.coeffs + dt * rhs(s1))))
    s2 = o2.solution
    o3 = hook(sol.with_coeffs(u0 / 3.0 + 2.0 / 3.0 * (s2.coeffs + dt * rhs(s2))))
    return o3.solution, o3


# ---------------------------------------------------------------------------
# Simulation driver
# ---------------------------------------------------------------------------

class Equation(str, enum.Enum):
    ADVECTION1D = "advection1d"
    EULER1D = "euler1d"
    ADVECTION2D = "advection2d"


@dataclass
class SimConfig:
    equation: Equation = Equation.ADVECTION1D
    ic_name: str = "gaussian1d"
    n: int = 40
    degree: int = 2
    t_end: float | None = None
    cfl: float = 0.2
    a: float | tuple = 1.0
    gamma: float = 1.4
    limiter: str = "none"  # none | minmod | tvd | hio | nn
    tvb_m: float = 0.0
    model: object = None  # Network or path, for limiter == "nn"
    limit_variables: str = "primitive"
    admissibility: bool = True  # Euler: unphysical cells are always limited
    domain: tuple = (0.0, 1.0)
    boundary: Boundary | None = None

    def __post_init__(self):
        self.equation = Equation(self.equation)
        if self.equation is Equation.ADVECTION2D and np.ndim(self.a) == 0:
            self.a = (float(self.a), float(self.a))
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        if self.t_end is not None and self.t_end < 0:
            raise ValueError("t_end must be non-negative")


@dataclass
class RunReport:
    solution: object
    t: float
    steps: int
    wall_time: float
    flagged: list = field(default_factory=list)
    l1_error: np.ndarray | None = None
    failure: dict | None = None


def build_limiter_hook(cfg: SimConfig, dim: int):
    """Return a hook ``sol -> LimiterOutcome`` for the configured limiter."""
    name = cfg.limiter
    if name == "none":
        return _no_limit
    if name == "nn":
        from .nnlimiter import make_nn_limiter, variable_groups
        from .mlp import load_model

        net = load_model(cfg.model) if isinstance(cfg.model, str) else cfg.model
        # velocity and momentum change sign under x -> -x
        group = variable_groups(3, (1, -1, 1)) if cfg.equation is Equation.EULER1D else None
        base = make_nn_limiter(net, dim, group)
    elif dim == 1:
        base = {
            "minmod": limiters.apply_minmod_1d,
            "hio": limiters.apply_hio_1d,
            "tvd": lambda s: limiters.apply_tvd_1d(s, cfg.tvb_m),
        }[name]
    else:
        base = {"minmod": limiters.apply_minmod_2d, "hio": limiters.apply_hio_2d}[name]
    if cfg.equation is Equation.EULER1D and cfg.limit_variables == "primitive":
        return lambda s: limiters.limit_primitive_1d(s, base, cfg.gamma, cfg.admissibility)
    return base


def initial_solution(cfg: SimConfig):
    f = make_ic(cfg.ic_name, cfg.gamma)
    lo, hi = cfg.domain
    if cfg.equation is Equation.ADVECTION2D:
        mesh = Mesh2D(lo, hi, lo, hi, cfg.n, cfg.n, cfg.boundary or Boundary.PERIODIC)
        return project_ic(f, mesh, cfg.degree)
    if cfg.equation is Equation.EULER1D:
        bnd, _ = EULER_SETUP.get(cfg.ic_name, (Boundary.GRADIENT_FREE, None))
        mesh = Mesh1D(lo, hi, cfg.n, cfg.boundary or bnd)
        sol = project_ic(f, mesh, cfg.degree, n_vars=3)
        sol.parity = (1.0, -1.0, 1.0)
        if mesh.boundary is Boundary.FIXED_TO_INITIAL:
            sol.fixed_ghosts = np.stack([sol.coeffs[:, 0], sol.coeffs[:, -1]], axis=1).copy()
        return sol
    mesh = Mesh1D(lo, hi, cfg.n, cfg.boundary or Boundary.PERIODIC)
    return project_ic(f, mesh, cfg.degree)


def default_t_end(cfg: SimConfig):
    if cfg.t_end is not None:
        return cfg.t_end
    if cfg.equation is Equation.EULER1D:
        return EULER_SETUP.get(cfg.ic_name, (None, 0.2))[1]
    # one crossing of the unit periodic domain
    if cfg.equation is Equation.ADVECTION2D:
        ax, ay = cfg.a
        return 1.0 / max(abs(ax), abs(ay)) if (ax or ay) else 0.0
    return 1.0 / abs(cfg.a) if cfg.a else 0.0


def max_wave_speed(sol, cfg: SimConfig):
    if cfg.equation is Equation.EULER1D:
        nodes, _ = gauss_quadrature(sol.degree + 2)
        W = cons_to_prim(eval_nodes_1d(sol.coeffs, nodes), cfg.gamma)
        return float(np.max(np.abs(W[1]) + sound_speed(W, cfg.gamma)))
    return abs(float(cfg.a))


def stable_dt(sol, cfg: SimConfig):
    if cfg.equation is Equation.ADVECTION2D:
        ax, ay = cfg.a
        rate = abs(ax) / sol.mesh.dx + abs(ay) / sol.mesh.dy
        return cfg.cfl / rate if rate > 0 else np.inf
    lam = max_wave_speed(sol, cfg)
    return cfg.cfl * sol.mesh.h / lam if lam > 0 else np.inf


def make_rhs(cfg: SimConfig):
    if cfg.equation is Equation.ADVECTION1D:
        return lambda s: rhs_advection_1d(s, float(cfg.a))
    if cfg.equation is Equation.EULER1D:
        return lambda s: rhs_euler_1d(s, cfg.gamma)
    return lambda s: rhs_advection_2d(s, tuple(float(v) for v in cfg.a))


def exact_solution(cfg: SimConfig, t: float):
    """Advected initial profile, or None when no closed form exists."""
    if cfg.equation is Equation.EULER1D:
        return None
    f = make_ic(cfg.ic_name)
    if cfg.equation is Equation.ADVECTION2D:
        ax, ay = cfg.a
        return lambda x, y: f(x - ax * t, y - ay * t)
    return lambda x: f(x - cfg.a * t)


def run(cfg: SimConfig, on_step: Callable | None = None, sol=None) -> RunReport:
    """Integrate to ``t_end``; positivity failures end the run with a failure record.

    ``on_step(step_index, t, solution, outcome)`` is called after every step.
    """
    t0 = time.perf_counter()
    sol = initial_solution(cfg) if sol is None else sol
    dim = 2 if cfg.equation is Equation.ADVECTION2D else 1
    hook = build_limiter_hook(cfg, dim)
    rhs = make_rhs(cfg)
    t_end = default_t_end(cfg)
    t, n_steps, flagged, failure = 0.0, 0, [], None
    try:
        while t < t_end - 1e-14 * max(1.0, t_end):
            dt = min(stable_dt(sol, cfg), t_end - t)
            sol, outcome = step(sol, rhs, dt, hook)
            t = t_end if t + dt >= t_end - 1e-14 else t + dt
            n_steps += 1
            mask = outcome.changed if outcome.flagged is None else outcome.flagged
            flagged.append(int(np.count_nonzero(mask)))
            if on_step is not None:
                on_step(n_steps, t, sol, outcome)
    except PositivityError as err:
        failure = {"time": t, "step": n_steps + 1, "message": str(err), "cell": err.cell}
    exact = exact_solution(cfg, t)
    err = l1_error(sol, exact) if (exact is not None and failure is None) else None
    return RunReport(sol, t, n_steps, time.perf_counter() - t0, flagged, err, failure)


def write_snapshot(path, sol, t, limiter="none", var_names=None, header=None):
    """Cell-average snapshot CSV with a ``# t=... n=... order=... limiter=...`` header.

    ``header`` is an optional extra comment line written first.
    """
    avg = sol.averages()
    if isinstance(sol, ModalSolution2D):
        xc, yc = sol.mesh.centers
        X, Y = np.meshgrid(xc, yc, indexing="ij")
        cols = [X.ravel(), Y.ravel()] + [a.ravel() for a in avg]
        names = ["x", "y"]
        n = f"{sol.mesh.nx}x{sol.mesh.ny}"
    else:
        cols = [sol.mesh.centers] + list(avg)
        names = ["x"]
        n = str(sol.mesh.n_cells)
    names += list(var_names or [f"u{k}" for k in range(sol.n_vars)])
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(f"# t={t!r} n={n} order={sol.degree + 1} limiter={limiter}\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
