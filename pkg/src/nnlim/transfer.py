"""Adaptation of a Cartesian-trained 2D detector to triangular, RD-style data.

Synthetic patches are labeled by construction: smooth fields are negative,
a plane discontinuity is positive iff its line cuts the centre element.
Cartesian patches are scored through the regular 2D feature path, triangles
through the feature remap.  Retraining mixes a fraction ``lam`` of target
samples into the source data to limit forgetting.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import features as F
from .core import Boundary, Mesh2D, ModalSolution2D, gauss_quadrature
from .dataset import Dataset, SchemaMismatchError, SplitSpec, split
from .metrics import classification_report
from .mlp import Hyperparams, Network, TrainHistory, predict, train

MESH_KINDS = ("cartesian", "triangular")


@dataclass(frozen=True)
class RDConfig:
    """Ranges of the synthetic field family; all of them go into provenance."""

    widths: tuple = (1 / 16, 1 / 32, 1 / 64, 1 / 128)
    p_jump: float = 0.5
    base: tuple = (-2.0, 2.0)  # uniform offset of every field
    slope: tuple = (0.1, 10.0)  # log-uniform gradient / curvature scale
    bump_amp: tuple = (0.1, 5.0)  # log-uniform
    bump_sigma: tuple = (0.05, 0.3)
    sine_amp: tuple = (0.1, 5.0)  # log-uniform
    sine_k: tuple = (math.pi, 8 * math.pi)
    jump: tuple = (0.05, 10.0)  # log-uniform |R - L|
    offset_dilation: float = 1.5  # x0 drawn in the centre element scaled by this about its centroid
    quad_points: int = 5


DEFAULT_RD = RDConfig()


@dataclass(frozen=True)
class MixSpec:
    lam: float
    size: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.size < 0:
            raise ValueError("size must be >= 0")


@dataclass(frozen=True)
class Field:
    """Analytic field; ``normal``/``x0`` describe the jump line of a discontinuous one."""

    fn: object
    normal: tuple | None = None
    x0: tuple | None = None
    left: float = 0.0
    right: float = 0.0

    @property
    def discontinuous(self):
        return self.normal is not None

    def __call__(self, x, y):
        return self.fn(np.asarray(x, float), np.asarray(y, float))


def _log_uniform(rng, lo, hi):
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def _unit(rng):
    t = rng.uniform(0.0, 2.0 * math.pi)
    return np.array([math.cos(t), math.sin(t)])


def smooth_field(rng, center, cfg=DEFAULT_RD) -> Field:
    """Random affine, quadratic, Gaussian bump or sinusoid around ``center``."""
    c0 = rng.uniform(*cfg.base)
    cx, cy = center
    kind = rng.integers(4)
    if kind == 0:
        g = _log_uniform(rng, *cfg.slope) * _unit(rng)
        return Field(lambda x, y: c0 + g[0] * (x - cx) + g[1] * (y - cy))
    if kind == 1:
        s = _log_uniform(rng, *cfg.slope)
        g = s * rng.normal(size=2)
        q = s * rng.normal(size=3)
        return Field(lambda x, y: c0 + g[0] * (x - cx) + g[1] * (y - cy)
                     + q[0] * (x - cx) ** 2 + q[1] * (x - cx) * (y - cy) + q[2] * (y - cy) ** 2)
    if kind == 2:
        a = _log_uniform(rng, *cfg.bump_amp) * rng.choice((-1.0, 1.0))
        sig = rng.uniform(*cfg.bump_sigma)
        bx, by = np.asarray(center) + rng.uniform(-0.2, 0.2, size=2)
        return Field(lambda x, y: c0 + a * np.exp(-((x - bx) ** 2 + (y - by) ** 2) / sig ** 2))
    a = _log_uniform(rng, *cfg.sine_amp)
    k = rng.uniform(*cfg.sine_k) * _unit(rng)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    return Field(lambda x, y: c0 + a * np.sin(k[0] * x + k[1] * y + phase))


def jump_field(rng, element, cfg=DEFAULT_RD) -> Field:
    """``L + (R - L) [n . (x - x0) > 0]`` with x0 in the dilated centre element."""
    element = np.asarray(element, float)
    centroid = element.mean(axis=0)
    w = rng.dirichlet(np.ones(len(element)))
    x0 = centroid + cfg.offset_dilation * (w @ element - centroid)
    n = _unit(rng)
    left = rng.uniform(*cfg.base)
    right = left + rng.choice((-1.0, 1.0)) * _log_uniform(rng, *cfg.jump)

    def fn(x, y):
        return np.where(n[0] * (x - x0[0]) + n[1] * (y - x0[1]) > 0.0, right, left)

    return Field(fn, tuple(n), tuple(x0), left, right)


def line_cuts(field: Field, polygon) -> bool:
    """True iff the jump line has polygon vertices strictly on both sides."""
    if not field.discontinuous:
        return False
    s = (np.asarray(polygon, float) - field.x0) @ np.asarray(field.normal)
    return bool(s.min() < 0.0 < s.max())


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _clip_positive(poly, normal, x0):
    """Part of a convex polygon with ``n . (x - x0) > 0``."""
    s = (poly - x0) @ normal
    out = []
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        sa, sb = s[k], s[(k + 1) % len(poly)]
        if sa > 0:
            out.append(a)
        if (sa > 0) != (sb > 0) and sa != sb:
            out.append(a + (b - a) * (sa / (sa - sb)))
    return np.array(out) if len(out) >= 3 else np.zeros((0, 2))


def _quad_square(n):
    xi, w = gauss_quadrature(n)
    X, Y = np.meshgrid(xi, xi, indexing="ij")
    return 0.5 * X.ravel(), 0.5 * Y.ravel(), np.outer(w, w).ravel() / 4.0


def _quad_triangle(n):
    """Collapsed Gauss rule on the reference triangle (0,0), (1,0), (0,1); weights sum to 1."""
    xi, w = gauss_quadrature(n)
    a, b = 0.5 * (xi + 1.0), 0.5 * (xi + 1.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    r, s = A * (1.0 - B), B
    W = np.outer(w, w) * (1.0 - B) / 2.0
    return r.ravel(), s.ravel(), W.ravel()


def element_average(field: Field, polygon, cfg=DEFAULT_RD):
    """Exact for the jump field (clipped area), Gauss quadrature otherwise."""
    poly = np.asarray(polygon, float)
    if field.discontinuous:
        area = _polygon_area(poly)
        part = _clip_positive(poly, np.asarray(field.normal), np.asarray(field.x0))
        frac = _polygon_area(part) / area if len(part) else 0.0
        return field.left + (field.right - field.left) * frac
    if len(poly) == 3:
        r, s, w = _quad_triangle(cfg.quad_points)
        x = poly[0] + np.outer(r, poly[1] - poly[0]) + np.outer(s, poly[2] - poly[0])
    else:
        # axis-aligned rectangle given counter-clockwise from its lower-left corner
        u, v, w = _quad_square(cfg.quad_points)
        lo, hi = poly.min(axis=0), poly.max(axis=0)
        x = np.stack([0.5 * (lo[0] + hi[0]) + u * (hi[0] - lo[0]),
                      0.5 * (lo[1] + hi[1]) + v * (hi[1] - lo[1])], axis=1)
    return float(np.dot(w, field(x[:, 0], x[:, 1])) / w.sum())


def _square(cx, cy, h):
    r = 0.5 * h
    return np.array([[cx - r, cy - r], [cx + r, cy - r], [cx + r, cy + r], [cx - r, cy + r]])


def _cell_coeffs(avg, uw, ue, us, un):
    """Degree-2 tensor coefficients matching the mean and the four edge-midpoint values."""
    a = 0.5 * (uw + ue) - avg
    b = 0.5 * (us + un) - avg
    c = np.zeros((3, 3))
    c[0, 0] = avg
    c[1, 0] = 0.5 * (ue - uw)
    c[0, 1] = 0.5 * (un - us)
    c[2, 0] = (4.0 * a + 2.0 * b) / 3.0
    c[0, 2] = (4.0 * b + 2.0 * a) / 3.0
    return c


def cartesian_sample(rng, cfg=DEFAULT_RD):
    """One Cartesian cross-stencil sample: (features, label)."""
    h = float(rng.choice(cfg.widths))
    cx, cy = rng.uniform(0.0, 1.0, size=2)
    centre = _square(cx, cy, h)
    field = jump_field(rng, centre, cfg) if rng.random() < cfg.p_jump else smooth_field(rng, (cx, cy), cfg)
    return cartesian_patch(field, cx, cy, h, cfg)


def cartesian_patch(field: Field, cx, cy, h, cfg=DEFAULT_RD):
    """Features and label of ``field`` on the cross stencil of width ``h`` centred at (cx, cy)."""
    centre = _square(cx, cy, h)
    coeffs = np.zeros((1, 3, 3, 3, 3))
    for i, j in ((1, 1), (0, 1), (2, 1), (1, 0), (1, 2)):
        x, y = cx + (i - 1) * h, cy + (j - 1) * h
        avg = element_average(field, _square(x, y, h), cfg)
        mids = field(np.array([x - h / 2, x + h / 2, x, x]), np.array([y, y, y - h / 2, y + h / 2]))
        coeffs[0, i, j] = _cell_coeffs(avg, *mids)
    for i, j in ((0, 0), (0, 2), (2, 0), (2, 2)):
        coeffs[0, i, j, 0, 0] = coeffs[0, 1, 1, 0, 0]
    mesh = Mesh2D(cx - 1.5 * h, cx + 1.5 * h, cy - 1.5 * h, cy + 1.5 * h, 3, 3, Boundary.PERIODIC)
    fv = F.extract_features_2d(ModalSolution2D(mesh, coeffs), 1, 1)
    return fv.values, int(line_cuts(field, centre))


def random_triangle(rng, h):
    """Perturbed equilateral triangle of area ``h**2``, counter-clockwise, random rotation."""
    base = np.array([[1.0, 0.0], [-0.5, math.sqrt(3) / 2], [-0.5, -math.sqrt(3) / 2]])
    v = base + rng.uniform(-0.15, 0.15, size=(3, 2))
    t = rng.uniform(0.0, 2.0 * math.pi)
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    v = v @ rot.T
    v *= h / math.sqrt(_polygon_area(v))
    if _cross(v[1] - v[0], v[2] - v[0]) < 0:
        v = v[[0, 2, 1]]
    return v


def triangle_neighbours(tri):
    """Neighbour k is the reflection of ``tri`` across the edge opposite vertex k."""
    out = []
    for k in range(3):
        a, b = tri[(k + 1) % 3], tri[(k + 2) % 3]
        d = (b - a) / np.linalg.norm(b - a)
        p = tri[k] - a
        out.append(np.array([a + 2.0 * np.dot(p, d) * d - p, b, a]))
    return out


def triangle_sample(rng, cfg=DEFAULT_RD):
    """One triangular 4-element sample: (features, label)."""
    h = float(rng.choice(cfg.widths))
    centre = random_triangle(rng, h) + rng.uniform(0.0, 1.0, size=2)
    cxy = centre.mean(axis=0)
    field = jump_field(rng, centre, cfg) if rng.random() < cfg.p_jump else smooth_field(rng, tuple(cxy), cfg)
    return triangle_patch(field, centre, cfg)


def triangle_patch(field: Field, centre, cfg=DEFAULT_RD):
    """Features and label of ``field`` on a triangle and its three reflected neighbours."""
    centre = np.asarray(centre, float)
    neigh = triangle_neighbours(centre)
    mids = np.array([0.5 * (centre[(k + 1) % 3] + centre[(k + 2) % 3]) for k in range(3)])
    patch = F.TrianglePatch(
        area=_polygon_area(centre),
        u_center=element_average(field, centre, cfg),
        u_neighbors=tuple(element_average(field, t, cfg) for t in neigh),
        u_edges=tuple(float(v) for v in field(mids[:, 0], mids[:, 1])),
    )
    return F.remap_features_triangle(patch).values, int(line_cuts(field, centre))


def generate_rd_dataset(mesh_kind, n, seed=0, cfg: RDConfig = DEFAULT_RD) -> Dataset:
    """``n`` synthetic labeled patches; sample ``k`` uses the seed pair (seed, k)."""
    if mesh_kind not in MESH_KINDS:
        raise ValueError(f"mesh must be one of {MESH_KINDS}, got {mesh_kind!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    make = cartesian_sample if mesh_kind == "cartesian" else triangle_sample
    X = np.empty((n, F.F2D_V1.d))
    y = np.empty(n, dtype=np.int8)
    for k in range(n):
        X[k], y[k] = make(np.random.default_rng([seed, k]), cfg)
    prov = {"zeta": "none", "seed": seed, "stride": "none", "mesh": mesh_kind, "n": n}
    prov.update({k: ":".join(map(repr, v)) if isinstance(v, tuple) else repr(v) for k, v in asdict(cfg).items()})
    return Dataset(F.F2D_V1.id, X, y, prov)


def mix_datasets(source: Dataset, target: Dataset, spec: MixSpec) -> Dataset:
    """``ceil(lam * size)`` target rows plus the rest from source, drawn without replacement and shuffled."""
    if source.schema != target.schema:
        raise SchemaMismatchError(f"cannot mix {source.schema!r} with {target.schema!r}")
    n_t = math.ceil(spec.lam * spec.size)
    n_s = spec.size - n_t
    if n_t > len(target) or n_s > len(source):
        raise ValueError(f"mix needs {n_t} target / {n_s} source rows, "
                         f"have {len(target)} / {len(source)}")
    rng = np.random.default_rng(spec.seed)
    it = rng.choice(len(target), size=n_t, replace=False)
    is_ = rng.choice(len(source), size=n_s, replace=False)
    X = np.concatenate([target.X[it], source.X[is_]])
    y = np.concatenate([target.y[it], source.y[is_]])
    perm = rng.permutation(spec.size)
    prov = {"lambda": spec.lam, "size": spec.size, "seed": spec.seed, "n_target": n_t, "n_source": n_s}
    return Dataset(source.schema, X[perm], y[perm], prov)


def max_mix_size(lam, n_source, n_target):
    """Largest size whose λ-mix fits in both pools."""
    size = n_source + n_target
    while size > 0 and (math.ceil(lam * size) > n_target or size - math.ceil(lam * size) > n_source):
        size -= 1
    return size


def detection_metrics(net: Network, ds: Dataset, tau=0.5):
    return classification_report(predict(net, ds.X, tau), ds.y)


def retrain(net: Network, source: Dataset, target: Dataset, lam, hyper: Hyperparams = Hyperparams(),
            split_spec: SplitSpec = SplitSpec()):
    """Continue training on a λ-mixed set; epochs are half of ``hyper.epochs``.

    Both domains are split with ``split_spec``; the mix draws from the train
    and validation parts, and ``history.domain_metrics`` holds metrics on the
    held-out source and target test parts before and after retraining.
    """
    if net.schema != F.F2D_V1.id:
        raise SchemaMismatchError(f"retraining needs an {F.F2D_V1.id} network, got {net.schema!r}")
    s_tr, s_va, s_te = split(source, split_spec)
    t_tr, t_va, t_te = split(target, split_spec)
    seed = split_spec.seed
    mixed_tr = mix_datasets(s_tr, t_tr, MixSpec(lam, max_mix_size(lam, len(s_tr), len(t_tr)), seed))
    mixed_va = mix_datasets(s_va, t_va, MixSpec(lam, max_mix_size(lam, len(s_va), len(t_va)), seed + 1))
    hyper = replace(hyper, epochs=max(1, hyper.epochs // 2))
    before = {"source": detection_metrics(net, s_te, hyper.tau), "target": detection_metrics(net, t_te, hyper.tau)}
    adapted, history = train(net, mixed_tr, mixed_va, hyper)
    after = {"source": detection_metrics(adapted, s_te, hyper.tau),
             "target": detection_metrics(adapted, t_te, hyper.tau)}
    history.domain_metrics = {"before": before, "after": after}
    return adapted, history


def metrics_rows(history: TrainHistory):
    """Flat ``(stage, domain, metric, value)`` rows of ``history.domain_metrics``."""
    rows = []
    for stage, doms in history.domain_metrics.items():
        for dom, m in doms.items():
            rows.extend((stage, dom, k, v) for k, v in m.items())
    return rows
