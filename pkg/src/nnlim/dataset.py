"""Labeled datasets from DG runs, splitting and CSV persistence.

Runs advance with the HIO limiter.  At the initial state and every
``stride``-th step the pre-limiting state of the last RK stage is harvested:
features come from :mod:`nnlim.features`, labels from the deviation of a
moment limiter.  The labeling scaling is per dimension: the restrictive
``kappa_m = 1 / (2 (2m - 1))`` in 1D, unit scaling in 2D, where the
restrictive form flags most of a smooth field.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import features as F
from . import limiters
from .solvers import Equation, SimConfig, default_t_end, initial_solution, make_rhs, stable_dt, step

ZETA_1D = 0.01
ZETA_2D_REL = 0.0025
DEFAULT_STRIDE = 10
DEFAULT_CELL_CAP_2D = 256

RUNS_1D = {
    "ics": ("sine1d", "square1d", "halfsine1d"),
    "speeds": (-1.0, 1.0),
    "sizes": (8, 16, 32, 64, 128),
    "orders": (2, 3),
}
RUNS_2D = {
    "ics": ("ring2d", "gaussian2d"),
    "speeds": ((-1.0, -1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)),
    "sizes": (16, 32, 64, 128),
    "orders": (2, 3),
}


class DatasetFormatError(ValueError):
    pass


class SchemaMismatchError(DatasetFormatError, F.SchemaMismatchError):
    pass


@dataclass(frozen=True)
class Sample:
    features: F.FeatureVector
    label: int


@dataclass
class Dataset:
    schema: str
    X: np.ndarray  # (k, d)
    y: np.ndarray  # (k,) int8 in {0, 1}
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, F.get_schema(self.schema).d)
        self.y = np.asarray(self.y).astype(np.int8).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"{self.X.shape[0]} feature rows vs {self.y.shape[0]} labels")
        if self.y.size and not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    def __len__(self):
        return self.y.shape[0]

    def __getitem__(self, k):
        return Sample(F.FeatureVector(self.schema, self.X[k].copy()), int(self.y[k]))

    def samples(self):
        return (self[k] for k in range(len(self)))

    @property
    def positive_fraction(self):
        return float(self.y.mean()) if len(self) else 0.0

    def subset(self, idx):
        return Dataset(self.schema, self.X[idx], self.y[idx], dict(self.provenance))


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3 or any(not r > 0 for r in self.ratios):
            raise ValueError("three positive split ratios are required")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")


# ---------------------------------------------------------------------------
# labeling
# ---------------------------------------------------------------------------

def label_cells_1d(sol, zeta=ZETA_1D, kappa=None):
    """1 where the labeling HIO deviation (max over nodes and variables) exceeds ``zeta``."""
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    kappa = limiters.restrictive_kappa(sol.degree) if kappa is None else kappa
    dev = limiters.apply_hio_1d(sol, kappa).max_deviation
    return (dev > zeta).astype(np.int8)


def label_cells_2d(sol, zeta_rel=ZETA_2D_REL, kappa=None):
    """1 where the labeling HIO deviation exceeds ``zeta_rel`` times the range of cell averages."""
    if not zeta_rel > 0:
        raise ValueError("zeta_rel must be positive")
    avg = sol.averages()
    scale = float(avg.max() - avg.min())
    dev = limiters.apply_hio_2d(sol, kappa).max_deviation
    return (dev > zeta_rel * scale).astype(np.int8)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def _harvest(cfg, stride, snapshot):
    """Run ``cfg`` with HIO and call ``snapshot(sol)`` on sampled pre-limit states."""
    sol = initial_solution(cfg)
    snapshot(sol)
    if not math.isfinite(stride):
        return
    dim = 2 if cfg.equation is Equation.ADVECTION2D else 1
    hio = limiters.apply_hio_2d if dim == 2 else limiters.apply_hio_1d
    rhs = make_rhs(cfg)
    t_end = default_t_end(cfg)
    t, n = 0.0, 0
    last = {}

    def hook(s):
        last["sol"] = s
        return hio(s)

    while t < t_end - 1e-14:
        dt = min(stable_dt(sol, cfg), t_end - t)
        sol, _ = step(sol, rhs, dt, hook)
        t = t_end if t + dt >= t_end - 1e-14 else t + dt
        n += 1
        if n % stride == 0:
            snapshot(last["sol"])


def _check_stride(stride):
    if not stride >= 1:
        raise ValueError("stride must be >= 1 (use math.inf for the initial state only)")


def run_matrix(matrix):
    keys = ("ics", "speeds", "sizes", "orders")
    return list(itertools.product(*(matrix[k] for k in keys)))


def _runs_token(runs):
    def fmt(a):
        return "/".join(repr(float(v)) for v in np.atleast_1d(a))

    return ";".join(f"{ic}:{fmt(a)}:{n}:{order}" for ic, a, n, order in runs)


def _parse_runs(token):
    runs = []
    for part in filter(None, token.split(";")):
        ic, a, n, order = part.split(":")
        speeds = tuple(float(v) for v in a.split("/"))
        runs.append((ic, speeds[0] if len(speeds) == 1 else speeds, int(n), int(order)))
    return runs


def generate_dataset_1d(zeta=ZETA_1D, stride=DEFAULT_STRIDE, seed=0, runs=None) -> Dataset:
    """Harvest the 1D run matrix (or an explicit list of ``(ic, a, N, order)``)."""
    _check_stride(stride)
    runs = run_matrix(RUNS_1D) if runs is None else list(runs)
    Xs, ys = [], []

    def snap(sol):
        Xs.append(F.features_1d(sol)[0])
        ys.append(label_cells_1d(sol, zeta))

    for ic, a, n, order in runs:
        cfg = SimConfig(Equation.ADVECTION1D, ic, n=n, degree=order - 1, a=a, limiter="hio")
        _harvest(cfg, stride, snap)
    prov = {"zeta": zeta, "seed": seed, "stride": stride, "runs": _runs_token(runs)}
    return Dataset(F.F1D_V1.id, np.concatenate(Xs), np.concatenate(ys), prov)


def generate_dataset_2d(zeta_rel=ZETA_2D_REL, stride=DEFAULT_STRIDE, seed=0, runs=None,
                        cap=DEFAULT_CELL_CAP_2D) -> Dataset:
    """Harvest the 2D run matrix; at most ``cap`` uniformly drawn cells per snapshot."""
    _check_stride(stride)
    runs = run_matrix(RUNS_2D) if runs is None else list(runs)
    rng = np.random.default_rng(seed)
    Xs, ys = [], []

    def snap(sol):
        X = F.features_2d(sol)[0].reshape(-1, F.F2D_V1.d)
        y = label_cells_2d(sol, zeta_rel).ravel()
        if cap is not None and y.size > cap:
            keep = np.sort(rng.choice(y.size, size=cap, replace=False))
            X, y = X[keep], y[keep]
        Xs.append(X)
        ys.append(y)

    for ic, a, n, order in runs:
        cfg = SimConfig(Equation.ADVECTION2D, ic, n=n, degree=order - 1, a=tuple(a), limiter="hio")
        _harvest(cfg, stride, snap)
    prov = {"zeta": zeta_rel, "seed": seed, "stride": stride, "runs": _runs_token(runs),
            "cap": "none" if cap is None else cap}
    return Dataset(F.F2D_V1.id, np.concatenate(Xs), np.concatenate(ys), prov)


def regenerate(ds: Dataset) -> Dataset:
    """Rebuild a simulation dataset from its own provenance."""
    p = ds.provenance
    stride = float(p["stride"]) if str(p["stride"]) == "inf" else int(p["stride"])
    runs = _parse_runs(p["runs"])
    if ds.schema == F.F1D_V1.id:
        return generate_dataset_1d(float(p["zeta"]), stride, int(p["seed"]), runs)
    cap = None if str(p.get("cap", "none")) == "none" else int(p["cap"])
    return generate_dataset_2d(float(p["zeta"]), stride, int(p["seed"]), runs, cap)


# ---------------------------------------------------------------------------
# split and merge
# ---------------------------------------------------------------------------

def split(ds: Dataset, spec: SplitSpec = SplitSpec()):
    """Seeded shuffle, then contiguous train / validation / test partition."""
    n = len(ds)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_tr = int(round(spec.ratios[0] * n))
    n_va = int(round(spec.ratios[1] * n))
    parts = (perm[:n_tr], perm[n_tr:n_tr + n_va], perm[n_tr + n_va:])
    return tuple(ds.subset(np.sort(p)) for p in parts)


def concatenate(parts, provenance=None) -> Dataset:
    schemas = {p.schema for p in parts}
    if len(schemas) != 1:
        raise SchemaMismatchError(f"cannot merge schemas {sorted(schemas)}")
    return Dataset(schemas.pop(), np.concatenate([p.X for p in parts]),
                   np.concatenate([p.y for p in parts]), dict(provenance or {}))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

HEADER_TAG = "# nnlim-dataset v1"
_REQUIRED = ("zeta", "seed", "stride")


def _header(ds):
    p = dict(ds.provenance)
    for key in _REQUIRED:
        p.setdefault(key, "none")
    extra = [f"{k}={v}" for k, v in p.items() if k not in _REQUIRED]
    head = [HEADER_TAG, f"schema={ds.schema}"] + [f"{k}={p[k]}" for k in _REQUIRED] + extra
    return " ".join(head)


def save_csv(ds: Dataset, path):
    """Shortest round-trip decimals; provenance goes into the header line."""
    d = F.get_schema(ds.schema).d
    with open(path, "w") as fh:
        fh.write(_header(ds) + "\n")
        fh.write(",".join([f"f{k + 1}" for k in range(d)] + ["label"]) + "\n")
        for row, lab in zip(ds.X.tolist(), ds.y.tolist()):
            fh.write(",".join(map(repr, row)) + f",{lab}\n")


def _parse_header(line, lineno=1):
    if not line.startswith(HEADER_TAG):
        raise DatasetFormatError(f"line {lineno}: missing '{HEADER_TAG}' header")
    fields = {}
    for tok in line[len(HEADER_TAG):].split():
        if "=" not in tok:
            raise DatasetFormatError(f"line {lineno}: malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k] = v
    if "schema" not in fields:
        raise DatasetFormatError(f"line {lineno}: header has no schema")
    return fields


def load_csv(path, expected_schema=None) -> Dataset:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise DatasetFormatError(f"line {len(lines) + 1}: file ends before the column line")
    fields = _parse_header(lines[0])
    schema_id = fields.pop("schema")
    try:
        schema = F.get_schema(schema_id)
    except F.UnknownSchemaError as err:
        raise DatasetFormatError(f"line 1: {err}") from None
    if expected_schema is not None and schema_id != expected_schema:
        raise SchemaMismatchError(f"dataset schema {schema_id!r}, expected {expected_schema!r}")
    cols = lines[1].split(",")
    if len(cols) != schema.d + 1 or cols[-1] != "label":
        raise DatasetFormatError(f"line 2: expected {schema.d} feature columns and 'label'")
    X = np.empty((len(lines) - 2, schema.d))
    y = np.empty(len(lines) - 2, dtype=np.int8)
    for k, line in enumerate(lines[2:]):
        parts = line.split(",")
        if len(parts) != schema.d + 1:
            raise DatasetFormatError(f"line {k + 3}: expected {schema.d + 1} fields, got {len(parts)}")
        try:
            X[k] = [float(v) for v in parts[:-1]]
            lab = int(parts[-1])
        except ValueError as err:
            raise DatasetFormatError(f"line {k + 3}: {err}") from None
        if lab not in (0, 1):
            raise DatasetFormatError(f"line {k + 3}: label must be 0 or 1")
        y[k] = lab
    return Dataset(schema_id, X, y, fields)
