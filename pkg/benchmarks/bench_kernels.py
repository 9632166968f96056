"""Time the compiled and NumPy limiter kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from nnlim import _kernels_py as numpy_backend
from nnlim.limiters import hio_kappa

try:
    from nnlim import _kernels as cython_backend
except ImportError:
    cython_backend = None


def cases(rng):
    c1 = rng.normal(size=(3, 402, 3))
    c2 = rng.normal(size=(1, 130, 130, 3, 3))
    kap = hio_kappa(2)
    return {
        "minmod_limit_1d (3x400, p=2)": lambda k: k.minmod_limit_1d(c1, -1.0),
        "hio_limit_1d (3x400, p=2)": lambda k: k.hio_limit_1d(c1, kap),
        "minmod_limit_2d (128^2, p=2)": lambda k: k.minmod_limit_2d(c2),
        "hio_limit_2d (128^2, p=2)": lambda k: k.hio_limit_2d(c2, kap),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = {"numpy": numpy_backend}
    if cython_backend is not None:
        backends["cython"] = cython_backend
    else:
        print("compiled extension not built; timing the NumPy backend only")
    print(f"{'kernel':32s}" + "".join(f"{name:>14s}" for name in backends) + f"{'speedup':>10s}")
    for label, fn in cases(np.random.default_rng(0)).items():
        times = {name: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for name, k in backends.items()}
        speed = times["numpy"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:32s}" + "".join(f"{t * 1e3:12.3f}ms" for t in times.values()) + f"{speed:9.1f}x")


if __name__ == "__main__":
    main()
