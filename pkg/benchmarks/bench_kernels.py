"""Compare the compiled and numpy kernel backends.

Run ``python benchmarks/bench_kernels.py [--n 20000] [--repeat 5]``.
Each kernel is checked for agreement before it is timed; the table lists
the best time per call and the speed-up of the compiled path.
"""
from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from shellhom.kernels import compiled_backend, python_backend
from shellhom.mandel import isotropic_quadratic

TANGENTIAL, ELIMINATED = [0, 1, 5], [2, 3, 4]


def cases(n, rng):
    F = np.eye(3) + 0.1 * rng.normal(size=(n, 3, 3))
    mu = rng.uniform(0.5, 2.0, n)
    lam = rng.uniform(0.0, 2.0, n)
    Q = np.stack([isotropic_quadratic(a, b) for a, b in zip(mu[:64], lam[:64])])
    Q = np.ascontiguousarray(Q[rng.integers(0, 64, n)])
    v = rng.normal(size=(n, 6))
    return {
        "svk_energy": (F, mu, lam),
        "quad_form": (Q, v),
        "schur": (Q, TANGENTIAL, ELIMINATED),
    }


def first(x):
    return x[0] if isinstance(x, tuple) else x


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20000, help="batch size")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if compiled_backend is None:
        print("compiled extension not available; build with "
              "`pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    print(f"batch size {args.n}, best of {args.repeat}")
    print(f"{'kernel':<12} {'numpy [ms]':>11} {'cython [ms]':>12} {'speed-up':>9} "
          f"{'max diff':>10}")
    for name, call_args in cases(args.n, rng).items():
        fp = getattr(python_backend, name)
        fc = getattr(compiled_backend, name)
        diff = float(np.max(np.abs(first(fp(*call_args)) - first(fc(*call_args)))))
        tp = min(timeit.repeat(lambda: fp(*call_args), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: fc(*call_args), number=1, repeat=args.repeat))
        print(f"{name:<12} {1e3 * tp:11.3f} {1e3 * tc:12.3f} {tp / tc:9.2f} "
              f"{diff:10.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
