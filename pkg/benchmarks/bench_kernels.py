"""Compare the compiled kernels with the NumPy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--n 100000] [--repeat 5]

Each kernel is timed on identical random inputs with both backends and
the best of ``--repeat`` runs is reported, together with the largest
relative difference between the two results.
"""
import argparse
import timeit

import numpy as np

from pvtwin import kernels


def _inputs(n, seed):
    r = np.random.default_rng(seed)
    IL = r.uniform(0.5, 11.0, n)
    Io = 10 ** r.uniform(-12, -8, n)
    a = r.uniform(1.6, 2.2, n)
    Rs = r.uniform(0.0, 0.6, n)
    Rsh = r.uniform(50.0, 5000.0, n)
    return IL, Io, a, Rs, Rsh, r


def cases(n, seed=0):
    IL, Io, a, Rs, Rsh, r = _inputs(n, seed)
    py = kernels.backend("python")
    V = r.uniform(0.0, 1.0, n) * py.v_oc(IL, Io, a, Rsh)
    logx = r.uniform(-20.0, 400.0, n)
    series = r.normal(size=max(n // 50, 200))
    return {
        "lambertw_exp": (logx,),
        "i_from_v": (V, IL, Io, a, Rs, Rsh),
        "v_oc": (IL, Io, a, Rsh),
        "mpp": (IL, Io, a, Rs, Rsh),
        "rolling_median": (series, 14),
    }


def _max_rel(x, y):
    x, y = np.atleast_1d(x), np.atleast_1d(y)
    scale = np.maximum(np.abs(x), 1e-300)
    return float(np.max(np.abs(x - y) / scale))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--n", type=int, default=100_000, help="points per kernel call")
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions")
    args = parser.parse_args(argv)
    try:
        cy = kernels.backend("cython")
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    py = kernels.backend("python")
    print(f"{'kernel':<16}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}{'max rel diff':>15}")
    for name, args_ in cases(args.n).items():
        fp, fc = getattr(py, name), getattr(cy, name)
        tp = min(timeit.repeat(lambda: fp(*args_), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: fc(*args_), number=1, repeat=args.repeat))
        rp, rc = fp(*args_), fc(*args_)
        if isinstance(rp, tuple):
            diff = max(_max_rel(x, y) for x, y in zip(rp, rc))
        else:
            diff = _max_rel(rp, rc)
        print(f"{name:<16}{1e3 * tp:>14.2f}{1e3 * tc:>14.2f}{tp / tc:>10.1f}{diff:>15.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
