"""Time the compiled SU(2) kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--size 200000] [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` wall time of each
backend and the speed-up.  The end-to-end row subdivides a batch of random
SU(2) lattices, which exercises every kernel.
"""
import argparse
import timeit

import numpy as np

from gaugeinterp import _kernels_py
from gaugeinterp.classical import subdivide_links

try:
    from gaugeinterp import _kernels
except ImportError:  # extension not built
    _kernels = None


def random_quats(rng, n):
    q = rng.standard_normal((n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    p, q = random_quats(rng, args.size), random_quats(rng, args.size)
    cases = {
        "qmul": lambda m: m.qmul(p, q),
        "qpow(0.25)": lambda m: m.qpow(p, 0.25),
        "slerp_mid": lambda m: m.slerp_mid(p, q),
        "qflux": lambda m: m.qflux(p),
        "eigenframe": lambda m: m.eigenframe(p),
    }
    print(f"{'kernel':<16}{'python [s]':>12}{'cython [s]':>12}{'speed-up':>10}")
    for name, call in cases.items():
        t_py = best_time(lambda: call(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:<16}{t_py:12.4f}{'n/a':>12}{'n/a':>10}")
            continue
        t_cy = best_time(lambda: call(_kernels), args.repeat)
        print(f"{name:<16}{t_py:12.4f}{t_cy:12.4f}{t_py / t_cy:10.2f}")

    # End to end: one subdivision of 2000 random 4x4 lattices, each backend.
    links = random_quats(rng, 2000 * 4 * 4 * 2).reshape(2000, 4, 4, 2, 4)
    import gaugeinterp.classical as classical
    saved = classical._SU2Ops.__dict__.copy()
    timings = {}
    for label, mod in (("python", _kernels_py), ("cython", _kernels)):
        if mod is None:
            continue
        for k in ("qmul", "qconj", "qpow", "qflux"):
            setattr(classical._SU2Ops, {"qmul": "mul", "qconj": "dag", "qpow": "pow",
                                        "qflux": "flux"}[k], staticmethod(getattr(mod, k)))
        classical._SU2Ops.eig = staticmethod(mod.eigenframe)
        timings[label] = best_time(lambda: subdivide_links("su2", links, periodic=False), args.repeat)
    for k in ("mul", "dag", "pow", "flux", "eig"):
        setattr(classical._SU2Ops, k, saved[k])
    if "cython" in timings:
        print(f"{'subdivide_links':<16}{timings['python']:12.4f}{timings['cython']:12.4f}"
              f"{timings['python'] / timings['cython']:10.2f}")
    else:
        print(f"{'subdivide_links':<16}{timings['python']:12.4f}{'n/a':>12}{'n/a':>10}")


if __name__ == "__main__":
    main()
