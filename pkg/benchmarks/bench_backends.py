"""Time the compiled and pure-Python kernels on identical inputs.

Run ``python3 benchmarks/bench_backends.py``; each row reports the best of
several repeats and checks that both backends return identical results.
"""
import argparse
import timeit

import numpy as np

from swarmkin import _backend
from swarmkin.core import make_rng
from swarmkin.recipes import handset_population


def _abm_case(n, steps, radius):
    rng = make_rng(0)
    x0 = rng.random(n)
    v0 = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    unif = rng.random((steps, n))

    def run(kern):
        x, v = x0.copy(), v0.copy()
        return kern.abm_advance(x, v, unif, 0.01, 0.3, 1.0, radius)[0]

    return run


def _window_case(n, replicates):
    pop = handset_population()
    rng = make_rng(1)
    upos, uvel = rng.random((replicates, n)), rng.random((replicates, n))

    def run(kern):
        return kern.window_counts(0.3, 0.2, False, pop.cdf, pop.plus_prob, upos, uvel)[1]

    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    py = _backend.get_kernels("python")
    cy = _backend.get_kernels("cython")
    cases = [
        ("abm_advance global N=20 x 20000", _abm_case(20, 20_000, -1.0)),
        ("abm_advance tophat N=50 x 5000", _abm_case(50, 5_000, 0.2)),
        ("window_counts N=1e4 x 100", _window_case(10_000, 100)),
    ]
    print(f"{'case':<36}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}  match")
    for name, run in cases:
        same = np.array_equal(run(py), run(cy))
        tp = min(timeit.repeat(lambda: run(py), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: run(cy), number=1, repeat=args.repeat))
        print(f"{name:<36}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}  {same}")


if __name__ == "__main__":
    main()
