"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row is the best of ``--repeat`` runs; JIT compilation is excluded by a
warm-up call. Without numba only the numpy column is filled.
"""

import argparse
import timeit

import numpy as np

from slopecal import _kernels
from slopecal.path import compute_path
from slopecal.regressogram import empirical_risk, sine_truth, fit, generate
from slopecal.types import ModelScore, regular_models


def case_fit_collection(n):
    sample = generate(sine_truth(), n, 0)
    models = regular_models(range(1, int(n / np.log(n)) + 1))

    def run(use_numba):
        for m in models:
            fit(sample, m, use_numba)

    return f"fit {len(models)} models, n={n}", run


def case_cell_means(n, cells):
    rng = np.random.default_rng(1)
    idx = rng.integers(0, cells, n)
    ys = rng.normal(size=n)
    return f"cell_means n={n}, {cells} cells", lambda u: _kernels.cell_means(idx, ys, cells, u)


def case_path(m):
    rng = np.random.default_rng(2)
    g = np.sort(rng.exponential(size=m))
    # convex in g, so every model lies on the path: the worst case
    f = (g.max() - g) ** 2
    return f"selection_path M={m}", lambda u: _kernels.selection_path(f, g, 1e-12, u)


def case_benchmark_replicate(n):
    sample = generate(sine_truth(), n, 3)
    models = regular_models(range(1, int(n / np.log(n)) + 1))

    def run(use_numba):
        scores = []
        for m in models:
            ft = fit(sample, m, use_numba)
            if ft.admissible:
                scores.append(ModelScore(m.id, empirical_risk(ft, sample), float(m.dim), m.dim))
        compute_path(scores, use_numba=use_numba)

    return f"score + path, n={n}", run


def best_time(func, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(func, number=1), 1e-7)))
    return min(timeit.repeat(func, number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    cases = [
        case_fit_collection(200),
        case_fit_collection(5000),
        case_cell_means(10**6, 100),
        case_path(200),
        case_path(2000),
        case_benchmark_replicate(200),
    ]
    print(f"{'case':34s} {'numpy':>12s} {'numba':>12s} {'speed-up':>9s}")
    for label, run in cases:
        t_np = best_time(lambda: run(False), args.repeat)
        if _kernels.HAVE_NUMBA:
            run(True)  # compile
            t_nb = best_time(lambda: run(True), args.repeat)
            print(f"{label:34s} {t_np * 1e3:10.3f}ms {t_nb * 1e3:10.3f}ms {t_np / t_nb:8.1f}x")
        else:
            print(f"{label:34s} {t_np * 1e3:10.3f}ms {'n/a':>12s}")


if __name__ == "__main__":
    main()
