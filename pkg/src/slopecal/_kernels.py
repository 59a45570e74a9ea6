"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``SLOPECAL_DISABLE_NUMBA=1`` to force the numpy implementations (also
used automatically when numba is not importable). Both paths return
identical results; ``tests/test_kernels.py`` checks that.
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLED = os.environ.get("SLOPECAL_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# per-cell sufficient statistics
# ---------------------------------------------------------------------------


def _bin_stats_numpy(idx, ys, n_cells):
    counts = np.bincount(idx, minlength=n_cells).astype(np.int64)
    sums = np.bincount(idx, weights=ys, minlength=n_cells)
    return counts, sums


def _bin_stats_loop(idx, ys, n_cells):
    counts = np.zeros(n_cells, dtype=np.int64)
    sums = np.zeros(n_cells, dtype=np.float64)
    for i in range(idx.shape[0]):
        counts[idx[i]] += 1
        sums[idx[i]] += ys[i]
    return counts, sums


def _cell_means_numpy(idx, ys, n_cells):
    counts = np.bincount(idx, minlength=n_cells).astype(np.int64)
    order = np.argsort(idx, kind="stable")
    groups = np.split(ys[order], np.cumsum(counts)[:-1])
    means = np.full(n_cells, np.nan)
    for k, members in enumerate(groups):
        if members.size:
            means[k] = math.fsum(members) / members.size
    return counts, means


def _cell_means_loop(idx, ys, n_cells):
    # Neumaier compensated sums: cell means near zero keep their relative accuracy
    counts = np.zeros(n_cells, dtype=np.int64)
    sums = np.zeros(n_cells, dtype=np.float64)
    comp = np.zeros(n_cells, dtype=np.float64)
    for i in range(idx.shape[0]):
        k = idx[i]
        y = ys[i]
        t = sums[k] + y
        if abs(sums[k]) >= abs(y):
            comp[k] += (sums[k] - t) + y
        else:
            comp[k] += (y - t) + sums[k]
        sums[k] = t
        counts[k] += 1
    means = np.full(n_cells, np.nan)
    for k in range(n_cells):
        if counts[k] > 0:
            means[k] = (sums[k] + comp[k]) / counts[k]
    return counts, means


def _cell_variance_numpy(idx, ys, counts, means):
    dev = ys - means[idx]
    ss = np.bincount(idx, weights=dev * dev, minlength=counts.shape[0])
    out = np.full(counts.shape[0], np.nan)
    ok = counts >= 2
    out[ok] = ss[ok] / (counts[ok] - 1)
    return out


def _cell_variance_loop(idx, ys, counts, means):
    n_cells = counts.shape[0]
    ss = np.zeros(n_cells, dtype=np.float64)
    for i in range(idx.shape[0]):
        d = ys[i] - means[idx[i]]
        ss[idx[i]] += d * d
    out = np.empty(n_cells, dtype=np.float64)
    for k in range(n_cells):
        if counts[k] >= 2:
            out[k] = ss[k] / (counts[k] - 1)
        else:
            out[k] = np.nan
    return out


# ---------------------------------------------------------------------------
# selection path (f, g already sorted by the total order)
# ---------------------------------------------------------------------------


def _path_numpy(f, g, tol):
    m = f.shape[0]
    # m_0: first (order-smallest) model whose risk ties the minimum
    fmin = f.min()
    start = int(np.flatnonzero(np.abs(f - fmin) <= tol * np.maximum(np.abs(f), abs(fmin)))[0])
    models = [start]
    knots = [0.0]
    evals = m
    cur = start
    while True:
        fc, gc = f[cur], g[cur]
        df = f - fc
        dg = gc - g
        # any smaller g is a candidate; ratio 0 (f not larger) takes over at once,
        # which only happens when rounding hid a tie on the previous step
        up = dg > tol * np.maximum(np.abs(g), abs(gc))
        evals += m
        if not up.any():
            break
        ratio = np.full(m, np.inf)
        with np.errstate(over="ignore"):
            ratio[up] = np.maximum(df[up], 0.0) / dg[up]
        kmin = ratio.min()
        if kmin == np.inf:
            # next knot overflows: no finite K reaches it
            break
        # exact ratio ties: nearest hull vertex first (largest g), then smallest f
        cand = ratio == kmin
        cand &= g == g[cand].max()
        cand &= f == f[cand].min()
        nxt = int(np.flatnonzero(cand)[0])
        if len(models) > 1 and kmin <= knots[-1] * (1.0 + tol):
            # zero-length segment: the new model takes over the last knot
            models[-1] = nxt
        else:
            models.append(nxt)
            knots.append(max(float(kmin), np.nextafter(knots[-1], np.inf)))
        cur = nxt
    return np.asarray(models, dtype=np.int64), np.asarray(knots), evals


def _path_loop(f, g, tol):
    m = f.shape[0]
    fmin = np.inf
    for j in range(m):
        if f[j] < fmin:
            fmin = f[j]
    start = 0
    for j in range(m):
        if abs(f[j] - fmin) <= tol * max(abs(f[j]), abs(fmin)):
            start = j
            break
    models = np.empty(m, dtype=np.int64)
    knots = np.empty(m, dtype=np.float64)
    models[0] = start
    knots[0] = 0.0
    count = 1
    evals = m
    cur = start
    while True:
        fc = f[cur]
        gc = g[cur]
        kmin = np.inf
        nxt = -1
        evals += m
        for j in range(m):
            df = f[j] - fc
            dg = gc - g[j]
            if dg > tol * max(abs(g[j]), abs(gc)):
                r = max(df, 0.0) / dg
                if r < kmin or (
                    r == kmin and nxt >= 0 and (g[j] > g[nxt] or (g[j] == g[nxt] and f[j] < f[nxt]))
                ):
                    kmin = r
                    nxt = j
        if kmin == np.inf:
            break
        if count > 1 and kmin <= knots[count - 1] * (1.0 + tol):
            models[count - 1] = nxt
        else:
            models[count] = nxt
            knots[count] = max(kmin, np.nextafter(knots[count - 1], np.inf))
            count += 1
        cur = nxt
    return models[:count].copy(), knots[:count].copy(), evals


if HAVE_NUMBA:
    _bin_stats_jit = njit(cache=True)(_bin_stats_loop)
    _cell_means_jit = njit(cache=True)(_cell_means_loop)
    _cell_variance_jit = njit(cache=True)(_cell_variance_loop)
    _path_jit = njit(cache=True)(_path_loop)
else:  # pragma: no cover
    _bin_stats_jit = _cell_means_jit = _cell_variance_jit = _path_jit = None


def bin_stats(idx, ys, n_cells, use_numba=None):
    """Per-cell counts and response sums."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        return _bin_stats_jit(idx, ys, n_cells)
    return _bin_stats_numpy(idx, ys, n_cells)


def cell_means(idx, ys, n_cells, use_numba=None):
    """Per-cell counts and means (NaN on empty cells) from compensated sums."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        return _cell_means_jit(idx, ys, n_cells)
    return _cell_means_numpy(idx, ys, n_cells)


def cell_variance(idx, ys, counts, means, use_numba=None):
    """Unbiased within-cell variance of ``ys``; NaN where a cell has < 2 points."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        return _cell_variance_jit(idx, ys, counts, means)
    return _cell_variance_numpy(idx, ys, counts, means)


def selection_path(f, g, tol, use_numba=None):
    """Breakpoint recursion on arrays already sorted by the total order.

    Returns ``(positions, knots, evaluations)`` where ``positions`` index
    into ``f``/``g``, ``knots[0] == 0`` and ``evaluations`` counts the
    model visits performed by the scans.
    """
    f = np.ascontiguousarray(f, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        models, knots, evals = _path_jit(f, g, float(tol))
        return models, knots, int(evals)
    return _path_numpy(f, g, float(tol))
