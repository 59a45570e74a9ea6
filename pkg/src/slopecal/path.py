"""Exact path of penalized selections ``K -> argmin f + K g``."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import _kernels
from .types import ModelScore, SelectionPath, total_order

#: relative tolerance used to compare floating-point risks and shapes
PATH_TOL = 1e-12


def compute_path(scores: Sequence[ModelScore], tol: float = PATH_TOL, use_numba=None) -> SelectionPath:
    """Breakpoints and models of the whole selection path.

    For ``K`` in ``[breakpoints[i], breakpoints[i+1])`` the model
    ``models[i]`` is the order-smallest minimizer of ``f + K g`` (see
    :func:`slopecal.types.total_order`). Each step scans every model, so the
    cost is ``O(len(path) * len(scores))``.

    Models whose ``f`` and ``g`` both agree within ``tol`` are treated as
    duplicates; the order-smaller one is kept.
    """
    if not scores:
        raise ValueError("cannot compute a path over an empty collection")
    ordered = total_order(scores)
    f = np.array([s.f for s in ordered])
    g = np.array([s.g for s in ordered])
    pos, knots, evals = _kernels.selection_path(f, g, tol, use_numba)
    path_models = [ordered[int(p)] for p in pos]
    return SelectionPath(
        breakpoints=tuple(float(k) for k in knots),
        models=tuple(s.model_id for s in path_models),
        f=tuple(s.f for s in path_models),
        g=tuple(s.g for s in path_models),
        dims=tuple(s.dim for s in path_models),
        evaluations=evals,
    )


def brute_force_argmin(scores: Sequence[ModelScore], K, tol: float = PATH_TOL):
    """Order-smallest minimizer of ``f + K g`` by exhaustive scan.

    Criterion values within ``tol`` (relative to the magnitude of the terms)
    of the minimum count as tied. Models beaten in ``f`` by another model
    with the same ``g`` are never returned. ``K`` may be a scalar (returns one id) or
    an array (returns a list of ids, one full scan per value).
    """
    ordered = total_order(scores)
    f = np.array([s.f for s in ordered])
    g = np.array([s.g for s in ordered])
    Ks = np.atleast_1d(np.asarray(K, dtype=float))
    if np.any(Ks < 0):
        raise ValueError("K must be nonnegative")
    # a model beaten in f by one with the same g is never an exact minimizer
    same_g = np.abs(g[:, None] - g[None, :]) <= tol * np.maximum(np.abs(g[:, None]), np.abs(g[None, :]))
    beats = f[None, :] < f[:, None] - tol * np.maximum(np.abs(f[:, None]), np.abs(f[None, :]))
    dominated = np.any(same_g & beats, axis=1)
    crit = f[None, :] + Ks[:, None] * g[None, :]
    crit[:, dominated] = np.inf
    terms = np.abs(f)[None, :] + Ks[:, None] * np.abs(g)[None, :]
    j_best = crit.argmin(axis=1)[:, None]
    best = np.take_along_axis(crit, j_best, axis=1)
    # scale by the terms, not by the criterion value, which may cancel to 0
    scale = terms + np.take_along_axis(terms, j_best, axis=1)
    tied = crit - best <= tol * scale
    # first tied column is the order-smallest minimizer
    ids = [ordered[j].model_id for j in np.argmax(tied, axis=1)]
    return ids[0] if np.ndim(K) == 0 else ids
