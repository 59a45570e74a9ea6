"""Domain types shared across the package.

All containers are frozen dataclasses; array fields are copied and marked
read-only on construction so instances can be shared freely.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

#: relative tolerance for invariant checks
REL_TOL = 1e-9


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Sample:
    """Observed pairs ``(x_i, y_i)`` on the feature interval ``[lo, hi]``."""

    xs: np.ndarray
    ys: np.ndarray
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        xs = _frozen_array(self.xs).ravel()
        ys = _frozen_array(self.ys).ravel()
        if xs.shape != ys.shape:
            raise ValueError(f"xs and ys differ in length ({xs.size} != {ys.size})")
        if xs.size < 1:
            raise ValueError("a sample needs at least one observation")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("sample contains non-finite values")
        if not self.lo < self.hi:
            raise ValueError(f"empty feature interval [{self.lo}, {self.hi}]")
        bad = np.flatnonzero((xs < self.lo) | (xs > self.hi))
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"x[{i}] = {xs[i]!r} lies outside [{self.lo}, {self.hi}]")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return int(self.xs.size)


@dataclass(frozen=True)
class PartitionModel:
    """A partition of ``[edges[0], edges[-1]]`` into consecutive cells.

    Cell ``k`` is ``[edges[k], edges[k+1])``; the last cell also contains
    its right end point, so the cells cover the closed interval.
    """

    id: str
    edges: np.ndarray

    def __post_init__(self):
        edges = _frozen_array(self.edges).ravel()
        if edges.size < 2:
            raise ValueError("a partition needs at least two edges")
        if not np.all(np.diff(edges) > 0):
            raise ValueError(f"edges of model {self.id!r} must be strictly increasing")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def regular(cls, dim: int, lo: float = 0.0, hi: float = 1.0) -> "PartitionModel":
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        return cls(id=f"regular-{dim:04d}", edges=np.linspace(lo, hi, dim + 1))

    @property
    def dim(self) -> int:
        return int(self.edges.size - 1)

    @property
    def cells(self) -> list[tuple[float, float]]:
        return list(zip(self.edges[:-1].tolist(), self.edges[1:].tolist()))

    def locate(self, xs) -> np.ndarray:
        """Cell index of each x; raises ``ValueError`` for points outside."""
        xs = np.asarray(xs, dtype=float)
        lo, hi = self.edges[0], self.edges[-1]
        outside = np.flatnonzero((xs < lo) | (xs > hi))
        if outside.size:
            i = int(outside[0])
            raise ValueError(f"x[{i}] = {xs[i]!r} is not covered by model {self.id!r}")
        idx = np.searchsorted(self.edges, xs, side="right") - 1
        return np.minimum(idx, self.dim - 1).astype(np.int64)


def regular_models(dims: Sequence[int], lo: float = 0.0, hi: float = 1.0) -> list[PartitionModel]:
    return [PartitionModel.regular(int(d), lo, hi) for d in dims]


def default_max_dim(n: int) -> int:
    """Largest dimension of the default collection, ``floor(n / ln n)``."""
    if n < 3:
        return 1
    return max(1, int(math.floor(n / math.log(n))))


def default_d_thresh(n: int) -> int:
    """Default threshold: ``n / (2 ln n)`` rounded to the nearest integer (19 at n=200)."""
    if n < 3:
        return 1
    return max(1, int(round(n / (2.0 * math.log(n)))))


@dataclass(frozen=True)
class FittedRegressogram:
    model: PartitionModel
    beta_hat: np.ndarray  # NaN on empty cells
    p_hat: np.ndarray
    counts: np.ndarray
    admissible: bool

    def predict(self, xs) -> np.ndarray:
        return self.beta_hat[self.model.locate(xs)]


@dataclass(frozen=True)
class ModelScore:
    """Inputs of the path algorithm for one model: risk ``f``, shape ``g``."""

    model_id: str
    f: float
    g: float
    dim: int

    def __post_init__(self):
        if not (math.isfinite(self.f) and math.isfinite(self.g)):
            raise ValueError(f"score of {self.model_id!r} is not finite")
        if self.g < 0:
            raise ValueError(f"penalty shape of {self.model_id!r} is negative")


def order_key(score: ModelScore):
    return (score.g, score.dim, score.model_id)


def total_order(scores: Sequence[ModelScore]) -> list[ModelScore]:
    """Sort models so that ``g`` is non-decreasing.

    Ties in ``g`` are broken by dimension, then by model id, which makes the
    order strict and independent of the input permutation.

    >>> a, b = ModelScore("a", 0.0, 2.0, 1), ModelScore("b", 0.0, 1.0, 1)
    >>> [s.model_id for s in total_order([a, b])]
    ['b', 'a']
    """
    ordered = sorted(scores, key=order_key)
    for prev, cur in zip(ordered, ordered[1:]):
        if order_key(prev) == order_key(cur):
            raise ValueError(f"duplicate model id {cur.model_id!r}")
    return ordered


@dataclass(frozen=True)
class SelectionPath:
    """Piecewise-constant map ``K -> selected model``.

    ``breakpoints[i]`` is the left end of segment ``i``; segment ``i`` is
    ``[breakpoints[i], breakpoints[i+1])`` and the last one is unbounded.
    """

    breakpoints: tuple[float, ...]
    models: tuple[str, ...]
    f: tuple[float, ...]
    g: tuple[float, ...]
    dims: tuple[int, ...]
    evaluations: int = field(default=0, compare=False)

    @property
    def i_max(self) -> int:
        return len(self.models) - 1

    @property
    def knots(self) -> tuple[float, ...]:
        """Breakpoints including the trailing ``+inf``."""
        return self.breakpoints + (math.inf,)

    def index_at(self, K: float) -> int:
        if K < 0:
            raise ValueError("K must be nonnegative")
        return bisect.bisect_right(self.breakpoints, K) - 1

    def model_at(self, K: float) -> str:
        return self.models[self.index_at(K)]

    def dim_at(self, K: float) -> int:
        return self.dims[self.index_at(K)]

    def check(self, n_models: int | None = None) -> None:
        """Raise ``AssertionError`` if a structural invariant is violated."""
        k = self.breakpoints
        assert len(k) == len(self.models) == len(self.f) == len(self.g) == len(self.dims)
        assert len(k) >= 1 and k[0] == 0.0
        assert all(a < b for a, b in zip(k, k[1:])), "breakpoints not increasing"
        assert all(a > b for a, b in zip(self.g, self.g[1:])), "g not decreasing along path"
        assert all(a < b for a, b in zip(self.f, self.f[1:])), "f not increasing along path"
        if n_models is not None:
            assert self.i_max <= n_models - 1


@dataclass(frozen=True)
class CalibrationReport:
    k_min_thresh: float
    k_min_maxjump: float
    k_min_slope: float | None
    selected_thresh: str
    selected_maxjump: str
    agreement: bool
    warning: str | None = None

    def __post_init__(self):
        if self.agreement != (self.selected_thresh == self.selected_maxjump):
            raise ValueError("agreement flag inconsistent with selections")
        if (self.warning is None) != self.agreement:
            raise ValueError("a warning is required exactly when selections disagree")
