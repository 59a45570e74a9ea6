"""Penalty shapes ``g(m)`` for a collection of partition models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from . import _kernels
from .regressogram import TrueModelSpec, cell_moments, fit
from .types import PartitionModel, Sample

ShapeKind = Literal["dimension", "heteroscedastic_plugin", "heteroscedastic_known"]


@dataclass(frozen=True)
class PenaltyShape:
    kind: ShapeKind
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("penalty shape needs one value per model")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("penalty shape values must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


def shape_dimension(models: Sequence[PartitionModel]) -> PenaltyShape:
    return PenaltyShape("dimension", np.array([m.dim for m in models], dtype=float))


def fallback_variance(sample: Sample, models: Sequence[PartitionModel]) -> float:
    """Residual variance of the finest admissible model (divisor ``n - D``).

    Models with ``D >= n`` are skipped. Falls back to the sample variance of
    ``y`` when no model qualifies.
    """
    n = sample.n
    for model in sorted(models, key=lambda m: m.dim, reverse=True):
        if model.dim >= n:
            continue
        fitted = fit(sample, model)
        if fitted.admissible:
            resid = fitted.predict(sample.xs) - sample.ys
            return float(np.dot(resid, resid) / (n - model.dim))
    return float(np.var(sample.ys, ddof=1)) if n > 1 else 0.0


def shape_plugin(sample: Sample, models: Sequence[PartitionModel], use_numba=None) -> PenaltyShape:
    """``(2/n) * sum of within-cell variances of y`` for each model.

    Cells holding fewer than two observations use :func:`fallback_variance`.
    """
    n = sample.n
    fallback = None
    values = np.empty(len(models))
    for j, model in enumerate(models):
        fitted = fit(sample, model, use_numba)
        idx = model.locate(sample.xs)
        means = np.where(fitted.counts > 0, fitted.beta_hat, 0.0)
        var = _kernels.cell_variance(idx, sample.ys, fitted.counts, means, use_numba)
        thin = np.isnan(var)
        if thin.any():
            if fallback is None:
                fallback = fallback_variance(sample, models)
            var[thin] = fallback
        values[j] = 2.0 / n * var.sum()
    return PenaltyShape("heteroscedastic_plugin", values)


def shape_known(truth: TrueModelSpec, models: Sequence[PartitionModel], n: int) -> PenaltyShape:
    """``(2/n) * sum_lambda E[sigma(X)^2 | X in I_lambda]`` by quadrature."""
    values = np.array([2.0 / n * cell_moments(truth, m).noise.sum() for m in models])
    return PenaltyShape("heteroscedastic_known", values)
