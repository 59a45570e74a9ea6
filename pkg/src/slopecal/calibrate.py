"""Minimal-penalty detection and selection at twice the minimal constant."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .path import compute_path
from .types import CalibrationReport, ModelScore, SelectionPath

DISAGREEMENT_WARNING = (
    "threshold and maximal-jump calibrations select different models "
    "({thresh!r} at K={k_thresh:.6g} vs {jump!r} at K={k_jump:.6g}); "
    "inspect the curve K -> D(m(K)) (e.g. with `slopecal path`) before trusting either choice"
)


class CalibrationError(ValueError):
    pass


class ThresholdNotReachedError(CalibrationError):
    pass


class NoJumpError(CalibrationError):
    pass


class DegenerateThresholdWarning(UserWarning):
    """The threshold holds on the first path segment, so the estimate is 0."""


@dataclass(frozen=True)
class ThresholdConfig:
    d_thresh: int

    def __post_init__(self):
        if int(self.d_thresh) != self.d_thresh or self.d_thresh < 1:
            raise ValueError("d_thresh must be a positive integer")

    def validate(self, dims: Sequence[int]) -> None:
        if self.d_thresh > max(dims):
            raise ValueError(f"d_thresh={self.d_thresh} exceeds the largest dimension {max(dims)}")


def _thresh_index(path: SelectionPath, d_thresh: int) -> int:
    for i, d in enumerate(path.dims):
        if d <= d_thresh:
            return i
    raise ThresholdNotReachedError(
        f"threshold never reached: no model on the path has dimension <= {d_thresh}"
    )


def kmin_thresh(path: SelectionPath, cfg: ThresholdConfig) -> float:
    """Smallest ``K`` at which the selected dimension is at most ``d_thresh``.

    Returns 0 and emits :class:`DegenerateThresholdWarning` when even
    ``K = 0`` already selects a small enough model.
    """
    i = _thresh_index(path, cfg.d_thresh)
    if i == 0:
        warnings.warn(
            f"dimension threshold {cfg.d_thresh} is met at K=0; the threshold is probably too large",
            DegenerateThresholdWarning,
            stacklevel=2,
        )
    return path.breakpoints[i]


def _jump_index(path: SelectionPath) -> int:
    if path.i_max == 0:
        raise NoJumpError("path has no jump: a single model is selected for every K")
    drops = np.array(path.dims[:-1]) - np.array(path.dims[1:])
    # argmax returns the first maximum, i.e. the smallest K on ties
    return int(np.argmax(drops)) + 1


def kmin_maxjump(path: SelectionPath) -> float:
    """Breakpoint at the largest drop in dimension between consecutive path models."""
    return path.breakpoints[_jump_index(path)]


def kmin_slope(scores: Sequence[ModelScore], window: tuple[float, float]) -> float:
    """Minus the least-squares slope of ``f`` against ``g`` over a dimension window.

    ``window = (lo, hi)`` keeps the models with ``lo <= D <= hi``.
    """
    lo, hi = window
    sel = [s for s in scores if lo <= s.dim <= hi]
    if len(sel) < 2:
        raise CalibrationError(f"slope estimate needs at least 2 models with dimension in [{lo}, {hi}]")
    g = np.array([s.g for s in sel])
    f = np.array([s.f for s in sel])
    gc = g - g.mean()
    denom = float(np.dot(gc, gc))
    if denom == 0.0:
        raise CalibrationError("penalty shape is constant over the slope window")
    return -float(np.dot(gc, f - f.mean()) / denom)


def default_slope_window(n: int) -> tuple[float, float]:
    return (max(math.floor(math.sqrt(n)), 3), math.inf)


def calibrate(
    scores: Sequence[ModelScore],
    cfg: ThresholdConfig,
    slope_window: tuple[float, float] | None = None,
    path: SelectionPath | None = None,
) -> CalibrationReport:
    """Run both jump detections and select the model at ``2 * K_min`` for each.

    ``path`` may be passed when it was already computed from ``scores``.
    """
    if path is None:
        path = compute_path(scores)
    k_jump = kmin_maxjump(path)
    i_thresh = _thresh_index(path, cfg.d_thresh)
    k_thresh = path.breakpoints[i_thresh]
    if i_thresh == 0:
        warnings.warn(
            f"dimension threshold {cfg.d_thresh} is met at K=0; the threshold is probably too large",
            DegenerateThresholdWarning,
            stacklevel=2,
        )
    sel_thresh = path.model_at(2.0 * k_thresh)
    sel_jump = path.model_at(2.0 * k_jump)
    agree = sel_thresh == sel_jump
    k_slope = kmin_slope(scores, slope_window) if slope_window is not None else None
    warning = None
    if not agree:
        warning = DISAGREEMENT_WARNING.format(
            thresh=sel_thresh, k_thresh=k_thresh, jump=sel_jump, k_jump=k_jump
        )
    return CalibrationReport(
        k_min_thresh=k_thresh,
        k_min_maxjump=k_jump,
        k_min_slope=k_slope,
        selected_thresh=sel_thresh,
        selected_maxjump=sel_jump,
        agreement=agree,
        warning=warning,
    )
