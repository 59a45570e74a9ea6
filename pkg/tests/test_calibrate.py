import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from slopecal.calibrate import (
    CalibrationError,
    DegenerateThresholdWarning,
    NoJumpError,
    ThresholdConfig,
    ThresholdNotReachedError,
    calibrate,
    default_slope_window,
    kmin_maxjump,
    kmin_slope,
    kmin_thresh,
)
from slopecal.path import brute_force_argmin, compute_path
from slopecal.regressogram import empirical_risk, sine_truth, fit, generate
from slopecal.types import ModelScore, SelectionPath, regular_models


def _path(knots, dims):
    k = len(knots)
    return SelectionPath(
        breakpoints=tuple(knots),
        models=tuple(f"m{d}" for d in dims),
        f=tuple(float(i) for i in range(k)),
        g=tuple(float(d) for d in dims),
        dims=tuple(dims),
    )


def _line_scores(slope, dims, intercept=1.0):
    return [ModelScore(f"m{d:03d}", intercept - slope * d, float(d), d) for d in dims]


def sine_scores(n, seed, dims=None):
    sample = generate(sine_truth(), n, seed)
    dims = dims or range(1, int(n / math.log(n)) + 1)
    scores = []
    for model in regular_models(dims):
        fitted = fit(sample, model)
        if fitted.admissible:
            scores.append(ModelScore(model.id, empirical_risk(fitted, sample), float(model.dim), model.dim))
    return scores


def test_threshold_example():
    path = _path([0.0, 0.004, 0.006], [100, 40, 12])
    assert kmin_thresh(path, ThresholdConfig(19)) == 0.006


def test_threshold_met_at_zero_warns():
    path = _path([0.0, 0.5], [10, 2])
    with pytest.warns(DegenerateThresholdWarning):
        assert kmin_thresh(path, ThresholdConfig(19)) == 0.0


def test_threshold_never_reached():
    with pytest.raises(ThresholdNotReachedError):
        kmin_thresh(_path([0.0, 1.0], [50, 30]), ThresholdConfig(19))


def test_threshold_config_validation():
    with pytest.raises(ValueError):
        ThresholdConfig(0)
    with pytest.raises(ValueError):
        ThresholdConfig(40).validate([1, 2, 37])


def test_maxjump_picks_largest_drop():
    path = _path([0.0, 0.1, 0.2, 0.3], [100, 95, 40, 12])
    assert kmin_maxjump(path) == 0.2


def test_maxjump_single_jump_and_ties():
    assert kmin_maxjump(_path([0.0, 0.7], [30, 1])) == 0.7
    # equal drops resolve to the smallest K
    assert kmin_maxjump(_path([0.0, 0.1, 0.2], [30, 20, 10])) == 0.1


def test_maxjump_needs_a_jump():
    with pytest.raises(NoJumpError):
        kmin_maxjump(_path([0.0], [5]))


@pytest.mark.parametrize("slope", [1.0, 0.005])
def test_slope_recovers_exact_line(slope):
    scores = _line_scores(slope, range(1, 30))
    assert kmin_slope(scores, (1, math.inf)) == pytest.approx(slope, rel=1e-12)


def test_slope_window_validation():
    scores = _line_scores(1.0, range(1, 30))
    with pytest.raises(CalibrationError):
        kmin_slope(scores, (100, 200))


@pytest.mark.parametrize("seed", range(5))
def test_slope_on_sine_is_near_noise_level(seed):
    n = 200
    scores = sine_scores(n, seed)
    k = kmin_slope(scores, default_slope_window(n))
    # E[P_n gamma(s_hat_m)] drops by sigma^2 / n per dimension once the bias is negligible
    assert 0.5 <= k * n <= 2.0


def test_clear_single_jump_agrees():
    # path: d40 -> d5 at K=0.1 -> d1 at K=1
    scores = [
        ModelScore("d40", 0.0, 40.0, 40),
        ModelScore("d5", 3.5, 5.0, 5),
        ModelScore("d1", 7.5, 1.0, 1),
    ]
    report = calibrate(scores, ThresholdConfig(19))
    assert report.k_min_thresh == report.k_min_maxjump == pytest.approx(0.1)
    assert report.agreement and report.warning is None
    assert report.selected_thresh == report.selected_maxjump == "d5"


def test_two_distant_jumps_disagree():
    # threshold crossed by a drop of 1 at K=0.1, largest drop far out at K=10
    scores = [
        ModelScore("d20", 0.0, 20.0, 20),
        ModelScore("d19", 0.1, 19.0, 19),
        ModelScore("d1", 180.1, 1.0, 1),
    ]
    report = calibrate(scores, ThresholdConfig(19))
    assert report.k_min_thresh == pytest.approx(0.1)
    assert report.k_min_maxjump == pytest.approx(10.0)
    assert (report.selected_thresh, report.selected_maxjump) == ("d19", "d1")
    assert not report.agreement
    assert "slopecal path" in report.warning


def test_calibrate_reports_slope_when_window_given():
    scores = _line_scores(0.01, range(1, 40))
    report = calibrate(scores, ThresholdConfig(19), slope_window=(5, math.inf))
    assert report.k_min_slope == pytest.approx(0.01, rel=1e-12)
    assert calibrate(scores, ThresholdConfig(19)).k_min_slope is None


score_sets = st.lists(
    st.tuples(st.floats(-100, 100), st.integers(1, 40)),
    min_size=2,
    max_size=30,
    unique_by=lambda t: t[1],
).map(lambda rows: [ModelScore(f"m{d:03d}", f, float(d), d) for f, d in rows])


def _report(scores, d=19):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateThresholdWarning)
        return calibrate(scores, ThresholdConfig(d))


def _calibrable(scores, d=19):
    path = compute_path(scores)
    return path.i_max > 0 and min(path.dims) <= d


@given(score_sets, st.integers(-20, 20))
def test_power_of_two_g_scaling_is_exact(scores, e):
    assume(_calibrable(scores))
    c = 2.0**e
    scaled = [ModelScore(s.model_id, s.f, s.g * c, s.dim) for s in scores]
    a, b = _report(scores), _report(scaled)
    assert b.k_min_thresh == a.k_min_thresh / c
    assert b.k_min_maxjump == a.k_min_maxjump / c
    assert (b.selected_thresh, b.selected_maxjump) == (a.selected_thresh, a.selected_maxjump)


@given(score_sets, st.floats(0.01, 100))
def test_g_scaling(scores, c):
    assume(_calibrable(scores))
    scaled = [ModelScore(s.model_id, s.f, s.g * c, s.dim) for s in scores]
    a, b = _report(scores), _report(scaled)
    assert b.k_min_thresh == pytest.approx(a.k_min_thresh / c, rel=1e-12)
    assert b.k_min_maxjump == pytest.approx(a.k_min_maxjump / c, rel=1e-12)
    assert compute_path(scaled).models == compute_path(scores).models


dyadic_sets = st.lists(
    st.tuples(st.integers(-6400, 6400), st.integers(1, 40)),
    min_size=2,
    max_size=30,
    unique_by=lambda t: t[1],
).map(lambda rows: [ModelScore(f"m{d:03d}", f / 64, float(d), d) for f, d in rows])


@given(dyadic_sets, st.integers(-64, 64))
def test_f_shift_preserves_everything(scores, shift):
    # dyadic risks make the shift exact in floating point
    assume(_calibrable(scores))
    shifted = [ModelScore(s.model_id, s.f + shift, s.g, s.dim) for s in scores]
    assert compute_path(shifted).breakpoints == compute_path(scores).breakpoints
    assert _report(shifted) == _report(scores)


@pytest.mark.parametrize("seed", range(5))
def test_selection_matches_brute_force(seed):
    scores = sine_scores(200, seed)
    report = _report(scores)
    assert report.selected_thresh == brute_force_argmin(scores, 2 * report.k_min_thresh)
    assert report.selected_maxjump == brute_force_argmin(scores, 2 * report.k_min_maxjump)


def test_one_model_collection_has_no_jump():
    with pytest.raises(NoJumpError):
        calibrate([ModelScore("only", 1.0, 1.0, 1)], ThresholdConfig(1))


def test_sine_threshold_lands_on_the_big_jump():
    report = _report(sine_scores(200, 0))
    assert report.k_min_thresh == report.k_min_maxjump
