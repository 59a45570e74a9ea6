import numpy as np
import pytest

from slopecal import _kernels
from slopecal.penalty import PenaltyShape, fallback_variance, shape_dimension, shape_known, shape_plugin
from slopecal.regressogram import TrueModelSpec, cell_moments, sine_truth, fit, generate
from slopecal.types import PartitionModel, Sample, default_max_dim, regular_models

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable or disabled")

HALVES = PartitionModel("halves", [0.0, 0.5, 1.0])


def test_dimension_shape_is_dimension():
    models = regular_models(range(1, default_max_dim(200) + 1))
    shape = shape_dimension(models)
    assert shape.kind == "dimension"
    assert shape.values.tolist() == list(range(1, 38))


def test_shape_rejects_negative_values():
    with pytest.raises(ValueError):
        PenaltyShape("dimension", [1.0, -1.0])


def test_plugin_two_cell_toy():
    # within-cell unbiased variances: (1-3)^2/2 = 2 and (2-4)^2/2 = 2
    s = Sample([0.1, 0.2, 0.6, 0.8], [1, 3, 2, 4])
    shape = shape_plugin(s, [HALVES])
    assert shape.values[0] == pytest.approx(2.0 / 4 * (2.0 + 2.0), rel=1e-15)


def test_plugin_unit_variance_toy():
    s = Sample([0.1, 0.2, 0.6, 0.8], [0, np.sqrt(2), 0, np.sqrt(2)])
    assert shape_plugin(s, [HALVES]).values[0] == pytest.approx(1.0, rel=1e-12)


def test_plugin_zero_noise_is_zero():
    t = TrueModelSpec(s=lambda x: np.where(x < 0.5, 1.0, 2.0), sigma=lambda x: 0.0)
    s = generate(t, 50, 0)
    assert shape_plugin(s, [HALVES]).values[0] == 0.0


def test_plugin_falls_back_on_thin_cells():
    s = Sample([0.1, 0.2, 0.3, 0.9], [1.0, 2.0, 3.0, 10.0])
    models = [PartitionModel.regular(1), HALVES]
    fb = fallback_variance(s, models)
    # finest admissible model with D < n is HALVES: residuals (-1, 0, 1, 0) over n - D = 2
    assert fb == pytest.approx(1.0)
    expected = 2.0 / 4 * (1.0 + fb)
    assert shape_plugin(s, models).values[1] == pytest.approx(expected, rel=1e-12)


def test_known_shape_homoscedastic():
    models = regular_models([1, 5, 20])
    shape = shape_known(sine_truth(), models, n=200)
    np.testing.assert_allclose(shape.values, [2 * d / 200 for d in (1, 5, 20)], rtol=1e-12)


def test_known_shape_linear_sigma():
    t = TrueModelSpec(s=lambda x: 0.0 * x, sigma=lambda x: x)
    # one cell: E[X^2] = 1/3
    shape = shape_known(t, [PartitionModel.regular(1)], n=10)
    assert shape.values[0] == pytest.approx(2 / 30, rel=1e-12)


@pytest.mark.parametrize("n", [1000, 10000])
def test_plugin_converges_to_known(n):
    t = TrueModelSpec(s=lambda x: np.sin(np.pi * x), sigma=lambda x: 0.5 + x)
    models = regular_models([2, 5, 10])
    s = generate(t, n, 5)
    plug = shape_plugin(s, models).values
    # the within-cell variance of y also carries the spread of s inside the cell
    target = [2.0 / n * cell_moments(t, m).sigma2_cell.sum() for m in models]
    np.testing.assert_allclose(plug, target, rtol=10 / np.sqrt(n))
    known = shape_known(t, models, n).values
    assert np.all(plug >= known * (1 - 10 / np.sqrt(n)))


@needs_numba
def test_plugin_numba_and_numpy_agree(rng):
    s = generate(sine_truth(), 150, rng)
    models = regular_models(range(1, 40))
    a = shape_plugin(s, models, use_numba=True).values
    b = shape_plugin(s, models, use_numba=False).values
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_fallback_ignores_saturated_models():
    s = Sample([0.1, 0.6], [0.0, 2.0])
    # HALVES has D = n and is skipped; the single cell gives variance 2
    assert fallback_variance(s, [PartitionModel.regular(1), HALVES]) == pytest.approx(2.0)
    assert fit(s, HALVES).admissible


def test_plugin_worked_toy():
    # {0, 2} in cell 1 (unbiased variance 2) and {1, 1} in cell 2 (variance 0)
    s = Sample([0.1, 0.3, 0.6, 0.9], [0.0, 2.0, 1.0, 1.0])
    assert shape_plugin(s, [HALVES]).values[0] == 1.0


def test_dimension_shape_examples():
    assert shape_dimension(regular_models([1, 2, 5])).values.tolist() == [1.0, 2.0, 5.0]


def test_plugin_error_decreases_with_n():
    t = TrueModelSpec(s=lambda x: 0.0 * x, sigma=lambda x: 0.5 + x)
    model = [PartitionModel.regular(5)]
    errs = []
    for n in (1000, 10000):
        known = shape_known(t, model, n).values[0]
        rel = [abs(shape_plugin(generate(t, n, seed), model).values[0] / known - 1) for seed in range(10)]
        errs.append(np.mean(rel))
    assert errs[1] < errs[0]
