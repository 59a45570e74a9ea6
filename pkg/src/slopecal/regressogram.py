"""Regressogram fitting, empirical risk and simulation-side oracle quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .quadrature import integrate
from .types import FittedRegressogram, PartitionModel, Sample

ArrayFunc = Callable[[np.ndarray], np.ndarray]


class InadmissibleModelError(ValueError):
    """Raised when a model with an empty cell is scored."""


def _vectorised(func: ArrayFunc) -> ArrayFunc:
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(func(x), dtype=float), x.shape)

    return wrapped


@dataclass(frozen=True, eq=False)
class TrueModelSpec:
    """Data-generating law ``Y = s(X) + sigma(X) * eps``.

    ``X`` is uniform on ``[lo, hi]`` and ``eps`` is standard normal. ``s`` and
    ``sigma`` must accept numpy arrays; constants are broadcast.
    """

    s: ArrayFunc
    sigma: ArrayFunc
    lo: float = 0.0
    hi: float = 1.0
    name: str = "custom"
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "s", _vectorised(self.s))
        object.__setattr__(self, "sigma", _vectorised(self.sigma))
        probe = self.sigma(np.linspace(self.lo, self.hi, 101))
        if np.any(probe < 0):
            raise ValueError("noise level sigma(x) must be nonnegative")

    @property
    def density(self) -> float:
        return 1.0 / (self.hi - self.lo)


def sine_truth() -> TrueModelSpec:
    """``s(x) = sin(pi x)``, ``sigma = 1``, uniform design on [0, 1]."""
    return TrueModelSpec(s=lambda x: np.sin(np.pi * x), sigma=lambda x: 1.0, name="fig1")


_EXPR_NAMES = {
    name: getattr(np, name)
    for name in (
        "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "where", "minimum",
        "maximum", "sinh", "cosh", "tanh", "arctan", "floor", "heaviside",
    )
}
_EXPR_NAMES.update(pi=np.pi, e=np.e)


def _compile_expr(expr: str) -> ArrayFunc:
    code = compile(str(expr), "<truth>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMES and name != "x":
            raise ValueError(f"unknown name {name!r} in expression {expr!r}")

    def func(x):
        return eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "x": x})

    return func


def truth_from_dict(spec: dict) -> TrueModelSpec:
    """Build a truth from ``{"s": "sin(pi*x)", "sigma": "1", "lo": 0, "hi": 1}``.

    Expressions are numpy expressions in ``x``.
    """
    try:
        s_expr, sigma_expr = spec["s"], spec["sigma"]
    except KeyError as exc:
        raise ValueError(f"truth spec is missing {exc.args[0]!r}") from None
    if str(spec.get("x_law", "uniform")) != "uniform" or str(spec.get("noise_law", "normal")) != "normal":
        raise ValueError("only a uniform design and standard normal noise are supported")
    truth = TrueModelSpec(
        s=_compile_expr(s_expr),
        sigma=_compile_expr(sigma_expr),
        lo=float(spec.get("lo", 0.0)),
        hi=float(spec.get("hi", 1.0)),
        name=str(spec.get("name", "custom")),
    )
    # evaluate once so a bad expression fails here, not mid-run
    grid = np.linspace(truth.lo, truth.hi, 11)
    if not (np.all(np.isfinite(truth.s(grid))) and np.all(np.isfinite(truth.sigma(grid)))):
        raise ValueError("truth functions must be finite on the feature interval")
    return truth


def generate(truth: TrueModelSpec, n: int, seed=None) -> Sample:
    """Draw ``n`` i.i.d. pairs. ``seed`` may be an int, SeedSequence or Generator."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    xs = rng.uniform(truth.lo, truth.hi, size=n)
    eps = rng.standard_normal(n)
    ys = truth.s(xs) + truth.sigma(xs) * eps
    return Sample(xs, ys, truth.lo, truth.hi)


def fit(sample: Sample, model: PartitionModel, use_numba=None) -> FittedRegressogram:
    idx = model.locate(sample.xs)
    counts, beta_hat = _kernels.cell_means(idx, sample.ys, model.dim, use_numba)
    filled = counts > 0
    return FittedRegressogram(
        model=model,
        beta_hat=beta_hat,
        p_hat=counts / sample.n,
        counts=counts,
        admissible=bool(filled.all()),
    )


def empirical_risk(fitted: FittedRegressogram, sample: Sample) -> float:
    """Mean squared residual of the fit on the sample it was fitted on."""
    if not fitted.admissible:
        raise InadmissibleModelError(f"model {fitted.model.id!r} has an empty cell and cannot be scored")
    resid = fitted.predict(sample.xs) - sample.ys
    return float(np.dot(resid, resid) / sample.n)


@dataclass(frozen=True)
class CellMoments:
    """Population quantities of one partition under a given truth.

    ``p`` cell probabilities, ``beta`` conditional means of ``s``, ``bias``
    per-cell contributions to the approximation error and ``noise`` the
    conditional means of ``sigma^2``.
    """

    p: np.ndarray
    beta: np.ndarray
    bias: np.ndarray
    noise: np.ndarray

    @property
    def approx_error(self) -> float:
        return float(math.fsum(self.bias))

    @property
    def sigma2_cell(self) -> np.ndarray:
        """``E[(Y - s_m(X))^2 | X in I]`` per cell."""
        return self.bias / self.p + self.noise


def cell_moments(truth: TrueModelSpec, model: PartitionModel, tol: float = 1e-10) -> CellMoments:
    """Quadrature of the per-cell population moments (cached on ``truth``)."""
    key = model.edges.tobytes()
    hit = truth._cache.get(key)
    if hit is not None:
        return hit
    if model.edges[0] < truth.lo or model.edges[-1] > truth.hi:
        raise ValueError(f"model {model.id!r} extends beyond the design support")
    dens = truth.density
    dim = model.dim
    p = np.empty(dim)
    beta = np.empty(dim)
    bias = np.empty(dim)
    noise = np.empty(dim)
    for k, (a, b) in enumerate(model.cells):
        label = f"{model.id}[{k}]"
        p[k] = (b - a) * dens
        beta[k] = integrate(truth.s, a, b, tol, label=label) * dens / p[k]
        bk = beta[k]
        bias[k] = integrate(lambda x: (truth.s(x) - bk) ** 2, a, b, tol, label=label) * dens
        noise[k] = integrate(lambda x: truth.sigma(x) ** 2, a, b, tol, label=label) * dens / p[k]
    out = CellMoments(p=p, beta=beta, bias=bias, noise=noise)
    truth._cache[key] = out
    return out


@dataclass(frozen=True)
class OracleQuantities:
    """Risk decomposition of one fitted model against the known truth.

    ``delta`` is the uncentered fluctuation ``(P_n - P) gamma(s_m)``, so that
    ``penid == p1 + p2 - delta``; ``delta_centered`` subtracts the same
    fluctuation of ``gamma(s)`` and only differs from ``delta`` by a
    model-independent constant.
    """

    p1: float
    p2: float
    delta: float
    delta_centered: float
    excess_loss_estimator: float
    excess_loss_best: float
    penid: float


def excess_loss(fitted: FittedRegressogram, moments: CellMoments) -> float:
    """``l(s, s_hat_m)`` with the empty-cell convention."""
    filled = fitted.counts > 0
    est = moments.p[filled] * (moments.beta[filled] - fitted.beta_hat[filled]) ** 2
    empty = moments.p[~filled] * moments.sigma2_cell[~filled]
    return moments.approx_error + float(est.sum() + empty.sum())


def oracle_quantities(
    fitted: FittedRegressogram,
    sample: Sample,
    truth: TrueModelSpec,
    moments: CellMoments | None = None,
) -> OracleQuantities:
    if moments is None:
        moments = cell_moments(truth, fitted.model)
    idx = fitted.model.locate(sample.xs)
    filled = fitted.counts > 0

    p1 = float(
        np.sum(moments.p[filled] * (moments.beta[filled] - fitted.beta_hat[filled]) ** 2)
        + np.sum(moments.p[~filled] * moments.sigma2_cell[~filled])
    )
    s_at = truth.s(sample.xs)
    sm_at = moments.beta[idx]
    shat_at = fitted.beta_hat[idx]
    y = sample.ys
    loss_sm = (sm_at - y) ** 2
    loss_shat = (shat_at - y) ** 2
    loss_s = (s_at - y) ** 2

    p2 = float(np.mean(loss_sm - loss_shat))
    approx = moments.approx_error
    noise_level = float(np.dot(moments.p, moments.noise))  # E[sigma(X)^2] = P gamma(s)
    risk_sm = approx + noise_level
    delta = float(np.mean(loss_sm)) - risk_sm
    delta_centered = float(np.mean(loss_sm - loss_s)) - approx
    loss_est = approx + p1
    penid = (loss_est + noise_level) - float(np.mean(loss_shat))
    return OracleQuantities(
        p1=p1,
        p2=p2,
        delta=delta,
        delta_centered=delta_centered,
        excess_loss_estimator=loss_est,
        excess_loss_best=approx,
        penid=penid,
    )
