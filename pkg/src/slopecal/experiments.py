"""Monte-Carlo harness: oracle-ratio benchmark, dimension jump, E[p1]/E[p2].

Replicate ``i`` always draws from ``SeedSequence(seed).spawn(replicates)[i]``
and results are aggregated in replicate order, so outputs depend only on
the configuration, never on ``workers``.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .calibrate import DegenerateThresholdWarning, NoJumpError, ThresholdConfig, calibrate
from .path import compute_path
from .penalty import PenaltyShape, shape_known
from .regressogram import (
    TrueModelSpec,
    cell_moments,
    empirical_risk,
    excess_loss,
    sine_truth,
    fit,
    generate,
    oracle_quantities,
)
from .types import ModelScore, PartitionModel, default_d_thresh, default_max_dim, regular_models


@dataclass(frozen=True)
class BenchmarkConfig:
    """Simulation setup. ``dims=None`` means ``1 .. floor(n / ln n)``.

    ``extra_dims`` appends a few large regular models to the collection
    (sometimes useful to sharpen the maximal jump); empty by default.
    """

    n: int = 200
    replicates: int = 1000
    truth: TrueModelSpec = field(default_factory=sine_truth)
    dims: tuple[int, ...] | None = None
    d_thresh: int | None = None
    seed: int = 0
    extra_dims: tuple[int, ...] = ()
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.dims is not None and (len(self.dims) == 0 or min(self.dims) < 1):
            raise ValueError("dims must be a nonempty list of positive integers")

    @property
    def model_dims(self) -> tuple[int, ...]:
        base = self.dims if self.dims is not None else range(1, default_max_dim(self.n) + 1)
        return tuple(sorted(set(int(d) for d in base) | set(int(d) for d in self.extra_dims)))

    @property
    def threshold(self) -> int:
        return int(self.d_thresh) if self.d_thresh is not None else default_d_thresh(self.n)

    def models(self) -> list[PartitionModel]:
        return regular_models(self.model_dims, self.truth.lo, self.truth.hi)


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float


def ratio_estimate(num: np.ndarray, den: np.ndarray) -> Estimate:
    """``mean(num) / mean(den)`` with a delta-method standard error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    mden = den.mean()
    if not mden > 0:
        return Estimate(math.nan, math.nan)
    r = num.mean() / mden
    if num.size < 2:
        return Estimate(float(r), math.nan)
    resid = num - r * den
    return Estimate(float(r), float(resid.std(ddof=1) / math.sqrt(num.size) / mden))


def _seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


_TASK: Callable | None = None


def _init_worker(task):
    global _TASK
    _TASK = task


def _call_task(i):
    return _TASK(i)


def _run(task: Callable[[int], dict], count: int, workers: int) -> list:
    if workers <= 1 or count == 1:
        return [task(i) for i in range(count)]
    # fork start method: the task closure is inherited, never pickled
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(workers, initializer=_init_worker, initargs=(task,)) as pool:
        return pool.map(_call_task, range(count), chunksize=max(1, count // (4 * workers)))


def _score_sample(sample, models, g_values=None):
    """Fit every model; returns (fits, scores) restricted to admissible models."""
    fits, scores = [], []
    for j, model in enumerate(models):
        fitted = fit(sample, model)
        if not fitted.admissible:
            continue
        g = float(model.dim) if g_values is None else float(g_values[j])
        fits.append(fitted)
        scores.append(ModelScore(model.id, empirical_risk(fitted, sample), g, model.dim))
    return fits, scores


def mallows_variance(fits, sample) -> float:
    """Residual mean square of the largest admissible model with ``D < n``."""
    for fitted in sorted(fits, key=lambda ft: ft.model.dim, reverse=True):
        d = fitted.model.dim
        if d < sample.n:
            resid = fitted.predict(sample.xs) - sample.ys
            return float(np.dot(resid, resid) / (sample.n - d))
    return float(np.var(sample.ys, ddof=1))


def _benchmark_replicate(cfg: BenchmarkConfig, models, moments, seed_seq, index: int) -> dict:
    sample = generate(cfg.truth, cfg.n, np.random.default_rng(seed_seq))
    fits, scores = _score_sample(sample, models)
    rec = {"replicate": index, "n_admissible": len(fits), "failed": not fits}
    if not fits:
        return rec
    losses = {ft.model.id: excess_loss(ft, moments[ft.model.id]) for ft in fits}
    dims = {ft.model.id: ft.model.dim for ft in fits}
    path = compute_path(scores)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateThresholdWarning)
        try:
            report = calibrate(scores, ThresholdConfig(cfg.threshold), path=path)
            k_thresh, k_jump = report.k_min_thresh, report.k_min_maxjump
            sel_thresh, sel_jump = report.selected_thresh, report.selected_maxjump
            no_jump = False
        except NoJumpError:
            # constant path: every K selects the same model
            k_thresh = k_jump = 0.0
            sel_thresh = sel_jump = path.models[0]
            no_jump = True
    sigma2 = mallows_variance(fits, sample)
    sel_mallows = path.model_at(2.0 * sigma2 / sample.n)
    if k_thresh == k_jump:
        case = 1
    elif sel_thresh == sel_jump:
        case = 2
    else:
        case = 3
    rec.update(
        k_min_thresh=k_thresh,
        k_min_maxjump=k_jump,
        selected_thresh=sel_thresh,
        selected_maxjump=sel_jump,
        selected_mallows=sel_mallows,
        dim_thresh=dims[sel_thresh],
        dim_maxjump=dims[sel_jump],
        dim_mallows=dims[sel_mallows],
        sigma2_hat=sigma2,
        loss_thresh=losses[sel_thresh],
        loss_maxjump=losses[sel_jump],
        loss_mallows=losses[sel_mallows],
        loss_oracle=min(losses.values()),
        dim_oracle=dims[min(losses, key=losses.get)],
        case=case,
        degenerate_threshold=any(issubclass(w.category, DegenerateThresholdWarning) for w in caught),
        no_jump=no_jump,
        path_length=path.i_max + 1,
    )
    return rec


@dataclass
class BenchmarkResult:
    c_or_thresh: Estimate
    c_or_maxjump: Estimate
    c_or_mallows: Estimate
    case_freqs: dict[str, float]
    records: list[dict]
    n_failed: int
    c_or_defined: bool
    config: dict = field(default_factory=dict)

    @property
    def agreement_freq(self) -> float:
        return self.case_freqs["case1"] + self.case_freqs["case2"]

    def summary(self) -> dict:
        return {
            "c_or_thresh": asdict(self.c_or_thresh),
            "c_or_maxjump": asdict(self.c_or_maxjump),
            "c_or_mallows": asdict(self.c_or_mallows),
            "case_freqs": self.case_freqs,
            "agreement_freq": self.agreement_freq,
            "n_failed": self.n_failed,
            "c_or_defined": self.c_or_defined,
            "replicates": len(self.records),
            "config": self.config,
        }

    def write(self, csv_path: str | Path | None = None, json_path: str | Path | None = None) -> None:
        if csv_path is not None:
            write_records_csv(self.records, csv_path)
        if json_path is not None:
            Path(json_path).write_text(json.dumps(_jsonable(self.summary()), indent=2, sort_keys=True) + "\n")


_RECORD_COLUMNS = (
    "replicate", "failed", "n_admissible", "case", "k_min_thresh", "k_min_maxjump",
    "selected_thresh", "selected_maxjump", "selected_mallows", "dim_thresh",
    "dim_maxjump", "dim_mallows", "dim_oracle", "sigma2_hat", "loss_thresh",
    "loss_maxjump", "loss_mallows", "loss_oracle", "degenerate_threshold",
    "no_jump", "path_length",
)


def write_records_csv(records: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_RECORD_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow({k: _fmt(rec.get(k, "")) for k in _RECORD_COLUMNS})


def _fmt(value):
    if isinstance(value, float):
        return repr(float(value))  # np.float64 reprs as "np.float64(...)"
    return value


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run_benchmark(cfg: BenchmarkConfig) -> BenchmarkResult:
    """Estimate the oracle ratio of the threshold, max-jump and Mallows selections."""
    models = cfg.models()
    moments = {m.id: cell_moments(cfg.truth, m) for m in models}
    seeds = _seeds(cfg.seed, cfg.replicates)

    def task(i):
        return _benchmark_replicate(cfg, models, moments, seeds[i], i)

    records = _run(task, cfg.replicates, cfg.workers)
    ok = [r for r in records if not r["failed"]]
    n_failed = len(records) - len(ok)
    if ok:
        den = np.array([r["loss_oracle"] for r in ok])
        est = {
            key: ratio_estimate(np.array([r[f"loss_{key}"] for r in ok]), den)
            for key in ("thresh", "maxjump", "mallows")
        }
        cases = np.array([r["case"] for r in ok])
        freqs = {f"case{c}": float(np.mean(cases == c)) for c in (1, 2, 3)}
        defined = bool(den.mean() > 0)
    else:
        nan = Estimate(math.nan, math.nan)
        est = {"thresh": nan, "maxjump": nan, "mallows": nan}
        freqs = {"case1": math.nan, "case2": math.nan, "case3": math.nan}
        defined = False
    return BenchmarkResult(
        c_or_thresh=est["thresh"],
        c_or_maxjump=est["maxjump"],
        c_or_mallows=est["mallows"],
        case_freqs=freqs,
        records=records,
        n_failed=n_failed,
        c_or_defined=defined,
        config={
            "n": cfg.n,
            "replicates": cfg.replicates,
            "truth": cfg.truth.name,
            "dims": list(cfg.model_dims),
            "d_thresh": cfg.threshold,
            "seed": cfg.seed,
        },
    )


@dataclass
class DimensionJumpReport:
    Ks: tuple[float, ...]
    dims: np.ndarray  # (replicates, len(Ks))
    collection_dims: tuple[int, ...]
    low_bound: float
    high_bound: float
    frac_both: float

    def median(self, K: float) -> float:
        return float(np.median(self.dims[:, self.Ks.index(K)]))


def verify_dimension_jump(
    cfg: BenchmarkConfig,
    shape: PenaltyShape | None = None,
    Ks: Sequence[float] = (0.5, 0.75, 1.25, 2.0),
    c_low: float = 1.0,
    eta: float = 0.1,
) -> DimensionJumpReport:
    """Selected dimension around the minimal multiplier.

    ``shape`` is the known-variance shape (an estimate of the expected ideal
    penalty). The minimal penalty is half of it, so the multipliers ``Ks``
    are applied to ``shape / 2`` and the jump is expected around ``K = 1``.
    ``frac_both`` is the fraction of replicates with
    ``D(K_first) >= c_low n / ln(n)^2`` and ``D(K_last) <= n^(1 - eta)``.
    """
    models = cfg.models()
    if shape is None:
        shape = shape_known(cfg.truth, models, cfg.n)
    if len(shape) != len(models):
        raise ValueError("penalty shape does not match the model collection")
    minimal = shape.values / 2.0
    Ks = tuple(float(k) for k in Ks)
    seeds = _seeds(cfg.seed, cfg.replicates)

    def task(i):
        sample = generate(cfg.truth, cfg.n, np.random.default_rng(seeds[i]))
        _, scores = _score_sample(sample, models, minimal)
        if not scores:
            return [math.nan] * len(Ks)
        path = compute_path(scores)
        return [path.dim_at(k) for k in Ks]

    dims = np.array(_run(task, cfg.replicates, cfg.workers), dtype=float)
    low = c_low * cfg.n / math.log(cfg.n) ** 2
    high = cfg.n ** (1.0 - eta)
    both = (dims[:, 0] >= low) & (dims[:, -1] <= high)
    return DimensionJumpReport(
        Ks=Ks,
        dims=dims,
        collection_dims=cfg.model_dims,
        low_bound=low,
        high_bound=high,
        frac_both=float(np.mean(both)),
    )


def p1_p2_bracket(B: float) -> tuple[float, float]:
    """Bounds on ``E[p1] / E[p2]`` for a regressogram with ``min n p_lambda >= B``."""
    lower = (1.0 - math.exp(-B)) ** 2
    b1 = max(B, 1.0)
    upper = min(2.0, 1.0 + 5.1 * B ** -0.25) + b1 * math.exp(-b1)
    return lower, upper


@dataclass
class P1P2Report:
    mean_p1: Estimate
    mean_p2: Estimate
    ratio: Estimate
    B: float
    bracket: tuple[float, float]
    skipped: bool

    @property
    def within_bracket(self) -> bool:
        return self.skipped or self.bracket[0] <= self.ratio.value <= self.bracket[1]


def verify_p1_p2(cfg: BenchmarkConfig, model: PartitionModel, noise_floor: float = 1e-14) -> P1P2Report:
    """Monte-Carlo estimates of ``E[p1]``, ``E[p2]`` and their ratio for one model."""
    moments = cell_moments(cfg.truth, model)
    B = float(cfg.n * moments.p.min())
    if B < math.log(cfg.n):
        warnings.warn(f"min n p_lambda = {B:.3g} is below ln(n); the bracket is loose", stacklevel=2)
    seeds = _seeds(cfg.seed, cfg.replicates)

    def task(i):
        sample = generate(cfg.truth, cfg.n, np.random.default_rng(seeds[i]))
        oq = oracle_quantities(fit(sample, model), sample, cfg.truth, moments)
        return oq.p1, oq.p2

    vals = np.array(_run(task, cfg.replicates, cfg.workers), dtype=float)
    p1, p2 = vals[:, 0], vals[:, 1]
    k = p1.size
    se = (lambda v: float(v.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan)
    skipped = bool(p2.mean() <= noise_floor and p1.mean() <= noise_floor)
    ratio = Estimate(math.nan, math.nan) if skipped else ratio_estimate(p1, p2)
    return P1P2Report(
        mean_p1=Estimate(float(p1.mean()), se(p1)),
        mean_p2=Estimate(float(p2.mean()), se(p2)),
        ratio=ratio,
        B=B,
        bracket=p1_p2_bracket(B),
        skipped=skipped,
    )
