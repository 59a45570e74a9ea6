"""Command-line front end.

    slopecal calibrate data.csv [--dims 1-37] [--shape dimension|plugin] [--d-thresh 19]
    slopecal path data.csv | --scores-file scores.csv
    slopecal benchmark --truth fig1 --n 200 --replicates 1000 --seed 7 --out results/fig1

Exit status: 0 success, 1 input error, 2 when the two calibrations disagree.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .calibrate import (
    CalibrationError,
    DegenerateThresholdWarning,
    ThresholdConfig,
    calibrate,
    default_slope_window,
)
from .experiments import BenchmarkConfig, _jsonable, run_benchmark
from .path import compute_path
from .penalty import shape_dimension, shape_plugin
from .regressogram import empirical_risk, sine_truth, fit, truth_from_dict
from .types import ModelScore, Sample, default_d_thresh, default_max_dim, regular_models

EXIT_OK, EXIT_INPUT, EXIT_DISAGREE = 0, 1, 2


class InputError(Exception):
    pass


def read_sample(path: str) -> Sample:
    """Read a ``x,y`` CSV (header required) with ``x`` in [0, 1]."""
    text = _read_text(path)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not any(c.strip() for c in rows[0]):
        raise InputError(f"{path}: empty file")
    header = [c.strip().lower() for c in rows[0]]
    if header != ["x", "y"]:
        raise InputError(f"{path}: row 1: expected header 'x,y', got {','.join(rows[0])!r}")
    xs, ys = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise InputError(f"{path}: row {lineno}: expected 2 fields, got {len(row)}")
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            raise InputError(f"{path}: row {lineno}: non-numeric value in {row!r}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InputError(f"{path}: row {lineno}: non-finite value")
        if not 0.0 <= x <= 1.0:
            raise InputError(f"{path}: row {lineno}: x = {row[0]} outside [0, 1]")
        xs.append(x)
        ys.append(y)
    if not xs:
        raise InputError(f"{path}: no observations")
    return Sample(xs, ys)


def read_scores(path: str) -> list[ModelScore]:
    """Read a scores CSV with columns ``model_id,f,g,D`` (any order, extra columns ignored)."""
    text = _read_text(path)
    reader = csv.DictReader(io.StringIO(text))
    needed = {"model_id", "f", "g", "D"}
    if reader.fieldnames is None or not needed <= {c.strip() for c in reader.fieldnames}:
        raise InputError(f"{path}: row 1: header must contain model_id,f,g,D")
    scores = []
    for lineno, row in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
        try:
            scores.append(ModelScore(row["model_id"], float(row["f"]), float(row["g"]), int(row["D"])))
        except (ValueError, TypeError) as exc:
            raise InputError(f"{path}: row {lineno}: {exc}") from None
    if not scores:
        raise InputError(f"{path}: no models")
    return scores


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def parse_dims(text: str) -> list[int]:
    """``"1-37"``, ``"1,2,4,8"`` or a mix such as ``"1-10,20,40"``."""
    dims: set[int] = set()
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                a, b = part.split("-", 1)
                dims.update(range(int(a), int(b) + 1))
            elif part:
                dims.add(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid dimension list {text!r}") from None
    if not dims or min(dims) < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive integers")
    return sorted(dims)


def parse_window(text: str) -> tuple[float, float]:
    """``"lo:hi"``; either side may be empty (``"14:"``)."""
    try:
        lo, hi = text.split(":", 1)
        return (float(lo) if lo.strip() else 0.0, float(hi) if hi.strip() else math.inf)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid window {text!r}, expected lo:hi") from None


def score_sample(sample: Sample, dims, shape: str) -> list[ModelScore]:
    models = regular_models(dims)
    if shape == "plugin":
        g = shape_plugin(sample, models).values
    else:
        g = shape_dimension(models).values
    scores = []
    for model, gm in zip(models, g):
        fitted = fit(sample, model)
        if fitted.admissible:
            scores.append(ModelScore(model.id, empirical_risk(fitted, sample), float(gm), model.dim))
    if not scores:
        raise InputError("no admissible model: every partition has an empty cell")
    return scores


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_calibrate(args) -> int:
    sample = read_sample(args.input)
    dims = args.dims or list(range(1, default_max_dim(sample.n) + 1))
    scores = score_sample(sample, dims, args.shape)
    d_thresh = args.d_thresh or default_d_thresh(sample.n)
    cfg = ThresholdConfig(d_thresh)
    cfg.validate([s.dim for s in scores])
    window = args.slope_window or default_slope_window(sample.n)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateThresholdWarning)
        try:
            report = calibrate(scores, cfg, slope_window=window)
        except CalibrationError:
            if args.slope_window is not None:
                raise
            report = calibrate(scores, cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _emit(json.dumps(_jsonable(asdict(report)), indent=2) + "\n", args.out)
    if not report.agreement:
        print(f"warning: {report.warning}", file=sys.stderr)
        return EXIT_DISAGREE
    return EXIT_OK


PATH_COLUMNS = ("K", "model_id", "D", "f", "g")


def cmd_path(args) -> int:
    if args.scores_file:
        scores = read_scores(args.scores_file)
    elif args.input:
        sample = read_sample(args.input)
        dims = args.dims or list(range(1, default_max_dim(sample.n) + 1))
        scores = score_sample(sample, dims, args.shape)
    else:
        raise InputError("give an input CSV or --scores-file")
    path = compute_path(scores)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PATH_COLUMNS)
    for k, mid, d, f, g in zip(path.breakpoints, path.models, path.dims, path.f, path.g):
        writer.writerow([repr(float(k)), mid, d, repr(float(f)), repr(float(g))])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def load_truth(name: str):
    if name == "fig1":
        return sine_truth()
    try:
        spec = json.loads(_read_text(name))
    except json.JSONDecodeError as exc:
        raise InputError(f"{name}: invalid JSON ({exc.msg})") from None
    if not isinstance(spec, dict):
        raise InputError(f"{name}: truth spec must be a JSON object")
    try:
        return truth_from_dict(spec)
    except (ValueError, SyntaxError) as exc:
        raise InputError(f"{name}: invalid truth spec: {exc}") from None


def cmd_benchmark(args) -> int:
    truth = load_truth(args.truth)
    cfg = BenchmarkConfig(
        n=args.n,
        replicates=args.replicates,
        truth=truth,
        dims=tuple(args.dims) if args.dims else None,
        d_thresh=args.d_thresh,
        seed=args.seed,
        workers=args.workers,
    )
    result = run_benchmark(cfg)
    summary = json.dumps(_jsonable(result.summary()), indent=2, sort_keys=True) + "\n"
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        result.write(csv_path=f"{prefix}.csv")
        Path(f"{prefix}.json").write_text(summary, encoding="utf-8")
    else:
        sys.stdout.write(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slopecal", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p, input_required=True):
        if input_required:
            p.add_argument("input", help="CSV file with header x,y")
        else:
            p.add_argument("input", nargs="?", help="CSV file with header x,y")
        p.add_argument("--dims", type=parse_dims, help="model dimensions, e.g. 1-37 (default 1..n/ln n)")
        p.add_argument("--shape", choices=("dimension", "plugin"), default="dimension")
        p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("calibrate", help="calibrate the penalty and select a model")
    data_flags(p)
    p.add_argument("--d-thresh", type=int, help="dimension threshold (default n/(2 ln n))")
    p.add_argument("--slope-window", type=parse_window, help="dimension window lo:hi for the slope estimate")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("path", help="export the selection path as CSV")
    data_flags(p, input_required=False)
    p.add_argument("--scores-file", help="CSV with columns model_id,f,g,D instead of data")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("benchmark", help="run the Monte-Carlo oracle-ratio benchmark")
    p.add_argument("--truth", default="fig1", help="'fig1' or a JSON truth spec file")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-thresh", type=int)
    p.add_argument("--dims", type=parse_dims)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output prefix; writes PREFIX.json and PREFIX.csv (default: JSON to stdout)")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, CalibrationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
