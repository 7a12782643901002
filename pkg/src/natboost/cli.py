"""Command-line entry point: ``natboost train | predict | benchmark``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .boosting import (
    BoostConfig,
    ModelFormatError,
    load_model,
    predict_dist,
    predict_original,
    save_model,
)
from .data import DataError, load_csv, load_features
from .evaluation import (
    benchmark_report,
    format_row,
    nll_original_units,
    run_benchmark,
    select_and_refit,
)
from .tree import DEPTH_CLIPPED, LEAF_CLIPPED

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

GROWTH = {"leaf": LEAF_CLIPPED, "depth": DEPTH_CLIPPED}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _target(value: str):
    try:
        return int(value)
    except ValueError:
        return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", required=True, help="input CSV")
    common.add_argument("--target", type=_target, default=-1,
                        help="target column name or zero-based index (default: last column)")
    common.add_argument("--lr", type=float, default=0.04)
    common.add_argument("--estimators", type=int, default=500)
    common.add_argument("--max-leaves", type=int, default=31)
    common.add_argument("--growth", choices=sorted(GROWTH), default="leaf")
    common.add_argument("--max-depth", type=int, default=3)
    common.add_argument("--min-samples-leaf", type=int, default=1)
    common.add_argument("--trials", type=int, default=20)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--model", dest="model_path", default="model.json")
    common.add_argument("--output", dest="output_path", default=None)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--name", default=None, help="dataset label for benchmark output")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="natboost", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("train", parents=[common], help="select M on validation, refit, save model")
    sub.add_parser("predict", parents=[common], help="write mu,sigma per row of a feature CSV")
    sub.add_parser("benchmark", parents=[common], help="repeated-split RMSE/NLL/ATT benchmark")
    return parser


def config_from_args(args) -> BoostConfig:
    return BoostConfig(
        learning_rate=args.lr,
        n_estimators=args.estimators,
        max_leaves=args.max_leaves,
        min_samples_leaf=args.min_samples_leaf,
        growth_mode=GROWTH[args.growth],
        max_depth=args.max_depth,
    )


def cmd_train(args, out) -> int:
    ds = load_csv(args.data, args.target)
    pf = select_and_refit(ds, config_from_args(args), args.seed)
    save_model(pf.model, args.model_path)
    scaler = pf.model.scaler
    fitted = ds.subset(pf.fit_indices)
    params = predict_dist(pf.model, scaler.transform_features(fitted.features))
    train_nll = nll_original_units(params, fitted.targets, scaler)
    print(f"selected_M={pf.selected_M} train_nll={train_nll:.4f} "
          f"train_seconds={pf.train_seconds:.2f} model={args.model_path}", file=out)
    return EXIT_OK


def cmd_predict(args, out) -> int:
    model = load_model(args.model_path)
    X = load_features(args.data)
    if X.shape[1] == model.n_features + 1:
        # the file still carries its target column; drop it
        X = load_csv(args.data, args.target).features
    if X.shape[1] != model.n_features:
        raise DataError(f"feature dimension mismatch: model expects {model.n_features} "
                        f"columns, found {X.shape[1]}")
    mu, sigma = predict_original(model, X)
    lines = ["mu,sigma"] + [f"{m!r},{v!r}" for m, v in zip(mu.tolist(), sigma.tolist())]
    text = "\n".join(lines) + "\n"
    if args.output_path:
        Path(args.output_path).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_benchmark(args, out) -> int:
    config = config_from_args(args)
    ds = load_csv(args.data, args.target)
    name = args.name or Path(args.data).stem

    def progress(res):
        logging.getLogger("natboost").info(
            "%s seed=%d rmse=%.4f nll=%.4f M=%d %.2fs",
            name, res.seed, res.rmse, res.nll, res.selected_M, res.train_seconds)

    try:
        result = run_benchmark(ds, config, args.trials, args.seed, jobs=args.jobs, progress=progress)
    except DataError as exc:
        raise DataError(f"{name}: {exc}") from exc
    except Exception as exc:
        raise RuntimeError(f"benchmark on {name} failed: {exc}") from exc
    report = benchmark_report(name, ds, config, result)
    if args.output_path:
        Path(args.output_path).write_text(json.dumps(report, indent=2) + "\n")
    print(format_row(name, ds.n_rows, result), file=out)
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "benchmark": cmd_benchmark}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config_from_args(args)
        if args.trials < 1 or args.jobs < 1:
            raise UsageError("--trials and --jobs must be >= 1")
    except (UsageError, ValueError) as exc:
        print(f"natboost: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except (DataError, ModelFormatError) as exc:
        print(f"natboost: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        print(f"natboost: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
