"""Command-line interface: simulate, fit, decode, eval, compare.

Exit codes: 0 success, 1 runtime or numerical error, 2 usage error,
3 fit stopped at the iteration cap before converging (model still written).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import data_io, synthetic
from .em import INIT_STRATEGIES, FitConfig, fit
from .errors import MhmmrError, MissingLabels
from .evaluation import METHODS, channel_subset, compare_methods, evaluate, format_report, format_table
from .inference import decode

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _write_json(obj, path: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _fit_config(args) -> FitConfig:
    return FitConfig(K=args.k, p=args.p, max_iter=args.max_iter, rel_tol=args.tol,
                     n_restarts=args.restarts, init_strategy=args.init, seed=args.seed)


def _load_data(args):
    series = data_io.load_csv(args.data)
    if getattr(args, "channels", None):
        series = channel_subset(series, [c.strip() for c in args.channels.split(",") if c.strip()])
    return series


# --- commands ---------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.spec:
        spec = synthetic.load_spec(args.spec)
        if args.seed is not None:
            spec = dataclasses.replace(spec, seed=args.seed)
        series, truth = synthetic.generate(spec)
    else:
        series, truth = synthetic.simulate_preset(args.preset, 0 if args.seed is None else args.seed)
    data_io.write_csv(series, args.out)
    if args.truth_model:
        data_io.save_model(truth, args.truth_model)
    print(f"n={series.n} d={series.d} K={truth.K}")
    return EXIT_OK


def cmd_fit(args) -> int:
    series = _load_data(args)
    result = fit(series, _fit_config(args))
    data_io.save_model(result.params, args.out)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("iteration,loglik\n")
            for i, ll in enumerate(result.loglik_trace, start=1):
                fh.write(f"{i},{data_io.fmt(ll)}\n")
    status = "converged" if result.converged else "stopped at max_iter"
    print(f"loglik={result.loglik:.6f} iterations={result.iterations} {status} start={result.restart_index}")
    if result.low_support_states:
        print(f"warning: states {list(result.low_support_states)} have little support", file=sys.stderr)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_decode(args) -> int:
    series = _load_data(args)
    params = data_io.load_model(args.model)
    seg, post = decode(params, series, args.method)
    data_io.write_segmentation(seg, series.timestamps, args.out)
    if args.posteriors:
        data_io.export_posteriors(post, seg, series.timestamps, args.posteriors)
    print(f"n={seg.n} states={int(np.unique(seg.states).size)} loglik={post.loglik:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    _, pred = data_io.read_states(args.pred, args.pred_column)
    truth = data_io.load_csv(args.truth)
    if truth.labels is None:
        raise MissingLabels(f"{args.truth} has no label column")
    report = evaluate(pred, truth.labels)
    print(format_report(report))
    _write_json(report.to_dict(), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    series = _load_data(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = sorted(set(methods) - set(METHODS))
    if unknown:
        raise UsageError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
    runs = []
    for r in range(args.replicates):
        args_r = argparse.Namespace(**{**vars(args), "seed": args.seed + r})
        runs.append(compare_methods(series, methods, _fit_config(args_r)))
    names = list(runs[0])
    acc = {m: np.array([run[m].accuracy for run in runs]) for m in names}
    spread = {m: float(acc[m].std()) for m in names} if args.replicates > 1 else None
    shown = None
    if args.replicates > 1:
        print(f"accuracy: mean over seeds {args.seed}..{args.seed + args.replicates - 1};"
              " precision and recall: first seed")
        shown = {m: float(acc[m].mean()) for m in names}
    print(format_table(runs[0], spread, shown))
    _write_json({
        "data": args.data,
        "K": args.k, "p": args.p, "seeds": [args.seed + r for r in range(args.replicates)],
        "methods": {m: {"accuracy_mean": float(acc[m].mean()), "accuracy_std": float(acc[m].std()),
                        "runs": [run[m].to_dict() for run in runs]} for m in names},
    }, args.out)
    return EXIT_OK


# --- parser -----------------------------------------------------------------------

def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=_positive_int, required=True, help="number of states")
    p.add_argument("--p", type=_nonneg_int, default=3, help="polynomial order (default 3)")
    p.add_argument("--restarts", type=_positive_int, default=1, help="extra random starts + 1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=_positive_int, default=500)
    p.add_argument("--tol", type=_positive_float, default=1e-6, help="relative log-likelihood tolerance")
    p.add_argument("--init", choices=INIT_STRATEGIES, default="auto")
    p.add_argument("--channels", help="comma-separated channel or sensor names to keep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhmmr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log fitting progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a labelled synthetic series")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="JSON generator description")
    src.add_argument("--preset", choices=sorted(synthetic.PRESETS))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--truth-model", help="write the generating parameters here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a regression HMM by EM")
    p.add_argument("--data", required=True)
    _add_fit_options(p)
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--trace", help="CSV of the log-likelihood per iteration")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("decode", help="segment a series with a fitted model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="segmentation CSV (t, state, confidence)")
    p.add_argument("--posteriors", help="posterior CSV (t, tau_1..tau_K, viterbi_state)")
    p.add_argument("--method", choices=("viterbi", "map"), default="viterbi")
    p.add_argument("--channels", help="comma-separated channel or sensor names to keep")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score a segmentation against labelled data")
    p.add_argument("--pred", required=True, help="segmentation CSV")
    p.add_argument("--pred-column", default="state")
    p.add_argument("--truth", required=True, help="CSV with a label column")
    p.add_argument("--out", help="JSON report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="score several methods on one labelled series")
    p.add_argument("--data", required=True)
    p.add_argument("--methods", default=",".join(METHODS))
    _add_fit_options(p)
    p.add_argument("--replicates", type=_positive_int, default=1, help="seeds seed..seed+R-1")
    p.add_argument("--out", help="JSON report")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MhmmrError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
