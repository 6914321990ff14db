"""Command line entry point: ``mixed-gfmm <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Diagnostics go to standard error, results to standard output or ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation, persist, stats
from .errors import DataError, GfmmError
from .learner import Learner
from .model import GfmmModel, HyperParams
from .predictor import predict_batch

log = logging.getLogger("mixed_gfmm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _gamma(text: str):
    vals = _floats(text)
    if not vals:
        raise argparse.ArgumentTypeError("gamma needs a value")
    return vals[0] if len(vals) == 1 else vals


def _params(args, alpha: float = 0.5) -> HyperParams:
    try:
        return HyperParams(args.theta, args.delta, alpha, args.gamma, args.variant)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _add_learning_flags(p, alpha_choices=None):
    p.add_argument("--theta", type=float, default=0.1, help="maximum hyperbox edge length")
    p.add_argument("--delta", type=float, default=0.1, help="maximum entropy change")
    p.add_argument("--gamma", type=_gamma, default=1.0, help="ramp sensitivity (scalar or list)")
    p.add_argument("--variant", choices=("v1", "v2"), default="v1")
    if alpha_choices is not None:
        p.add_argument("--alpha", default="auto", help=f"number or one of {', '.join(alpha_choices)}")


def _parse_alpha(text: str, choices) -> str | float:
    if text in choices:
        return text
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"--alpha must be a number or one of {', '.join(choices)}") from None
    if not 0.0 <= value <= 1.0:
        raise UsageError("--alpha must lie in [0, 1]")
    return value


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _param_string(params: HyperParams, alpha) -> str:
    gammas = params.gamma if isinstance(params.gamma, tuple) else (params.gamma,)
    gamma = "/".join(f"{g:g}" for g in gammas)
    return f"theta={params.theta:g};delta={params.delta:g};alpha={alpha};gamma={gamma}"


# commands ----------------------------------------------------------------------


def cmd_fit(args):
    schema = persist.load_schema(args.schema)
    data = persist.load_dataset(args.data, schema)
    alpha = _parse_alpha(args.alpha, ("auto",))
    if alpha == "auto":
        alpha = evaluation.fixed_alpha(schema.n, schema.r)
    params = _params(args, alpha)
    scaler = persist.fit_scaler(data, schema)
    patterns = scaler.apply(data)
    if args.shuffle_seed is not None:
        perm = np.random.default_rng(args.shuffle_seed).permutation(len(patterns))
        patterns = [patterns[i] for i in perm]
    model = GfmmModel(scaler.schema_with_ranges(schema), params)
    report = Learner(model).fit_stream(patterns)
    persist.save_model(model, args.model_out)
    log.info(
        "trained on %d samples: %d boxes (%d created, %d expansions, %d containments, "
        "%d overlap rejections)",
        len(patterns), len(model), report.boxes_created, report.expansions,
        report.containments, report.overlap_rejections,
    )


def cmd_predict(args):
    model = persist.load_model(args.model)
    data = persist.load_dataset(args.data, model.schema, require_label=False)
    patterns = persist.scaler_from_schema(model.schema).apply(data)
    preds = predict_batch(model, patterns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(data.header + ["predicted", "membership"])
    for row, p in zip(data.rows, preds):
        writer.writerow(row + [p.label, f"{p.winning_membership:.6f}"])
    _emit(buf.getvalue(), args.out)


def cmd_cv(args):
    schema = persist.load_schema(args.schema)
    data = persist.load_dataset(args.data, schema)
    alpha = _parse_alpha(args.alpha, evaluation.ALPHA_MODES)
    params = _params(args)
    try:
        plan = evaluation.CvPlan(args.repeats, args.folds, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = evaluation.run_cv(
        data, params, plan, alpha=alpha, shuffle_seed=args.shuffle_seed, jobs=args.jobs
    )
    name = args.dataset_name or Path(args.data).stem
    row = persist.ResultRow(
        name, f"gfmm-{params.variant}", _param_string(params, alpha), result.mean, result.std
    )
    if args.out:
        persist.write_results_table([row], args.out, append=args.append)
    else:
        sys.stdout.write(persist.format_results([row]))
    log.info("mean CBA %.5f (std %.5f) over %d folds", result.mean, result.std, len(result.fold_cba))


def cmd_tune(args):
    schema = persist.load_schema(args.schema)
    data = persist.load_dataset(args.data, schema)
    patterns = persist.fit_scaler(data, schema).apply(data)
    try:
        grid = evaluation.ParamGrid(args.grid_theta, args.grid_delta, args.grid_alpha)
        base = HyperParams(args.grid_theta[0], args.grid_delta[0], args.grid_alpha[0], args.gamma, args.variant)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    best = evaluation.tune_grid(patterns, schema, grid, base=base, inner_folds=args.inner_folds, seed=args.seed)
    sys.stdout.write(f"theta={best.theta:g} delta={best.delta:g} alpha={best.alpha:g} variant={best.variant}\n")


def cmd_estimate_alpha(args):
    schema = persist.load_schema(args.schema)
    data = persist.load_dataset(args.data, schema)
    patterns = persist.fit_scaler(data, schema).apply(data)
    params = _params(args)
    alpha = evaluation.run_alpha_estimation(patterns, schema, params, args.method, seed=args.seed)
    sys.stdout.write(f"{alpha:.6f}\n")


def _read_rank_table(path) -> stats.RankTable:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise DataError("empty table", line=1)
    if header == persist.RESULTS_HEADER:
        rows = persist.read_results_table(path)
        datasets = list(dict.fromkeys(r.dataset for r in rows))
        methods = list(dict.fromkeys(f"{r.method}[{r.params}]" for r in rows))
        grid = {(r.dataset, f"{r.method}[{r.params}]"): r.mean_cba for r in rows}
        try:
            scores = [[grid[(d, m)] for m in methods] for d in datasets]
        except KeyError as exc:
            raise DataError(f"results table has no score for {exc.args[0]}") from None
    else:
        datasets, scores = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            methods = next(reader)[1:]
            for lineno, cells in enumerate(reader, start=2):
                if not cells:
                    continue
                if len(cells) != len(methods) + 1:
                    raise DataError("wrong number of cells", line=lineno)
                datasets.append(cells[0])
                try:
                    scores.append([float(c) for c in cells[1:]])
                except ValueError:
                    raise DataError("non-numeric score", line=lineno) from None
    try:
        return stats.RankTable(np.array(scores, dtype=np.float64), methods, datasets)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def cmd_stats(args):
    table = _read_rank_table(args.table)
    s = stats.friedman_report(table, args.alpha, not args.lower_is_better)
    Z, M = table.scores.shape
    out = [
        f"datasets={Z} methods={M}",
        "average ranks:",
        *(f"  {m}: {r:.4f}" for m, r in sorted(zip(s.methods, s.ranks), key=lambda t: (t[1], t[0]))),
        f"chi2_F={s.chi2:.4f}",
        f"F_F={s.f_f:.4f}",
        f"critical F({M - 1},{(M - 1) * (Z - 1)}) at {args.alpha:g} = {s.critical:.4f}",
        f"decision={'reject' if s.reject else 'not reject'}",
    ]
    if s.cd is not None:
        out.append(f"nemenyi CD={s.cd:.4f}")
        out.append("groups not significantly different:")
        out.extend(f"  {' -- '.join(g)}" for g in s.groups)
        if not s.groups:
            out.append("  (none)")
    sys.stdout.write("\n".join(out) + "\n")


def cmd_inspect(args):
    model = persist.load_model(args.model)
    if args.summary:
        lines = [f"boxes={len(model)} n={model.n} r={model.r}", "class,boxes,samples"]
        for label in model.classes():
            idx = model.indices_of(label)
            lines.append(f"{label},{len(idx)},{int(model.n_samples[idx].sum())}")
        sys.stdout.write("\n".join(lines) + "\n")
    else:
        sys.stdout.write(persist.format_model(model))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixed-gfmm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="single-pass training")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    _add_learning_flags(p, ("auto",))
    p.add_argument("--model-out", required=True)
    p.add_argument("--shuffle-seed", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="classify rows of a CSV file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="repeated stratified cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    _add_learning_flags(p, evaluation.ALPHA_MODES)
    p.add_argument("--shuffle-seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dataset-name")
    p.add_argument("--out")
    p.add_argument("--append", action="store_true", help="merge into an existing --out table")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("tune", help="grid search over theta, delta and alpha")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--grid-theta", type=_floats, default=evaluation.THETA_GRID)
    p.add_argument("--grid-delta", type=_floats, default=evaluation.DELTA_GRID)
    p.add_argument("--grid-alpha", type=_floats, default=evaluation.ALPHA_GRID)
    p.add_argument("--inner-folds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=_gamma, default=1.0)
    p.add_argument("--variant", choices=("v1", "v2"), default="v1")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("estimate-alpha", help="data-driven alpha estimate")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--method", choices=("v1", "v2"), required=True)
    _add_learning_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate_alpha)

    p = sub.add_parser("stats", help="rank statistics over a score table")
    stats_sub = p.add_subparsers(dest="test", required=True, parser_class=_Parser)
    f = stats_sub.add_parser("friedman", help="Friedman test with Nemenyi critical difference")
    f.add_argument("--table", required=True)
    f.add_argument("--alpha", type=float, default=0.05, help="significance level")
    f.add_argument("--lower-is-better", action="store_true")
    f.set_defaults(func=cmd_stats)

    p = sub.add_parser("inspect", help="dump a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--summary", action="store_true")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GfmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
