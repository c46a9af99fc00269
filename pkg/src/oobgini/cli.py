"""``oobgini`` command line: importance reports, simulation studies, plots.

Exit status is 0 on success, 1 on a data or domain error and 2 on a usage
error.  Every output file starts with the fully resolved configuration, so a
run can be repeated exactly; thread count is deliberately left out because it
never changes results.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .dataset import load_csv, shuffle_feature
from .errors import OobGiniError
from .forest import ForestParams, fit, tree_seed
from .importance import MEASURES, PenaltySpec, compute, resolve_measure
from .seeding import derive_seed
from .simlab import CASES, EXPECTATION_MEASURES, SimDesign, expectation_grid, run_study
from .svgplot import emit_boxplot


class UsageError(Exception):
    pass


def _csv_list(text: str, conv=str) -> list:
    try:
        return [conv(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list {text!r}") from None


def _add_forest_flags(p: argparse.ArgumentParser, mtry_default=None):
    g = p.add_argument_group("forest")
    g.add_argument("--ntree", type=int, default=100)
    g.add_argument("--mtry", type=int, default=mtry_default, help="default floor(sqrt(#features))")
    g.add_argument("--min-node-size", type=int, default=1)
    g.add_argument("--max-depth", type=int, default=None, help="default unlimited")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=int, default=None, help="default $OOBGINI_THREADS or CPU count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oobgini", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("importance", help="fit a forest on a CSV and report variable importance")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--schema", help="JSON object {column: continuous|categorical}, inline or a file path")
    p.add_argument("--measures", default="mdi,pg1,pg2", help=f"comma list from {','.join(MEASURES)}")
    p.add_argument("--alpha", type=float, help="add a custom penalized Gini member")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--bias-corrected", action="store_true")
    p.add_argument("--truncate-negative", action="store_true")
    p.add_argument("--mda-repeats", type=int, default=1)
    p.add_argument("--drop-missing", action="store_true", help="drop rows with empty fields instead of failing")
    p.add_argument("--shuffle", metavar="FEATURE", action="append", default=[],
                   help="append a permuted copy of FEATURE as an uninformative control")
    p.add_argument("--dump-forest", metavar="PATH", help="write the fitted forest as JSON")
    p.add_argument("--output", "-o")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_forest_flags(p)

    s = sub.add_parser("simulate", help="run the null or power simulation study")
    s.add_argument("--case", choices=CASES, default="null")
    s.add_argument("--replications", type=int, default=100)
    s.add_argument("--n", type=int, default=120)
    s.add_argument("--measures", default="mdi,pg1,pg2,pg0hat,pg2hat")
    s.add_argument("--mda-repeats", type=int, default=1)
    s.add_argument("--output", "-o", help="long CSV (stdout if omitted)")
    s.add_argument("--summary", help="summary JSON path (default: <output>.summary.json)")
    _add_forest_flags(s, mtry_default=3)

    e = sub.add_parser("expectation", help="Monte-Carlo check of node-level expected decreases")
    e.add_argument("--measure", default="goob,pg0hat,pg2",
                   help=f"comma list from {','.join(EXPECTATION_MEASURES)}")
    e.add_argument("--nodes", type=lambda t: _csv_list(t, int), default=[5, 10, 20, 50])
    e.add_argument("--p", type=lambda t: _csv_list(t, float), default=[0.1, 0.3, 0.5])
    e.add_argument("--fractions", type=lambda t: _csv_list(t, float), default=[0.5])
    e.add_argument("--trials", type=int, default=100_000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--output", "-o")
    e.add_argument("--format", choices=("csv", "json"), default="csv")

    b = sub.add_parser("plot", help="render a long CSV as SVG boxplots")
    b.add_argument("--input", required=True)
    b.add_argument("--output", "-o", required=True)
    b.add_argument("--panel-by", default="measure")
    b.add_argument("--box-by", default="feature")
    b.add_argument("--title")
    return parser


def _write(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="")


def _config_header(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True) + "\n"


def _load_schema(text: str | None):
    if text is None:
        return None
    src = text if text.lstrip().startswith("{") else Path(text).read_text(encoding="utf-8")
    try:
        schema = json.loads(src)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--schema is not valid JSON: {exc}") from None
    if not isinstance(schema, dict):
        raise UsageError("--schema must be a JSON object mapping column names to kinds")
    return schema


def _measures(args) -> list:
    out = []
    for name in _csv_list(args.measures):
        try:
            out.append(resolve_measure(name))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.alpha is not None or args.lam is not None:
        if args.alpha is None or args.lam is None:
            raise UsageError("--alpha and --lambda must be given together")
        try:
            out.append(PenaltySpec(args.alpha, args.lam, args.bias_corrected))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    elif args.bias_corrected:
        raise UsageError("--bias-corrected needs --alpha and --lambda (or use a *hat measure)")
    if not out:
        raise UsageError("no measures requested")
    return out


def cmd_importance(args) -> int:
    measures = _measures(args)
    schema = _load_schema(args.schema)
    data = load_csv(args.data, schema, args.response, drop_missing=args.drop_missing)
    for k, feat in enumerate(args.shuffle):
        data = shuffle_feature(data, feat, derive_seed(args.seed, 1_000_003, k))
    params = ForestParams(args.ntree, args.mtry, args.min_node_size, args.max_depth, args.seed)
    try:
        params = params.resolved(data.n_features)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    forest = fit(data, params, threads=args.threads)
    mda_seed = derive_seed(args.seed, 2_000_003)
    reports = [compute(m, forest, data, seed=mda_seed, n_repeats=args.mda_repeats,
                       truncate_negative=args.truncate_negative) for m in measures]
    config = {
        "command": "importance",
        "data": args.data,
        "response": args.response,
        "features": {n: str(k) for n, k in zip(data.feature_names, data.kinds)},
        "rows": data.n,
        "dropped_rows": data.dropped_rows,
        "shuffled": list(args.shuffle),
        "measures": [r.measure for r in reports],
        "forest": {"ntree": params.ntree, "mtry": params.mtry, "min_node_size": params.min_node_size,
                   "max_depth": params.max_depth},
        "seed": args.seed,
        "tree_seeds": [tree_seed(args.seed, t) for t in range(params.ntree)],
        "mda_seed": mda_seed,
        "mda_repeats": args.mda_repeats,
        "truncate_negative": args.truncate_negative,
    }
    if args.dump_forest:
        _write(args.dump_forest, json.dumps({"config": config, "forest": forest.to_dict()}) + "\n")
    if args.format == "json":
        text = json.dumps({"config": config, "reports": [r.to_dict() for r in reports]},
                          indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        buf.write(_config_header(config))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "measure", "score", "nodesUsed", "nodesSkipped"])
        for r in reports:
            for row in r.rows():
                w.writerow([row["feature"], row["measure"], repr(row["score"]),
                            "" if row["nodesUsed"] is None else row["nodesUsed"],
                            "" if row["nodesSkipped"] is None else row["nodesSkipped"]])
        text = buf.getvalue()
    _write(args.output, text)
    return 0


def cmd_simulate(args) -> int:
    try:
        forest = ForestParams(args.ntree, args.mtry, args.min_node_size, args.max_depth, args.seed)
        design = SimDesign(args.case, args.n, args.replications, forest,
                           tuple(_csv_list(args.measures)), args.mda_repeats)
        forest.resolved(5)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = run_study(design, args.seed, threads=args.threads)
    _write(args.output, result.to_long_csv())
    summary_path = args.summary
    if summary_path is None and args.output is not None:
        summary_path = str(Path(args.output).with_suffix(".summary.json"))
    if summary_path is not None:
        _write(summary_path, result.summary_json())
    return 0


def cmd_expectation(args) -> int:
    measures = _csv_list(args.measure)
    for m in measures:
        if m.lower() not in EXPECTATION_MEASURES:
            raise UsageError(f"unknown measure {m!r}; choose from {', '.join(EXPECTATION_MEASURES)}")
    try:
        results = expectation_grid(measures, args.nodes, args.p, args.fractions, args.trials, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = {"command": "expectation", "measures": measures, "nodes": args.nodes, "p": args.p,
              "fractions": args.fractions, "trials": args.trials, "seed": args.seed,
              "units": "un-doubled Gini p(1-p)"}
    cols = ["measure", "node_size", "p_oob", "split_fraction", "trials", "empirical_mean",
            "theoretical_mean", "std_error", "z", "redrawn", "within_4se"]
    recs = [[r.measure, r.node_size, r.p_oob, r.split_fraction, r.trials, r.empirical_mean,
             r.theoretical_mean, r.std_error, r.z, r.redrawn, r.within(4.0)] for r in results]
    if args.format == "json":
        text = json.dumps({"config": config, "results": [dict(zip(cols, x)) for x in recs]},
                          indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        buf.write(_config_header(config))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for x in recs:
            w.writerow([repr(v) if isinstance(v, float) else v for v in x])
        text = buf.getvalue()
    _write(args.output, text)
    return 0


def cmd_plot(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    svg = emit_boxplot(text, (args.panel_by, args.box_by), args.title)
    _write(args.output, svg)
    return 0


COMMANDS = {
    "importance": cmd_importance,
    "simulate": cmd_simulate,
    "expectation": cmd_expectation,
    "plot": cmd_plot,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"oobgini {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (OobGiniError, FileNotFoundError, ValueError) as exc:
        print(f"oobgini {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
