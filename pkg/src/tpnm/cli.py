"""Command-line frontend.

Exit codes: 0 ok, 2 parse error, 3 numeric failure, 4 usage error, 5 domain
error.  Diagnostics go to stderr; stdout gets one summary line per command.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ParseError, TPNMError, UsageError
from .eval import (
    ablation_curves,
    auc_protocol,
    correlation_analysis,
    fmt,
    runtime_bench,
    write_json,
    write_rows,
)
from .graph import dataset_stats
from .ingest import (
    PRESETS,
    _parse_time,
    load_activity_csv,
    load_catalog,
    load_edge_list,
    synthesize,
    write_activity_csv,
    write_catalog,
)
from .modelio import load_model, save_model
from .tpmatrix import WeightScheme
from .trainer import Hyperparams, predict_next, train

log = logging.getLogger("tpnm")

# flag -> (Hyperparams field, type, default); defaults follow the reference table
HYPER_FLAGS = {
    "alpha": ("alpha", int, 3),
    "lambda": ("lambda0", float, 0.1),
    "beta": ("beta", float, None),
    "gamma": ("gamma", float, 0.9),
    "M": ("M", int, 1000),
    "k": ("k", int, 16),
    "seed": ("seed", int, 0),
    "scheme": ("scheme", str, "tp-initial"),
    "time-scale": ("time_scale", float, 3600.0),
    "batch-size": ("batch_size", int, 16),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def read_config(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment.  Keys use the flag names."""
    out = {}
    path = Path(path)
    for line, text in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = text.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ParseError("expected key=value", line=line, path=str(path))
        key, value = (part.strip() for part in text.split("=", 1))
        out[key.lstrip("-").replace("_", "-")] = value
    return out


def _add_hyper(p):
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--alpha", type=int, help="TPPI window half-width (default: 3)")
    g.add_argument("--lambda", dest="lambda_", metavar="LAMBDA", type=float, help="initial learning rate and ridge weight (default: 0.1)")
    g.add_argument("--beta", type=float, help="influence discount in [0, 1) (required)")
    g.add_argument("--gamma", type=float, help="momentum coefficient (default: 0.9)")
    g.add_argument("--M", type=int, help="maximum number of epochs (default: 1000)")
    g.add_argument("--k", type=int, help="latent dimension (default: 16)")
    g.add_argument("--seed", type=int, help="random seed (default: 0)")
    g.add_argument("--scheme", help="adjacency, tp-initial or tp-recent (default: tp-initial)")
    g.add_argument("--time-scale", type=float, help="seconds per residual unit (default: 3600)")
    g.add_argument("--batch-size", type=int, help="instances per SGD step (default: 16)")
    g.add_argument("--snapshots", action="store_true", default=None, help="sum the loss over the last alpha+1 snapshots")
    g.add_argument("--config", help="key=value file mirroring these flags; flags win")


def _add_input(p, required=True):
    p.add_argument("input", nargs=None if required else "?", help="activity CSV or edge list")
    p.add_argument("--catalog", help="node catalog CSV: id,label[,revisitable]")
    p.add_argument("--kind", choices=["activity", "edges"], help="input format (default: by extension)")
    p.add_argument("--per-source", action="store_true", help="edge lists: one instance per source node")
    p.add_argument("--strict", action="store_true", help="reject tied timestamps instead of nudging")


def _add_output(p, default_format="csv"):
    p.add_argument("--out-dir", default=".", help="directory for output files (default: .)")
    p.add_argument("--format", choices=["csv", "json"], default=default_format, help=f"report format (default: {default_format})")
    p.add_argument("--threads", type=int, default=1, help="worker threads for matrix building (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tpnm", description="Temporal link prediction with time-parameterized matrices.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("stats", help="dataset statistics")
    _add_input(p)
    _add_output(p, "json")

    p = sub.add_parser("synth", help="generate a synthetic activity dataset")
    p.add_argument("--preset", choices=sorted(PRESETS), default="crm")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--missing-rate", type=float, default=0.44, help="crm preset only (default: 0.44)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("train", help="fit a model")
    _add_input(p)
    _add_hyper(p)
    _add_output(p)

    p = sub.add_parser("predict", help="rank next nodes for instances at query times")
    p.add_argument("--model", required=True)
    _add_input(p)
    p.add_argument("--instance", action="append", help="instance id (repeatable; default: all)")
    p.add_argument("--at", action="append", help="query time in epoch seconds or ISO 8601 (repeatable; default: last event)")
    p.add_argument("--top", type=int, default=0, help="keep only the best N candidates (default: all)")
    _add_output(p)

    p = sub.add_parser("evaluate", help="leave-last-node-out AUC")
    _add_input(p)
    _add_hyper(p)
    _add_output(p, "json")

    p = sub.add_parser("ablation", help="per-epoch RMSE for the three weight schemes")
    _add_input(p)
    _add_hyper(p)
    _add_output(p)

    p = sub.add_parser("correlate", help="Pearson correlation between node columns")
    _add_input(p)
    p.add_argument("--scheme", default="adjacency", help="adjacency, tp-initial or tp-recent (default: adjacency)")
    p.add_argument("--time-scale", type=float, default=3600.0)
    _add_output(p)

    p = sub.add_parser("bench", help="training time against dataset size")
    p.add_argument("--sizes", default="1000,2000,4000", help="comma-separated ascending instance counts")
    p.add_argument("--preset", choices=sorted(PRESETS), default="crm")
    p.add_argument("--missing-rate", type=float, default=0.44)
    _add_hyper(p)
    _add_output(p)
    return parser


def hyperparams_from(args) -> Hyperparams:
    config = read_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - set(HYPER_FLAGS) - {"snapshots"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    values = {}
    for flag, (name, kind, default) in HYPER_FLAGS.items():
        value = getattr(args, flag.replace("-", "_") if flag != "lambda" else "lambda_")
        if value is None and flag in config:
            try:
                value = kind(config[flag])
            except ValueError:
                raise UsageError(f"config key {flag}: bad value {config[flag]!r}") from None
        if value is None:
            value = default
        values[name] = value
    if values["beta"] is None:
        raise UsageError("missing required hyperparameter --beta")
    snapshots = args.snapshots
    if snapshots is None:
        snapshots = config.get("snapshots", "false").lower() in ("1", "true", "yes")
    values["snapshots"] = snapshots
    try:
        values["scheme"] = WeightScheme.parse(values["scheme"])
        return Hyperparams(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def load_input(args):
    path = Path(args.input)
    catalog = load_catalog(args.catalog) if args.catalog else None
    kind = args.kind or ("activity" if path.suffix.lower() == ".csv" else "edges")
    if kind == "activity":
        return load_activity_csv(path, catalog=catalog, strict=args.strict)
    return load_edge_list(path, per_source=args.per_source, strict=args.strict, catalog=catalog)


def _out(args, name: str) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _report(args, stem: str, data: dict) -> Path:
    if args.format == "json":
        path = _out(args, f"{stem}.json")
        write_json(path, data)
    else:
        path = _out(args, f"{stem}.csv")
        write_rows(path, list(data), [list(data.values())])
    return path


def cmd_stats(args) -> str:
    stats = dataset_stats(load_input(args))
    path = _report(args, "stats", stats.to_dict())
    return f"stats: instances={stats.instances} total_nodes={stats.total_nodes} absent:observed={stats.ratio} -> {path}"


def cmd_synth(args) -> str:
    make = PRESETS[args.preset]
    if args.preset == "crm":
        cfg = make(args.instances, args.missing_rate, args.seed)
    else:
        cfg = make(args.instances, args.seed)
    ds = synthesize(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_activity_csv(ds, out / "activities.csv")
    write_catalog(ds.catalog, out / "catalog.csv")
    return f"synth: preset={args.preset} instances={len(ds.instances)} -> {out / 'activities.csv'}"


def cmd_train(args) -> str:
    hp = hyperparams_from(args)
    ds = load_input(args)
    result = train(ds, hp, threads=args.threads)
    model_path = _out(args, "model.json")
    save_model(result.model, model_path)
    rows = [(r.epoch, r.objective, r.rmse, r.mae, r.lam, r.decay) for r in result.log]
    header = ["epoch", "objective", "rmse", "mae", "lambda", "decay"]
    if args.format == "json":
        write_json(_out(args, "train_log.json"), [dict(zip(header, map(_num, row))) for row in rows])
    else:
        write_rows(_out(args, "train_log.csv"), header, rows)
    return (
        f"train: epochs={result.epochs} rmse={fmt(result.final_rmse)} "
        f"converged={str(result.converged).lower()} -> {model_path}"
    )


def _num(x):
    return int(x) if isinstance(x, int) else float(fmt(x))


def _query_times(values):
    return [None] if not values else [_parse_time(v, None, "--at") for v in values]


def cmd_predict(args) -> str:
    model = load_model(args.model)
    ds = load_input(args)
    wanted = set(args.instance) if args.instance else None
    times = _query_times(args.at)
    rows = []
    for seq in ds.instances:
        if wanted is not None and seq.instance_id not in wanted:
            continue
        for at in times:
            ranked = predict_next(model, seq, at)
            if args.top > 0:
                ranked = ranked[: args.top]
            when = seq.times[-1] if at is None else at
            for rank, (node, score) in enumerate(ranked, start=1):
                rows.append((seq.instance_id, when, rank, node, score))
    if wanted is not None:
        missing = wanted - {seq.instance_id for seq in ds.instances}
        if missing:
            raise UsageError(f"unknown instance ids: {', '.join(sorted(missing))}")
    header = ["instance_id", "at", "rank", "node", "score"]
    if args.format == "json":
        path = _out(args, "predictions.json")
        write_json(path, [dict(zip(header, (r[0], r[1], r[2], r[3], float(fmt(r[4]))))) for r in rows])
    else:
        path = _out(args, "predictions.csv")
        write_rows(path, header, rows)
    top = sum(1 for r in rows if r[2] == 1)
    return f"predict: {top} rankings -> {path}"


def cmd_evaluate(args) -> str:
    hp = hyperparams_from(args)
    report = auc_protocol(load_input(args), hp, threads=args.threads)
    path = _report(args, "auc", report.to_dict())
    return f"evaluate: auc={fmt(report.auc)} stages={report.stages} hits={report.hits} -> {path}"


def cmd_ablation(args) -> str:
    hp = hyperparams_from(args)
    result = ablation_curves(load_input(args), hp, threads=args.threads)
    finals = {s.value: v for s, v in result.finals.items()}
    if args.format == "json":
        path = _out(args, "ablation.json")
        write_json(path, {
            "curves": {s.value: [float(fmt(x)) for x in c] for s, c in result.curves.items()},
            "final": {k: float(fmt(v)) for k, v in finals.items()},
        })
    else:
        path = _out(args, "ablation.csv")
        result.write_csv(path)
    summary = " ".join(f"{k}={fmt(v)}" for k, v in finals.items())
    return f"ablation: {summary} -> {path}"


def cmd_correlate(args) -> str:
    report = correlation_analysis(load_input(args), args.scheme, args.time_scale)
    if args.format == "json":
        path = _out(args, "correlation.json")
        write_json(path, report.to_dict())
    else:
        path = _out(args, "correlation.csv")
        report.write_csv(path)
        _out(args, "cluster_order.txt").write_text(
            "\n".join(str(v) for v in report.cluster_order) + "\n", encoding="utf-8"
        )
    return f"correlate: undefined_pairs={len(report.undefined_pairs)} -> {path}"


def cmd_bench(args) -> str:
    hp = hyperparams_from(args)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad --sizes {args.sizes!r}") from None
    make = PRESETS[args.preset]

    def make_dataset(size):
        cfg = make(size, args.missing_rate, hp.seed) if args.preset == "crm" else make(size, hp.seed)
        return synthesize(cfg)

    try:
        report = runtime_bench(sizes, hp, make_dataset, threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    path = _out(args, "bench.csv")
    report.write_csv(path)
    return f"bench: per-instance ratio={fmt(report.ratio)} linear={str(report.linear).lower()} -> {path}"


COMMANDS = {
    "stats": cmd_stats,
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "ablation": cmd_ablation,
    "correlate": cmd_correlate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        summary = COMMANDS[args.command](args)
    except TPNMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return UsageError.exit_code
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
