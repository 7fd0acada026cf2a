"""``weightzoo`` command-line interface.

Every output file carries the invoking command's configuration (paths
reduced to base names, no timestamps) so reruns with the same seeds give
byte-identical files. Failures print one ``category: message`` line on
stderr and exit non-zero.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from . import __version__
from .data import SyntheticSpec, gen_synthetic, load_idx_dir
from .estimators import ESTIMATORS, feature_importance, load_model, random_search, save_model
from .evaluation import evaluate, transfer_matrix
from .exceptions import ValidationError, WeightZooError
from .features import featurize_zoo, read_table
from .nn import mlp, base_cnn
from .probes import ProbeModification, invariance_probe
from .zoo import build_zoo, load_zoo, split_zoo

PRESETS = {
    "desk": {"count": 300, "epochs": 10, "budget": 50, "max_train": 5000},
    "full": {"count": 30000, "epochs": 86, "budget": 1000, "max_train": None},
}

EXIT_ERROR = 1
EXIT_USAGE = 2


class UsageError(WeightZooError):
    category = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("WEIGHTZOO_THREADS")
    if env is None:
        return 1
    try:
        value = int(env)
    except ValueError:
        raise UsageError(f"WEIGHTZOO_THREADS must be an integer, got {env!r}") from None
    if value < 1:
        raise UsageError("WEIGHTZOO_THREADS must be >= 1")
    return value


def _preset(args, key):
    value = getattr(args, key)
    return PRESETS[args.preset][key] if value is None else value


def run_config(args) -> dict:
    """The command's arguments, with paths reduced to their base names."""
    config = {"command": args.command_name, "weightzoo_version": __version__}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "command_name", "threads", "verbose") or value is None:
            continue
        if key in _PATH_ARGS:
            value = ",".join(os.path.basename(os.path.normpath(v)) for v in str(value).split(","))
        config[key] = value
    return config


_PATH_ARGS = {"out", "zoo", "zoos", "features", "model", "models", "report", "dataset", "reports"}


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n")


def _split_records(zoo, args):
    """Records selected by --split, in manifest order."""
    if args.split == "all":
        return zoo.ok_records
    if args.train_count is None:
        raise UsageError(f"--split {args.split} needs --train-count")
    train, test = split_zoo(zoo, args.train_count, args.split_seed)
    return (train if args.split == "train" else test).records


def _add_split_args(p):
    p.add_argument("--split", choices=("all", "train", "test"), default="all")
    p.add_argument("--train-count", type=int, help="size of the estimator-training split")
    p.add_argument("--split-seed", type=int, default=0)


# subcommands


def cmd_zoo_gen(args) -> int:
    max_train = _preset(args, "max_train")
    if args.dataset == "synthetic":
        spec = SyntheticSpec(
            samples_per_class=args.samples_per_class,
            image_size=args.image_size,
            pattern_seed=args.pattern_seed,
            test_samples_per_class=args.test_samples_per_class,
        )
        train, test = gen_synthetic(spec)
    else:
        if not os.path.isdir(args.dataset):
            raise ValidationError(f"dataset directory {args.dataset} does not exist")
        train, test = load_idx_dir(args.dataset, max_train=max_train, seed=args.data_seed)
    shape = train.image_shape
    net = base_cnn(shape, train.num_classes) if args.arch == "cnn" else mlp(shape, num_classes=train.num_classes)
    zoo = build_zoo(
        net,
        train,
        test,
        count=_preset(args, "count"),
        sweep_seed=args.sweep_seed,
        epochs=_preset(args, "epochs"),
        out_dir=args.out,
        batch_size=args.batch_size,
        threads=_threads(args),
        run_config=run_config(args),
    )
    print(f"{len(zoo.ok_records)} of {len(zoo)} models ok in {args.out}")
    return 0


def cmd_featurize(args) -> int:
    zoo = load_zoo(args.zoo)
    table = featurize_zoo(zoo, args.kind, threads=_threads(args), records=_split_records(zoo, args))
    table.meta["run_config"] = run_config(args)
    table.write(args.out)
    print(f"{len(table)} rows x {table.n_features} features -> {args.out}")
    return 0


def _parse_params(text: Optional[str]) -> dict:
    if not text:
        return {}
    try:
        params = json.loads(text)
    except ValueError as exc:
        raise UsageError(f"--params is not valid JSON: {exc}") from None
    if not isinstance(params, dict):
        raise UsageError("--params must be a JSON object")
    return params


def cmd_fit(args) -> int:
    table = read_table(args.features)
    try:
        model = ESTIMATORS[args.estimator](**_parse_params(args.params))
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    model.fit_table(table)
    save_model(model, args.out, metadata={"run_config": run_config(args), "n_rows": len(table)})
    print(f"{args.estimator} fit on {len(table)} rows -> {args.out}")
    return 0


def cmd_search(args) -> int:
    table = read_table(args.features)
    model, report = random_search(
        table,
        args.estimator,
        budget=_preset(args, "budget"),
        folds=args.folds,
        search_seed=args.seed,
        threads=_threads(args),
        extra_params=_parse_params(args.params),
    )
    config = run_config(args)
    summary = {k: v for k, v in report.items() if k != "trials"}
    save_model(model, args.out, metadata={"run_config": config, "search": summary})
    report["run_config"] = config
    report_path = args.report or os.path.splitext(args.out)[0] + ".cv.json"
    _write_json(report_path, report)
    print(f"best {args.estimator} config #{report['best_index']}: CV MSE {report['cv_mse_mean']:.6g} -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    table = read_table(args.features)
    report = evaluate(model, table, provenance={"run_config": run_config(args)})
    report.write(args.out)
    print(f"n={report.n} mse={report.mse:.6g} mad={report.mad:.6g} r2={report.r2:.6g} tau={report.kendall_tau:.6g}")
    return 0


def cmd_transfer(args) -> int:
    models = [load_model(p) for p in args.models.split(",")]
    if bool(args.zoos) == bool(args.features):
        raise UsageError("give exactly one of --zoos or --features")
    if args.features:
        tables = [read_table(p) for p in args.features.split(",")]
        names = args.features.split(",")
    else:
        kind = models[0].feature_kind_
        tables, names = [], args.zoos.split(",")
        for path in names:
            zoo = load_zoo(path)
            tables.append(featurize_zoo(zoo, kind, threads=_threads(args), records=_split_records(zoo, args)))
    matrix = transfer_matrix(models, tables)
    base = lambda p: os.path.basename(os.path.normpath(p))  # noqa: E731
    doc = {
        "format_version": 1,
        "metric": "kendall_tau",
        "rows": [base(p) for p in args.models.split(",")],
        "columns": [base(p) for p in names],
        "matrix": matrix.tolist(),
        "run_config": run_config(args),
    }
    _write_json(args.out, doc)
    for name, row in zip(doc["rows"], matrix):
        print(name, " ".join(f"{v:.4f}" for v in row))
    return 0


def default_modifications(seed: int) -> List[ProbeModification]:
    mods = [ProbeModification("scale", factor=c) for c in (1.0, 1e-3, 1e-1, 2.0, 10.0, 100.0)]
    mods.append(ProbeModification("global_permute", mix_bias_weights=True, seed=seed))
    for kind in ("permute_all_layers", "permute_conv_layers", "permute_final_layer"):
        for mix in (True, False):
            mods.append(ProbeModification(kind, mix_bias_weights=mix, seed=seed))
    return mods


def cmd_probe(args) -> int:
    model = load_model(args.model)
    zoo = load_zoo(args.zoo)
    zoo = zoo.subset(_split_records(zoo, args))
    table = invariance_probe(model, zoo, default_modifications(args.seed), args.samples, seed=args.seed)
    _write_json(args.out, {"format_version": 1, "mad": table, "run_config": run_config(args)})
    for label, value in sorted(table.items(), key=lambda kv: -kv[1]):
        print(f"{label:32s} {value:.4f}")
    return 0


def cmd_importance(args) -> int:
    model = load_model(args.model)
    counts = feature_importance(model)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], list(counts).index(kv[0])))
    if args.top:
        ranked = ranked[: args.top]
    doc = {"format_version": 1, "split_counts": dict(ranked), "run_config": run_config(args)}
    if args.out:
        _write_json(args.out, doc)
    for name, count in ranked:
        print(f"{name:32s} {count}")
    return 0


def cmd_report(args) -> int:
    """Collect evaluation reports into one CSV row each."""
    lines = ["report,estimator,feature_kind,n,mse,mad,r2,kendall_tau"]
    for path in args.reports.split(","):
        with open(path, encoding="utf-8") as f:
            try:
                doc = json.load(f)
            except ValueError as exc:
                raise ValidationError(f"{path}: not valid JSON ({exc})") from None
        prov = doc.get("provenance", {})
        try:
            values = [doc["n"], doc["mse"], doc["mad"], doc["r2"], doc["kendall_tau"]]
        except KeyError as exc:
            raise ValidationError(f"{path}: not an evaluation report (missing {exc})") from None
        lines.append(
            ",".join(
                [os.path.basename(path), str(prov.get("estimator", "")), str(prov.get("feature_kind", "")), str(values[0])]
                + [format(v, ".6g") for v in values[1:]]
            )
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weightzoo", description="Predict neural network accuracy from weights.")
    parser.add_argument("--version", action="version", version=f"weightzoo {__version__}")
    parser.add_argument("--threads", type=int, help="worker processes (default: $WEIGHTZOO_THREADS or 1)")
    parser.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    zoo = sub.add_parser("zoo", help="zoo generation").add_subparsers(dest="zoo_command", parser_class=_Parser)
    p = zoo.add_parser("gen", help="train a zoo of networks")
    p.add_argument("--dataset", required=True, help="IDX directory or 'synthetic'")
    p.add_argument("--count", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--sweep-seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arch", choices=("cnn", "mlp"), default="cnn")
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--max-train", type=int, help="reduce an IDX training set to this many images")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--pattern-seed", type=int, default=0, help="synthetic dataset variant")
    p.add_argument("--image-size", type=int, default=16)
    p.add_argument("--samples-per-class", type=int, default=500)
    p.add_argument("--test-samples-per-class", type=int, default=1000)
    p.set_defaults(func=cmd_zoo_gen, command_name="zoo gen")

    p = sub.add_parser("featurize", help="write a feature table for a zoo")
    p.add_argument("--zoo", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--out", required=True)
    _add_split_args(p)
    p.set_defaults(func=cmd_featurize, command_name="featurize")

    p = sub.add_parser("fit", help="fit one estimator configuration")
    p.add_argument("--features", required=True)
    p.add_argument("--estimator", choices=sorted(ESTIMATORS), required=True)
    p.add_argument("--params", help="estimator parameters as a JSON object")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit, command_name="fit")

    p = sub.add_parser("search", help="random search with k-fold cross-validation")
    p.add_argument("--features", required=True)
    p.add_argument("--estimator", choices=sorted(ESTIMATORS), required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--params", help="fixed estimator parameters as a JSON object")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="CV report path (default: <out>.cv.json)")
    p.set_defaults(func=cmd_search, command_name="search")

    p = sub.add_parser("eval", help="evaluate a model on a feature table")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval, command_name="eval")

    p = sub.add_parser("transfer", help="Kendall tau matrix of models across zoos")
    p.add_argument("--models", required=True, help="comma-separated model files")
    p.add_argument("--zoos", help="comma-separated zoo directories")
    p.add_argument("--features", help="comma-separated feature tables (instead of --zoos)")
    p.add_argument("--out", required=True)
    _add_split_args(p)
    p.set_defaults(func=cmd_transfer, command_name="transfer")

    p = sub.add_parser("probe", help="prediction shifts under weight permutations and scaling")
    p.add_argument("--model", required=True)
    p.add_argument("--zoo", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_split_args(p)
    p.set_defaults(func=cmd_probe, command_name="probe")

    p = sub.add_parser("importance", help="split counts per feature of a tree model")
    p.add_argument("--model", required=True)
    p.add_argument("--top", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_importance, command_name="importance")

    p = sub.add_parser("report", help="tabulate evaluation reports as CSV")
    p.add_argument("--reports", required=True, help="comma-separated report files")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report, command_name="report")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "func", None) is None:
            raise UsageError("missing subcommand (try --help)")
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WeightZooError as exc:
        print(f"{exc.category}: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"io: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
