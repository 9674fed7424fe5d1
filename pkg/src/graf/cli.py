"""Command-line interface.

Subcommands: train, predict, eval-cv, eval-bv, eval-sc, sensitivity,
subsample, datagen. Every command is fully reproducible under a fixed
--seed; --threads only changes speed, never output. Exit codes: 0 success,
2 usage error, 3 data error, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import datagen as dg
from . import evalsuite, model_io, sensitivity as sens
from .dataset import align_labels, load_csv, load_features_csv, save_csv
from .errors import DataError, GrafError, UsageError
from .forest import SUBSPACE_RULES, ForestConfig, accuracy, predict_scores, \
    train_forest


def _seeded(*entropy) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def parse_int_list(text: str, *, spread: bool = False) -> list[int]:
    """Sweep grammar: "a,b,c", "a..b", "a..b:step", or a single integer.

    Without an explicit step, "a..b" walks by 1, or by about (b-a)/7 when
    `spread` is set (8 curve points); the endpoint b is always included.
    """
    text = text.strip()
    try:
        if "," in text:
            return [int(x) for x in text.split(",")]
        if ".." in text:
            left, _, rest = text.partition("..")
            right, _, step_text = rest.partition(":")
            a, b = int(left), int(right)
            if b < a:
                raise UsageError(f"range {text!r} is reversed")
            if step_text:
                step = int(step_text)
            elif spread:
                step = max(1, round((b - a) / 7))
            else:
                step = 1
            if step < 1:
                raise UsageError(f"range {text!r} has non-positive step")
            vals = list(range(a, b + 1, step))
            if vals[-1] != b:
                vals.append(b)
            return vals
        return [int(text)]
    except ValueError:
        raise UsageError(f"expected integers in {text!r}") from None


def parse_subspace(text: str):
    text = text.strip()
    if text in SUBSPACE_RULES:
        return text
    try:
        return int(text)
    except ValueError:
        raise UsageError(
            f"subspace {text!r} is neither an integer nor one of "
            + ", ".join(SUBSPACE_RULES)) from None


def parse_subspace_list(text: str) -> list:
    if "," in text:
        return [parse_subspace(x) for x in text.split(",")]
    if ".." in text and text.partition("..")[0].strip().lstrip("-").isdigit():
        return parse_int_list(text)
    return [parse_subspace(text)]


def _threads(args) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        env = os.environ.get("GRAF_THREADS", "").strip()
        if env:
            try:
                value = int(env)
            except ValueError:
                raise UsageError(f"GRAF_THREADS={env!r} is not an integer") \
                    from None
        else:
            value = 1
    if value < 1:
        raise UsageError("thread count must be at least 1")
    return value


def _write_rows(path, fieldnames: list[str], rows: list[dict]) -> None:
    def fmt(v):
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([fmt(row[k]) for k in fieldnames])


def _load_model_and_features(model_path, data_path, label_flag=None):
    forest = model_io.load_model(model_path)
    drop = label_flag or forest.label_column or "label"
    features, names = load_features_csv(data_path, drop_column=drop)
    if features.shape[1] != forest.n_features:
        raise DataError(
            f"{data_path}: {features.shape[1]} feature columns, model "
            f"expects {forest.n_features}")
    if forest.feature_names is not None and names != forest.feature_names:
        raise DataError(
            f"{data_path}: feature columns {list(names)} do not match "
            f"the model's {list(forest.feature_names)}")
    return forest, features


def cmd_train(args) -> int:
    dataset = load_csv(args.data, label_column=args.label)
    config = ForestConfig(
        n_trees=args.trees, subspace=parse_subspace(args.subspace),
        min_samples_split=args.min_split, master_seed=args.seed)
    forest = train_forest(dataset, config, threads=_threads(args))
    forest.label_column = args.label
    model_io.save_model(forest, args.out)
    print(f"wrote {args.out}")
    print(f"train_accuracy {accuracy(forest, dataset)!r}")
    return 0


def cmd_predict(args) -> int:
    forest, features = _load_model_and_features(args.model, args.data)
    scores = np.atleast_2d(predict_scores(forest, features))
    pred = np.argmax(scores, axis=1) + 1

    def display(c: int):
        return forest.class_names[c - 1] if forest.class_names else c

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "predicted"]
                        + [f"score_{display(c + 1)}"
                           for c in range(forest.n_classes)])
        for i in range(scores.shape[0]):
            writer.writerow([i, display(int(pred[i]))]
                            + [repr(float(v)) for v in scores[i]])
    print(f"wrote {args.out}")
    return 0


def cmd_eval_cv(args) -> int:
    dataset = load_csv(args.data, label_column=args.label)
    if args.grid_default:
        grids = {k: list(v) for k, v in evalsuite.DEFAULT_GRIDS.items()}
    else:
        grids = {
            "trees": parse_int_list(args.grid_trees),
            "subspace": parse_subspace_list(args.grid_subspace),
            "min_samples_split": parse_int_list(args.grid_min_split),
        }
    table = evalsuite.cv_protocol(
        dataset, grids, seed=args.seed, outer_folds=args.folds,
        inner_folds=args.inner_folds, threads=_threads(args))
    table["grids"] = grids
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(table, sort_keys=True, indent=2,
                            allow_nan=False) + "\n")
    print(f"wrote {args.out}")
    print(f"mean_accuracy {table['mean_accuracy']!r}")
    return 0


def cmd_eval_bv(args) -> int:
    dataset = load_csv(args.data, label_column=args.label)
    sizes = (parse_int_list(args.train_sizes, spread=True)
             if args.train_sizes else None)
    rows = evalsuite.bv_experiment(
        dataset, train_sizes=sizes, trees_list=parse_int_list(args.trees),
        subspace_list=parse_subspace_list(args.subspace),
        n_models=args.models, min_samples_split=args.min_split,
        test_fraction=args.test_fraction, seed=args.seed,
        threads=_threads(args))
    _write_rows(args.out, ["train_size", "trees", "subspace", "models",
                           "test_size", "bias2", "variance", "err", "flags"],
                rows)
    print(f"wrote {args.out}")
    return 0


def cmd_eval_sc(args) -> int:
    dataset = load_csv(args.data, label_column=args.label)
    if args.subspace_range:
        subspaces = parse_subspace_list(args.subspace_range)
    else:
        subspaces = list(range(2, min(dataset.n_features, 10) + 1)) \
            or [dataset.n_features]
    rows = evalsuite.sc_experiment(
        dataset, subspace_list=subspaces, trees=args.trees,
        n_models=args.models, train_size=args.train_size,
        min_samples_split=args.min_split, test_fraction=args.test_fraction,
        seed=args.seed, threads=_threads(args))
    _write_rows(args.out, ["subspace", "model", "trees", "strength",
                           "correlation", "sd", "pe_bound", "flags"], rows)
    print(f"wrote {args.out}")
    return 0


def cmd_sensitivity(args) -> int:
    forest = model_io.load_model(args.model)
    label = args.label or forest.label_column or "label"
    dataset = load_csv(args.data, label_column=label)
    if dataset.n_features != forest.n_features:
        raise DataError(
            f"{args.data}: {dataset.n_features} feature columns, model "
            f"expects {forest.n_features}")
    if forest.class_names:
        dataset = align_labels(dataset, forest.class_names)
    report = sens.compute_sensitivity(
        forest, dataset, rank_order=args.rank, rank_seed=args.rank_seed)
    sens.write_report_csv(report, args.out, class_names=dataset.class_names)
    print(f"wrote {args.out}")
    return 0


def cmd_subsample(args) -> int:
    report = sens.read_report_csv(args.sens)
    rng = _seeded(args.seed, 30)
    idx = sens.subsample(report, args.fraction, args.mode, rng)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index"])
        for i in idx:
            writer.writerow([int(i)])
    print(f"wrote {args.out} ({idx.size} indices)")
    return 0


def cmd_datagen(args) -> int:
    spec = dg.GenSpec(
        kind=args.kind, n_samples=args.n, n_features=args.features,
        n_centroids=args.centroids, n_classes=args.classes,
        sectors=args.sectors, seed=args.seed)
    save_csv(dg.generate(spec), args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graf",
        description="Oblique tree ensembles with globally extended random "
                    "hyperplanes: training, prediction, sensitivity-based "
                    "subsampling, and evaluation experiments.")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub, threads=True):
        sub.add_argument("--seed", type=int, default=0,
                         help="master seed (default 0)")
        if threads:
            sub.add_argument("--threads", type=int, default=None,
                             help="worker threads (default: GRAF_THREADS "
                                  "env var, else 1); never changes output")

    p = commands.add_parser("train", help="train a forest on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--label", default="label", help="label column name")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--subspace", default="sqrt",
                   help="features per tree: integer or log2|sqrt|half|all")
    p.add_argument("--min-split", type=int, default=2, dest="min_split")
    p.add_argument("--out", default="model.graf.json")
    common(p)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("predict",
                            help="write per-sample scores and labels")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    common(p, threads=False)
    p.set_defaults(func=cmd_predict)

    p = commands.add_parser("eval-cv",
                            help="nested cross-validated accuracy")
    p.add_argument("--data", required=True)
    p.add_argument("--label", default="label")
    p.add_argument("--grid-default", action="store_true",
                   help="use the full tuning grids (heavy)")
    p.add_argument("--grid-trees", default="100")
    p.add_argument("--grid-subspace", default="sqrt,half")
    p.add_argument("--grid-min-split", default="2")
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--inner-folds", type=int, default=5)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_eval_cv)

    p = commands.add_parser("eval-bv",
                            help="bias-variance decomposition curves")
    p.add_argument("--data", required=True)
    p.add_argument("--label", default="label")
    p.add_argument("--train-sizes", default=None,
                   help='per-model training sizes, e.g. "200..2500" '
                        '(about 8 points) or "200,500,1000"; default: half '
                        "the training pool")
    p.add_argument("--trees", default="100",
                   help='tree counts, e.g. "2,10,50,100,200"')
    p.add_argument("--subspace", default="half",
                   help="subspace sizes or rules to sweep")
    p.add_argument("--models", type=int, default=10,
                   help="models per configuration (default 10)")
    p.add_argument("--min-split", type=int, default=2, dest="min_split")
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_eval_bv)

    p = commands.add_parser("eval-sc",
                            help="strength/correlation versus subspace size")
    p.add_argument("--data", required=True)
    p.add_argument("--label", default="label")
    p.add_argument("--subspace-range", default=None,
                   help='e.g. "3..10"; default 2..min(d,10)')
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--models", type=int, default=1,
                   help="models per subspace size (default 1)")
    p.add_argument("--train-size", type=int, default=None,
                   help="per-model resample size (default: whole pool)")
    p.add_argument("--min-split", type=int, default=2, dest="min_split")
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_eval_sc)

    p = commands.add_parser("sensitivity",
                            help="per-sample sensitivity report")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label", default=None,
                   help="label column (default: the model's)")
    p.add_argument("--rank", choices=("index", "shuffle"), default="index",
                   help="within-leaf rank order")
    p.add_argument("--rank-seed", type=int, default=0, dest="rank_seed")
    p.add_argument("--out", required=True)
    common(p, threads=False)
    p.set_defaults(func=cmd_sensitivity)

    p = commands.add_parser("subsample",
                            help="draw indices from a sensitivity report")
    p.add_argument("--sens", required=True, help="sensitivity CSV")
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--mode", choices=("uniform", "weighted", "top"),
                   required=True)
    p.add_argument("--out", required=True)
    common(p, threads=False)
    p.set_defaults(func=cmd_subsample)

    p = commands.add_parser("datagen", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=dg.KINDS, required=True)
    p.add_argument("--n", type=int, required=True, help="sample count")
    p.add_argument("--features", type=int, default=2,
                   help="dimensions (rbf only; patterns are 2-D)")
    p.add_argument("--centroids", type=int, default=10, help="rbf blobs")
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--sectors", type=int, default=None,
                   help="pie wedges (default: classes, doubled when < 4)")
    p.add_argument("--out", required=True)
    common(p, threads=False)
    p.set_defaults(func=cmd_datagen)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GrafError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
