"""Command-line driver: ``synth``, ``cohort``, ``eval`` and ``importance``.

Exit codes: 0 ok, 2 usage/config/schema, 3 I/O, 4 data integrity,
5 evaluation degeneracy.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from datetime import datetime, timezone

from . import __version__, classifiers, plots
from .cohort import (EDA_FEATURES, CohortSummary, build_cohort, summarize_mortality_by,
                     write_cohort_csv, write_eda_csv, write_summary_json)
from .ehr_tables import (TABLE_FILES, RowError, SchemaError, load_tables,
                         validate_referential_integrity)
from .evaluation import (CVOptions, FoldError, MetricError, evaluate, kfold_split,
                         write_mean_roc_csv, write_report_json, write_roc_csv)
from .features import fit_feature_space, labels, transform
from .importance import (load_code_names, permutation_importance, readable_names, top_features,
                         write_importance_csv, write_importance_json)
from .rng import stream
from .synth import ConfigError, SynthConfig, generate, parse_config, write_tables

log = logging.getLogger("mhmort")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTEGRITY, EXIT_DEGENERATE = 0, 2, 3, 4, 5
DATA_DIR_ENV = "MHMORT_DATA_DIR"
MANIFEST = "manifest.json"
# Categories beyond this many are dropped from these EDA charts.
TOP_K_FEATURES = ("religion", "ethnicity", "language")


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digests(paths) -> dict:
    return {os.path.basename(p): _digest(p) for p in sorted(paths)}


def write_manifest(out_dir, command: str, config: dict, seed, inputs=(), outputs=()) -> str:
    path = os.path.join(out_dir, MANIFEST)
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "input_digests": _digests(inputs),
        "output_digests": _digests(outputs),
        "artifact_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _out_dir(path) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot create output directory {path}: {exc}") from exc
    return path


def _data_dir(args) -> str:
    data_dir = args.data_dir or os.environ.get(DATA_DIR_ENV)
    if not data_dir:
        raise CommandError(EXIT_USAGE, f"no --data-dir given and ${DATA_DIR_ENV} is unset")
    return data_dir


def _input_paths(data_dir):
    return [os.path.join(data_dir, name) for name in TABLE_FILES.values()]


def _load_cohort(args):
    data_dir = _data_dir(args)
    try:
        tables = load_tables(data_dir, strict=args.strict)
    except (SchemaError, RowError) as exc:
        raise CommandError(EXIT_USAGE, str(exc)) from exc
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot read {data_dir}: {exc}") from exc
    for kind in TABLE_FILES:
        skipped = getattr(getattr(tables, kind), "skipped", [])
        if skipped:
            log.warning("%s: skipped %d malformed rows (first: %s)", kind, len(skipped), skipped[0])
    violations = validate_referential_integrity(tables)
    if violations:
        if args.strict:
            raise CommandError(EXIT_INTEGRITY,
                               f"{len(violations)} referential-integrity violations, "
                               f"first: {violations[0]}")
        log.warning("%d referential-integrity violations ignored (first: %s)",
                    len(violations), violations[0])
    return data_dir, build_cohort(tables)


# -- commands ----------------------------------------------------------------


def cmd_synth(args) -> int:
    config = SynthConfig()
    inputs = []
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise CommandError(EXIT_IO, f"cannot read config {args.config}: {exc}") from exc
        inputs.append(args.config)
        try:
            config = parse_config(text)
        except ConfigError as exc:
            raise CommandError(EXIT_USAGE, f"config error in {exc}") from exc
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    try:
        config.validate()
    except ConfigError as exc:
        raise CommandError(EXIT_USAGE, f"config error in {exc}") from exc
    out_dir = _out_dir(args.out_dir)
    tables = generate(config)
    try:
        outputs = write_tables(tables, out_dir)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot write tables to {out_dir}: {exc}") from exc
    cfg = asdict(config)
    cfg["signal"] = [list(s) for s in config.signal]
    cfg["distributions"] = {k: [list(c) for c in v] for k, v in config.distributions.items()}
    write_manifest(out_dir, "synth", cfg, config.seed, inputs, outputs)
    log.info("wrote %d patients (%d deaths) to %s", config.n_patients, config.n_deaths, out_dir)
    return EXIT_OK


def cmd_cohort(args) -> int:
    data_dir, cohort = _load_cohort(args)
    out_dir = _out_dir(args.out_dir)
    summary = CohortSummary.of(cohort)
    outputs = [os.path.join(out_dir, "cohort.csv"), os.path.join(out_dir, "cohort_summary.json")]
    write_cohort_csv(cohort, outputs[0])
    write_summary_json(summary, outputs[1])
    for feature in EDA_FEATURES:
        top_k = args.top_k if feature in TOP_K_FEATURES else None
        rows = summarize_mortality_by(cohort, feature, top_k)
        path = os.path.join(out_dir, f"eda_{feature}.csv")
        write_eda_csv(rows, path)
        outputs.append(path)
        if args.figures and rows:
            plots.mortality_bars(rows, feature, os.path.join(out_dir, f"eda_{feature}.png"))
    write_manifest(out_dir, "cohort", {"strict": args.strict, "top_k": args.top_k}, None,
                   _input_paths(data_dir), outputs)
    print(f"patients={summary.n_patients} died={summary.n_died} survived={summary.n_survived} "
          f"mortality_rate={summary.mortality_rate:.4f}")
    return EXIT_OK


def _algorithms(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if names == ["all"]:
        return list(classifiers.ALGORITHMS)
    try:
        return [classifiers.canonical_algorithm(n) for n in names]
    except ValueError as exc:
        raise CommandError(EXIT_USAGE, str(exc)) from exc


def cmd_eval(args) -> int:
    algorithms = _algorithms(args.algorithms)
    if not algorithms:
        raise CommandError(EXIT_USAGE, "no algorithms requested")
    data_dir, cohort = _load_cohort(args)
    out_dir = _out_dir(args.out_dir)
    options = CVOptions(k=args.folds, seed=args.seed, stratified=args.stratified,
                        fit_global=args.fit_global)
    try:
        report = evaluate(algorithms, cohort, options)
    except (FoldError, MetricError, classifiers.TrainingError) as exc:
        raise CommandError(EXIT_DEGENERATE, str(exc)) from exc
    except ValueError as exc:
        raise CommandError(EXIT_USAGE, str(exc)) from exc
    outputs = [os.path.join(out_dir, n) for n in ("eval_report.json", "roc_points.csv",
                                                   "roc_mean.csv")]
    write_report_json(report, outputs[0])
    write_roc_csv(report, outputs[1])
    write_mean_roc_csv(report, outputs[2])
    if args.figures:
        plots.roc_figure(report, os.path.join(out_dir, "roc.png"))
    write_manifest(out_dir, "eval", {"algorithms": algorithms, "folds": args.folds,
                                     "stratified": args.stratified, "fit_global": args.fit_global},
                   args.seed, _input_paths(data_dir), outputs)
    for name, result in report.results.items():
        print(f"{name}\tmean_auc={result.mean_auc:.4f}\t"
              + " ".join(f"{a:.4f}" for a in result.fold_aucs))
    return EXIT_OK


def cmd_importance(args) -> int:
    algorithm = _algorithms(args.model)
    if len(algorithm) != 1:
        raise CommandError(EXIT_USAGE, "--model takes exactly one algorithm")
    code_names = None
    if args.code_names:
        try:
            code_names = load_code_names(args.code_names)
        except OSError as exc:
            raise CommandError(EXIT_IO, f"cannot read {args.code_names}: {exc}") from exc
        except ValueError as exc:
            raise CommandError(EXIT_USAGE, str(exc)) from exc
    data_dir, cohort = _load_cohort(args)
    out_dir = _out_dir(args.out_dir)
    y = labels(cohort)
    try:
        plan = kfold_split(len(cohort), args.holdout_folds, args.seed, y, args.stratified)
    except ValueError as exc:
        raise CommandError(EXIT_USAGE, str(exc)) from exc
    train, test = plan.train_indices(0), plan.test_indices(0)
    train_rows = [cohort[i] for i in train]
    space = fit_feature_space(train_rows)
    X_train = transform(space, train_rows)
    if args.in_sample:
        X_eval, y_eval = X_train, y[train]
    else:
        X_eval, y_eval = transform(space, [cohort[i] for i in test]), y[test]
    spec = classifiers.ModelSpec(algorithm[0], {}, args.seed)
    try:
        model = classifiers.fit(spec, X_train, y[train])
        report = permutation_importance(
            model, X_eval, y_eval, args.n_repeats,
            int(stream(args.seed, "importance").integers(0, 2 ** 63)),
            readable_names(X_eval.column_names, code_names))
    except (MetricError, classifiers.TrainingError) as exc:
        raise CommandError(EXIT_DEGENERATE, str(exc)) from exc
    top = top_features(report, args.top)
    outputs = [os.path.join(out_dir, "importance.csv"), os.path.join(out_dir, "importance.json")]
    write_importance_csv(top, outputs[0])
    write_importance_json(top, outputs[1])
    if args.figures:
        plots.importance_figure(top, os.path.join(out_dir, "importance.png"))
    inputs = _input_paths(data_dir) + ([args.code_names] if args.code_names else [])
    write_manifest(out_dir, "importance",
                   {"model": algorithm[0], "n_repeats": args.n_repeats, "top": args.top,
                    "in_sample": args.in_sample, "holdout_folds": args.holdout_folds},
                   args.seed, inputs, outputs)
    for r in top.rows:
        print(f"{r.mean:+.5f}\t{r.std:.5f}\t{r.feature}")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mhmort", description="30-day mortality prediction for mental-disorder cohorts")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, seed_default=0):
        if data:
            p.add_argument("--data-dir", help=f"input bundle (default: ${DATA_DIR_ENV})")
            p.add_argument("--strict", action="store_true",
                           help="abort on malformed rows (exit 2) or dangling references (exit 4)")
        p.add_argument("--out-dir", required=True)
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--no-figures", dest="figures", action="store_false",
                       help="skip PNG rendering")

    p = sub.add_parser("synth", help="generate a synthetic five-table bundle")
    common(p, data=False, seed_default=None)
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cohort", help="extract the cohort and mortality summaries")
    common(p)
    p.add_argument("--top-k", type=int, default=7,
                   help="categories kept for religion/ethnicity/language")
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("eval", help="cross-validated ROC-AUC")
    common(p)
    p.add_argument("--algorithms", default="all", help="comma list of lr,rf,svm,knn or 'all'")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--fit-global", action="store_true",
                   help="fit encoders on the whole cohort instead of per training fold")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("importance", help="permutation feature importance")
    common(p)
    p.add_argument("--model", default="rf")
    p.add_argument("--n-repeats", type=int, default=5)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--code-names", help="CODE,NAME lookup CSV for readable feature names")
    p.add_argument("--in-sample", action="store_true", help="score importance on training rows")
    p.add_argument("--holdout-folds", type=int, default=5,
                   help="one of this many shuffled folds is held out")
    p.add_argument("--stratified", action="store_true")
    p.set_defaults(func=cmd_importance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"mhmort {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"mhmort {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
