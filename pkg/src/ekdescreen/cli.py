"""Command-line pipeline: extract-features -> train -> evaluate, plus predict and cross-validate.

Stages exchange CSV/JSON files so that feature extraction (the slow part) is
done once. Exit codes: 0 ok, 1 other error, 2 extraction, 3 training,
4 schema, 5 cross-validation, 64 usage.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import errors
from .classifier import FitConfig, fit, load_model, save_model, wald_ci
from .evaluation import SplitPlan, cross_validate, density_threshold, roc, split
from .features import (
    FeatureTable,
    extract,
    extract_batch,
    fmt17,
    read_feature_csv,
    write_feature_csv,
    write_skip_log,
)
from .imaging import flatten, load_gray_image, read_manifest
from .kde import fit_kde
from .reports import (
    stage_report,
    write_density_csv,
    write_density_dump,
    write_json,
    write_roc_csv,
    write_scatter_csv,
)

log = logging.getLogger("ekdescreen")

EXIT_OK, EXIT_ERROR, EXIT_EXTRACT, EXIT_TRAIN, EXIT_SCHEMA, EXIT_CV, EXIT_USAGE = 0, 1, 2, 3, 4, 5, 64


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    manifest_path: Optional[str] = None
    output_dir: str = "."
    seed: int = 0
    stride: int = 1
    train_fraction: float = 0.70
    folds: int = 10
    stratified: bool = True
    threshold: float = 0.5
    threshold_mode: str = "fixed"
    ridge_lambda: float = 0.0
    grid_points: int = 512
    log_level: str = "WARNING"
    workers: int = 1
    level: float = 0.95
    dump_densities: bool = False

    def validate(self) -> "RunConfig":
        if self.seed < 0:
            raise UsageError("seed must be a nonnegative integer")
        if self.stride < 1:
            raise UsageError("stride must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise UsageError("train fraction must be in (0, 1)")
        if self.folds < 2:
            raise UsageError("folds must be >= 2")
        if not 0 < self.threshold < 1:
            raise UsageError("threshold must be in (0, 1)")
        if self.threshold_mode not in ("fixed", "density-mode"):
            raise UsageError("threshold mode must be 'fixed' or 'density-mode'")
        if self.ridge_lambda < 0:
            raise UsageError("ridge must be >= 0")
        if self.grid_points < 2:
            raise UsageError("grid points must be >= 2")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        if not 0 < self.level < 1:
            raise UsageError("level must be in (0, 1)")
        return self

    @property
    def plan(self) -> SplitPlan:
        return SplitPlan(self.seed, self.train_fraction, self.folds, self.stratified)

    @property
    def fit_config(self) -> FitConfig:
        return FitConfig(ridge=self.ridge_lambda, threshold=self.threshold)

    @property
    def out(self) -> Path:
        p = Path(self.output_dir)
        p.mkdir(parents=True, exist_ok=True)
        return p


def _coerce(name: str, raw: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if "bool" in str(kind):
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if "int" in str(kind):
            return int(raw)
        if "float" in str(kind):
            return float(raw)
    except ValueError:
        raise UsageError(f"bad value for {name}: {raw!r}") from None
    return raw.strip()


def load_config_file(path) -> dict:
    """Key-value settings from the [run] section of an INI file."""
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise UsageError(f"cannot read config file {path}")
    if not cp.has_section("run"):
        raise UsageError(f"{path}: missing [run] section")
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for key, raw in cp.items("run"):
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"{path}: unknown setting {key}")
        out[key] = _coerce(key, raw)
    return out


# --- stage implementations ------------------------------------------------------------------


def _stage_indices(table: FeatureTable, config: RunConfig) -> dict:
    """Row indices per stage: split hints from the manifest if present, else the seeded plan."""
    hints = [r.split for r in table.rows]
    if any(hints):
        train = np.array([i for i, h in enumerate(hints) if h == "train"], dtype=np.int64)
        test = np.array([i for i, h in enumerate(hints) if h == "test"], dtype=np.int64)
    else:
        train, test = split(table, config.plan)
    return {"train": train, "test": test}


def cmd_extract(config: RunConfig) -> Path:
    if not config.manifest_path:
        raise UsageError("a manifest is required (--manifest)")
    manifest = read_manifest(config.manifest_path, config.seed)
    table = extract_batch(manifest, config.stride, config.workers)
    out = config.out
    path = out / "features.csv"
    write_feature_csv(table, path)
    write_skip_log(table, out / "skipped.csv")
    summary = {str(k): v for k, v in table.per_class_summary.items()}
    if len(summary) == 2:
        hb = [(summary[c]["h"]["min"], summary[c]["h"]["max"]) for c in ("0", "1")]
        summary["h_bounds_identical"] = hb[0] == hb[1]
    write_json(summary, out / "feature_summary.json")
    if config.dump_densities:
        ddir = out / "densities"
        ddir.mkdir(exist_ok=True)
        for r in table.rows:
            model = fit_kde(flatten(load_gray_image(r.path), config.stride))
            write_density_dump(model, ddir / f"case_{r.case_id:06d}.csv", config.grid_points)
    log.info("extracted %d cases, skipped %d", len(table.rows), len(table.skipped))
    return path


def train_model(table: FeatureTable, config: RunConfig):
    """Fit on the training stage; returns (model, training row indices)."""
    train = _stage_indices(table, config)["train"]
    if train.size == 0:
        raise errors.SingleClassData("no training rows")
    sub = table.subset(train)
    model = fit(sub, config.fit_config)
    if config.threshold_mode == "density-mode":
        probs = model.predict_proba(sub.X)
        model = model.with_threshold(density_threshold(probs[sub.y == 1], config.grid_points))
    return model, train


def cmd_train(config: RunConfig, features_path) -> Path:
    table = read_feature_csv(features_path)
    model, train = train_model(table, config)
    sub = table.subset(train)
    out = config.out
    save_model(model, out / "model.json")
    try:
        ci = wald_ci(model, sub, config.level).as_dict()
    except errors.SingularInformation as exc:
        ci = {"error": str(exc)}
    write_json(ci, out / "coefficients_ci.json")
    fi = model.fit_info
    write_json(
        {
            "n_train": int(train.size),
            "iterations": fi.iterations,
            "log_likelihood": fi.log_likelihood,
            "converged": fi.converged,
            "ridge": fi.ridge,
            "threshold": model.threshold,
            "threshold_mode": config.threshold_mode,
        },
        out / "fit_report.json",
    )
    return out / "model.json"


def _read_scores(path):
    """`case_id,label,probability[,split]` rows."""
    ids, labels, probs, stages = [], [], [], []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        need = {"label", "probability"}
        if not need <= set(reader.fieldnames or ()):
            raise errors.SchemaMismatch(f"{path}: scores file needs columns label,probability")
        for i, rec in enumerate(reader):
            ids.append(int(rec.get("case_id") or i))
            labels.append(int(rec["label"]))
            probs.append(float(rec["probability"]))
            stages.append((rec.get("split") or "").strip() or "all")
    return np.array(ids), np.array(labels), np.array(probs), stages


def _write_stage_files(out: Path, stage: str, y, probs, config: RunConfig):
    try:
        write_roc_csv(roc(y, probs), out / f"roc_{stage}.csv")
    except errors.SingleClassData:
        log.warning("stage %s has a single class; no ROC written", stage)
    write_density_csv(y, probs, out / f"prediction_density_{stage}.csv", config.grid_points)


def cmd_evaluate(config: RunConfig, model_path=None, features_path=None, scores_path=None) -> Path:
    out = config.out
    reports = []
    if scores_path is not None:
        _, y, probs, stages = _read_scores(scores_path)
        threshold = config.threshold
        if model_path is not None:
            threshold = load_model(model_path).threshold
        for stage in sorted(set(stages), key=("train", "test", "all").index):
            sel = np.array([s == stage for s in stages])
            reports.append(stage_report(stage, y[sel], probs[sel], threshold, config.level))
            _write_stage_files(out, stage, y[sel], probs[sel], config)
    else:
        if model_path is None or features_path is None:
            raise UsageError("evaluate needs --model and --features, or --scores")
        model = load_model(model_path)
        table = read_feature_csv(features_path)
        probs = model.predict_proba(table.X)
        y = table.y
        for stage, idx in _stage_indices(table, config).items():
            if idx.size == 0:
                continue
            reports.append(stage_report(stage, y[idx], probs[idx], model.threshold, config.level))
            _write_stage_files(out, stage, y[idx], probs[idx], config)
        write_scatter_csv(table.X, y, out / "scatter.csv")
    path = out / "metrics.json"
    write_json({"reports": reports}, path)
    return path


def cmd_predict(config: RunConfig, model_path, features_path=None, images=()) -> Path:
    model = load_model(model_path)
    out = config.out / "predictions.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("case_id", "path", "probability", "decision"))
        if features_path is not None:
            table = read_feature_csv(features_path)
            probs = model.predict_proba(table.X)
            for r, p, d in zip(table.rows, probs, model.decide(probs)):
                w.writerow((r.case_id, r.path, fmt17(p), int(d)))
        for i, img_path in enumerate(images):
            phi = extract(load_gray_image(img_path), config.stride, case_id=i, path=str(img_path))
            p = float(model.predict_proba(phi.phi)[0])
            w.writerow((i, img_path, fmt17(p), int(p >= model.threshold)))
    return out


def cmd_cross_validate(config: RunConfig, features_path) -> Path:
    table = read_feature_csv(features_path)
    cv = cross_validate(table, config.plan, config.fit_config)
    doc = {
        "folds": [
            {
                "fold": f.fold,
                "n_train": f.n_train,
                "n_test": f.n_test,
                "confusion": f.confusion.as_dict(),
                "metrics": {k: ("undefined" if v is None else v) for k, v in f.report.as_dict().items()},
                "coefficients": {"intercept": f.model.intercept, "mu": f.model.w_mu, "sigma": f.model.w_sigma},
            }
            for f in cv.folds
        ],
        "aggregate": cv.aggregate,
        "plan": {"seed": config.seed, "folds": config.folds, "stratified": config.stratified},
    }
    path = config.out / "cross_validation.json"
    write_json(doc, path)
    return path


# --- argument parsing -----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run settings (override --config)")
    g.add_argument("--config", help="INI file with a [run] section of key = value settings")
    g.add_argument("--out-dir", dest="output_dir")
    g.add_argument("--seed", type=int)
    g.add_argument("--stride", type=int)
    g.add_argument("--train-fraction", type=float)
    g.add_argument("--folds", type=int)
    g.add_argument("--no-stratify", dest="stratified", action="store_const", const=False)
    g.add_argument("--threshold", type=float)
    g.add_argument("--threshold-mode", choices=("fixed", "density-mode"))
    g.add_argument("--ridge", dest="ridge_lambda", type=float)
    g.add_argument("--grid-points", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--level", type=float, help="confidence level for intervals and bounds")
    g.add_argument("--log-level")

    p = _Parser(prog="ekdescreen", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("extract-features", parents=[common], help="manifest -> features.csv")
    s.add_argument("--manifest", dest="manifest_path")
    s.add_argument("--dump-densities", action="store_const", const=True, help="write per-image x,density CSVs")

    s = sub.add_parser("train", parents=[common], help="features.csv -> model.json + CIs")
    s.add_argument("--features", required=True)

    s = sub.add_parser("evaluate", parents=[common], help="metrics JSON, ROC, density and scatter CSVs")
    s.add_argument("--model")
    s.add_argument("--features")
    s.add_argument("--scores", help="case_id,label,probability[,split] CSV instead of model + features")

    s = sub.add_parser("predict", parents=[common], help="probabilities for features or images")
    s.add_argument("--model", required=True)
    s.add_argument("--features")
    s.add_argument("images", nargs="*")

    s = sub.add_parser("cross-validate", parents=[common], help="k-fold CV on a features table")
    s.add_argument("--features", required=True)
    return p


def resolve_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig(**values).validate()


def run(args) -> int:
    config = resolve_config(args)
    logging.basicConfig(level=config.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    if args.command == "extract-features":
        print(cmd_extract(config))
    elif args.command == "train":
        print(cmd_train(config, args.features))
    elif args.command == "evaluate":
        print(cmd_evaluate(config, args.model, args.features, args.scores))
    elif args.command == "predict":
        if not args.features and not args.images:
            raise UsageError("predict needs --features or image paths")
        print(cmd_predict(config, args.model, args.features, args.images))
    elif args.command == "cross-validate":
        print(cmd_cross_validate(config, args.features))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except UsageError as exc:
        print(f"ekdescreen: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except errors.AllCasesFailed as exc:
        print(f"ekdescreen: extraction failed: {exc}", file=sys.stderr)
        return EXIT_EXTRACT
    except errors.Diverged as exc:
        print(f"ekdescreen: training diverged: {exc} (hint: --ridge 1e-6)", file=sys.stderr)
        return EXIT_TRAIN
    except errors.SingleClassData as exc:
        code = EXIT_CV if args.command == "cross-validate" else EXIT_TRAIN
        print(f"ekdescreen: SingleClassData: {exc}", file=sys.stderr)
        return code
    except (errors.SchemaMismatch, errors.MalformedRow) as exc:
        print(f"ekdescreen: schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except errors.TooFewCases as exc:
        print(f"ekdescreen: too few cases: {exc}", file=sys.stderr)
        return EXIT_CV
    except errors.EkdeError as exc:
        print(f"ekdescreen: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
