"""Command-line pipeline: train, score, outliers, mds, analyze, report, synth.

All commands read one JSON config file; selected flags override config
values.  Every command writes a manifest echoing the effective config so
a run can be re-executed bit-identically.  Outputs carry no timestamps.

Exit codes: 0 success, 1 internal error, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import synthetic as synth_mod
from .data import (CATEGORICAL, NUMERIC, DataError, Dataset, FeatureSchema,
                   impute_zero, load_csv, stratified_split_indices, write_csv)
from .forest import (ForestError, ForestParams, fit_forest, load_forest,
                     predict, predict_proba, save_forest)
from .mds import MdsError, mds_embed
from .metrics import MetricsError, box_stats, classification_report, \
    linear_regression_r2
from .modelsel import Grid, ModelSelError, grid_search, write_cv_table
from .outlier import OutlierError, OutlierScores, score_dataset
from .proximity import (DEFAULT_MAX_DENSE_N, KINDS, ProximityError,
                        gap_proximity_matrix, oob_proximity_matrix,
                        proximity_matrix, save_proximity,
                        write_proximity_csv)
from .svgplot import (outlier_scatter_svg, profile_svg, quartile_box_svg,
                      xy_scatter_svg)

OUTPUT_ROOT_ENV = "PROXOUT_OUTPUT_ROOT"

USER_ERRORS = (DataError, ForestError, ProximityError, OutlierError,
               MetricsError, ModelSelError, MdsError,
               synth_mod.InvalidSpec, FileNotFoundError, KeyError,
               json.JSONDecodeError)


class CliError(ValueError):
    """Configuration or usage problem; maps to exit code 2."""


class UnknownClass(CliError):
    pass


class MissingReturns(CliError):
    pass


class MissingArtifacts(CliError):
    pass


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def resolve_output_dir(config: dict, override: str | None) -> Path:
    out = override or config.get("output_dir")
    if out is None:
        raise CliError("no output directory (config output_dir or --output-dir)")
    out = Path(out)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def schema_from_config(dataset_cfg: dict) -> FeatureSchema:
    cols = [(name, NUMERIC) for name in dataset_cfg.get("numeric_columns", [])]
    cols += [(name, CATEGORICAL)
             for name in dataset_cfg.get("categorical_columns", [])]
    if not cols:
        raise CliError("dataset config needs numeric_columns and/or "
                       "categorical_columns")
    return FeatureSchema(tuple(cols), dataset_cfg["label_column"])


def load_dataset_from_config(config: dict):
    """Returns (dataset, synthetic bundle or None)."""
    if "dataset" in config:
        cfg = config["dataset"]
        schema = schema_from_config(cfg)
        d = impute_zero(load_csv(cfg["path"], schema))
        return d, None
    if "synthetic" in config:
        spec = synth_mod.SyntheticSpec.from_dict(config["synthetic"])
        bundle = synth_mod.generate_synthetic(spec)
        return bundle.dataset, bundle
    raise CliError("config needs a 'dataset' or 'synthetic' section")


def params_from_config(config: dict, seed: int) -> ForestParams:
    p = dict(config.get("params", {}))
    p.setdefault("seed", seed)
    return ForestParams.from_dict(p)


def _fmt_float(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def write_manifest(path: Path, command: str, config: dict,
                   outputs: list[str], extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "proxout_version": __version__,
        "config": config,
        "outputs": sorted(outputs),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Shared pipeline pieces
# ---------------------------------------------------------------------------

def _proximity(forest, dataset, config):
    prox_cfg = config.get("proximity", {})
    kind = prox_cfg.get("kind", "original")
    if kind not in KINDS:
        raise CliError(f"proximity kind must be one of {KINDS}")
    max_dense_n = int(prox_cfg.get("max_dense_n", DEFAULT_MAX_DENSE_N))
    if kind == "original":
        return proximity_matrix(forest, dataset, max_dense_n=max_dense_n)
    if kind == "oob":
        return oob_proximity_matrix(forest, dataset, max_dense_n=max_dense_n)
    return gap_proximity_matrix(forest, dataset, max_dense_n=max_dense_n)


def _scoring_scope(config: dict, dataset: Dataset, seed: int):
    """Record ids (into the full dataset) that proximity scoring covers."""
    scope = config.get("proximity", {}).get("scope", "full")
    if scope == "full":
        return np.arange(dataset.n), dataset
    train_idx, test_idx = stratified_split_indices(
        dataset, float(config.get("test_fraction", 0.2)), seed)
    if scope == "train":
        return train_idx, dataset.take(train_idx)
    if scope == "test":
        return test_idx, dataset.take(test_idx)
    raise CliError("proximity scope must be full, train, or test")


def _score(forest, dataset, config, seed):
    record_ids, scoped = _scoring_scope(config, dataset, seed)
    prox = _proximity(forest, scoped, config)
    out_cfg = config.get("outliers", {})
    scores = score_dataset(
        prox, scoped.y, scoped.class_names,
        k_sigma=float(out_cfg.get("k_sigma", 2.0)),
        deviation=out_cfg.get("deviation", "mad"),
        anchor=out_cfg.get("anchor", "mean"),
    )
    return record_ids, scoped, prox, scores


def write_scores_csv(path, record_ids, scores: OutlierScores) -> None:
    names = scores.class_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["record_id", "label", "O_own", "flag", "quartile"]
            + [f"O_{name}" for name in names] + ["novelty"])
        own = scores.measure_own()
        for r in range(scores.n):
            writer.writerow(
                [int(record_ids[r]), names[scores.labels[r]],
                 _fmt_float(own[r]), int(scores.flags[r]),
                 int(scores.quartiles[r])]
                + [_fmt_float(scores.measure[r, j]) for j in range(len(names))]
                + [int(scores.novelty[r])])


def read_scores_csv(path):
    """Returns (record_ids, labels, O_own, flags, quartiles, measure, names)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = [c[2:] for c in header if c.startswith("O_") and c != "O_own"]
        rows = list(reader)
    if not rows:
        raise MissingArtifacts(f"{path}: no score rows")
    rid = np.array([int(r[0]) for r in rows])
    labels = [r[1] for r in rows]
    own = np.array([float(r[2]) for r in rows])
    flags = np.array([bool(int(r[3])) for r in rows])
    quart = np.array([int(r[4]) for r in rows])
    measure = np.array([[float(v) for v in r[5:5 + len(names)]] for r in rows])
    return rid, labels, own, flags, quart, measure, names


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(config, out_dir: Path, args) -> list[str]:
    if "synthetic" not in config:
        raise CliError("synth needs a 'synthetic' config section")
    spec = synth_mod.SyntheticSpec.from_dict(config["synthetic"])
    bundle = synth_mod.generate_synthetic(spec)
    write_csv(out_dir / "dataset.csv", bundle.dataset)
    synth_mod.write_returns_csv(out_dir / "returns.csv", bundle.returns_panel)
    synth_mod.write_benchmarks_csv(out_dir / "benchmarks.csv",
                                   bundle.benchmark_panel,
                                   bundle.dataset.class_names)
    synth_mod.write_truth_csv(out_dir / "truth.csv", bundle.is_injected)
    outputs = ["dataset.csv", "returns.csv", "benchmarks.csv", "truth.csv"]
    write_manifest(out_dir / "synth_manifest.json", "synth", config, outputs,
                   extra={"spec": spec.to_dict()})
    return outputs


def cmd_train(config, out_dir: Path, args) -> list[str]:
    seed = int(args.seed if args.seed is not None else config.get("seed", 0))
    dataset, _ = load_dataset_from_config(config)
    train_idx, test_idx = stratified_split_indices(
        dataset, float(config.get("test_fraction", 0.2)), seed)
    train, test = dataset.take(train_idx), dataset.take(test_idx)

    params = params_from_config(config, seed)
    outputs = []
    grid_cfg = config.get("grid", {})
    if grid_cfg.get("enabled", False):
        grid = Grid(
            n_trees_values=tuple(grid_cfg.get("n_trees", Grid().n_trees_values)),
            max_depth_values=tuple(grid_cfg.get("max_depth",
                                                Grid().max_depth_values)),
            max_features_values=tuple(grid_cfg.get("max_features",
                                                   Grid().max_features_values)),
            criterion_values=tuple(grid_cfg.get("criterion",
                                                Grid().criterion_values)),
        )
        cv = grid_search(
            train, grid, k=int(grid_cfg.get("k", 5)), seed=seed,
            scoring=grid_cfg.get("scoring", "accuracy"),
            stride=int(grid_cfg.get("stride", 1)), base_params=params)
        write_cv_table(out_dir / "cv_table.csv", cv)
        outputs.append("cv_table.csv")
        params = cv.best_params(params)

    model = fit_forest(train, params)
    save_forest(out_dir / "model.json", model)
    outputs.append("model.json")

    proba = predict_proba(model, test)
    pred = predict(model, test)
    report = classification_report(test.y, pred, proba)
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append("metrics.json")

    with open(out_dir / "predictions.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "true_label", "predicted_label"]
                        + [f"p_{c}" for c in dataset.class_names])
        for r in range(test.n):
            writer.writerow(
                [int(test_idx[r]), dataset.class_names[test.y[r]],
                 dataset.class_names[pred[r]]]
                + [repr(float(v)) for v in proba[r]])
    outputs.append("predictions.csv")

    write_manifest(out_dir / "train_manifest.json", "train", config, outputs,
                   extra={"seed": seed, "effective_params": params.to_dict(),
                          "n_train": train.n, "n_test": test.n,
                          "accuracy": report.accuracy})
    print(f"train: accuracy={report.accuracy:.4f} "
          f"f1_macro={report.f1_macro:.4f} model={out_dir / 'model.json'}")
    return outputs


def _load_model(config, args):
    path = args.model or config.get("model")
    if path is None:
        raise CliError("no model path (config 'model' or --model)")
    return load_forest(path)


def cmd_score(config, out_dir: Path, args) -> list[str]:
    seed = int(args.seed if args.seed is not None else config.get("seed", 0))
    dataset, _ = load_dataset_from_config(config)
    model = _load_model(config, args)
    record_ids, scoped, prox, scores = _score(model, dataset, config, seed)
    write_scores_csv(out_dir / "scores.csv", record_ids, scores)
    outputs = ["scores.csv"]
    if config.get("proximity", {}).get("save", False):
        save_proximity(out_dir / "proximity.bin", prox)
        write_proximity_csv(out_dir / "proximity.csv", prox,
                            cutoff=float(config.get("proximity", {})
                                         .get("csv_cutoff", 0.0)))
        outputs += ["proximity.bin", "proximity.csv"]
    write_manifest(
        out_dir / "score_manifest.json", "score", config, outputs,
        extra={
            "seed": seed,
            "proximity_kind": prox.kind,
            "k_sigma": scores.k_sigma,
            "deviation": scores.deviation,
            "anchor": scores.anchor,
            "thresholds": {scores.class_names[j]: _fmt_float(scores.thresholds[j])
                           for j in range(scores.n_classes)},
            "outlier_count": int(scores.flags.sum()),
            "novelty_count": int(scores.novelty.sum()),
        })
    print(f"score: {scores.n} records, {int(scores.flags.sum())} flagged")
    return outputs


def cmd_outliers(config, out_dir: Path, args) -> list[str]:
    seed = int(args.seed if args.seed is not None else config.get("seed", 0))
    dataset, _ = load_dataset_from_config(config)
    model = _load_model(config, args)
    record_ids, scoped, prox, scores = _score(model, dataset, config, seed)
    write_scores_csv(out_dir / "scores.csv", record_ids, scores)
    outputs = ["scores.csv"]

    own = scores.measure_own()
    svg = outlier_scatter_svg(own, scores.labels, scores.class_names,
                              scores.flags)
    (out_dir / "outlier_scatter.svg").write_text(svg, encoding="utf-8")
    outputs.append("outlier_scatter.svg")

    flagged = np.nonzero(scores.flags)[0]
    with open(out_dir / "novelty_profiles.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id"]
                        + [f"O_{c}" for c in scores.class_names] + ["novelty"])
        for r in flagged:
            writer.writerow(
                [int(record_ids[r])]
                + [_fmt_float(scores.measure[r, j])
                   for j in range(scores.n_classes)]
                + [int(scores.novelty[r])])
    outputs.append("novelty_profiles.csv")

    if flagged.size:
        finite_own = np.where(np.isfinite(own), own, -np.inf)
        top = flagged[int(np.argmax(finite_own[flagged]))]
        svg = profile_svg(scores.measure[top], scores.class_names,
                          int(record_ids[top]))
        (out_dir / "novelty_profile.svg").write_text(svg, encoding="utf-8")
        outputs.append("novelty_profile.svg")

    write_manifest(
        out_dir / "outliers_manifest.json", "outliers", config, outputs,
        extra={"seed": seed, "k_sigma": scores.k_sigma,
               "deviation": scores.deviation, "anchor": scores.anchor,
               "outlier_count": int(scores.flags.sum()),
               "novelty_count": int(scores.novelty.sum()),
               "flagged_record_ids": [int(record_ids[r]) for r in flagged]})
    print(f"outliers: flagged {flagged.size} of {scores.n} records")
    return outputs


def cmd_mds(config, out_dir: Path, args) -> list[str]:
    seed = int(args.seed if args.seed is not None else config.get("seed", 0))
    dataset, _ = load_dataset_from_config(config)
    model = _load_model(config, args)
    record_ids, scoped, prox, scores = _score(model, dataset, config, seed)

    mds_cfg = config.get("mds", {})
    subset_names = (args.classes.split(",") if args.classes
                    else mds_cfg.get("classes"))
    if subset_names:
        for name in subset_names:
            if name not in scoped.class_names:
                raise UnknownClass(f"class {name!r} not in dataset")
        keep_ids = {scoped.class_names.index(name) for name in subset_names}
        keep = np.nonzero(np.isin(scores.labels, sorted(keep_ids)))[0]
    else:
        keep = np.arange(scores.n)
    sub_values = np.asarray(prox.values)[np.ix_(keep, keep)]
    dist = 1.0 - sub_values
    np.fill_diagonal(dist, 0.0)
    emb = mds_embed(dist, method=mds_cfg.get("method", "smacof"), seed=seed,
                    max_iter=int(mds_cfg.get("max_iter", 300)),
                    tol=float(mds_cfg.get("tol", 1e-6)))

    with open(out_dir / "mds_coordinates.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "x", "y", "label", "outlier_flag"])
        for pos, r in enumerate(keep):
            writer.writerow(
                [int(record_ids[r]),
                 repr(float(emb.coordinates[pos, 0])),
                 repr(float(emb.coordinates[pos, 1])),
                 scoped.class_names[scores.labels[r]],
                 int(scores.flags[r])])
    svg = xy_scatter_svg(
        emb.coordinates[:, 0], emb.coordinates[:, 1],
        scores.labels[keep], scoped.class_names, scores.flags[keep],
        title=f"MDS embedding ({emb.method}, stress={emb.stress:.4f})")
    (out_dir / "mds.svg").write_text(svg, encoding="utf-8")
    outputs = ["mds_coordinates.csv", "mds.svg"]
    write_manifest(out_dir / "mds_manifest.json", "mds", config, outputs,
                   extra={"seed": seed, "method": emb.method,
                          "stress": emb.stress, "n_embedded": int(keep.size)})
    print(f"mds: embedded {keep.size} records, stress={emb.stress:.4f}")
    return outputs


def cmd_analyze(config, out_dir: Path, args) -> list[str]:
    scores_path = args.scores or out_dir / "scores.csv"
    if not Path(scores_path).exists():
        raise MissingArtifacts(f"scores file {scores_path} not found "
                               "(run 'score' or 'outliers' first)")
    rid, labels, own, flags, quart, measure, names = read_scores_csv(scores_path)

    if args.returns and args.benchmarks:
        returns = synth_mod.read_returns_csv(args.returns)
        benchmarks = synth_mod.read_benchmarks_csv(args.benchmarks)
    elif "synthetic" in config:
        spec = synth_mod.SyntheticSpec.from_dict(config["synthetic"])
        bundle = synth_mod.generate_synthetic(spec)
        returns = bundle.returns_panel
        benchmarks = {bundle.dataset.class_names[k]: bundle.benchmark_panel[k]
                      for k in range(bundle.benchmark_panel.shape[0])}
    else:
        raise CliError("analyze needs --returns/--benchmarks files or a "
                       "synthetic config section")

    analysis = {}
    outputs = []
    for name in sorted(set(labels)):
        mask = np.array([lab == name for lab in labels])
        class_quarts = quart[mask]
        if class_quarts.max() < 2:
            analysis[name] = {"skipped": "fewer than 4 records in class"}
            continue
        if name not in benchmarks:
            raise MissingReturns(f"no benchmark series for class {name!r}")
        bench = benchmarks[name]
        per_quartile = {}
        stats_for_svg = {}
        medians = []
        for q in (1, 2, 3, 4):
            members = rid[mask][class_quarts == q]
            r2 = []
            for record in members:
                if record >= returns.shape[0] or np.isnan(returns[record]).any():
                    raise MissingReturns(f"record {record} lacks a return series")
                r2.append(linear_regression_r2(bench, returns[record]).r_squared)
            if not r2:
                continue
            st = box_stats(r2)
            per_quartile[str(q)] = {
                "count": len(r2),
                "median_r2": st.median,
                "box": st.to_dict(),
            }
            stats_for_svg[q] = st
            medians.append(st.median)
        monotone = all(a > b for a, b in zip(medians, medians[1:]))
        analysis[name] = {
            "quartiles": per_quartile,
            "median_r2_by_quartile": medians,
            "monotone_decreasing": monotone,
        }
        svg = quartile_box_svg(stats_for_svg,
                               title=f"R-squared by outlier quartile: {name}")
        svg_name = f"quartile_r2_{name}.svg"
        (out_dir / svg_name).write_text(svg, encoding="utf-8")
        outputs.append(svg_name)

    with open(out_dir / "analysis.json", "w", encoding="utf-8") as fh:
        json.dump(analysis, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append("analysis.json")
    write_manifest(out_dir / "analyze_manifest.json", "analyze", config,
                   outputs, extra={"classes": sorted(analysis)})
    for name in sorted(analysis):
        entry = analysis[name]
        if "median_r2_by_quartile" in entry:
            meds = ", ".join(f"{m:.3f}" for m in entry["median_r2_by_quartile"])
            print(f"analyze: {name} median R2 by quartile: {meds} "
                  f"(monotone={entry['monotone_decreasing']})")
    return outputs


def cmd_report(config, out_dir: Path, args) -> list[str]:
    metrics_path = out_dir / "metrics.json"
    predictions_path = out_dir / "predictions.csv"
    scores_path = out_dir / "scores.csv"
    for p in (metrics_path, predictions_path, scores_path):
        if not p.exists():
            raise MissingArtifacts(f"missing artifact {p}; run train and "
                                   "score/outliers first")
    with open(metrics_path, encoding="utf-8") as fh:
        metrics = json.load(fh)
    misclassified = []
    with open(predictions_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["true_label"] != row["predicted_label"]:
                misclassified.append(int(row["record_id"]))
    rid, labels, own, flags, quart, measure, names = read_scores_csv(scores_path)
    flagged = [int(r) for r in rid[flags]]
    overlap = sorted(set(misclassified) & set(flagged))
    report = {
        "classification": metrics,
        "misclassified_count": len(misclassified),
        "outlier_count": len(flagged),
        "overlap_count": len(overlap),
        "misclassified_records": sorted(misclassified),
        "flagged_records": sorted(flagged),
        "overlap_records": overlap,
    }
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out_dir / "report_manifest.json", "report", config,
                   ["report.json"],
                   extra={"misclassified_count": len(misclassified),
                          "outlier_count": len(flagged),
                          "overlap_count": len(overlap)})
    print(f"report: {len(misclassified)} misclassified, {len(flagged)} "
          f"outliers, overlap {len(overlap)}")
    return ["report.json"]


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "score": cmd_score,
    "outliers": cmd_outliers,
    "mds": cmd_mds,
    "analyze": cmd_analyze,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxout",
        description="Forest-proximity outlier analysis pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--output-dir", default=None,
                       help="overrides config output_dir")
        p.add_argument("--seed", type=int, default=None,
                       help="overrides config seed")
        p.add_argument("--model", default=None,
                       help="model file (overrides config 'model')")
        if name == "mds":
            p.add_argument("--classes", default=None,
                           help="comma-separated class subset")
        if name == "analyze":
            p.add_argument("--scores", default=None)
            p.add_argument("--returns", default=None)
            p.add_argument("--benchmarks", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        out_dir = resolve_output_dir(config, args.output_dir)
        COMMANDS[args.command](config, out_dir, args)
        return 0
    except (CliError, *USER_ERRORS) as exc:
        print(f"proxout {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"proxout {args.command}: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
