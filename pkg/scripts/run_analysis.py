#!/usr/bin/env python
"""
Batch command-line surface for the multi-label meta-analysis toolkit.

Each subcommand reads its inputs, computes everything in memory and only
then writes its artifacts into the output directory. Every CSV artifact
starts with a '# provenance:' line and every JSON artifact has a
"provenance" key holding the run configuration, the seed and the
meta-feature catalogue version.

Exit codes: 0 success, 1 input or contract error (a JSON error report is
written to stderr), 2 usage error.

Example:
    python scripts/run_analysis.py meta-features --dataset data/emotions.arff --labels 6
"""

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.data_loader import DataLoader, ResultsTable, dataset_summary, read_csv_artifact  # noqa: E402
from src.evaluation import (  # noqa: E402
    ALL_MEASURES,
    apply_threshold,
    evaluate_all,
    load_predictions,
    pcut_threshold,
    predicted_cardinality,
)
from src.exceptions import ContractError, MlcMetaError  # noqa: E402
from src.meta_analyzer import MetaAnalyzer  # noqa: E402
from src.meta_features import FeatureCatalogue, MetaFeatureExtractor, load_catalogue  # noqa: E402
from src.pct import MODES, DataTable, LearnParams, Tree, index_rows, learn  # noqa: E402
from src.registry import Registry, load_registry  # noqa: E402
from src.settings import RunConfig, load_run_config  # noqa: E402
from src.stratification import (  # noqa: E402
    GENERATOR,
    iterative_stratified_folds,
    stratified_subsample,
)
from src.tree_export import to_dot, to_text, tree_from_json, tree_to_dict  # noqa: E402
from src.tuning_analyzer import TuningAnalyzer  # noqa: E402

logger = logging.getLogger("run_analysis")

# argparse destinations holding input paths, checked for existence before a run
INPUT_ROLES = ("dataset", "test", "predictions", "table", "tree", "meta", "results", "success")


def _jsonable(value: Any) -> Any:
    """Recursively convert numpy/pandas values; NaN becomes null."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class ArtifactWriter:
    """Collect artifacts in memory and write them atomically at the end of a run."""

    def __init__(self, config: RunConfig, catalogue_version: str):
        """
        Initialize ArtifactWriter.

        Parameters
        ----------
        config : RunConfig
            Resolved configuration (recorded as provenance)
        catalogue_version : str
            Version of the meta-feature catalogue in use
        """
        self.config = config
        self.provenance = {
            "command": config.command,
            "config": _jsonable(config.provenance()),
            "seed": config.seed,
            "catalogue_version": catalogue_version,
        }
        self.files: Dict[str, str] = {}

    def csv(self, name: str, frame: pd.DataFrame, index: bool = True) -> None:
        if "csv" not in self.config.formats:
            return
        header = "# provenance: " + json.dumps(self.provenance, sort_keys=True) + "\n"
        self.files[name] = header + frame.to_csv(index=index, lineterminator="\n")

    def json(self, name: str, document: Dict) -> None:
        if "json" not in self.config.formats:
            return
        payload = {"provenance": self.provenance}
        payload.update(_jsonable(document))
        self.files[name] = json.dumps(payload, indent=2, allow_nan=False) + "\n"

    def text(self, name: str, content: str) -> None:
        self.files[name] = content

    def tree(self, stem: str, tree: Tree, **extra) -> None:
        """JSON, DOT and text renderings of a tree."""
        document = tree_to_dict(tree)
        document.update(extra)
        self.json(f"{stem}.json", document)
        self.text(f"{stem}.dot", to_dot(tree))
        self.text(f"{stem}.txt", to_text(tree))

    def _stage(self, out_dir: Path, name: str, suffix: str) -> str:
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=suffix)
        os.close(fd)
        return tmp

    def commit(self) -> List[Path]:
        """
        Write every collected artifact, all or nothing.

        Artifacts are staged as temporary files first, then renamed over
        their targets. If any rename fails, the targets already replaced
        get their previous contents back and no staged file is left behind.
        """
        out_dir = Path(self.config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        names = sorted(self.files)
        staged: Dict[str, str] = {}
        backups: Dict[str, Optional[str]] = {}
        try:
            for name in names:
                staged[name] = self._stage(out_dir, name, ".tmp")
                with open(staged[name], "w", encoding="utf-8", newline="") as handle:
                    handle.write(self.files[name])
            for name in names:
                target = out_dir / name
                backups[name] = None
                if target.exists():
                    backups[name] = self._stage(out_dir, name, ".bak")
                    os.replace(target, backups[name])
                os.replace(staged[name], target)
                del staged[name]
        except OSError:
            logger.error(f"Writing artifacts to {out_dir} failed; restoring previous files")
            for name, backup in backups.items():
                target = out_dir / name
                if backup is not None:
                    os.replace(backup, target)
                elif name not in staged and target.exists():
                    target.unlink()
            for tmp in staged.values():
                Path(tmp).unlink(missing_ok=True)
            raise
        for backup in backups.values():
            if backup is not None:
                Path(backup).unlink()
        written = [out_dir / name for name in names]
        logger.info(f"Wrote {len(written)} artifacts to {out_dir}")
        return written


class RunContext:
    """Shared state of one invocation."""

    def __init__(self, args: argparse.Namespace, config: RunConfig):
        self.args = args
        self.config = config
        self.loader = DataLoader()
        self.registry: Registry = load_registry(config.registry)
        catalogue: FeatureCatalogue = load_catalogue(config.catalogue)
        self.catalogue = catalogue.with_extended() if config.extended_features else catalogue
        self.writer = ArtifactWriter(config, self.catalogue.version)
        self.progress = bool(getattr(args, "progress", False))

    def results(self, with_success: bool = False) -> ResultsTable:
        success = getattr(self.args, "success", None) if with_success else None
        results = self.loader.load_results(self.args.results, success)
        results.validate_rates(self.registry.is_rate)
        return results

    def meta(self) -> pd.DataFrame:
        return self.loader.load_meta_matrix(self.args.meta)

    def learn_params(self) -> LearnParams:
        return LearnParams(
            f_level=self.config.f_level,
            min_leaf=self.config.min_leaf,
            max_depth=self.config.max_depth,
        )


def _cmd_meta_features(ctx: RunContext) -> None:
    datasets = [ctx.loader.load_dataset(p, ctx.args.labels, role="train") for p in ctx.args.dataset]
    extractor = MetaFeatureExtractor(
        ctx.catalogue, ctx.config.dependence_alpha, ctx.config.small_set_threshold
    )
    matrix, diagnostics = extractor.extract_many(datasets)
    ctx.writer.csv("meta_features.csv", matrix)
    ctx.writer.json("meta_features.json", extractor.to_json_document(matrix, diagnostics))


def _cmd_summarize(ctx: RunContext) -> None:
    rows = []
    for path in ctx.args.dataset:
        train = ctx.loader.load_dataset(path, ctx.args.labels, role="train")
        test = None
        if ctx.args.test:
            test = ctx.loader.load_dataset(ctx.args.test, ctx.args.labels, role="test")
        for part, summary in dataset_summary(train, test).items():
            rows.append({"dataset": train.name, "part": part, **summary.to_dict()})
    frame = pd.DataFrame(rows)
    ctx.writer.csv("summary.csv", frame, index=False)
    ctx.writer.json("summary.json", {"summaries": rows})
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))


def _cmd_evaluate(ctx: RunContext) -> None:
    pred = load_predictions(ctx.args.predictions)
    measures = ctx.args.measure if ctx.args.measure else list(ALL_MEASURES)
    report = evaluate_all(pred, ctx.args.train_cardinality, measures)
    frame = pd.DataFrame({"measure": list(report.values), "value": list(report.values.values())})
    ctx.writer.csv("evaluation.csv", frame, index=False)
    ctx.writer.json("evaluation.json", report.to_dict())


def _cmd_pcut(ctx: RunContext) -> None:
    pred = load_predictions(ctx.args.predictions)
    if pred.scores is None:
        raise ContractError("PCut needs relevance scores in the prediction file")
    grid = ctx.args.grid
    threshold = pcut_threshold(ctx.args.train_cardinality, pred.scores, grid)
    bipartition = apply_threshold(pred.scores, threshold)
    labels = [f"pred_{j}" for j in range(bipartition.shape[1])]
    ctx.writer.csv("bipartition.csv", pd.DataFrame(bipartition, columns=labels), index=False)
    ctx.writer.json(
        "pcut.json",
        {
            "threshold": threshold,
            "train_cardinality": ctx.args.train_cardinality,
            "predicted_cardinality": float(predicted_cardinality(pred.scores, [threshold])[0]),
        },
    )


def _cmd_stratify(ctx: RunContext) -> None:
    ds = ctx.loader.load_dataset(ctx.args.dataset[0], ctx.args.labels)
    seed = ctx.config.seed
    if ctx.args.subsample is not None:
        indices = stratified_subsample(ds, ctx.args.subsample, seed, mode=ctx.args.mode)
        ctx.writer.csv("subsample.csv", pd.DataFrame({"example_index": indices}), index=False)
        ctx.writer.json(
            "subsample.json",
            {"size": len(indices), "seed": seed, "mode": ctx.args.mode, "generator": GENERATOR},
        )
        return
    assignment = iterative_stratified_folds(ds, ctx.args.folds, seed, mode=ctx.args.mode)
    ctx.writer.csv("folds.csv", assignment.to_frame(), index=False)
    ctx.writer.json(
        "folds.json",
        {
            "k": assignment.k,
            "seed": assignment.seed,
            "mode": assignment.mode,
            "generator": assignment.generator,
            "fold_sizes": assignment.fold_sizes(),
        },
    )


def _cmd_tree_learn(ctx: RunContext) -> None:
    table = DataTable.from_csv(ctx.args.table, ctx.args.targets or [], ctx.args.id)
    tree = learn(table, ctx.args.mode, ctx.learn_params())
    ctx.writer.tree("tree", tree)


def _cmd_tree_predict(ctx: RunContext) -> None:
    tree = tree_from_json(Path(ctx.args.tree).read_text(encoding="utf-8"))
    frame = index_rows(read_csv_artifact(ctx.args.table), ctx.args.id or None)
    ctx.writer.csv("predictions.csv", tree.predict_frame(frame))


def _cmd_landscape(ctx: RunContext) -> None:
    analyzer = MetaAnalyzer(ctx.registry, show_progress=ctx.progress)
    result = analyzer.landscape(
        ctx.meta(),
        ctx.results(),
        ctx.config.measures,
        k_top=ctx.config.k_top,
        f_level=ctx.config.f_level,
        min_leaf=ctx.config.min_leaf,
        max_depth=ctx.config.max_depth,
    )
    ctx.writer.tree("landscape_tree", result.tree, metadata=result.metadata, excluded=result.excluded)
    ctx.writer.csv("landscape_counts.csv", result.counts, index=False)
    ctx.writer.csv("landscape_dominant.csv", result.dominant, index=False)


def _meta_model(ctx: RunContext, target_kind: str, stem: str) -> None:
    analyzer = MetaAnalyzer(ctx.registry, show_progress=ctx.progress)
    md = analyzer.assemble(
        ctx.meta(),
        ctx.results(),
        ctx.config.measure,
        ctx.args.methods,
        target_kind,
        allow_missing=ctx.config.allow_missing,
    )
    tree, report = analyzer.fit(md, ctx.config.f_grid, ctx.config.min_leaf, ctx.config.max_depth)
    ctx.writer.csv("meta_dataset.csv", md.to_frame())
    ctx.writer.csv("loo_report.csv", report.per_f)
    document = report.to_dict()
    document["excluded"] = [{"dataset": d, "method": m, "measure": q} for d, m, q in md.excluded]
    ctx.writer.json("loo_report.json", document)
    ctx.writer.tree(stem, tree)


def _cmd_perf_model(ctx: RunContext) -> None:
    _meta_model(ctx, "scores", "perf_model_tree")


def _cmd_best_method(ctx: RunContext) -> None:
    _meta_model(ctx, "best", "best_method_tree")


def _cmd_tune_or_not(ctx: RunContext) -> None:
    analyzer = TuningAnalyzer(ctx.registry, show_progress=ctx.progress)
    result = analyzer.tune_or_not(
        ctx.meta(),
        ctx.results(),
        ctx.config.measure,
        f_grid=ctx.config.f_grid,
        min_leaf=ctx.config.min_leaf,
        max_depth=ctx.config.max_depth,
        allow_missing=ctx.config.allow_missing,
        difference_measures=ctx.args.difference_measures or ctx.config.measures,
    )
    ctx.writer.csv("tune_meta_dataset.csv", result.meta_dataset.to_frame())
    ctx.writer.csv("loo_report.csv", result.report.per_f)
    document = result.report.to_dict()
    document["quality"] = result.quality
    ctx.writer.json("loo_report.json", document)
    ctx.writer.json("differences.json", {"differences": result.differences})
    ctx.writer.tree("tune_tree", result.tree)


def _cmd_rsed(ctx: RunContext) -> None:
    analyzer = TuningAnalyzer(ctx.registry)
    if ctx.args.results:
        results = ctx.results(with_success=True)
    else:
        results = ctx.loader.load_success_log(ctx.args.success)
    report = analyzer.rsed(results)
    ctx.writer.csv("rsed_cells.csv", report.cells, index=False)
    ctx.writer.csv("rsed_methods.csv", report.method_quartiles())
    ctx.writer.json("rsed.json", report.to_dict())


def _cmd_improvement(ctx: RunContext) -> None:
    analyzer = TuningAnalyzer(ctx.registry)
    results = ctx.results()
    table, _ = analyzer.improvements(results, ctx.config.measure)
    histograms = analyzer.improvement_histograms(results, ctx.config.measure, bins=ctx.args.bins)
    ctx.writer.csv("improvement.csv", table, index=False)
    ctx.writer.json("improvement_histograms.json", histograms)


HANDLERS: Dict[str, Callable[[RunContext], None]] = {
    "meta-features": _cmd_meta_features,
    "summarize": _cmd_summarize,
    "evaluate": _cmd_evaluate,
    "pcut": _cmd_pcut,
    "stratify": _cmd_stratify,
    "tree-learn": _cmd_tree_learn,
    "tree-predict": _cmd_tree_predict,
    "landscape": _cmd_landscape,
    "perf-model": _cmd_perf_model,
    "best-method": _cmd_best_method,
    "tune-or-not": _cmd_tune_or_not,
    "rsed": _cmd_rsed,
    "improvement": _cmd_improvement,
}


def _csv_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file whose keys mirror these flags")
    common.add_argument("--output-dir", help="Artifact directory (env MLCMETA_OUTPUT_DIR)")
    common.add_argument("--formats", type=_csv_list, help="Subset of csv,json")
    common.add_argument("--seed", type=int, help="Seed for all randomness")
    common.add_argument("--registry", help="Method/measure registry file")
    common.add_argument("--catalogue", help="Meta-feature catalogue file")
    common.add_argument("--progress", action="store_true", help="Show progress bars")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="Warnings and errors only")

    learning = argparse.ArgumentParser(add_help=False)
    learning.add_argument("--f-grid", type=_float_list, help="F-test levels for model selection")
    learning.add_argument("--f-level", type=float, help="F-test level of a single tree")
    learning.add_argument("--min-leaf", type=int, help="Minimum rows per leaf")
    learning.add_argument("--max-depth", type=int, help="Depth cap (default unlimited)")

    meta_inputs = argparse.ArgumentParser(add_help=False)
    meta_inputs.add_argument("--meta", required=True, help="Meta-feature matrix CSV")
    meta_inputs.add_argument("--results", required=True, help="Results table CSV")
    meta_inputs.add_argument("--allow-missing", action="store_true", default=None,
                             help="Drop datasets with missing score cells")

    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    def dataset_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--dataset", required=True, action="append", help="ARFF or CSV dataset")
        p.add_argument(
            "--labels", required=True, help="Label count, XML label file or comma separated names"
        )

    p = sub.add_parser("meta-features", parents=[common], help="Compute catalogue meta features")
    dataset_args(p)
    p.add_argument("--extended-features", action="store_true", default=None)
    p.add_argument("--dependence-alpha", type=float)
    p.add_argument("--small-set-threshold", type=int)

    p = sub.add_parser("summarize", parents=[common], help="Dataset properties table")
    dataset_args(p)
    p.add_argument("--test", help="Test part of the dataset")

    p = sub.add_parser("evaluate", parents=[common], help="Evaluation measures from a prediction file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--train-cardinality", type=float)
    p.add_argument("--measure", type=_csv_list, help="Measures to compute (default all)")

    p = sub.add_parser("pcut", parents=[common], help="PCut threshold for a score matrix")
    p.add_argument("--predictions", required=True)
    p.add_argument("--train-cardinality", type=float, required=True)
    p.add_argument(
        "--grid", type=_float_list, help="Candidate thresholds (default: distinct scores, 0 and 1)"
    )

    p = sub.add_parser("stratify", parents=[common], help="Stratified folds or subsample")
    dataset_args(p)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--subsample", type=int, help="Exact subsample size instead of folds")
    p.add_argument("--mode", choices=("labels", "labelsets"), default="labels")

    p = sub.add_parser("tree-learn", parents=[common, learning], help="Learn a PCT from a CSV table")
    p.add_argument("--table", required=True)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--targets", type=_csv_list, help="Target columns")
    p.add_argument("--id", help="Row id column")

    p = sub.add_parser("tree-predict", parents=[common], help="Predict with a tree JSON document")
    p.add_argument("--tree", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--id", help="Row id column")

    p = sub.add_parser(
        "landscape", parents=[common, learning, meta_inputs], help="Annotated clustering tree"
    )
    p.add_argument("--measure", type=_csv_list, help="Measures to annotate")
    p.add_argument("--k-top", type=int)

    for name, help_text in (
        ("perf-model", "Multi-target performance model"),
        ("best-method", "Best-method classification model"),
    ):
        p = sub.add_parser(name, parents=[common, learning, meta_inputs], help=help_text)
        p.add_argument("--measure", help="Measure of the targets")
        p.add_argument("--methods", type=_csv_list, help="Methods (default: all scored)")

    p = sub.add_parser(
        "tune-or-not", parents=[common, learning, meta_inputs], help="Tune-or-not classification tree"
    )
    p.add_argument("--measure", help="Measure defining the tune labels")
    p.add_argument("--difference-measures", type=_csv_list, help="Measures for difference summaries")

    p = sub.add_parser("rsed", parents=[common], help="Ratio of successfully finished experiments")
    p.add_argument("--success", required=True, help="Success log CSV")
    p.add_argument("--results", help="Results table CSV (optional)")

    p = sub.add_parser("improvement", parents=[common], help="Relative improvement histograms")
    p.add_argument("--results", required=True)
    p.add_argument("--measure", help="Loss or rate measure (default hamming_loss)")
    p.add_argument("--bins", type=int, default=20)
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    names = (
        "output_dir", "formats", "seed", "registry", "catalogue", "f_grid", "f_level",
        "min_leaf", "max_depth", "dependence_alpha", "small_set_threshold", "k_top",
        "measure", "extended_features", "allow_missing",
    )
    return {name: getattr(args, name) for name in names if hasattr(args, name)}


def _inputs(args: argparse.Namespace) -> Dict[str, str]:
    inputs = {}
    for role in INPUT_ROLES:
        value = getattr(args, role, None)
        if isinstance(value, list):
            for i, path in enumerate(value):
                inputs[f"{role}[{i}]"] = path
        elif value:
            inputs[role] = value
    return inputs


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    configure_logging(args)
    try:
        config = load_run_config(args.command, _overrides(args), _inputs(args), args.config)
        ctx = RunContext(args, config)
        HANDLERS[args.command](ctx)
        ctx.writer.commit()
    except MlcMetaError as e:
        logger.error(str(e))
        sys.stderr.write(json.dumps(_jsonable(e.to_dict()), sort_keys=True) + "\n")
        return 1
    except (KeyError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        report = {"error": "invalid_input", "message": str(e)}
        sys.stderr.write(json.dumps(report, sort_keys=True) + "\n")
        return 1
    except OSError as e:
        logger.error(str(e))
        sys.stderr.write(json.dumps({"error": "io_error", "message": str(e)}, sort_keys=True) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
