"""
Evaluation module for multi-label predictions.

Bipartition measures (example-based and label-based, micro and macro
averaged), AUROC from relevance scores, and PCut thresholding of score
matrices.

Sentinels: an example with empty truth and empty prediction scores 1 on every
example-based measure; a per-label measure with a 0/0 ratio scores 0.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.metrics import (
    accuracy_score,
    hamming_loss,
    jaccard_score,
    multilabel_confusion_matrix,
    precision_recall_fscore_support,
    roc_auc_score,
)

from .data_loader import read_csv_artifact
from .exceptions import ContractError, ParseError, UndefinedMeasureError

logger = logging.getLogger(__name__)

EXAMPLE_BASED = (
    "hamming_loss",
    "subset_accuracy",
    "accuracy.example-based",
    "precision.example-based",
    "recall.example-based",
    "F1.example-based",
)
LABEL_BASED = (
    "precision.micro",
    "recall.micro",
    "F1.micro",
    "precision.macro",
    "recall.macro",
    "F1.macro",
)
SCORE_BASED = ("AUROC.micro", "AUROC.macro")
ALL_MEASURES = EXAMPLE_BASED + LABEL_BASED + SCORE_BASED


@dataclass(frozen=True)
class PredictionSet:
    """Ground truth with relevance scores and/or a bipartition."""

    truth: np.ndarray
    scores: Optional[np.ndarray] = None
    bipartition: Optional[np.ndarray] = None

    def __post_init__(self):
        truth = _binary_matrix(self.truth, "truth")
        object.__setattr__(self, "truth", truth)
        if self.scores is None and self.bipartition is None:
            raise ContractError("a prediction set needs scores or a bipartition")
        if self.scores is not None:
            scores = np.asarray(self.scores, dtype=float)
            _check_shape(truth, scores, "scores")
            if np.isnan(scores).any() or (scores < 0).any() or (scores > 1).any():
                raise ContractError("scores must lie in [0, 1]")
            object.__setattr__(self, "scores", scores)
        if self.bipartition is not None:
            bipartition = _binary_matrix(self.bipartition, "bipartition")
            _check_shape(truth, bipartition, "bipartition")
            object.__setattr__(self, "bipartition", bipartition)


@dataclass
class MeasureReport:
    """Measure values plus the per-label contingency counts they came from."""

    values: Dict[str, float] = field(default_factory=dict)
    counts: Optional[pd.DataFrame] = None
    notes: List[str] = field(default_factory=list)

    def __getitem__(self, measure: str) -> float:
        return self.values[measure]

    def to_dict(self) -> Dict:
        report = {"measures": {k: self.values[k] for k in self.values}}
        if self.counts is not None:
            report["counts"] = self.counts.reset_index().to_dict(orient="records")
        if self.notes:
            report["notes"] = list(self.notes)
        return report


def _binary_matrix(values, what: str) -> np.ndarray:
    matrix = np.asarray(values)
    if matrix.ndim != 2:
        raise ContractError(f"{what} must be a two-dimensional matrix")
    if not np.isin(matrix, (0, 1)).all():
        raise ContractError(f"{what} must be binary")
    return matrix.astype(np.int64)


def _check_shape(truth: np.ndarray, other: np.ndarray, what: str) -> None:
    if truth.shape != other.shape:
        raise ContractError(f"{what} shape {other.shape} does not match truth {truth.shape}")


def _indicator_inputs(
    truth: np.ndarray, other: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, Optional[List[int]]]:
    """Arguments for sklearn's per-label metrics.

    sklearn reads a one-column indicator matrix as a binary target, so a
    single label is passed as vectors with class 1 selected.
    """
    if truth.shape[1] == 1:
        return truth[:, 0], other[:, 0], [1]
    return truth, other, None


def contingency_counts(truth: np.ndarray, bipartition: np.ndarray) -> pd.DataFrame:
    """Per-label TP/FP/FN/TN counts."""
    truth = _binary_matrix(truth, "truth")
    bipartition = _binary_matrix(bipartition, "bipartition")
    _check_shape(truth, bipartition, "bipartition")
    y_true, y_pred, labels = _indicator_inputs(truth, bipartition)
    matrices = multilabel_confusion_matrix(y_true, y_pred, labels=labels)
    counts = pd.DataFrame(
        {
            "TP": matrices[:, 1, 1],
            "FP": matrices[:, 0, 1],
            "FN": matrices[:, 1, 0],
            "TN": matrices[:, 0, 0],
        }
    )
    counts.index.name = "label"
    return counts


def example_based(truth: np.ndarray, bipartition: np.ndarray) -> MeasureReport:
    """
    Example-based measures.

    Parameters
    ----------
    truth : np.ndarray
        N x L binary ground truth
    bipartition : np.ndarray
        N x L binary predictions

    Returns
    -------
    MeasureReport
        hamming_loss, subset_accuracy and example-based
        accuracy/precision/recall/F1
    """
    counts = contingency_counts(truth, bipartition)
    truth = np.asarray(truth, dtype=np.int64)
    bipartition = np.asarray(bipartition, dtype=np.int64)

    # sample averaging needs a multilabel indicator; a column that is 0 in
    # both matrices leaves every example's label sets unchanged
    padded_truth, padded_pred = truth, bipartition
    if truth.shape[1] == 1:
        padding = np.zeros_like(truth)
        padded_truth = np.hstack([truth, padding])
        padded_pred = np.hstack([bipartition, padding])
    precision, recall, f1, _ = precision_recall_fscore_support(
        padded_truth, padded_pred, average="samples", zero_division=0
    )
    # an example with empty truth and empty prediction scores 1, not 0
    both_empty = float(np.mean((truth | bipartition).sum(axis=1) == 0))

    values = {
        "hamming_loss": float(hamming_loss(truth, bipartition)),
        "subset_accuracy": float(accuracy_score(truth, bipartition)),
        "accuracy.example-based": float(
            jaccard_score(padded_truth, padded_pred, average="samples", zero_division=1)
        ),
        "precision.example-based": float(precision) + both_empty,
        "recall.example-based": float(recall) + both_empty,
        "F1.example-based": float(f1) + both_empty,
    }
    return MeasureReport(values=values, counts=counts)


def label_based(truth: np.ndarray, bipartition: np.ndarray) -> MeasureReport:
    """
    Label-based measures: micro (pooled contingencies) and macro (mean of
    per-label values, 0/0 counted as 0).

    Parameters
    ----------
    truth : np.ndarray
        N x L binary ground truth
    bipartition : np.ndarray
        N x L binary predictions

    Returns
    -------
    MeasureReport
        micro and macro precision/recall/F1
    """
    counts = contingency_counts(truth, bipartition)
    truth = np.asarray(truth, dtype=np.int64)
    bipartition = np.asarray(bipartition, dtype=np.int64)
    micro = precision_recall_fscore_support(
        truth.ravel(), bipartition.ravel(), average="binary", pos_label=1, zero_division=0
    )
    y_true, y_pred, labels = _indicator_inputs(truth, bipartition)
    macro = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average=None, zero_division=0
    )
    values = {
        "precision.micro": float(micro[0]),
        "recall.micro": float(micro[1]),
        "F1.micro": float(micro[2]),
        "precision.macro": float(np.mean(macro[0])),
        "recall.macro": float(np.mean(macro[1])),
        "F1.macro": float(np.mean(macro[2])),
    }
    return MeasureReport(values=values, counts=counts)


def auroc(truth: np.ndarray, scores: np.ndarray, mode: str = "micro") -> float:
    """
    Area under the ROC curve (tied scores count one half).

    Parameters
    ----------
    truth : np.ndarray
        N x L binary ground truth (a 1-d vector is treated as one label)
    scores : np.ndarray
        N x L relevance scores
    mode : str
        'micro' pools all cells, 'macro' averages labels having both classes

    Returns
    -------
    float
        AUROC in [0, 1]
    """
    truth = np.asarray(truth)
    scores = np.asarray(scores, dtype=float)
    if truth.ndim == 1:
        truth = truth[:, None]
        scores = scores[:, None]
    truth = _binary_matrix(truth, "truth")
    _check_shape(truth, scores, "scores")

    if mode == "micro":
        flat_truth = truth.ravel()
        if flat_truth.min() == flat_truth.max():
            raise UndefinedMeasureError("AUROC.micro needs at least one positive and one negative cell")
        return float(roc_auc_score(flat_truth, scores.ravel()))
    if mode == "macro":
        valid = [j for j in range(truth.shape[1]) if truth[:, j].min() != truth[:, j].max()]
        skipped = sorted(set(range(truth.shape[1])) - set(valid))
        if skipped:
            logger.warning(f"AUROC.macro skipped single-class labels {skipped}")
        if not valid:
            raise UndefinedMeasureError("AUROC.macro: no label has both classes")
        return float(np.mean([roc_auc_score(truth[:, j], scores[:, j]) for j in valid]))
    raise ContractError(f"unknown AUROC mode '{mode}'")


def apply_threshold(scores: np.ndarray, t: float) -> np.ndarray:
    """Bipartition with cell = 1 iff score >= t."""
    if not 0.0 <= t <= 1.0:
        raise ContractError(f"threshold must lie in [0, 1], got {t}")
    return (np.asarray(scores, dtype=float) >= t).astype(np.int64)


def default_grid(scores: np.ndarray) -> np.ndarray:
    """All distinct score values plus 0 and 1, ascending."""
    return np.unique(np.concatenate([np.asarray(scores, dtype=float).ravel(), [0.0, 1.0]]))


def predicted_cardinality(scores: np.ndarray, grid: Sequence[float]) -> np.ndarray:
    """Cardinality of apply_threshold(scores, t) for every t in grid."""
    scores = np.asarray(scores, dtype=float)
    flat = np.sort(scores.ravel())
    positives = flat.size - np.searchsorted(flat, np.asarray(grid, dtype=float), side="left")
    return positives / scores.shape[0]


def pcut_threshold(
    train_cardinality: float, scores: np.ndarray, grid: Optional[Sequence[float]] = None
) -> float:
    """
    PCut: the grid threshold whose predicted cardinality is closest to the
    training label cardinality (ties go to the smallest threshold).

    Parameters
    ----------
    train_cardinality : float
        Label cardinality of the training set
    scores : np.ndarray
        N x L relevance scores
    grid : sequence of float, optional
        Ascending candidate thresholds in [0, 1]; default_grid(scores) if omitted

    Returns
    -------
    float
        Selected threshold
    """
    grid = default_grid(scores) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ContractError("PCut grid is empty")
    if (grid < 0).any() or (grid > 1).any():
        raise ContractError("PCut grid values must lie in [0, 1]")
    order = np.argsort(grid, kind="stable")
    grid = grid[order]
    gaps = np.abs(train_cardinality - predicted_cardinality(scores, grid))
    return float(grid[int(np.argmin(gaps))])


def evaluate_all(
    pred: PredictionSet,
    train_cardinality: Optional[float] = None,
    measures: Optional[Sequence[str]] = None,
) -> MeasureReport:
    """
    Compute the requested measures from a prediction set.

    A missing bipartition is produced by PCut on the default grid, which
    requires scores and the training cardinality.

    Parameters
    ----------
    pred : PredictionSet
        Truth plus scores and/or bipartition
    train_cardinality : float, optional
        Training label cardinality (needed for PCut)
    measures : list of str, optional
        Measure names; all known measures when omitted

    Returns
    -------
    MeasureReport
        Requested measures, in request order
    """
    measures = list(ALL_MEASURES if measures is None else measures)
    unknown = [m for m in measures if m not in ALL_MEASURES]
    if unknown:
        raise ContractError(f"unknown measures: {unknown}")
    report = MeasureReport()
    if not measures:
        return report

    needs_bipartition = any(m not in SCORE_BASED for m in measures)
    bipartition = pred.bipartition
    if needs_bipartition and bipartition is None:
        if pred.scores is None or train_cardinality is None:
            missing = next(m for m in measures if m not in SCORE_BASED)
            raise ContractError(
                f"measure '{missing}' needs a bipartition or scores plus the training cardinality"
            )
        threshold = pcut_threshold(train_cardinality, pred.scores)
        bipartition = apply_threshold(pred.scores, threshold)
        report.notes.append(f"bipartition from PCut threshold {threshold!r}")
        logger.info(f"PCut selected threshold {threshold}")

    computed: Dict[str, float] = {}
    if needs_bipartition:
        example = example_based(pred.truth, bipartition)
        label = label_based(pred.truth, bipartition)
        computed.update(example.values)
        computed.update(label.values)
        report.counts = example.counts
    for measure in measures:
        if measure in SCORE_BASED:
            if pred.scores is None:
                raise ContractError(f"measure '{measure}' needs relevance scores")
            computed[measure] = auroc(pred.truth, pred.scores, measure.split(".")[1])
    report.values = {m: computed[m] for m in measures}
    return report


def load_predictions(filepath: Union[str, Path]) -> PredictionSet:
    """
    Load a prediction file.

    CSV: columns truth_<label>, plus score_<label> and/or pred_<label>.
    JSON: {"truth": [[...]], "scores": [[...]], "bipartition": [[...]]}.
    """
    path = Path(filepath)
    if path.suffix.lower() == ".json":
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, e.lineno, path.name)
        if not isinstance(document, dict) or "truth" not in document:
            raise ParseError("prediction JSON needs a 'truth' matrix", None, path.name)
        return PredictionSet(
            truth=np.array(document["truth"]),
            scores=None if document.get("scores") is None else np.array(document["scores"]),
            bipartition=None if document.get("bipartition") is None else np.array(document["bipartition"]),
        )
    table = read_csv_artifact(path)
    truth_cols = [c for c in table.columns if c.startswith("truth_")]
    if not truth_cols:
        raise ParseError("prediction CSV needs truth_<label> columns", 1, path.name)
    labels = [c[len("truth_") :] for c in truth_cols]
    parts = {}
    for prefix in ("score_", "pred_"):
        columns = [prefix + label for label in labels]
        present = [c for c in columns if c in table.columns]
        if present and len(present) != len(columns):
            raise ParseError(f"incomplete {prefix}<label> columns", 1, path.name)
        parts[prefix] = table[columns].to_numpy() if present else None
    return PredictionSet(
        truth=table[truth_cols].to_numpy(), scores=parts["score_"], bipartition=parts["pred_"]
    )
