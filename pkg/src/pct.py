"""
Predictive clustering trees.

Top-down induction of binary trees in three modes:

- clustering: targets are standardized copies of the descriptive columns
- classification: one nominal target, information-gain heuristic
- regression: one or more numeric targets, variance-reduction heuristic

Growth stops when no split has a positive heuristic score, a branch would
fall below `min_leaf` rows, `max_depth` is reached, or the F-test rejects
the split at level `f_level`. Split selection does not depend on `f_level`.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import f as f_distribution

from .data_loader import read_csv_artifact
from .exceptions import ContractError

logger = logging.getLogger(__name__)

CLUSTERING = "clustering"
CLASSIFICATION = "classification"
REGRESSION = "regression"
MODES = (CLUSTERING, CLASSIFICATION, REGRESSION)

NUMERIC = "numeric"
NOMINAL = "nominal"

_SCORE_EPS = 1e-12


def index_rows(frame: pd.DataFrame, id_column: Optional[str]) -> pd.DataFrame:
    """Use `id_column` as the row index, if given."""
    if id_column is None:
        return frame
    if id_column not in frame.columns:
        raise ContractError(f"id column '{id_column}' not found in {list(frame.columns)}")
    return frame.set_index(id_column)


@dataclass(frozen=True)
class DataTable:
    """
    Rows of descriptive columns plus target columns, indexed by row id.

    Numeric descriptive columns split on thresholds; boolean, string and
    categorical columns are nominal. Clustering tables may have no targets.
    """

    descriptive: pd.DataFrame
    targets: pd.DataFrame = field(default_factory=pd.DataFrame)

    def __post_init__(self):
        if self.descriptive.shape[1] == 0:
            raise ContractError("a data table needs at least one descriptive column")
        targets = self.targets
        if targets.shape[1] == 0:
            targets = pd.DataFrame(index=self.descriptive.index)
        if not targets.index.equals(self.descriptive.index):
            raise ContractError("descriptive and target rows must share the same row ids")
        if self.descriptive.index.has_duplicates:
            raise ContractError("row ids must be unique")
        if targets.isna().any().any():
            raise ContractError("target values must not be missing")
        if self.descriptive.isna().any().any():
            columns = self.descriptive.columns[self.descriptive.isna().any()].tolist()
            raise ContractError(f"descriptive values missing in columns {columns}")
        object.__setattr__(self, "targets", targets)

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        target_columns: Sequence[str] = (),
        id_column: Optional[str] = None,
    ) -> "DataTable":
        """Split a frame into descriptive and target columns."""
        frame = index_rows(frame, id_column)
        missing = [c for c in target_columns if c not in frame.columns]
        if missing:
            raise ContractError(f"target columns not found: {missing}")
        targets = frame[list(target_columns)]
        descriptive = frame.drop(columns=list(target_columns))
        return cls(descriptive=descriptive, targets=targets)

    @classmethod
    def from_csv(
        cls,
        filepath: Union[str, Path],
        target_columns: Sequence[str] = (),
        id_column: Optional[str] = None,
    ) -> "DataTable":
        """Read a CSV table; `target_columns` and `id_column` act as the column-role manifest."""
        return cls.from_frame(read_csv_artifact(filepath), target_columns, id_column)

    @property
    def n_rows(self) -> int:
        return len(self.descriptive)

    @property
    def row_ids(self) -> List:
        return self.descriptive.index.tolist()

    def column_kind(self, column: str) -> str:
        series = self.descriptive[column]
        if pd.api.types.is_numeric_dtype(series) and not pd.api.types.is_bool_dtype(series):
            return NUMERIC
        return NOMINAL


@dataclass(frozen=True)
class Split:
    """Binary test: numeric `value <= threshold` or nominal `value == category` goes left."""

    column: str
    column_index: int
    kind: str
    score: float
    threshold: Optional[float] = None
    category: Optional[str] = None

    def goes_left(self, value) -> bool:
        if self.kind == NUMERIC:
            return float(value) <= self.threshold
        return str(value) == self.category

    def describe(self) -> str:
        if self.kind == NUMERIC:
            return f"{self.column} <= {self.threshold:.6g}"
        return f"{self.column} = {self.category}"


@dataclass
class Node:
    """Tree node; leaves have no split and carry their member row ids."""

    n: int
    prototype: Any
    stats: Dict[str, Any]
    split: Optional[Split] = None
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    members: List = field(default_factory=list)
    leaf_id: Optional[int] = None
    annotations: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass(frozen=True)
class LearnParams:
    """Stopping parameters of tree induction."""

    f_level: float = 0.05
    min_leaf: int = 2
    max_depth: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.f_level < 1.0:
            raise ContractError(f"f_level must lie in (0, 1), got {self.f_level}")
        if self.min_leaf < 1:
            raise ContractError(f"min_leaf must be at least 1, got {self.min_leaf}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ContractError(f"max_depth must be non-negative, got {self.max_depth}")

    def to_dict(self) -> Dict:
        return {"f_level": self.f_level, "min_leaf": self.min_leaf, "max_depth": self.max_depth}


@dataclass
class Tree:
    """A learned predictive clustering tree."""

    root: Node
    mode: str
    params: LearnParams
    descriptive: List[str]
    column_kinds: Dict[str, str]
    target_names: List[str]
    root_variance: np.ndarray
    classes: List[str] = field(default_factory=list)
    standardization: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def nodes(self) -> Iterator[Node]:
        """Nodes in preorder."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self) -> List[Node]:
        return [node for node in self.nodes() if node.is_leaf]

    @property
    def n_nodes(self) -> int:
        return sum(1 for _ in self.nodes())

    @property
    def depth(self) -> int:
        def _depth(node: Node) -> int:
            return 0 if node.is_leaf else 1 + max(_depth(node.left), _depth(node.right))

        return _depth(self.root)

    def route(self, row: Union[Mapping, pd.Series]) -> Node:
        """Leaf reached by `row`."""
        node = self.root
        while not node.is_leaf:
            column = node.split.column
            try:
                value = row[column]
            except KeyError:
                raise ContractError(f"row has no column '{column}' referenced by the tree")
            node = node.left if node.split.goes_left(value) else node.right
        return node

    def predict(self, row: Union[Mapping, pd.Series]):
        """Leaf prototype for `row`: a target vector, or a class in classification mode."""
        return self.route(row).prototype

    def leaf_id(self, row: Union[Mapping, pd.Series]) -> int:
        return self.route(row).leaf_id

    def predict_proba(self, row: Union[Mapping, pd.Series]) -> Dict[str, float]:
        """Class proportions of the leaf reached by `row` (classification mode)."""
        if self.mode != CLASSIFICATION:
            raise ContractError("class proportions exist only for classification trees")
        return dict(self.route(row).stats["proportions"])

    def predict_frame(self, frame: pd.DataFrame) -> pd.DataFrame:
        """Predictions and leaf ids for every row of `frame`."""
        leaves = [self.route(row) for _, row in frame.iterrows()]
        if self.mode == CLASSIFICATION:
            result = pd.DataFrame(
                {"prediction": [leaf.prototype for leaf in leaves]}, index=frame.index
            )
        else:
            result = pd.DataFrame(
                [np.asarray(leaf.prototype, dtype=float) for leaf in leaves],
                index=frame.index,
                columns=self.target_names,
            )
        result["leaf_id"] = [leaf.leaf_id for leaf in leaves]
        return result


def ftest_accept(ss_parent: float, ss_children: float, n: int, level: float) -> bool:
    """
    F-test on the sum-of-squares reduction of a binary split.

    Parameters
    ----------
    ss_parent : float
        Sum of squares of the node
    ss_children : float
        Summed sum of squares of both children
    n : int
        Rows in the node
    level : float
        Significance level in (0, 1)

    Returns
    -------
    bool
        True when the upper-tail probability of F with (1, n - 2) degrees
        of freedom is at most `level`
    """
    if not 0.0 < level < 1.0:
        raise ContractError(f"F-test level must lie in (0, 1), got {level}")
    if n <= 2 or ss_parent <= 0:
        return False
    if ss_children <= _SCORE_EPS * ss_parent:
        return True
    reduction = ss_parent - ss_children
    if reduction <= 0:
        return False
    statistic = reduction / (ss_children / (n - 2))
    return bool(f_distribution.sf(statistic, 1, n - 2) <= level)


class _SplitSearch:
    """Exhaustive split search over encoded descriptive columns."""

    def __init__(
        self,
        x: np.ndarray,
        kinds: List[str],
        columns: List[str],
        categories: Dict[str, List[str]],
        y: np.ndarray,
        mode: str,
        weights: np.ndarray,
        min_leaf: int,
    ):
        self.x = x
        self.kinds = kinds
        self.columns = columns
        self.categories = categories
        self.y = y
        self.mode = mode
        self.weights = weights
        self.min_leaf = min_leaf

    def sum_of_squares(self, rows: np.ndarray) -> float:
        """Weighted within-node sum of squares (one-hot Gini mass for classification)."""
        y = self.y[rows]
        centered = y - y.mean(axis=0)
        return float(np.sum(self.weights * np.sum(centered**2, axis=0)))

    def _entropy(self, counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
        p = counts / totals[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, -p * np.log2(p), 0.0)
        return terms.sum(axis=1)

    def _scores(self, left_n, left_sum, left_sq, total_sum, total_sq, n) -> np.ndarray:
        """Heuristic for candidate left branches given their prefix statistics."""
        right_n = n - left_n
        if self.mode == CLASSIFICATION:
            parent = self._entropy(total_sum[None, :], np.array([float(n)]))[0]
            left = self._entropy(left_sum, left_n)
            right = self._entropy(total_sum[None, :] - left_sum, right_n)
            return parent - (left_n * left + right_n * right) / n
        ss_parent = np.sum(self.weights * (total_sq - total_sum**2 / n))
        left_ss = np.sum(self.weights * (left_sq - left_sum**2 / left_n[:, None]), axis=1)
        right_sum = total_sum[None, :] - left_sum
        right_sq = total_sq[None, :] - left_sq
        right_ss = np.sum(self.weights * (right_sq - right_sum**2 / right_n[:, None]), axis=1)
        return (ss_parent - left_ss - right_ss) / n

    def best(self, rows: np.ndarray) -> Optional[Split]:
        n = len(rows)
        if n < 2 or n < 2 * self.min_leaf:
            return None
        y = self.y[rows]
        if self.mode != CLASSIFICATION:
            y = y - y.mean(axis=0)
        total_sum = y.sum(axis=0)
        total_sq = (y**2).sum(axis=0)
        best: Optional[Split] = None

        for c, kind in enumerate(self.kinds):
            x = self.x[rows, c]
            if kind == NUMERIC:
                order = np.argsort(x, kind="stable")
                xs = x[order]
                ys = y[order]
                left_n = np.arange(1, n, dtype=float)
                left_sum = np.cumsum(ys, axis=0)[:-1]
                left_sq = np.cumsum(ys**2, axis=0)[:-1]
                valid = (
                    (xs[:-1] < xs[1:])
                    & (left_n >= self.min_leaf)
                    & (n - left_n >= self.min_leaf)
                )
                if not valid.any():
                    continue
                scores = self._scores(left_n, left_sum, left_sq, total_sum, total_sq, n)
                scores = np.where(valid, scores, -np.inf)
                top = scores.max()
                position = int(np.flatnonzero(scores >= top - _SCORE_EPS)[0])
                candidate = Split(
                    column=self.columns[c],
                    column_index=c,
                    kind=NUMERIC,
                    score=float(scores[position]),
                    threshold=float((xs[position] + xs[position + 1]) / 2.0),
                )
            else:
                codes = np.unique(x).astype(int)
                candidate = None
                for code in codes:
                    mask = x == code
                    left_n = int(mask.sum())
                    if left_n < self.min_leaf or n - left_n < self.min_leaf:
                        continue
                    score = float(
                        self._scores(
                            np.array([float(left_n)]),
                            y[mask].sum(axis=0)[None, :],
                            (y[mask] ** 2).sum(axis=0)[None, :],
                            total_sum,
                            total_sq,
                            n,
                        )[0]
                    )
                    if candidate is None or score > candidate.score + _SCORE_EPS:
                        candidate = Split(
                            column=self.columns[c],
                            column_index=c,
                            kind=NOMINAL,
                            score=score,
                            category=self.categories[self.columns[c]][code],
                        )
                if candidate is None:
                    continue
            if best is None or candidate.score > best.score + _SCORE_EPS:
                best = candidate

        if best is None or best.score <= _SCORE_EPS:
            return None
        return best

    def partition(self, rows: np.ndarray, split: Split) -> Tuple[np.ndarray, np.ndarray]:
        x = self.x[rows, split.column_index]
        if split.kind == NUMERIC:
            mask = x <= split.threshold
        else:
            code = self.categories[split.column].index(split.category)
            mask = x == code
        return rows[mask], rows[~mask]


def _encode_descriptive(table: DataTable) -> Tuple[np.ndarray, List[str], Dict[str, List[str]]]:
    """Float matrix of descriptive columns with nominal values as category codes."""
    columns = table.descriptive.columns.tolist()
    x = np.empty((table.n_rows, len(columns)), dtype=float)
    kinds = []
    categories: Dict[str, List[str]] = {}
    for c, column in enumerate(columns):
        kind = table.column_kind(column)
        kinds.append(kind)
        series = table.descriptive[column]
        if kind == NUMERIC:
            x[:, c] = series.to_numpy(dtype=float)
        else:
            if isinstance(series.dtype, pd.CategoricalDtype):
                levels = [str(v) for v in series.cat.categories]
            else:
                levels = sorted({str(v) for v in series})
            categories[column] = levels
            lookup = {level: code for code, level in enumerate(levels)}
            x[:, c] = [lookup[str(v)] for v in series]
    return x, kinds, categories


def _clustering_targets(table: DataTable, kinds: List[str]) -> Tuple[pd.DataFrame, Dict]:
    """Standardized numeric descriptive columns; constant columns dropped."""
    standardized = {}
    standardization = {}
    for column, kind in zip(table.descriptive.columns, kinds):
        if kind != NUMERIC:
            continue
        values = table.descriptive[column].to_numpy(dtype=float)
        scale = float(values.std())
        if scale <= 0:
            logger.debug(f"Dropping constant column '{column}' from clustering targets")
            continue
        center = float(values.mean())
        standardized[column] = (values - center) / scale
        standardization[column] = (center, scale)
    return pd.DataFrame(standardized, index=table.descriptive.index), standardization


def _prepare(table: DataTable, mode: str):
    if mode not in MODES:
        raise ContractError(f"unknown tree mode '{mode}', expected one of {MODES}")
    if table.n_rows == 0:
        raise ContractError("cannot learn a tree from an empty table")
    x, kinds, categories = _encode_descriptive(table)
    standardization: Dict[str, Tuple[float, float]] = {}
    classes: List[str] = []

    if mode == CLUSTERING:
        targets, standardization = _clustering_targets(table, kinds)
        y = targets.to_numpy(dtype=float).reshape(table.n_rows, targets.shape[1])
        target_names = targets.columns.tolist()
    elif mode == CLASSIFICATION:
        if table.targets.shape[1] != 1:
            raise ContractError("classification needs exactly one target column")
        labels = table.targets.iloc[:, 0].astype(str)
        classes = sorted(labels.unique())
        y = (labels.to_numpy()[:, None] == np.array(classes)[None, :]).astype(float)
        target_names = [str(table.targets.columns[0])]
    else:
        if table.targets.shape[1] == 0:
            raise ContractError("regression needs at least one target column")
        try:
            y = table.targets.to_numpy(dtype=float)
        except (TypeError, ValueError):
            raise ContractError("regression targets must be numeric")
        target_names = [str(c) for c in table.targets.columns]

    root_variance = y.var(axis=0) if y.shape[1] else np.zeros(0)
    if mode == CLASSIFICATION:
        weights = np.ones(y.shape[1])
    else:
        weights = np.divide(
            1.0, root_variance, out=np.zeros_like(root_variance), where=root_variance > 0
        )
    return x, kinds, categories, y, weights, target_names, classes, standardization, root_variance


def _leaf_summary(y: np.ndarray, mode: str, classes: List[str]) -> Tuple[Any, Dict]:
    n = len(y)
    if mode == CLASSIFICATION:
        counts = y.sum(axis=0)
        proportions = counts / n
        prototype = classes[int(np.argmax(counts))]
        stats = {
            "n": n,
            "counts": {c: int(k) for c, k in zip(classes, counts)},
            "proportions": {c: float(p) for c, p in zip(classes, proportions)},
        }
        return prototype, stats
    mean = y.mean(axis=0)
    stats = {"n": n, "mean": mean.tolist(), "variance": y.var(axis=0).tolist()}
    return mean, stats


def best_split(
    table: DataTable,
    mode: str,
    min_leaf: int = 2,
    rows: Optional[Sequence[int]] = None,
) -> Optional[Split]:
    """
    Best split of `rows` (all rows by default) under the mode's heuristic.

    Regression and clustering maximize variance reduction with per-target
    variances normalized by the table's variance of that target;
    classification maximizes information gain. Ties go to the lower column
    index, then the lower threshold or earlier category.

    Returns
    -------
    Split or None
        None when no admissible split has a positive score
    """
    x, kinds, categories, y, weights, *_ = _prepare(table, mode)
    search = _SplitSearch(
        x, kinds, table.descriptive.columns.tolist(), categories, y, mode, weights, min_leaf
    )
    rows = np.arange(table.n_rows) if rows is None else np.asarray(rows, dtype=int)
    return search.best(rows)


def learn(table: DataTable, mode: str, params: Optional[LearnParams] = None) -> Tree:
    """
    Learn a predictive clustering tree.

    Parameters
    ----------
    table : DataTable
        Training rows; clustering mode ignores `table.targets`
    mode : str
        'clustering', 'classification' or 'regression'
    params : LearnParams, optional
        f_level, min_leaf and max_depth

    Returns
    -------
    Tree
        Learned tree with leaf ids assigned in preorder
    """
    params = params or LearnParams()
    (
        x,
        kinds,
        categories,
        y,
        weights,
        target_names,
        classes,
        standardization,
        root_variance,
    ) = _prepare(table, mode)
    columns = table.descriptive.columns.tolist()
    search = _SplitSearch(x, kinds, columns, categories, y, mode, weights, params.min_leaf)
    row_ids = table.row_ids

    def grow(rows: np.ndarray, depth: int) -> Node:
        prototype, stats = _leaf_summary(y[rows], mode, classes)
        node = Node(n=len(rows), prototype=prototype, stats=stats)
        if params.max_depth is not None and depth >= params.max_depth:
            node.members = [row_ids[i] for i in rows]
            return node
        split = search.best(rows)
        if split is not None:
            left, right = search.partition(rows, split)
            ss_parent = search.sum_of_squares(rows)
            ss_children = search.sum_of_squares(left) + search.sum_of_squares(right)
            if ftest_accept(ss_parent, ss_children, len(rows), params.f_level):
                node.split = split
                node.left = grow(left, depth + 1)
                node.right = grow(right, depth + 1)
                return node
        node.members = [row_ids[i] for i in rows]
        return node

    root = grow(np.arange(table.n_rows), 0)
    tree = Tree(
        root=root,
        mode=mode,
        params=params,
        descriptive=columns,
        column_kinds=dict(zip(columns, kinds)),
        target_names=target_names,
        root_variance=root_variance,
        classes=classes,
        standardization=standardization,
    )
    assign_leaf_ids(tree)
    logger.info(
        f"Learned {mode} tree on {table.n_rows} rows: "
        f"{tree.n_nodes} nodes, {len(tree.leaves())} leaves (f_level={params.f_level})"
    )
    return tree


def assign_leaf_ids(tree: Tree) -> None:
    """Number leaves 0, 1, ... in preorder."""
    for leaf_id, leaf in enumerate(tree.leaves()):
        leaf.leaf_id = leaf_id
