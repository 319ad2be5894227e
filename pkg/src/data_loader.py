"""
Data loader module for multi-label datasets and meta-analysis tables.

This module handles parsing and validation of MULAN-style ARFF datasets,
CSV datasets, experiment results tables and meta-feature matrices.
"""

import csv
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.io import arff

from .exceptions import ParseError, SchemaError

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
NOMINAL = "nominal"
MISSING_MARKER = "?"
ROLES = ("train", "test", "full")

LabelSpec = Union[int, str, Path, Sequence[str]]


@dataclass(frozen=True)
class MlcDataset:
    """One multi-label dataset (or one part of it).

    Features live in a DataFrame: numeric columns are float64 with NaN as the
    missing marker, nominal columns are pandas categoricals (category codes,
    -1 for missing). Labels are an N x L read-only uint8 matrix.
    """

    name: str
    features: pd.DataFrame
    labels: np.ndarray
    feature_types: Tuple[str, ...]
    label_names: Tuple[str, ...]
    role: str = "full"

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise SchemaError(f"{self.name}: label matrix must be two-dimensional")
        n, n_labels = labels.shape
        if n < 1:
            raise SchemaError(f"{self.name}: dataset has no instances")
        if self.features.shape[1] < 1:
            raise SchemaError(f"{self.name}: dataset has no feature columns")
        if n_labels < 2:
            raise SchemaError(f"{self.name}: at least two labels required, got {n_labels}")
        if self.features.shape[0] != n:
            raise SchemaError(
                f"{self.name}: {self.features.shape[0]} feature rows vs {n} label rows"
            )
        if len(self.label_names) != n_labels:
            raise SchemaError(f"{self.name}: label names do not match label columns")
        if len(self.feature_types) != self.features.shape[1]:
            raise SchemaError(f"{self.name}: feature type tags do not match columns")
        if not np.isin(labels, (0, 1)).all():
            raise SchemaError(f"{self.name}: label matrix must be binary and complete")
        if self.role not in ROLES:
            raise SchemaError(f"{self.name}: unknown role '{self.role}'")
        for column, kind in zip(self.features.columns, self.feature_types):
            series = self.features[column]
            if kind == NUMERIC and not pd.api.types.is_float_dtype(series):
                raise SchemaError(f"{self.name}: numeric column '{column}' is not float")
            if kind == NOMINAL and not isinstance(series.dtype, pd.CategoricalDtype):
                raise SchemaError(f"{self.name}: nominal column '{column}' is not categorical")
            if kind not in (NUMERIC, NOMINAL):
                raise SchemaError(f"{self.name}: unknown column type '{kind}'")
        labels = labels.astype(np.uint8)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def feature_names(self) -> Tuple[str, ...]:
        return tuple(str(c) for c in self.features.columns)

    @property
    def n_instances(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_labels(self) -> int:
        return int(self.labels.shape[1])

    def numeric_columns(self) -> List[str]:
        return [c for c, t in zip(self.feature_names, self.feature_types) if t == NUMERIC]

    def nominal_columns(self) -> List[str]:
        return [c for c, t in zip(self.feature_names, self.feature_types) if t == NOMINAL]

    def labelset_counts(self) -> np.ndarray:
        """Counts of every distinct labelset (the empty set included)."""
        _, counts = np.unique(self.labels, axis=0, return_counts=True)
        return counts

    def subset(self, indices: Sequence[int], role: Optional[str] = None) -> "MlcDataset":
        """Rows `indices` as a new dataset."""
        idx = np.asarray(indices, dtype=int)
        return MlcDataset(
            name=self.name,
            features=self.features.iloc[idx].reset_index(drop=True),
            labels=np.array(self.labels[idx]),
            feature_types=self.feature_types,
            label_names=self.label_names,
            role=role or self.role,
        )


@dataclass(frozen=True)
class DatasetSummary:
    """Size and label statistics of one dataset part."""

    n_train: int
    n_test: int
    n_features: int
    n_labels: int
    cardinality: float
    density: float
    n_distinct_labelsets: int

    def to_dict(self) -> Dict:
        return {
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_features": self.n_features,
            "n_labels": self.n_labels,
            "cardinality": self.cardinality,
            "density": self.density,
            "n_distinct_labelsets": self.n_distinct_labelsets,
        }


@dataclass(frozen=True)
class ResultsTable:
    """Scores of (dataset x method x measure), plus experiment success logs.

    `scores` has columns dataset, method, measure, score, setting where
    setting is "tuned" (the reported result) or "default" (default
    hyperparameters). `success` has columns dataset, method, attempted,
    finished and may be empty.
    """

    scores: pd.DataFrame
    success: pd.DataFrame = field(
        default_factory=lambda: pd.DataFrame(
            columns=["dataset", "method", "attempted", "finished"]
        )
    )

    def __post_init__(self):
        scores = self.scores.copy()
        missing = {"dataset", "method", "measure", "score"} - set(scores.columns)
        if missing:
            raise SchemaError(f"Results table lacks columns: {sorted(missing)}")
        if "setting" not in scores.columns:
            scores["setting"] = "tuned"
        scores["setting"] = scores["setting"].fillna("tuned").astype(str)
        for column in ("dataset", "method", "measure"):
            scores[column] = scores[column].astype(str)
        numeric = pd.to_numeric(scores["score"], errors="coerce")
        bad = numeric.isna() & scores["score"].notna()
        if bad.any():
            row = scores.loc[bad].iloc[0]
            raise SchemaError(
                f"non-numeric score '{row['score']}' for "
                f"{row['dataset']}/{row['method']}/{row['measure']}"
            )
        scores["score"] = numeric.astype(float)
        bad_settings = set(scores["setting"]) - {"tuned", "default"}
        if bad_settings:
            raise SchemaError(f"Unknown result settings: {sorted(bad_settings)}")
        keys = ["dataset", "method", "measure", "setting"]
        duplicated = scores.duplicated(subset=keys)
        if duplicated.any():
            first = scores.loc[duplicated, keys].iloc[0].tolist()
            raise SchemaError(f"Duplicate results key: {'/'.join(first)}")
        scores = scores[keys + ["score"]].sort_values(keys).reset_index(drop=True)
        object.__setattr__(self, "scores", scores)

        success = self.success.copy()
        if len(success):
            missing = {"dataset", "method", "attempted", "finished"} - set(success.columns)
            if missing:
                raise SchemaError(f"Success log lacks columns: {sorted(missing)}")
            success["dataset"] = success["dataset"].astype(str)
            success["method"] = success["method"].astype(str)
            for column in ("attempted", "finished"):
                counts = pd.to_numeric(success[column], errors="coerce")
                if counts.isna().any() or (counts != counts.round()).any():
                    raise SchemaError(f"Success log column '{column}' must hold whole counts")
                success[column] = counts.astype(int)
            if (success["finished"] > success["attempted"]).any():
                raise SchemaError("Success log has finished > attempted")
            if (success[["attempted", "finished"]] < 0).any().any():
                raise SchemaError("Success log has negative counts")
            if success.duplicated(subset=["dataset", "method"]).any():
                raise SchemaError("Duplicate (dataset, method) rows in success log")
            success = success.sort_values(["dataset", "method"]).reset_index(drop=True)
        object.__setattr__(self, "success", success)

    @property
    def datasets(self) -> List[str]:
        return sorted(self.scores["dataset"].unique())

    @property
    def methods(self) -> List[str]:
        return sorted(self.scores["method"].unique())

    @property
    def measures(self) -> List[str]:
        return sorted(self.scores["measure"].unique())

    def validate_rates(self, is_rate) -> None:
        """Check that measures flagged as rates by `is_rate` lie in [0, 1]."""
        for measure, group in self.scores.groupby("measure"):
            if is_rate(measure) and ((group["score"] < 0) | (group["score"] > 1)).any():
                raise SchemaError(f"Scores of rate measure '{measure}' outside [0, 1]")

    def score_matrix(self, measure: str, setting: str = "tuned") -> pd.DataFrame:
        """Dataset x method matrix of one measure (NaN where absent)."""
        subset = self.scores[
            (self.scores["measure"] == measure) & (self.scores["setting"] == setting)
        ]
        return subset.pivot(index="dataset", columns="method", values="score").sort_index()


def _split_values(text: str, line_no: int, source: str) -> List[str]:
    """Split a comma separated ARFF value list, honouring quotes."""
    values = []
    current = []
    quote = None
    i = 0
    while i < len(text):
        char = text[i]
        if quote:
            if char == "\\" and i + 1 < len(text):
                current.append(text[i + 1])
                i += 2
                continue
            if char == quote:
                quote = None
            else:
                current.append(char)
        elif char in ("'", '"'):
            quote = char
        elif char == ",":
            values.append("".join(current).strip())
            current = []
        else:
            current.append(char)
        i += 1
    if quote:
        raise ParseError("unterminated quoted value", line_no, source)
    values.append("".join(current).strip())
    return values


def _split_name(text: str, line_no: int, source: str) -> Tuple[str, str]:
    """Split an '@attribute' remainder into (name, type specification)."""
    text = text.strip()
    if not text:
        raise ParseError("attribute declaration without a name", line_no, source)
    if text[0] in ("'", '"'):
        end = text.find(text[0], 1)
        if end < 0:
            raise ParseError("unterminated attribute name", line_no, source)
        return text[1:end], text[end + 1 :].strip()
    parts = text.split(None, 1)
    if len(parts) < 2:
        raise ParseError(f"attribute '{parts[0]}' has no type", line_no, source)
    return parts[0], parts[1].strip()


ArffContent = Tuple[str, List[Tuple[str, str, List[str]]], List[List[Optional[str]]]]


def _relation_name(line: str) -> str:
    """Dataset name from an '@relation' line; MULAN appends ': -C n' style options."""
    name = line[len("@relation") :].strip().strip("'\"").split(" -")[0]
    return name.strip().rstrip(":").strip()


def _scan_arff_header(path: Path) -> Tuple[str, bool]:
    """(relation name, whether the data section holds sparse instances)."""
    relation = path.stem
    in_data = False
    with open(path, encoding="utf-8") as handle:
        for raw in handle:
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            if in_data:
                return relation, line.startswith("{")
            lower = line.lower()
            if lower.startswith("@relation"):
                relation = _relation_name(line) or relation
            elif lower.startswith("@data"):
                in_data = True
    return relation, False


def _read_arff_scipy(path: Path, relation: str) -> ArffContent:
    """Read a dense ARFF file with scipy, in the shape the line reader returns."""
    data, meta = arff.loadarff(str(path))
    attributes: List[Tuple[str, str, List[str]]] = []
    for name in meta.names():
        kind, categories = meta[name]
        if kind == NUMERIC:
            attributes.append((name, NUMERIC, []))
        elif kind == NOMINAL:
            attributes.append((name, NOMINAL, list(categories)))
        else:
            raise SchemaError(f"{path.name}: attribute '{name}' has unsupported type '{kind}'")
    if len(data) == 0:
        raise ParseError("no instances", None, path.name)

    columns = []
    for name, kind, _ in attributes:
        values = data[name]
        if kind == NUMERIC:
            columns.append([MISSING_MARKER if np.isnan(v) else repr(float(v)) for v in values])
        else:
            columns.append([v.decode("utf-8") if isinstance(v, bytes) else str(v) for v in values])
    # the last element of a row is its source line, which scipy does not report
    rows = [list(values) + [None] for values in zip(*columns)]
    return relation, attributes, rows


def _read_arff(path: Path) -> ArffContent:
    """
    Read an ARFF file into (relation, attributes, raw rows).

    Dense files go through scipy.io.arff. Sparse instances, instance weights
    and anything scipy rejects are read line by line, which also gives
    line-numbered parse errors.
    """
    relation, sparse = _scan_arff_header(path)
    if not sparse:
        try:
            return _read_arff_scipy(path, relation)
        except (ParseError, SchemaError):
            raise
        except Exception as e:
            logger.debug(f"scipy could not read {path.name} ({e}); using the line reader")
    return _read_arff_lines(path, relation)


def _read_arff_lines(path: Path, relation: str) -> ArffContent:
    """Line-by-line ARFF reader for dense and sparse instances."""
    source = path.name
    attributes: List[Tuple[str, str, List[str]]] = []
    rows: List[List[Optional[str]]] = []
    in_data = False

    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            lower = line.lower()
            if not in_data:
                if lower.startswith("@relation"):
                    relation = _relation_name(line) or relation
                elif lower.startswith("@attribute"):
                    name, spec = _split_name(line[len("@attribute") :], line_no, source)
                    if spec.startswith("{"):
                        if not spec.endswith("}"):
                            raise ParseError(f"unterminated nominal list for '{name}'", line_no, source)
                        categories = _split_values(spec[1:-1], line_no, source)
                        attributes.append((name, NOMINAL, categories))
                    elif spec.split()[0].lower() in ("numeric", "real", "integer"):
                        attributes.append((name, NUMERIC, []))
                    elif spec.split()[0].lower() in ("string", "date", "relational"):
                        raise SchemaError(
                            f"{source}:{line_no}: attribute '{name}' has unsupported type "
                            f"'{spec.split()[0]}'"
                        )
                    else:
                        raise ParseError(f"unknown attribute type '{spec}'", line_no, source)
                elif lower.startswith("@data"):
                    if not attributes:
                        raise ParseError("@data before any @attribute", line_no, source)
                    in_data = True
                else:
                    raise ParseError(f"unexpected header line '{line}'", line_no, source)
                continue

            if line.startswith("{"):
                if not line.endswith("}"):
                    raise ParseError("unterminated sparse instance", line_no, source)
                row: List[Optional[str]] = [None] * len(attributes)
                body = line[1:-1].strip()
                if body:
                    for item in _split_values(body, line_no, source):
                        parts = item.split(None, 1)
                        if len(parts) != 2:
                            raise ParseError(f"bad sparse entry '{item}'", line_no, source)
                        try:
                            index = int(parts[0])
                        except ValueError:
                            raise ParseError(f"bad sparse index '{parts[0]}'", line_no, source)
                        if not 0 <= index < len(attributes):
                            raise ParseError(f"sparse index {index} out of range", line_no, source)
                        row[index] = parts[1].strip().strip("'\"")
                rows.append(row + [line_no])
            else:
                values = _split_values(line, line_no, source)
                # trailing instance weight, e.g. "1,2,0, {3}"
                if len(values) == len(attributes) + 1 and values[-1].startswith("{"):
                    values = values[:-1]
                if len(values) != len(attributes):
                    raise ParseError(
                        f"expected {len(attributes)} values, found {len(values)}", line_no, source
                    )
                rows.append(values + [line_no])

    if not in_data:
        raise ParseError("no @data section", None, source)
    if not rows:
        raise ParseError("no instances", None, source)
    return relation, attributes, rows


def _read_label_xml(path: Path) -> List[str]:
    """Label names from a MULAN XML label list (hierarchies flattened)."""
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as e:
        raise ParseError(f"malformed label XML: {e}", e.position[0], path.name)
    names = [
        element.attrib["name"]
        for element in root.iter()
        if element.tag.split("}")[-1] == "label" and "name" in element.attrib
    ]
    if not names:
        raise SchemaError(f"{path.name}: label XML lists no labels")
    return names


def _binarize_label(name: str, values: List[Optional[str]], source: str) -> np.ndarray:
    column = np.zeros(len(values), dtype=np.uint8)
    for i, value in enumerate(values):
        if value is None or value == MISSING_MARKER:
            raise SchemaError(f"{source}: label '{name}' has missing values")
        try:
            number = float(value)
        except ValueError:
            raise SchemaError(f"{source}: label '{name}' has non-binary value '{value}'")
        if number not in (0.0, 1.0):
            raise SchemaError(f"{source}: label '{name}' has non-binary value '{value}'")
        column[i] = int(number)
    return column


def parse_mulan(arff_file: Union[str, Path], label_spec: LabelSpec, role: str = "full") -> MlcDataset:
    """
    Parse a MULAN-style ARFF dataset (dense or sparse).

    Parameters
    ----------
    arff_file : str or Path
        ARFF file
    label_spec : int, path or list of names
        Number of trailing label attributes, a MULAN XML label list, or the
        label attribute names
    role : str
        One of 'train', 'test', 'full'

    Returns
    -------
    MlcDataset
        Parsed dataset with binarized labels
    """
    path = Path(arff_file)
    logger.info(f"Loading ARFF dataset from {path}")
    relation, attributes, rows = _read_arff(path)
    names = [a[0] for a in attributes]

    if isinstance(label_spec, (int, np.integer)):
        k = int(label_spec)
        if not 2 <= k < len(attributes):
            raise SchemaError(
                f"{path.name}: label count {k} incompatible with {len(attributes)} attributes"
            )
        label_names = names[-k:]
    elif isinstance(label_spec, (str, Path)) and str(label_spec).strip().isdigit():
        return parse_mulan(path, int(str(label_spec).strip()), role)
    elif isinstance(label_spec, (str, Path)):
        label_names = _read_label_xml(Path(label_spec))
    else:
        label_names = list(label_spec)

    unknown = [n for n in label_names if n not in names]
    if unknown:
        raise SchemaError(f"{path.name}: labels not declared in ARFF: {unknown}")
    label_set = set(label_names)

    features = {}
    feature_types = []
    for index, (name, kind, categories) in enumerate(attributes):
        raw = []
        for row in rows:
            value = row[index]
            if value is None:
                # omitted sparse value: numeric 0 or the first declared category
                value = "0" if kind == NUMERIC else categories[0]
            raw.append(value)
        if name in label_set:
            continue
        if kind == NUMERIC:
            values = np.empty(len(raw), dtype=float)
            for i, value in enumerate(raw):
                if value == MISSING_MARKER:
                    values[i] = np.nan
                    continue
                try:
                    values[i] = float(value)
                except ValueError:
                    raise ParseError(
                        f"non-numeric value '{value}' for attribute '{name}'", rows[i][-1], path.name
                    )
            features[name] = values
        else:
            for i, value in enumerate(raw):
                if value != MISSING_MARKER and value not in categories:
                    raise ParseError(
                        f"value '{value}' not declared for attribute '{name}'", rows[i][-1], path.name
                    )
            features[name] = pd.Categorical(
                [None if v == MISSING_MARKER else v for v in raw], categories=categories
            )
        feature_types.append(kind)

    label_columns = []
    for name in label_names:
        index = names.index(name)
        kind, categories = attributes[index][1], attributes[index][2]
        omitted = "0" if kind == NUMERIC else categories[0]
        values = [row[index] if row[index] is not None else omitted for row in rows]
        label_columns.append(_binarize_label(name, values, path.name))

    dataset = MlcDataset(
        name=relation,
        features=pd.DataFrame(features),
        labels=np.column_stack(label_columns),
        feature_types=tuple(feature_types),
        label_names=tuple(label_names),
        role=role,
    )
    logger.info(
        f"Loaded {dataset.n_instances} instances, {dataset.n_features} features, "
        f"{dataset.n_labels} labels"
    )
    return dataset


def _is_number(value: str) -> bool:
    try:
        float(value)
    except ValueError:
        return False
    return True


def parse_csv(
    file: Union[str, Path],
    label_columns: Sequence[str],
    type_hints: Optional[Mapping[str, str]] = None,
    role: str = "full",
    name: Optional[str] = None,
) -> MlcDataset:
    """
    Parse a CSV dataset with a header row ('?' marks missing feature values).

    Parameters
    ----------
    file : str or Path
        CSV file (UTF-8, comma separated)
    label_columns : list of str
        Names of the label columns (values 0/1)
    type_hints : dict, optional
        Column name -> 'numeric' or 'nominal'; other columns are inferred

    Returns
    -------
    MlcDataset
        Parsed dataset
    """
    path = Path(file)
    logger.info(f"Loading CSV dataset from {path}")
    type_hints = dict(type_hints or {})

    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, header row expected", 1, path.name)
        records = []
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(row)}", reader.line_num, path.name
                )
            records.append([cell.strip() for cell in row])
    if not records:
        raise ParseError("no instances", None, path.name)

    header = [h.strip() for h in header]
    table = pd.DataFrame(records, columns=header, dtype=str)
    unknown = [c for c in label_columns if c not in table.columns]
    if unknown:
        raise SchemaError(f"{path.name}: label columns not in header: {unknown}")

    label_matrix = np.column_stack(
        [_binarize_label(c, table[c].tolist(), path.name) for c in label_columns]
    )

    features = {}
    feature_types = []
    for column in header:
        if column in label_columns:
            continue
        values = table[column]
        present = values[values != MISSING_MARKER]
        kind = type_hints.get(column)
        if kind is None:
            kind = NUMERIC if all(_is_number(v) for v in present) else NOMINAL
        if kind == NUMERIC:
            bad = [v for v in present if not _is_number(v)]
            if bad:
                raise SchemaError(f"{path.name}: numeric column '{column}' has value '{bad[0]}'")
            features[column] = pd.to_numeric(values.replace(MISSING_MARKER, np.nan)).astype(float)
        elif kind == NOMINAL:
            features[column] = pd.Categorical(
                values.where(values != MISSING_MARKER, None), categories=sorted(set(present))
            )
        else:
            raise SchemaError(f"{path.name}: unknown type hint '{kind}' for '{column}'")
        feature_types.append(kind)

    if not features:
        raise SchemaError(f"{path.name}: no feature columns besides the labels")

    dataset = MlcDataset(
        name=name or path.stem,
        features=pd.DataFrame(features),
        labels=label_matrix,
        feature_types=tuple(feature_types),
        label_names=tuple(label_columns),
        role=role,
    )
    logger.info(
        f"Loaded {dataset.n_instances} instances, {dataset.n_features} features, "
        f"{dataset.n_labels} labels"
    )
    return dataset


def write_csv(dataset: MlcDataset, file: Union[str, Path]) -> None:
    """Write a dataset as CSV (features then labels, '?' for missing)."""
    table = pd.DataFrame(
        {c: dataset.features[c].astype(object) for c in dataset.feature_names}
    )
    for j, label in enumerate(dataset.label_names):
        table[label] = dataset.labels[:, j].astype(int)
    output_path = Path(file)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(output_path, index=False, na_rep=MISSING_MARKER)
    logger.info(f"Saved dataset to {output_path}")


def _summary(part: MlcDataset, n_train: int, n_test: int) -> DatasetSummary:
    sizes = part.labels.sum(axis=1)
    cardinality = float(sizes.mean())
    return DatasetSummary(
        n_train=n_train,
        n_test=n_test,
        n_features=part.n_features,
        n_labels=part.n_labels,
        cardinality=cardinality,
        density=cardinality / part.n_labels,
        n_distinct_labelsets=int(len(part.labelset_counts())),
    )


def dataset_summary(
    train: MlcDataset, test: Optional[MlcDataset] = None
) -> Dict[str, DatasetSummary]:
    """
    Size and label statistics of the training part and, optionally, the test part.

    Parameters
    ----------
    train : MlcDataset
        Training part
    test : MlcDataset, optional
        Test part with the same schema

    Returns
    -------
    Dict[str, DatasetSummary]
        Summaries keyed by 'train' (and 'test')
    """
    n_test = 0
    if test is not None:
        if test.feature_names != train.feature_names or test.feature_types != train.feature_types:
            raise SchemaError("Train/test feature schemas differ")
        if test.label_names != train.label_names:
            raise SchemaError("Train/test label sets differ")
        n_test = test.n_instances

    result = {"train": _summary(train, train.n_instances, n_test)}
    if test is not None:
        result["test"] = _summary(test, train.n_instances, n_test)
    return result


def read_csv_artifact(filepath: Union[str, Path], **kwargs) -> pd.DataFrame:
    """Read a CSV that may start with '#' provenance lines."""
    path = Path(filepath)
    skip = 0
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            skip += 1
    try:
        return pd.read_csv(path, skiprows=skip, **kwargs)
    except pd.errors.EmptyDataError:
        raise ParseError("no columns to read", line=skip + 1, source=path.name)
    except pd.errors.ParserError as e:
        raise ParseError(f"malformed CSV ({e})", source=path.name)
    except UnicodeDecodeError as e:
        raise ParseError(f"not UTF-8 text ({e.reason})", source=path.name)


DATASET_PROPERTIES = Path(__file__).parent / "resources" / "dataset_properties.csv"


def load_dataset_properties(filepath: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """
    Published properties of the benchmark datasets (shipped table by default).

    Returns
    -------
    pd.DataFrame
        One row per dataset, indexed by name, with sizes and the train/test
        label cardinality and density as printed (4 decimals)
    """
    path = Path(filepath) if filepath else DATASET_PROPERTIES
    table = read_csv_artifact(path, dtype={"name": str, "domain": str})
    missing = {"name", "n_labels", "cardinality_train", "density_train"} - set(table.columns)
    if missing:
        raise SchemaError(f"{path.name}: dataset properties lack columns {sorted(missing)}")
    return table.set_index("name")


class DataLoader:
    """Load datasets, results tables and meta-feature matrices."""

    def __init__(self, data_dir: Optional[str] = None):
        """
        Initialize DataLoader.

        Parameters
        ----------
        data_dir : str, optional
            Base directory for relative paths
        """
        self.data_dir = Path(data_dir) if data_dir else Path(".")

    def _resolve(self, filepath: Union[str, Path]) -> Path:
        path = Path(filepath)
        return path if path.is_absolute() else self.data_dir / path

    def load_dataset(
        self,
        filepath: Union[str, Path],
        labels: Union[LabelSpec, None] = None,
        role: str = "full",
    ) -> MlcDataset:
        """
        Load an ARFF or CSV dataset, choosing the parser by file extension.

        Parameters
        ----------
        filepath : str
            Dataset file (.arff or .csv)
        labels : int, path or list of names
            ARFF: label count or XML label list; CSV: label column names
            (a comma separated string is accepted)
        role : str
            Dataset part

        Returns
        -------
        MlcDataset
            Parsed dataset
        """
        path = self._resolve(filepath)
        if labels is None:
            raise SchemaError(f"{path.name}: a label specification is required")
        if isinstance(labels, str):
            labels = self._label_spec(labels)
        if path.suffix.lower() == ".csv":
            if isinstance(labels, (int, np.integer)):
                header = read_csv_artifact(path, nrows=0).columns.tolist()
                labels = header[-int(labels):]
            elif isinstance(labels, Path):
                labels = _read_label_xml(labels)
            return parse_csv(path, list(labels), role=role)
        return parse_mulan(path, labels, role)

    def _label_spec(self, labels: str) -> LabelSpec:
        """'3' -> 3, 'a,b' -> ['a', 'b'], anything else -> XML path."""
        labels = labels.strip()
        if labels.isdigit():
            return int(labels)
        if "," in labels:
            return [c.strip() for c in labels.split(",") if c.strip()]
        return self._resolve(labels)

    def load_results(
        self, filepath: Union[str, Path], success_path: Optional[Union[str, Path]] = None
    ) -> ResultsTable:
        """
        Load a results table and, optionally, its experiment success log.

        Parameters
        ----------
        filepath : str
            CSV with columns dataset, method, measure, score[, setting]
        success_path : str, optional
            CSV with columns dataset, method, attempted, finished

        Returns
        -------
        ResultsTable
            Validated results
        """
        path = self._resolve(filepath)
        logger.info(f"Loading results from {path}")
        scores = read_csv_artifact(path, dtype={"dataset": str, "method": str, "measure": str})
        if success_path is not None:
            success = read_csv_artifact(self._resolve(success_path), dtype={"dataset": str, "method": str})
            table = ResultsTable(scores, success)
        else:
            table = ResultsTable(scores)
        logger.info(
            f"Loaded {len(table.scores)} scores for {len(table.datasets)} datasets "
            f"and {len(table.methods)} methods"
        )
        return table

    def load_success_log(self, filepath: Union[str, Path]) -> ResultsTable:
        """Load a success log on its own (scores left empty)."""
        success = read_csv_artifact(self._resolve(filepath), dtype={"dataset": str, "method": str})
        empty = pd.DataFrame(columns=["dataset", "method", "measure", "score"])
        return ResultsTable(empty, success)

    def load_meta_matrix(self, filepath: Union[str, Path]) -> pd.DataFrame:
        """
        Load a meta-feature matrix (rows = datasets, columns = feature ids).

        Returns
        -------
        pd.DataFrame
            Float matrix indexed by dataset name
        """
        path = self._resolve(filepath)
        df = read_csv_artifact(path, dtype={"dataset": str})
        if "dataset" not in df.columns:
            raise SchemaError(f"{path.name}: meta matrix needs a 'dataset' column")
        df = df.set_index("dataset").sort_index()
        if df.index.duplicated().any():
            raise SchemaError(f"{path.name}: duplicate dataset rows")
        try:
            df = df.astype(float)
        except ValueError as e:
            raise SchemaError(f"{path.name}: non-numeric meta feature value ({e})")
        logger.info(f"Loaded meta matrix with {df.shape[0]} datasets and {df.shape[1]} features")
        return df
