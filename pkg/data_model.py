"""
Dataset Module
Schema, CSV ingestion, mean imputation and discretization for patient cohorts
"""
import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from config import CATEGORY_SEPARATOR, MISSING_OUTPUT_TOKEN, MISSING_TOKENS
from errors import (
    AllMissingColumnError,
    AttrNotNumericError,
    EmptyDatasetError,
    HeaderMismatchError,
    LabelArityError,
    MalformedRowError,
    MissingCellError,
    NonNumericCellError,
    SchemaError,
    UnknownAttributeError,
    UnknownCategoryError,
)
from logger import log

# A cell is a float (numeric), a category index (nominal) or None (missing)
Cell = Union[float, int, None]
Source = Union[str, Path, TextIO]


class AttributeKind(str, Enum):
    NUMERIC = "numeric"
    NOMINAL = "nominal"


class AttributeRole(str, Enum):
    FEATURE = "feature"
    TARGET = "target"
    IGNORED = "ignored"


@dataclass(frozen=True)
class AttributeSchema:
    """One column of a cohort: name, kind, role and (nominal only) ordered categories"""

    name: str
    kind: AttributeKind
    role: AttributeRole = AttributeRole.FEATURE
    categories: Tuple[str, ...] = ()

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", AttributeKind(self.kind))
            object.__setattr__(self, "role", AttributeRole(self.role))
        except ValueError as e:
            raise SchemaError(f"attribute '{self.name}': {e}") from None
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))

        if not self.name:
            raise SchemaError("attribute name must be non-empty")
        if self.kind is AttributeKind.NOMINAL:
            if not self.categories:
                raise SchemaError(f"nominal attribute '{self.name}' needs categories")
            if any(not c or c in MISSING_TOKENS for c in self.categories):
                raise SchemaError(f"attribute '{self.name}' has an empty or missing-token category")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"attribute '{self.name}' repeats a category")
        elif self.categories:
            raise SchemaError(f"numeric attribute '{self.name}' cannot list categories")

    @property
    def is_numeric(self) -> bool:
        return self.kind is AttributeKind.NUMERIC

    @property
    def is_nominal(self) -> bool:
        return self.kind is AttributeKind.NOMINAL

    def category_index(self, label: str) -> int:
        """Map a category label to its index"""
        try:
            return self.categories.index(label)
        except ValueError:
            raise UnknownCategoryError(
                f"unknown category '{label}' for attribute '{self.name}'",
                attribute=self.name,
            ) from None

    def to_line(self) -> str:
        """Render as a schema sidecar line: name,kind,role[,cat1|cat2|...]"""
        line = f"{self.name},{self.kind.value},{self.role.value}"
        if self.categories:
            line += "," + CATEGORY_SEPARATOR.join(self.categories)
        return line

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "role": self.role.value,
            "categories": list(self.categories),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "AttributeSchema":
        return cls(data["name"], data["kind"], data["role"], tuple(data.get("categories", ())))


Schema = Tuple[AttributeSchema, ...]


def validate_schema(schema: Iterable[AttributeSchema]) -> Schema:
    """
    Check schema-level invariants

    Returns:
        The schema as a tuple
    """
    schema = tuple(schema)
    names = [a.name for a in schema]
    if len(set(names)) != len(names):
        raise SchemaError("attribute names must be unique")

    targets = [a for a in schema if a.role is AttributeRole.TARGET]
    if len(targets) != 1:
        raise SchemaError(f"schema needs exactly one target attribute, found {len(targets)}")
    target = targets[0]
    if not target.is_nominal or len(target.categories) != 2:
        raise SchemaError(
            f"target '{target.name}' must be nominal with exactly 2 categories (positive first)"
        )
    return schema


def schema_fingerprint(schema: Iterable[AttributeSchema]) -> str:
    """Stable hash of the schema (names, kinds, roles, categories)"""
    text = "\n".join(a.to_line() for a in schema)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_schema(stream: TextIO) -> Schema:
    """
    Parse a schema sidecar: one attribute per line, "name,kind,role[,cat1|cat2|...]"

    Blank lines and lines starting with '#' are skipped.
    """
    attributes = []
    for line_no, raw in enumerate(stream.read().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",", 3)]
        if len(parts) < 3:
            raise SchemaError(f"schema line needs name,kind,role: '{line}'", line=line_no)
        categories = parts[3].split(CATEGORY_SEPARATOR) if len(parts) == 4 else ()
        try:
            attributes.append(
                AttributeSchema(parts[0], parts[1], parts[2], tuple(c.strip() for c in categories))
            )
        except SchemaError as e:
            raise e.add_context("line", line_no)
    return validate_schema(attributes)


def load_schema(path: Union[str, Path]) -> Schema:
    """Load a schema sidecar file"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_schema(f)
    except UnicodeDecodeError as e:
        raise SchemaError(f"schema is not UTF-8 text: {e.reason} at byte {e.start}", file=str(path)) from None
    except SchemaError as e:
        raise e.add_context("file", str(path))


def write_schema(schema: Iterable[AttributeSchema], stream: TextIO):
    """Write a schema sidecar"""
    for attribute in schema:
        stream.write(attribute.to_line() + "\n")


# === DATASET ===

def _normalize_cell(attribute: AttributeSchema, cell, row: int) -> Cell:
    if cell is None:
        return None
    if isinstance(cell, (bool, np.bool_)):
        raise SchemaError(f"boolean cell in '{attribute.name}'", row=row)
    if attribute.is_numeric:
        if not isinstance(cell, (int, float, np.integer, np.floating)):
            raise NonNumericCellError(f"non-numeric cell in '{attribute.name}'", row=row)
        value = float(cell)
        if not math.isfinite(value):
            raise NonNumericCellError(f"non-finite cell in '{attribute.name}'", row=row)
        return value
    if not isinstance(cell, (int, np.integer)):
        raise UnknownCategoryError(f"nominal cell in '{attribute.name}' must be a category index", row=row)
    index = int(cell)
    if not 0 <= index < len(attribute.categories):
        raise UnknownCategoryError(
            f"category index {index} out of range for '{attribute.name}'", row=row
        )
    return index


@dataclass(frozen=True)
class Dataset:
    """
    Immutable table of instances, one cell per schema attribute

    Every transform returns a new Dataset.
    """

    schema: Schema
    instances: Tuple[Tuple[Cell, ...], ...]

    def __post_init__(self):
        schema = validate_schema(self.schema)
        rows = []
        for row_no, row in enumerate(self.instances):
            row = tuple(row)
            if len(row) != len(schema):
                raise MalformedRowError(
                    f"instance has {len(row)} cells, schema has {len(schema)}", row=row_no
                )
            rows.append(tuple(_normalize_cell(a, c, row_no) for a, c in zip(schema, row)))
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "instances", tuple(rows))

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.schema)

    @cached_property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.schema)

    def index_of(self, name: str) -> int:
        for i, attribute in enumerate(self.schema):
            if attribute.name == name:
                return i
        raise UnknownAttributeError(f"unknown attribute '{name}'", attribute=name)

    def attribute(self, name: str) -> AttributeSchema:
        return self.schema[self.index_of(name)]

    @cached_property
    def target_index(self) -> int:
        return next(i for i, a in enumerate(self.schema) if a.role is AttributeRole.TARGET)

    @property
    def target(self) -> AttributeSchema:
        return self.schema[self.target_index]

    @property
    def positive_label(self) -> str:
        return self.target.categories[0]

    @property
    def negative_label(self) -> str:
        return self.target.categories[1]

    @cached_property
    def feature_indices(self) -> Tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.schema) if a.role is AttributeRole.FEATURE)

    @property
    def features(self) -> Tuple[AttributeSchema, ...]:
        return tuple(self.schema[i] for i in self.feature_indices)

    def column(self, name: str) -> Tuple[Cell, ...]:
        index = self.index_of(name)
        return tuple(row[index] for row in self.instances)

    def numeric_values(self, name: str) -> np.ndarray:
        """Numeric column as floats, NaN where missing"""
        attribute = self.attribute(name)
        if not attribute.is_numeric:
            raise AttrNotNumericError(f"attribute '{name}' is not numeric", attribute=name)
        return np.array([np.nan if c is None else c for c in self.column(name)], dtype=float)

    def codes(self, name: str) -> np.ndarray:
        """Nominal column as category indices, -1 where missing"""
        return np.array([-1 if c is None else c for c in self.column(name)], dtype=int)

    def missing_count(self, name: str) -> int:
        return sum(1 for c in self.column(name) if c is None)

    @cached_property
    def positive_mask(self) -> np.ndarray:
        """True where the instance belongs to the positive class"""
        target = [row[self.target_index] for row in self.instances]
        if any(c is None for c in target):
            raise MissingCellError(f"target '{self.target.name}' has missing cells", attribute=self.target.name)
        mask = np.array([c == 0 for c in target], dtype=bool)
        mask.flags.writeable = False
        return mask

    @cached_property
    def signed_labels(self) -> np.ndarray:
        """+1 for positive, -1 for negative"""
        labels = np.where(self.positive_mask, 1.0, -1.0)
        labels.flags.writeable = False
        return labels

    @cached_property
    def feature_matrix(self) -> np.ndarray:
        """n x features float matrix (nominal cells as category indices); no missing allowed"""
        matrix = np.empty((len(self), len(self.feature_indices)), dtype=float)
        for j, index in enumerate(self.feature_indices):
            for i, row in enumerate(self.instances):
                cell = row[index]
                if cell is None:
                    raise MissingCellError(
                        f"missing cell in feature '{self.schema[index].name}'",
                        attribute=self.schema[index].name,
                        row=i,
                    )
                matrix[i, j] = cell
        matrix.flags.writeable = False
        return matrix

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(self.schema, tuple(self.instances[int(i)] for i in indices))

    def with_column(self, name: str, attribute: AttributeSchema, cells: Sequence[Cell]) -> "Dataset":
        """Replace one attribute (schema entry and cells)"""
        index = self.index_of(name)
        schema = self.schema[:index] + (attribute,) + self.schema[index + 1:]
        rows = tuple(row[:index] + (cell,) + row[index + 1:] for row, cell in zip(self.instances, cells))
        return Dataset(schema, rows)

    def with_schema(self, schema: Iterable[AttributeSchema]) -> "Dataset":
        return Dataset(tuple(schema), self.instances)


def require_trainable(ds: Dataset):
    """Training precondition: at least one instance and no missing feature/target cells"""
    if len(ds) == 0:
        raise EmptyDatasetError("dataset has no instances")
    # both properties raise MissingCellError on gaps
    ds.positive_mask
    ds.feature_matrix


# === CSV I/O ===

def _parse_cell(attribute: AttributeSchema, raw: str, line: int) -> Cell:
    if raw in MISSING_TOKENS:
        return None
    if attribute.is_numeric:
        try:
            value = float(raw)
        except ValueError:
            raise NonNumericCellError(
                f"'{raw}' is not a number (attribute '{attribute.name}')",
                attribute=attribute.name,
                line=line,
            ) from None
        if not math.isfinite(value):
            raise NonNumericCellError(
                f"'{raw}' is not a finite number (attribute '{attribute.name}')",
                attribute=attribute.name,
                line=line,
            )
        return value
    try:
        return attribute.category_index(raw)
    except UnknownCategoryError as e:
        raise e.add_context("line", line)


def parse_csv(source: Source, schema: Iterable[AttributeSchema], target_optional: bool = False) -> Dataset:
    """
    Read a comma-separated cohort and type its cells per the schema

    Args:
        source: Path or text stream; first row is the header
        schema: Attribute list (header order may differ)
        target_optional: Allow the target column to be absent (prediction input)

    Returns:
        Dataset with one instance per data row
    """
    schema = validate_schema(schema)
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise HeaderMismatchError("CSV input is empty (no header row)") from None
    except pd.errors.ParserError as e:
        raise MalformedRowError(f"malformed CSV: {e}") from None
    except UnicodeDecodeError as e:
        raise MalformedRowError(f"CSV is not UTF-8 text: {e.reason} at byte {e.start}") from None

    if not isinstance(frame.index, pd.RangeIndex):
        raise MalformedRowError("every data row has more cells than the header")

    header = [str(c).strip() for c in frame.columns]
    expected = {a.name for a in schema}
    target_name = next(a.name for a in schema if a.role is AttributeRole.TARGET)
    absent = expected - set(header)
    if target_optional:
        absent.discard(target_name)
    unexpected = set(header) - expected
    if absent or unexpected or len(set(header)) != len(header):
        raise HeaderMismatchError(
            f"header does not match schema (missing: {sorted(absent)}, unexpected: {sorted(unexpected)})"
        )

    position = {name: i for i, name in enumerate(header)}
    rows = []
    for row_no, record in enumerate(frame.itertuples(index=False, name=None)):
        line = row_no + 2
        if any(not isinstance(value, str) for value in record):
            raise MalformedRowError(f"row has fewer than {len(header)} cells", line=line)
        cells = []
        for attribute in schema:
            if attribute.name not in position:
                cells.append(None)
                continue
            cells.append(_parse_cell(attribute, record[position[attribute.name]].strip(), line))
        rows.append(tuple(cells))

    log.debug(f"Parsed {len(rows)} rows x {len(schema)} attributes")
    return Dataset(schema, tuple(rows))


def _format_cell(attribute: AttributeSchema, cell: Cell) -> str:
    if cell is None:
        return MISSING_OUTPUT_TOKEN
    if attribute.is_numeric:
        return repr(float(cell))
    return attribute.categories[cell]


def serialize_csv(ds: Dataset, stream: Source):
    """Write a dataset as CSV (header in schema order, missing as '?')"""
    frame = pd.DataFrame(
        [[_format_cell(a, c) for a, c in zip(ds.schema, row)] for row in ds.instances],
        columns=list(ds.names),
        dtype=str,
    )
    frame.to_csv(stream, index=False, lineterminator="\n")


def read_dataset(csv_path: Union[str, Path], schema_path: Union[str, Path]) -> Dataset:
    """Load a CSV + schema sidecar pair, attaching the file name to any error"""
    schema = load_schema(schema_path)
    try:
        return parse_csv(csv_path, schema)
    except (MalformedRowError, UnknownCategoryError, NonNumericCellError, HeaderMismatchError) as e:
        raise e.add_context("file", str(csv_path))


# === IMPUTATION ===

@dataclass(frozen=True)
class ImputedColumn:
    attribute: str
    count: int
    value: float


@dataclass(frozen=True)
class ImputationReport:
    """
    Record of replaced cells

    columns lists only attributes with at least one imputation; means holds
    every value that was offered; rows are the instances that got one or more
    imputed cells, in ascending order.
    """

    columns: Tuple[ImputedColumn, ...] = ()
    means: Dict[str, float] = field(default_factory=dict)
    rows: Tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.columns)

    def get(self, attribute: str) -> Optional[ImputedColumn]:
        return next((c for c in self.columns if c.attribute == attribute), None)

    def row_mask(self, n: int) -> np.ndarray:
        """Boolean mask over n instances, True where a cell was imputed"""
        mask = np.zeros(n, dtype=bool)
        mask[list(self.rows)] = True
        return mask

    def to_frame(self) -> pd.DataFrame:
        """Table layout: attribute, count imputed, mean"""
        return pd.DataFrame(
            [(c.attribute, c.count, c.value) for c in self.columns],
            columns=["attribute", "imputed", "mean"],
        )


def column_means(ds: Dataset) -> Dict[str, float]:
    """
    Mean of the observed cells of every numeric feature

    Returns:
        {attribute name: mean}, in schema order
    """
    means = {}
    for attribute in ds.features:
        if not attribute.is_numeric:
            continue
        values = ds.numeric_values(attribute.name)
        observed = values[~np.isnan(values)]
        if observed.size == 0:
            raise AllMissingColumnError(
                f"numeric feature '{attribute.name}' has no observed value to average",
                attribute=attribute.name,
            )
        means[attribute.name] = float(np.mean(observed))
    return means


def apply_means(ds: Dataset, means: Dict[str, float]) -> Tuple[Dataset, ImputationReport]:
    """Replace missing cells of the listed numeric attributes with the given values"""
    result = ds
    imputed = []
    rows = set()
    for name, value in means.items():
        count = result.missing_count(name)
        if count == 0:
            continue
        rows.update(i for i, c in enumerate(result.column(name)) if c is None)
        cells = [value if c is None else c for c in result.column(name)]
        result = result.with_column(name, result.attribute(name), cells)
        imputed.append(ImputedColumn(name, count, float(value)))
    return result, ImputationReport(tuple(imputed), {k: float(v) for k, v in means.items()}, tuple(sorted(rows)))


def impute_means(ds: Dataset) -> Tuple[Dataset, ImputationReport]:
    """
    Replace missing numeric feature cells with the column mean

    Nominal cells are left untouched. Means are applied without rounding.

    Returns:
        (imputed dataset, report with per-attribute counts, the column means and
        the imputed instances)
    """
    imputed, report = apply_means(ds, column_means(ds))
    for column in report.columns:
        log.info(f"Imputed {column.count} value(s) of {column.attribute} with {column.value:.4f}")
    return imputed, report


# === DISCRETIZATION ===

def discretize(ds: Dataset, attr: str, cutpoints: Sequence[float], labels: Sequence[str]) -> Dataset:
    """
    Turn a numeric attribute into a nominal one

    Value v takes label i, where i counts the cutpoints c with v >= c
    (so v < c keeps the lower label and v == c takes the upper one).
    """
    attribute = ds.attribute(attr)
    if not attribute.is_numeric:
        raise AttrNotNumericError(f"attribute '{attr}' is not numeric", attribute=attr)
    cuts = [float(c) for c in cutpoints]
    if len(labels) != len(cuts) + 1:
        raise LabelArityError(
            f"{len(cuts)} cutpoint(s) need {len(cuts) + 1} labels, got {len(labels)}", attribute=attr
        )
    if not all(math.isfinite(c) for c in cuts) or any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise SchemaError(f"cutpoints for '{attr}' must be finite and strictly ascending")

    values = ds.numeric_values(attr)
    if np.isnan(values).any():
        raise MissingCellError(f"cannot discretize '{attr}' with missing cells", attribute=attr)

    codes = np.searchsorted(np.array(cuts), values, side="right")
    nominal = AttributeSchema(attr, AttributeKind.NOMINAL, attribute.role, tuple(labels))
    return ds.with_column(attr, nominal, [int(c) for c in codes])


@dataclass(frozen=True)
class DiscretizeRule:
    attribute: str
    cutpoints: Tuple[float, ...]
    labels: Tuple[str, ...]

    def apply(self, ds: Dataset) -> Dataset:
        return discretize(ds, self.attribute, self.cutpoints, self.labels)

    def to_text(self) -> str:
        cuts = ":".join(repr(c) for c in self.cutpoints)
        return f"{self.attribute}:{cuts}:{':'.join(self.labels)}"


def parse_discretize_rule(text: str) -> DiscretizeRule:
    """
    Parse "attr:cutpoint:labelLow:labelHigh"

    Raises:
        ValueError: if the rule is malformed
    """
    parts = [p.strip() for p in text.split(":")]
    if len(parts) != 4 or not all(parts):
        raise ValueError(f"discretize rule must be attr:cutpoint:labelLow:labelHigh, got '{text}'")
    try:
        cut = float(parts[1])
    except ValueError:
        raise ValueError(f"cutpoint '{parts[1]}' is not a number") from None
    return DiscretizeRule(parts[0], (cut,), (parts[2], parts[3]))


# === DATASET QUERIES ===

def class_distribution(ds: Dataset) -> Tuple[int, int]:
    """
    Count positive and negative instances

    Returns:
        (positives, negatives)
    """
    positives = int(ds.positive_mask.sum())
    return positives, len(ds) - positives


def restrict_features(ds: Dataset, names: Iterable[str]) -> Dataset:
    """Keep only the named features; every other feature becomes ignored"""
    keep = list(dict.fromkeys(names))
    for name in keep:
        if ds.attribute(name).role is not AttributeRole.FEATURE:
            raise UnknownAttributeError(f"'{name}' is not a feature attribute", attribute=name)
    schema = []
    for attribute in ds.schema:
        if attribute.role is AttributeRole.FEATURE and attribute.name not in keep:
            attribute = AttributeSchema(attribute.name, attribute.kind, AttributeRole.IGNORED, attribute.categories)
        schema.append(attribute)
    return ds.with_schema(schema)

