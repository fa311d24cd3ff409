"""
Synthetic Cohort Module
Deterministic, count-stratified patient cohorts with the clinical/laboratory attribute layout
"""
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from config import RANDOM_SEED
from data_model import (
    AttributeKind,
    AttributeRole,
    AttributeSchema,
    Dataset,
    Schema,
    serialize_csv,
    validate_schema,
    write_schema,
)
from errors import InvalidSpecError, SchemaError
from logger import log


@dataclass(frozen=True)
class NumericParams:
    """Class-conditional normal distribution"""

    mean_pos: float
    sd_pos: float
    mean_neg: float
    sd_neg: float
    decimals: Optional[int] = None
    floor: Optional[float] = None


@dataclass(frozen=True)
class NominalParams:
    """Class-conditional categorical distribution"""

    categories: Tuple[str, ...]
    probs_pos: Tuple[float, ...]
    probs_neg: Tuple[float, ...]


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    params: Union[NumericParams, NominalParams]
    missing_rate: float = 0.0
    role: AttributeRole = AttributeRole.FEATURE

    @property
    def is_numeric(self) -> bool:
        return isinstance(self.params, NumericParams)

    def schema(self) -> AttributeSchema:
        if self.is_numeric:
            return AttributeSchema(self.name, AttributeKind.NUMERIC, self.role)
        return AttributeSchema(self.name, AttributeKind.NOMINAL, self.role, self.params.categories)


@dataclass(frozen=True)
class CohortSpec:
    """
    Synthetic cohort description

    Args:
        n: Total records
        n_pos: Positive records (exact)
        seed: Generator seed
        attributes: Per-attribute distributions and missing rates
        target: Target attribute name
        labels: (positive label, negative label)
    """

    n: int
    n_pos: int
    seed: int = RANDOM_SEED
    attributes: Tuple[AttributeSpec, ...] = ()
    target: str = "Dengue"
    labels: Tuple[str, str] = ("YES", "NO")

    def validate(self):
        if self.n < 1:
            raise InvalidSpecError(f"cohort needs at least one record, got n={self.n}")
        if not 0 <= self.n_pos <= self.n:
            raise InvalidSpecError(f"need 0 <= n_pos <= n, got n_pos={self.n_pos}, n={self.n}")
        for attribute in self.attributes:
            _validate_attribute(attribute)
        try:
            self.schema()
        except SchemaError as e:
            raise InvalidSpecError(f"cohort schema is invalid: {e}") from None

    def schema(self) -> Schema:
        target = AttributeSchema(self.target, AttributeKind.NOMINAL, AttributeRole.TARGET, self.labels)
        return validate_schema(tuple(a.schema() for a in self.attributes) + (target,))


def _validate_attribute(attribute: AttributeSpec):
    where = f"attribute '{attribute.name}'"
    if not 0 <= attribute.missing_rate < 1:
        raise InvalidSpecError(f"{where}: missing rate must be in [0, 1), got {attribute.missing_rate}")
    if attribute.role is AttributeRole.TARGET:
        raise InvalidSpecError(f"{where}: the target is generated from the class counts")
    params = attribute.params
    if attribute.is_numeric:
        values = (params.mean_pos, params.sd_pos, params.mean_neg, params.sd_neg)
        if not all(math.isfinite(v) for v in values) or params.sd_pos < 0 or params.sd_neg < 0:
            raise InvalidSpecError(f"{where}: means must be finite and standard deviations >= 0")
        if params.decimals is not None and params.decimals < 0:
            raise InvalidSpecError(f"{where}: decimals must be >= 0")
        return
    k = len(params.categories)
    for probs in (params.probs_pos, params.probs_neg):
        if len(probs) != k:
            raise InvalidSpecError(f"{where}: {len(probs)} probabilities for {k} categories")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise InvalidSpecError(f"{where}: class probabilities must be >= 0 and sum to 1")


def generate(spec: CohortSpec) -> Dataset:
    """
    Draw a cohort with exactly n_pos positive and n - n_pos negative records

    Numeric cells come from class-conditional normals, nominal cells from
    class-conditional categoricals. Each attribute then loses exactly
    round(missing_rate * n) cells (at most n - 1); the target is never missing.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n

    positive = np.zeros(n, dtype=bool)
    positive[rng.permutation(n)[: spec.n_pos]] = True

    columns = []
    for attribute in spec.attributes:
        params = attribute.params
        if attribute.is_numeric:
            draws_pos = rng.normal(params.mean_pos, params.sd_pos, n)
            draws_neg = rng.normal(params.mean_neg, params.sd_neg, n)
            values = np.where(positive, draws_pos, draws_neg)
            if params.floor is not None:
                values = np.maximum(values, params.floor)
            if params.decimals is not None:
                values = np.round(values, params.decimals)
            cells = [float(v) for v in values]
        else:
            k = len(params.categories)
            draws_pos = rng.choice(k, size=n, p=np.asarray(params.probs_pos, dtype=float))
            draws_neg = rng.choice(k, size=n, p=np.asarray(params.probs_neg, dtype=float))
            cells = [int(c) for c in np.where(positive, draws_pos, draws_neg)]

        missing = min(int(round(attribute.missing_rate * n)), n - 1)
        if missing:
            for row in rng.choice(n, size=missing, replace=False):
                cells[int(row)] = None
        columns.append(cells)

    target = [0 if p else 1 for p in positive]
    rows = tuple(tuple(column[i] for column in columns) + (target[i],) for i in range(n))
    log.debug(f"Generated cohort: {spec.n_pos} positive / {n - spec.n_pos} negative, seed {spec.seed}")
    return Dataset(spec.schema(), rows)


# === PRESETS ===

# Missing-cell counts per 65 records for the continuous attributes
CLINICAL_MISSING_COUNTS = {"FD": 1, "Pulse": 1, "HB": 7, "WBC": 8, "PLT": 7, "PCV": 24}
CLINICAL_COHORT_SIZE = 65
CLINICAL_POSITIVES = 53

YES_NO = ("YES", "NO")


def _yes_no(name: str, p_pos: float, p_neg: float) -> AttributeSpec:
    return AttributeSpec(name, NominalParams(YES_NO, (p_pos, 1 - p_pos), (p_neg, 1 - p_neg)))


def clinical_spec(seed: int = RANDOM_SEED, n: int = CLINICAL_COHORT_SIZE, n_pos: int = CLINICAL_POSITIVES) -> CohortSpec:
    """
    Synthetic stand-in for a 65-record dengue cohort (53 confirmed)

    All distribution parameters are invented for legible demo output. Missing
    counts of the continuous attributes follow the 65-record layout
    (scaled for other n); IgM/IgG are ignored and more than 40% missing.
    """
    def rate(name: str) -> float:
        return CLINICAL_MISSING_COUNTS[name] / CLINICAL_COHORT_SIZE

    attributes = (
        AttributeSpec("FD", NumericParams(7.7, 2.0, 6.6, 2.2, decimals=0, floor=1.0), rate("FD")),
        AttributeSpec("Pulse", NumericParams(88.0, 11.0, 97.0, 13.0, decimals=0, floor=40.0), rate("Pulse")),
        AttributeSpec("HB", NumericParams(12.3, 1.5, 10.9, 1.8, decimals=1, floor=5.0), rate("HB")),
        AttributeSpec("WBC", NumericParams(8.9, 3.2, 11.6, 3.8, decimals=1, floor=1.0), rate("WBC")),
        AttributeSpec("PLT", NumericParams(186.0, 70.0, 232.0, 80.0, decimals=0, floor=10.0), rate("PLT")),
        AttributeSpec("PCV", NumericParams(43.5, 5.0, 41.2, 5.5, decimals=1, floor=20.0), rate("PCV")),
        _yes_no("Vomiting", 0.45, 0.35),
        _yes_no("BodyPains", 0.70, 0.65),
        AttributeSpec(
            "Rashes",
            NominalParams(("NONE", "MILD", "SEVERE"), (0.55, 0.30, 0.15), (0.70, 0.20, 0.10)),
        ),
        _yes_no("Bleedingsite", 0.15, 0.15),
        _yes_no("Headache", 0.75, 0.35),
        _yes_no("Restlessness", 0.30, 0.25),
        _yes_no("AbdominalPain", 0.35, 0.25),
        AttributeSpec(
            "IgM", NominalParams(("POSITIVE", "NEGATIVE"), (0.8, 0.2), (0.2, 0.8)), 0.45, AttributeRole.IGNORED
        ),
        AttributeSpec(
            "IgG", NominalParams(("POSITIVE", "NEGATIVE"), (0.6, 0.4), (0.3, 0.7)), 0.45, AttributeRole.IGNORED
        ),
    )
    return CohortSpec(n=n, n_pos=n_pos, seed=seed, attributes=attributes)


def separable_spec(n: int = CLINICAL_COHORT_SIZE, n_pos: int = CLINICAL_POSITIVES, gap: float = 8.0, seed: int = RANDOM_SEED) -> CohortSpec:
    if not (math.isfinite(gap) and gap >= 0):
        raise InvalidSpecError(f"gap must be a finite value >= 0, got {gap}")
    marker = AttributeSpec("Marker", NumericParams(gap, 1.0, 0.0, 1.0))
    return CohortSpec(n=n, n_pos=n_pos, seed=seed, attributes=(marker,))


def separable_preset(n: int = CLINICAL_COHORT_SIZE, n_pos: int = CLINICAL_POSITIVES, gap: float = 8.0, seed: int = RANDOM_SEED) -> Dataset:
    """
    One numeric attribute whose class means are `gap` standard deviations apart

    gap = 0 carries no signal; gap >= 6 separates the classes with
    overwhelming probability at n <= 200.
    """
    return generate(separable_spec(n, n_pos, gap, seed))


def write_cohort(ds: Dataset, csv_path: Union[str, Path], schema_path: Union[str, Path]):
    """Write the CSV + schema sidecar pair"""
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        serialize_csv(ds, f)
    with open(schema_path, "w", encoding="utf-8", newline="\n") as f:
        write_schema(ds.schema, f)
    log.log_step("WRITE", f"{len(ds)} records", f"{csv_path} + {schema_path}", "COMPLETED")
