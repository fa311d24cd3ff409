"""
Model Documents
Versioned JSON documents for fitted ADTree and C4.5 models, carrying the
preparation steps prediction data must go through
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from adtree import ADTreeModel
from c45 import C45Tree
from config import FORMAT_VERSION, MODEL_FORMAT
from data_model import (
    AttributeSchema,
    Dataset,
    DiscretizeRule,
    ImputationReport,
    Schema,
    apply_means,
    restrict_features,
    schema_fingerprint,
    validate_schema,
)
from errors import ModelFormatError, SchemaError, SchemaMismatchError
from evaluation import Model, predict_learner
from logger import log


@dataclass(frozen=True)
class Preprocessing:
    """
    Steps that turned raw training CSV into the training dataset

    Replayed in order on prediction input: mean imputation with the
    training means, discretization, feature restriction.
    """

    input_schema: Schema
    means: Dict[str, float] = field(default_factory=dict)
    discretize: Tuple[DiscretizeRule, ...] = ()
    features: Tuple[str, ...] = ()

    def apply(self, ds: Dataset) -> Tuple[Dataset, ImputationReport]:
        """Replay the steps; the report says which instances were imputed"""
        if ds.fingerprint != schema_fingerprint(self.input_schema):
            raise SchemaMismatchError("input schema differs from the schema the model was trained on")
        ds, report = apply_means(ds, self.means)
        for column in report.columns:
            log.info(f"Imputed {column.count} value(s) of {column.attribute} with training mean {column.value:.4f}")
        for rule in self.discretize:
            ds = rule.apply(ds)
        if self.features:
            ds = restrict_features(ds, self.features)
        return ds, report

    def to_dict(self) -> Dict:
        return {
            "input_schema": [a.to_dict() for a in self.input_schema],
            "means": dict(self.means),
            "discretize": [
                {"attribute": r.attribute, "cutpoints": list(r.cutpoints), "labels": list(r.labels)}
                for r in self.discretize
            ],
            "features": list(self.features),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Preprocessing":
        return cls(
            input_schema=_schema_from(data["input_schema"]),
            means={k: float(v) for k, v in data.get("means", {}).items()},
            discretize=tuple(
                DiscretizeRule(r["attribute"], tuple(float(c) for c in r["cutpoints"]), tuple(r["labels"]))
                for r in data.get("discretize", [])
            ),
            features=tuple(data.get("features", ())),
        )


def _schema_from(items: List[Dict]) -> Schema:
    try:
        return validate_schema(AttributeSchema.from_dict(item) for item in items)
    except (KeyError, TypeError) as e:
        raise ModelFormatError(f"malformed schema in document: {e}") from None
    except SchemaError as e:
        raise ModelFormatError(f"invalid schema in document: {e}") from None


@dataclass(frozen=True)
class ModelDocument:
    model: Model
    preprocessing: Optional[Preprocessing] = None

    @property
    def algorithm(self) -> str:
        return "adtree" if isinstance(self.model, ADTreeModel) else "c45"

    @property
    def schema(self) -> Schema:
        return self.model.schema

    def to_dict(self) -> Dict:
        data = {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "algorithm": self.algorithm,
            "schema": [a.to_dict() for a in self.schema],
            "fingerprint": self.model.fingerprint,
            "model": self.model.to_dict(),
        }
        if self.preprocessing is not None:
            data["preprocessing"] = self.preprocessing.to_dict()
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelDocument":
        if not isinstance(data, dict) or data.get("format") != MODEL_FORMAT:
            raise ModelFormatError(f"not a {MODEL_FORMAT} document")
        if data.get("version") != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model version {data.get('version')} (expected {FORMAT_VERSION})")
        if "schema" not in data or "model" not in data:
            raise ModelFormatError("model document needs 'schema' and 'model'")

        schema = _schema_from(data["schema"])
        if data.get("fingerprint") != schema_fingerprint(schema):
            raise ModelFormatError("schema fingerprint does not match the embedded schema")

        algorithm = data.get("algorithm")
        if algorithm == "adtree":
            model = ADTreeModel.from_dict(data["model"], schema)
        elif algorithm == "c45":
            model = C45Tree.from_dict(data["model"], schema)
        else:
            raise ModelFormatError(f"unknown algorithm tag '{algorithm}'")

        preprocessing = None
        if "preprocessing" in data:
            try:
                preprocessing = Preprocessing.from_dict(data["preprocessing"])
            except (KeyError, TypeError, ValueError) as e:
                raise ModelFormatError(f"malformed preprocessing block: {e}") from None
        return cls(model, preprocessing)


def save_model(doc: ModelDocument, path: Union[str, Path]):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(doc.to_json())
    log.log_step("SAVE MODEL", doc.algorithm, str(path), "COMPLETED")


def load_model(path: Union[str, Path]) -> ModelDocument:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"model is not valid JSON: {e}", file=str(path)) from None
    try:
        return ModelDocument.from_dict(data)
    except ModelFormatError as e:
        raise e.add_context("file", str(path))


def predict(doc: ModelDocument, ds: Dataset) -> pd.DataFrame:
    """
    Label and score every instance

    Args:
        doc: Loaded model document
        ds: Raw input (parsed with the document's input schema) or data
            already in the model's schema

    Returns:
        DataFrame with columns row, label, score, imputed (True where the
        instance had a cell filled with a training mean)
    """
    imputed = np.zeros(len(ds), dtype=bool)
    if doc.preprocessing is not None and ds.fingerprint == schema_fingerprint(doc.preprocessing.input_schema):
        ds, report = doc.preprocessing.apply(ds)
        imputed = report.row_mask(len(ds))
    if ds.fingerprint != doc.model.fingerprint:
        raise SchemaMismatchError("prediction data does not match the model schema")

    predicted, scores = predict_learner(doc.model, ds)
    labels = np.where(predicted, doc.model.positive_label, doc.model.negative_label)
    return pd.DataFrame({"row": np.arange(1, len(ds) + 1), "label": labels, "score": scores, "imputed": imputed})
