"""Tests for model documents and prediction"""
import json

import numpy as np
import pytest

from corpus import generate, clinical_spec, write_cohort
from data_model import DiscretizeRule
from errors import ModelFormatError, SchemaMismatchError
from evaluation import predict_learner
from model_io import ModelDocument, load_model, predict, save_model
from pipeline import Pipeline, RunConfig


@pytest.fixture
def cohort_files(tmp_path):
    ds = generate(clinical_spec(seed=21))
    write_cohort(ds, tmp_path / "cohort.csv", tmp_path / "cohort.schema")
    return ds, tmp_path / "cohort.csv", tmp_path / "cohort.schema"


def trained(cohort_files, **options):
    _, data_path, schema_path = cohort_files
    return Pipeline(RunConfig(data_path=data_path, schema_path=schema_path, **options)).train()


@pytest.mark.parametrize("algorithm", ["adtree", "c45"])
def test_saved_model_predicts_like_the_original(cohort_files, tmp_path, algorithm):
    raw, _, _ = cohort_files
    doc = trained(cohort_files, algorithm=algorithm, iterations=5)
    save_model(doc, tmp_path / "model.json")
    restored = load_model(tmp_path / "model.json")
    assert restored.algorithm == algorithm
    first, second = predict(doc, raw), predict(restored, raw)
    assert first.equals(second)
    assert list(first.columns) == ["row", "label", "score", "imputed"]
    assert set(first["label"]) <= {"YES", "NO"}


def test_prediction_replays_imputation_and_discretization(cohort_files):
    raw, _, _ = cohort_files
    rule = DiscretizeRule("PCV", (42.0,), ("NORMAL", "HIGH"))
    doc = trained(cohort_files, algorithm="c45", discretize=(rule,), features=("PCV", "HB", "Headache"))
    assert doc.schema != raw.schema
    prepared, report = doc.preprocessing.apply(raw)
    assert prepared.attribute("PCV").categories == ("NORMAL", "HIGH")
    assert prepared.missing_count("HB") == 0
    assert [a.name for a in prepared.features] == ["HB", "PCV", "Headache"]

    table = predict(doc, raw)
    predicted, scores = predict_learner(doc.model, prepared)
    np.testing.assert_allclose(table["score"], scores)
    np.testing.assert_array_equal(table["label"] == "YES", predicted)

    had_gaps = [any(raw.column(name)[i] is None for name in doc.preprocessing.means) for i in range(len(raw))]
    assert any(had_gaps)
    assert table["imputed"].tolist() == had_gaps
    assert list(report.rows) == [i for i, gap in enumerate(had_gaps) if gap]


def test_prediction_input_must_match_a_known_schema(cohort_files):
    raw, _, _ = cohort_files
    doc = trained(cohort_files, algorithm="c45", features=("HB", "PLT"))
    reordered = raw.subset([]).with_schema(raw.schema[1:] + raw.schema[:1])
    with pytest.raises(SchemaMismatchError):
        predict(doc, reordered)


def test_documents_are_versioned(cohort_files, tmp_path):
    data = trained(cohort_files, algorithm="c45").to_dict()
    assert data["format"] == "dengue-toolkit-model"
    assert data["version"] == 1

    for broken in ({**data, "format": "other"}, {**data, "version": 99}, {**data, "algorithm": "svm"}, {**data, "fingerprint": "0"}):
        with pytest.raises(ModelFormatError):
            ModelDocument.from_dict(broken)

    path = tmp_path / "broken.json"
    path.write_text("{ not json", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_model_json_has_no_nan(cohort_files):
    doc = trained(cohort_files, algorithm="adtree", iterations=3)
    json.loads(doc.to_json())
    assert doc.model.decision_nodes
