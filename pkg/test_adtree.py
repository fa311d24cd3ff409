"""Tests for ADTree boosting, scoring and classification"""
import copy
import math

import numpy as np
import pytest

from adtree import (
    NO_CANDIDATES,
    ROOT_ID,
    ADTreeConfig,
    ADTreeModel,
    Condition,
    DecisionNode,
    PredictionNode,
    candidate_conditions,
    classify,
    classify_dataset,
    fit_adtree,
    prediction_value,
    reach_mask,
    score,
    score_dataset,
    z_value,
)
from conftest import rows_from_records
from data_model import AttributeSchema, Dataset
from errors import (
    DegenerateSplitError,
    DomainError,
    MissingCellError,
    ModelFormatError,
    SchemaMismatchError,
    SingleClassError,
)

SCHEMA = (
    AttributeSchema("PLT", "numeric", "feature"),
    AttributeSchema("Headache", "nominal", "feature", ("YES", "NO")),
    AttributeSchema("Dengue", "nominal", "target", ("YES", "NO")),
)


def dataset(records, schema=SCHEMA):
    return Dataset(schema, rows_from_records(schema, records))


def cohort(seed=1, n=40):
    rng = np.random.default_rng(seed)
    labels = rng.random(n) < 0.6
    plt = np.where(labels, rng.normal(150.0, 40.0, n), rng.normal(220.0, 40.0, n)).round()
    headache = np.where(rng.random(n) < np.where(labels, 0.8, 0.3), "YES", "NO")
    return dataset(
        [
            {"PLT": float(plt[i]), "Headache": str(headache[i]), "Dengue": "YES" if labels[i] else "NO"}
            for i in range(n)
        ]
    )


def hand_built_model():
    """
    root 0.2
    (1) PLT < 100: 0.5 | (2) Headache = YES: 0.3 / != YES: -1.0
       PLT >= 100: -0.7
    (3) Headache = NO: 0.1 / != NO: -0.1
    """
    nodes = (
        PredictionNode(0, 0.2, (1, 3)),
        PredictionNode(1, 0.5, (2,)),
        PredictionNode(2, -0.7),
        PredictionNode(3, 0.3),
        PredictionNode(4, -1.0),
        PredictionNode(5, 0.1),
        PredictionNode(6, -0.1),
    )
    decisions = (
        DecisionNode(1, 0, Condition.less_than("PLT", 100.0), 1, 2, 0.0),
        DecisionNode(2, 1, Condition.equals("Headache", 0), 3, 4, 0.0),
        DecisionNode(3, 0, Condition.equals("Headache", 1), 5, 6, 0.0),
    )
    return ADTreeModel(SCHEMA, nodes, decisions, ADTreeConfig(3, 1.0))


# === BUILDING BLOCKS ===

def test_prediction_value_is_half_log_ratio():
    assert prediction_value(3.0, 1.0, 1.0) == pytest.approx(0.5 * math.log(2.0))
    assert prediction_value(53.0, 12.0, 1.0) == pytest.approx(0.5 * math.log(54.0 / 13.0))
    assert prediction_value(2.0, 2.0, 0.0) == 0.0


def test_prediction_value_without_smoothing_needs_both_classes():
    with pytest.raises(DegenerateSplitError):
        prediction_value(2.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        prediction_value(1.0, 1.0, -1.0)


def test_config_validation():
    with pytest.raises(DomainError):
        ADTreeConfig(iterations=-1)
    with pytest.raises(DomainError):
        ADTreeConfig(epsilon=-0.5)


def test_candidate_conditions_cover_midpoints_and_present_categories():
    ds = dataset(
        [
            {"PLT": 100.0, "Headache": "YES", "Dengue": "YES"},
            {"PLT": 120.0, "Headache": "YES", "Dengue": "NO"},
            {"PLT": 120.0, "Headache": "NO", "Dengue": "NO"},
            {"PLT": 200.0, "Headache": "NO", "Dengue": "YES"},
        ]
    )
    conditions = candidate_conditions(ds, np.ones(4, dtype=bool))
    assert conditions == [
        Condition.less_than("PLT", 110.0),
        Condition.less_than("PLT", 160.0),
        Condition.equals("Headache", 0),
        Condition.equals("Headache", 1),
    ]
    # only the YES rows reach: Headache has a single value there
    assert candidate_conditions(ds, [0, 1]) == [Condition.less_than("PLT", 110.0)]


def test_z_value_by_hand():
    ds = dataset(
        [
            {"PLT": 1.0, "Headache": "YES", "Dengue": "YES"},
            {"PLT": 2.0, "Headache": "YES", "Dengue": "NO"},
            {"PLT": 3.0, "Headache": "NO", "Dengue": "YES"},
            {"PLT": 4.0, "Headache": "NO", "Dengue": "YES"},
        ]
    )
    weights = np.array([1.0, 2.0, 3.0, 4.0])
    precondition = np.array([True, True, True, False])
    z = z_value(ds, weights, precondition, Condition.less_than("PLT", 2.5))
    # true cell: W+ = 1, W- = 2; false cell: W+ = 3, W- = 0; outside: 4
    assert z == pytest.approx(2.0 * math.sqrt(2.0) + 4.0)


# === SCORING ===

def test_score_sums_every_reached_prediction_node():
    model = hand_built_model()
    assert score(model, (50.0, 0, 0)) == pytest.approx(0.2 + 0.5 + 0.3 - 0.1)
    assert score(model, (50.0, 1, 0)) == pytest.approx(0.2 + 0.5 - 1.0 + 0.1)
    assert score(model, (150.0, 0, 0)) == pytest.approx(0.2 - 0.7 - 0.1)
    assert score(model, (100.0, 1, 0)) == pytest.approx(0.2 - 0.7 + 0.1)


def test_classify_returns_label_and_margin():
    model = hand_built_model()
    assert classify(model, (50.0, 0, None)) == ("YES", pytest.approx(0.9))
    label, margin = classify(model, (50.0, 1, None))
    assert label == "NO"
    assert margin == pytest.approx(0.2)


def test_score_dataset_matches_single_instance_scores():
    model = hand_built_model()
    ds = cohort()
    expected = [score(model, row) for row in ds.instances]
    np.testing.assert_allclose(score_dataset(model, ds), expected)
    predicted, scores = classify_dataset(model, ds)
    np.testing.assert_array_equal(predicted, scores >= 0)


def test_truncated_model_drops_later_iterations():
    model = hand_built_model().truncated(1)
    assert model.iterations == 1
    assert [n.id for n in model.prediction_nodes] == [0, 1, 2]
    assert score(model, (50.0, 1, 0)) == pytest.approx(0.7)


def test_scoring_checks_schema_and_missing_cells():
    model = hand_built_model()
    with pytest.raises(SchemaMismatchError):
        score(model, (50.0, 0))
    with pytest.raises(MissingCellError):
        score(model, (None, 0, 0))
    other = (AttributeSchema("PCV", "numeric", "feature"),) + SCHEMA[1:]
    with pytest.raises(SchemaMismatchError):
        score_dataset(model, Dataset(other, ((1.0, 0, 0),)))


# === TRAINING ===

def test_root_only_model():
    ds = cohort()
    model = fit_adtree(ds, ADTreeConfig(iterations=0))
    positives = int(ds.positive_mask.sum())
    assert model.decision_nodes == ()
    assert model.root.value == pytest.approx(0.5 * math.log((positives + 1.0) / (len(ds) - positives + 1.0)))


def test_single_class_cannot_be_boosted():
    ds = dataset([{"PLT": float(v), "Headache": "YES", "Dengue": "YES"} for v in range(5)])
    with pytest.raises(SingleClassError):
        fit_adtree(ds, ADTreeConfig(iterations=1))
    assert fit_adtree(ds, ADTreeConfig(iterations=0)).root.value > 0


def test_node_ids_follow_iterations():
    model = fit_adtree(cohort(), ADTreeConfig(iterations=5))
    assert [d.id for d in model.decision_nodes] == [1, 2, 3, 4, 5]
    for d in model.decision_nodes:
        assert (d.true_child, d.false_child) == (2 * d.id - 1, 2 * d.id)
        assert d.id in model.node(d.parent).children
        assert d.parent < 2 * d.id - 1


def test_each_iteration_picks_the_minimum_z():
    ds = cohort(seed=4, n=30)
    model = fit_adtree(ds, ADTreeConfig(iterations=4))
    y = ds.signed_labels
    for decision in model.decision_nodes:
        before = model.truncated(decision.id - 1)
        weights = np.exp(-y * score_dataset(before, ds))
        best = math.inf
        for node in before.prediction_nodes:
            mask = reach_mask(before, ds, node.id)
            for condition in candidate_conditions(ds, mask):
                best = min(best, z_value(ds, weights, mask, condition))
        assert decision.z == pytest.approx(best, rel=1e-9)
        chosen_mask = reach_mask(before, ds, decision.parent)
        assert z_value(ds, weights, chosen_mask, decision.condition) == pytest.approx(best, rel=1e-9)


def test_loss_history_is_the_exponential_loss_of_each_prefix():
    ds = cohort(seed=2)
    model = fit_adtree(ds, ADTreeConfig(iterations=6))
    assert len(model.loss_history) == 7
    y = ds.signed_labels
    for t, loss in enumerate(model.loss_history):
        f = score_dataset(model.truncated(t), ds)
        assert loss == pytest.approx(float(np.exp(-y * f).sum()), rel=1e-9)


def test_without_smoothing_loss_equals_z_and_never_increases():
    records = [{"PLT": 1.0, "Headache": "YES", "Dengue": "YES"}] * 3 + [
        {"PLT": 1.0, "Headache": "YES", "Dengue": "NO"},
        {"PLT": 1.0, "Headache": "NO", "Dengue": "YES"},
    ] + [{"PLT": 1.0, "Headache": "NO", "Dengue": "NO"}] * 3
    model = fit_adtree(dataset(records), ADTreeConfig(iterations=3, epsilon=0.0))
    assert model.loss_history[0] == pytest.approx(8.0)
    assert model.loss_history[1] == pytest.approx(4.0 * math.sqrt(3.0))
    for t, decision in enumerate(model.decision_nodes, start=1):
        assert model.loss_history[t] == pytest.approx(decision.z, rel=1e-12)
        assert model.loss_history[t] <= model.loss_history[t - 1] + 1e-12


def test_without_smoothing_a_pure_split_is_degenerate():
    records = [{"PLT": float(v), "Headache": "YES", "Dengue": "NO"} for v in (1, 2)]
    records += [{"PLT": float(v), "Headache": "YES", "Dengue": "YES"} for v in (8, 9)]
    with pytest.raises(DegenerateSplitError):
        fit_adtree(dataset(records), ADTreeConfig(iterations=1, epsilon=0.0))


def test_stops_early_when_nothing_can_be_split():
    records = [{"PLT": 5.0, "Headache": "YES", "Dengue": label} for label in ("YES", "NO", "YES")]
    model = fit_adtree(dataset(records), ADTreeConfig(iterations=3))
    assert model.iterations == 0
    assert model.warnings == (NO_CANDIDATES,)


def test_separable_training_data_is_classified_correctly():
    records = [{"PLT": float(v), "Headache": "YES", "Dengue": "NO"} for v in (200, 210, 230, 250)]
    records += [{"PLT": float(v), "Headache": "NO", "Dengue": "YES"} for v in (60, 80, 90, 100, 120, 130)]
    ds = dataset(records)
    model = fit_adtree(ds, ADTreeConfig(iterations=1))
    predicted, _ = classify_dataset(model, ds)
    np.testing.assert_array_equal(predicted, ds.positive_mask)


def test_training_is_deterministic():
    ds = cohort(seed=9)
    assert fit_adtree(ds).to_dict() == fit_adtree(ds).to_dict()


def test_document_form_preserves_scores():
    ds = cohort(seed=5)
    model = fit_adtree(ds, ADTreeConfig(iterations=4))
    restored = ADTreeModel.from_dict(model.to_dict(), ds.schema)
    np.testing.assert_allclose(score_dataset(restored, ds), score_dataset(model, ds))
    assert restored.root.id == ROOT_ID


def test_render_text_lists_every_branch():
    text = hand_built_model().render_text()
    assert text.splitlines()[0] == ": 0.200"
    assert "|  (1)PLT < 100: 0.500" in text
    assert "|  |  (2)Headache = YES: 0.300" in text
    assert "|  (3)Headache != NO: -0.100" in text
    assert "Legend: -ve = NO, +ve = YES" in text


def random_dataset(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    schema = (
        AttributeSchema("A", "numeric", "feature"),
        AttributeSchema("B", "nominal", "feature", ("X", "Y", "Z")),
        AttributeSchema("C", "numeric", "feature"),
        SCHEMA[-1],
    )
    labels = rng.random(n) < 0.5
    labels[0], labels[1] = True, False
    rows = tuple(
        (float(rng.integers(0, 4)), int(rng.integers(0, 3)), float(rng.integers(0, 3)), 0 if labels[i] else 1)
        for i in range(n)
    )
    return Dataset(schema, rows)


@pytest.mark.parametrize("seed", range(100))
def test_greedy_rule_is_the_exhaustive_minimum_on_small_random_data(seed):
    ds = random_dataset(seed)
    model = fit_adtree(ds, ADTreeConfig(iterations=3))
    y = ds.signed_labels
    for decision in model.decision_nodes:
        before = model.truncated(decision.id - 1)
        weights = np.exp(-y * score_dataset(before, ds))
        best = min(
            z_value(ds, weights, reach_mask(before, ds, node.id), condition)
            for node in before.prediction_nodes
            for condition in candidate_conditions(ds, reach_mask(before, ds, node.id))
        )
        assert decision.z == pytest.approx(best, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_unsmoothed_loss_never_increases_on_small_random_data(seed):
    ds = random_dataset(seed)
    try:
        model = fit_adtree(ds, ADTreeConfig(iterations=3, epsilon=0.0))
    except DegenerateSplitError:
        return
    for t in range(1, len(model.loss_history)):
        assert model.loss_history[t] <= model.loss_history[t - 1] + 1e-9


def test_new_rule_only_moves_scores_inside_its_precondition():
    ds = cohort(seed=9, n=50)
    model = fit_adtree(ds, ADTreeConfig(iterations=6))
    for decision in model.decision_nodes:
        before = model.truncated(decision.id - 1)
        after = model.truncated(decision.id)
        outside = ~reach_mask(before, ds, decision.parent)
        shift = score_dataset(after, ds) - score_dataset(before, ds)
        np.testing.assert_allclose(shift[outside], 0.0, atol=1e-12)
        true_rows = reach_mask(after, ds, decision.true_child)
        false_rows = reach_mask(after, ds, decision.false_child)
        np.testing.assert_allclose(shift[true_rows], model.node(decision.true_child).value)
        np.testing.assert_allclose(shift[false_rows], model.node(decision.false_child).value)


def corrupted(data, change):
    data = copy.deepcopy(data)
    change(data)
    return data


@pytest.mark.parametrize(
    "change",
    [
        lambda d: d["decision_nodes"][1].update(parent=99),
        lambda d: d["decision_nodes"][0].update(true_child=42),
        lambda d: d["decision_nodes"][1].update(false_child=d["decision_nodes"][0]["false_child"]),
        lambda d: d["prediction_nodes"].pop(),
        lambda d: d["prediction_nodes"][0].update(children=[7]),
        lambda d: d["prediction_nodes"].append(dict(d["prediction_nodes"][1])),
    ],
)
def test_inconsistent_node_ids_are_rejected_at_load(change):
    ds = cohort()
    data = fit_adtree(ds, ADTreeConfig(iterations=3)).to_dict()
    with pytest.raises(ModelFormatError):
        ADTreeModel.from_dict(corrupted(data, change), ds.schema)
