"""
Alternating Decision Tree Module
Boosted ADTree learner (full search over every prediction node), scorer and classifier
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import BOOSTING_ITERATIONS, SMOOTHING_EPSILON
from data_model import AttributeRole, AttributeSchema, Cell, Dataset, Schema, require_trainable, schema_fingerprint
from errors import (
    DegenerateSplitError,
    DomainError,
    ModelFormatError,
    SchemaMismatchError,
    SingleClassError,
    UnknownAttributeError,
)
from logger import log

ROOT_ID = 0

# Relative margin under which two Z values count as tied
TIE_TOLERANCE = 1e-12

NO_CANDIDATES = "no-candidates"


class ConditionKind(str, Enum):
    LESS_THAN = "lt"
    EQUALS = "eq"


@dataclass(frozen=True)
class Condition:
    """Attribute test: numeric `attr < threshold` or nominal `attr == category`"""

    attribute: str
    kind: ConditionKind
    threshold: float = 0.0
    category: int = -1

    @classmethod
    def less_than(cls, attribute: str, threshold: float) -> "Condition":
        if not math.isfinite(threshold):
            raise DomainError(f"threshold for '{attribute}' must be finite")
        return cls(attribute, ConditionKind.LESS_THAN, threshold=float(threshold))

    @classmethod
    def equals(cls, attribute: str, category: int) -> "Condition":
        return cls(attribute, ConditionKind.EQUALS, category=int(category))

    def holds(self, values: np.ndarray) -> np.ndarray:
        """Vectorized test over a column (numeric values or category codes)"""
        if self.kind is ConditionKind.LESS_THAN:
            return values < self.threshold
        return values == self.category

    def describe(self, attribute: AttributeSchema, negate: bool = False) -> str:
        if self.kind is ConditionKind.LESS_THAN:
            op = ">=" if negate else "<"
            return f"{self.attribute} {op} {self.threshold:g}"
        op = "!=" if negate else "="
        return f"{self.attribute} {op} {attribute.categories[self.category]}"

    def to_dict(self, attribute: AttributeSchema) -> Dict:
        if self.kind is ConditionKind.LESS_THAN:
            return {"attribute": self.attribute, "test": self.kind.value, "threshold": self.threshold}
        return {"attribute": self.attribute, "test": self.kind.value, "category": attribute.categories[self.category]}

    @classmethod
    def from_dict(cls, data: Dict, attribute: AttributeSchema) -> "Condition":
        test = ConditionKind(data["test"])
        if test is ConditionKind.LESS_THAN:
            if not attribute.is_numeric:
                raise ModelFormatError(f"'{attribute.name}' is not numeric but has a threshold test")
            return cls.less_than(attribute.name, float(data["threshold"]))
        if not attribute.is_nominal:
            raise ModelFormatError(f"'{attribute.name}' is not nominal but has an equality test")
        return cls.equals(attribute.name, attribute.category_index(data["category"]))


@dataclass(frozen=True)
class PredictionNode:
    id: int
    value: float
    children: Tuple[int, ...] = ()  # decision node ids


@dataclass(frozen=True)
class DecisionNode:
    id: int  # equals the boosting iteration that created it
    parent: int  # prediction node id
    condition: Condition
    true_child: int
    false_child: int
    z: float

    @property
    def iteration(self) -> int:
        return self.id


@dataclass(frozen=True)
class ADTreeConfig:
    iterations: int = BOOSTING_ITERATIONS
    epsilon: float = SMOOTHING_EPSILON

    def __post_init__(self):
        if self.iterations < 0 or int(self.iterations) != self.iterations:
            raise DomainError(f"boosting iterations must be a non-negative integer, got {self.iterations}")
        if not self.epsilon >= 0:
            raise DomainError(f"smoothing epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class ADTreeModel:
    """
    Fitted alternating decision tree

    Prediction node ids: root is 0, iteration t adds 2t-1 (condition true)
    and 2t (condition false). Decision nodes are kept in iteration order.
    """

    schema: Schema
    prediction_nodes: Tuple[PredictionNode, ...]
    decision_nodes: Tuple[DecisionNode, ...]
    config: ADTreeConfig = ADTreeConfig()
    loss_history: Tuple[float, ...] = ()
    warnings: Tuple[str, ...] = ()
    _nodes_by_id: Dict[int, PredictionNode] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_nodes_by_id", {node.id: node for node in self.prediction_nodes})

    @property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.schema)

    @property
    def positive_label(self) -> str:
        return _target(self.schema).categories[0]

    @property
    def negative_label(self) -> str:
        return _target(self.schema).categories[1]

    @property
    def root(self) -> PredictionNode:
        return self._nodes_by_id[ROOT_ID]

    @property
    def iterations(self) -> int:
        """Decision nodes actually built (can be below config.iterations)"""
        return len(self.decision_nodes)

    def node(self, node_id: int) -> PredictionNode:
        return self._nodes_by_id[node_id]

    def attribute(self, name: str) -> AttributeSchema:
        for attribute in self.schema:
            if attribute.name == name:
                return attribute
        raise UnknownAttributeError(f"unknown attribute '{name}'", attribute=name)

    def truncated(self, iterations: int) -> "ADTreeModel":
        """The model as it stood after the first `iterations` boosting rounds"""
        if not 0 <= iterations <= self.iterations:
            raise DomainError(f"model has {self.iterations} iteration(s), cannot truncate to {iterations}")
        decisions = self.decision_nodes[:iterations]
        kept = {ROOT_ID} | {d.true_child for d in decisions} | {d.false_child for d in decisions}
        nodes = tuple(
            PredictionNode(n.id, n.value, tuple(c for c in n.children if c <= iterations))
            for n in self.prediction_nodes
            if n.id in kept
        )
        return ADTreeModel(
            self.schema,
            nodes,
            decisions,
            ADTreeConfig(iterations, self.config.epsilon),
            self.loss_history[: iterations + 1],
            (),
        )

    def to_dict(self) -> Dict:
        return {
            "iterations": self.config.iterations,
            "epsilon": self.config.epsilon,
            "positive_label": self.positive_label,
            "prediction_nodes": [
                {"id": n.id, "value": n.value, "children": list(n.children)} for n in self.prediction_nodes
            ],
            "decision_nodes": [
                {
                    "id": d.id,
                    "parent": d.parent,
                    "condition": d.condition.to_dict(self.attribute(d.condition.attribute)),
                    "true_child": d.true_child,
                    "false_child": d.false_child,
                    "z": d.z,
                }
                for d in self.decision_nodes
            ],
            "loss_history": list(self.loss_history),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: Dict, schema: Schema) -> "ADTreeModel":
        try:
            by_name = {a.name: a for a in schema}
            decisions = []
            for d in data["decision_nodes"]:
                name = d["condition"]["attribute"]
                if name not in by_name:
                    raise ModelFormatError(f"condition on unknown attribute '{name}'")
                decisions.append(
                    DecisionNode(
                        int(d["id"]),
                        int(d["parent"]),
                        Condition.from_dict(d["condition"], by_name[name]),
                        int(d["true_child"]),
                        int(d["false_child"]),
                        float(d["z"]),
                    )
                )
            nodes = tuple(
                PredictionNode(int(n["id"]), float(n["value"]), tuple(int(c) for c in n["children"]))
                for n in data["prediction_nodes"]
            )
            model = cls(
                tuple(schema),
                nodes,
                tuple(decisions),
                ADTreeConfig(int(data["iterations"]), float(data["epsilon"])),
                tuple(float(v) for v in data.get("loss_history", ())),
                tuple(data.get("warnings", ())),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed ADTree document: {e}") from None
        if model.positive_label != data.get("positive_label", model.positive_label):
            raise ModelFormatError("positive label does not match the schema target")
        _check_structure(model)
        return model

    def render_text(self) -> str:
        """Tree listing: one line per branch, '|' marks depth, '(t)' the iteration"""
        lines = [f": {self.root.value:.3f}"]
        self._render_children(self.root, 1, lines)
        lines.append(f"Legend: -ve = {self.negative_label}, +ve = {self.positive_label}")
        lines.append(f"Tree size (total number of nodes): {len(self.prediction_nodes) + len(self.decision_nodes)}")
        lines.append(f"Leaves (number of predictor nodes): {len(self.prediction_nodes)}")
        return "\n".join(lines)

    def _render_children(self, node: PredictionNode, depth: int, lines: List[str]):
        decisions = {d.id: d for d in self.decision_nodes}
        for child_id in node.children:
            decision = decisions[child_id]
            attribute = self.attribute(decision.condition.attribute)
            for negate, branch in ((False, decision.true_child), (True, decision.false_child)):
                branch_node = self.node(branch)
                text = decision.condition.describe(attribute, negate)
                lines.append(f"{'|  ' * depth}({decision.iteration}){text}: {branch_node.value:.3f}")
                self._render_children(branch_node, depth + 1, lines)


def _target(schema: Schema) -> AttributeSchema:
    return next(a for a in schema if a.role is AttributeRole.TARGET)


def _check_structure(model: ADTreeModel):
    """Node ids must form a tree grown in decision order from the root"""
    nodes = model._nodes_by_id
    if len(nodes) != len(model.prediction_nodes):
        raise ModelFormatError("ADTree document repeats a prediction node id")
    if ROOT_ID not in nodes:
        raise ModelFormatError("ADTree document has no root prediction node")
    decision_ids = [d.id for d in model.decision_nodes]
    if len(set(decision_ids)) != len(decision_ids):
        raise ModelFormatError("ADTree document repeats a decision node id")
    reached = {ROOT_ID}
    for d in model.decision_nodes:
        if d.parent not in reached:
            raise ModelFormatError(f"decision node {d.id} hangs below unknown or later node {d.parent}")
        if d.id not in nodes[d.parent].children:
            raise ModelFormatError(f"prediction node {d.parent} does not list decision node {d.id}")
        for child in (d.true_child, d.false_child):
            if child not in nodes or child in reached:
                raise ModelFormatError(f"decision node {d.id} points at missing or shared node {child}")
            reached.add(child)
    for node in model.prediction_nodes:
        if node.id not in reached:
            raise ModelFormatError(f"prediction node {node.id} is not reachable from the root")
        if not set(node.children) <= set(decision_ids):
            raise ModelFormatError(f"prediction node {node.id} lists an unknown decision node")


# === BUILDING BLOCKS ===

def prediction_value(w_pos: float, w_neg: float, epsilon: float = SMOOTHING_EPSILON) -> float:
    """
    Contribution of a prediction node: 1/2 ln((W+ + eps) / (W- + eps))

    Raises:
        DegenerateSplitError: if a smoothed sum is zero (only possible with eps = 0)
    """
    if w_pos < 0 or w_neg < 0 or epsilon < 0:
        raise DomainError("weight sums and epsilon must be non-negative")
    num, den = w_pos + epsilon, w_neg + epsilon
    if num <= 0 or den <= 0:
        raise DegenerateSplitError(f"prediction value is not finite (W+={w_pos}, W-={w_neg}, eps={epsilon})")
    return 0.5 * math.log(num / den)


def _column(ds: Dataset, name: str) -> np.ndarray:
    attribute = ds.attribute(name)
    if attribute.is_numeric:
        return ds.numeric_values(name)
    return ds.codes(name).astype(float)


def _as_mask(ds: Dataset, reaching: Union[np.ndarray, Sequence[int]]) -> np.ndarray:
    rows = np.asarray(reaching)
    if rows.dtype == bool:
        return rows
    mask = np.zeros(len(ds), dtype=bool)
    mask[rows.astype(int)] = True
    return mask


def candidate_conditions(ds: Dataset, reaching: Union[np.ndarray, Sequence[int]]) -> List[Condition]:
    """
    Conditions worth testing on the instances reaching a node

    Numeric features give one threshold per midpoint between consecutive
    distinct values; nominal features give one equality test per category
    present (a column with a single distinct value gives nothing).
    Order: schema order, then ascending threshold or category index.
    """
    mask = _as_mask(ds, reaching)
    conditions = []
    for attribute in ds.features:
        values = _column(ds, attribute.name)[mask]
        distinct = np.unique(values)
        if distinct.size < 2:
            continue
        if attribute.is_numeric:
            midpoints = (distinct[:-1] + distinct[1:]) / 2.0
            conditions.extend(Condition.less_than(attribute.name, float(t)) for t in midpoints)
        else:
            conditions.extend(Condition.equals(attribute.name, int(c)) for c in distinct)
    return conditions


def z_value(ds: Dataset, weights: np.ndarray, precondition: np.ndarray, condition: Condition) -> float:
    """
    Z = 2 (sqrt(W+(p & c) W-(p & c)) + sqrt(W+(p & !c) W-(p & !c))) + W(!p)

    Args:
        ds: Dataset (classes from its target)
        weights: Current instance weights
        precondition: Boolean mask of instances reaching the prediction node
        condition: Condition under test
    """
    holds = condition.holds(_column(ds, condition.attribute))
    positive = ds.positive_mask

    def total(mask):
        return float(weights[mask].sum())

    on_true = precondition & holds
    on_false = precondition & ~holds
    return (
        2.0 * (
            math.sqrt(total(on_true & positive) * total(on_true & ~positive))
            + math.sqrt(total(on_false & positive) * total(on_false & ~positive))
        )
        + total(~precondition)
    )


@dataclass
class _Split:
    z: float
    node_id: int
    condition: Condition
    holds: np.ndarray


def _numeric_z(values, w_pos, w_neg, outside):
    distinct, inverse = np.unique(values, return_inverse=True)
    if distinct.size < 2:
        return None
    pos = np.bincount(inverse, weights=w_pos, minlength=distinct.size)
    neg = np.bincount(inverse, weights=w_neg, minlength=distinct.size)
    below_pos, below_neg = np.cumsum(pos)[:-1], np.cumsum(neg)[:-1]
    above_pos = np.clip(pos.sum() - below_pos, 0.0, None)
    above_neg = np.clip(neg.sum() - below_neg, 0.0, None)
    z = 2.0 * (np.sqrt(below_pos * below_neg) + np.sqrt(above_pos * above_neg)) + outside
    return z, (distinct[:-1] + distinct[1:]) / 2.0


def _nominal_z(codes, w_pos, w_neg, outside, n_categories):
    present = np.unique(codes)
    if present.size < 2:
        return None
    pos = np.bincount(codes, weights=w_pos, minlength=n_categories)[present]
    neg = np.bincount(codes, weights=w_neg, minlength=n_categories)[present]
    rest_pos = np.clip(w_pos.sum() - pos, 0.0, None)
    rest_neg = np.clip(w_neg.sum() - neg, 0.0, None)
    z = 2.0 * (np.sqrt(pos * neg) + np.sqrt(rest_pos * rest_neg)) + outside
    return z, present


def _best_split(ds: Dataset, X: np.ndarray, y: np.ndarray, w: np.ndarray, masks: List[np.ndarray]) -> Optional[_Split]:
    """Argmin of Z over (prediction node, condition); ties keep the earlier pair"""
    best: Optional[_Split] = None
    total = float(w.sum())
    for node_id, mask in enumerate(masks):
        if not mask.any():
            continue
        outside = total - float(w[mask].sum())
        w_pos = np.where(y[mask] > 0, w[mask], 0.0)
        w_neg = np.where(y[mask] < 0, w[mask], 0.0)
        for j, attribute in enumerate(ds.features):
            values = X[mask, j]
            if attribute.is_numeric:
                found = _numeric_z(values, w_pos, w_neg, outside)
            else:
                found = _nominal_z(values.astype(int), w_pos, w_neg, outside, len(attribute.categories))
            if found is None:
                continue
            z, points = found
            i = int(np.argmin(z))
            if best is not None and not z[i] < best.z - TIE_TOLERANCE * max(1.0, abs(best.z)):
                continue
            if attribute.is_numeric:
                condition = Condition.less_than(attribute.name, float(points[i]))
            else:
                condition = Condition.equals(attribute.name, int(points[i]))
            best = _Split(float(z[i]), node_id, condition, condition.holds(X[:, j]))
    return best


# === TRAINING ===

def fit_adtree(ds: Dataset, config: Optional[ADTreeConfig] = None) -> ADTreeModel:
    """
    Grow an alternating decision tree by boosting

    Every existing prediction node is a candidate attachment point at each
    iteration. Weights start at 1, are multiplied by exp(-y * alpha) after
    the root, and by exp(-y * r_t(x)) after every iteration.

    Args:
        ds: Training data without missing feature or target cells
        config: Iterations and smoothing (defaults from config.py)

    Returns:
        ADTreeModel; if no prediction node can be split the model stops early
        and carries the "no-candidates" warning
    """
    config = config or ADTreeConfig()
    require_trainable(ds)
    X = ds.feature_matrix
    y = ds.signed_labels
    positive = ds.positive_mask
    if config.iterations >= 1 and (positive.all() or not positive.any()):
        raise SingleClassError("ADTree boosting needs both classes in the training data")

    eps = config.epsilon
    w = np.ones(len(ds))
    root_value = prediction_value(float(w[positive].sum()), float(w[~positive].sum()), eps)
    w = w * np.exp(-y * root_value)

    values: List[float] = [root_value]
    masks: List[np.ndarray] = [np.ones(len(ds), dtype=bool)]
    children: List[List[int]] = [[]]
    decisions: List[DecisionNode] = []
    loss = [float(w.sum())]
    warnings: List[str] = []

    for t in range(1, config.iterations + 1):
        split = _best_split(ds, X, y, w, masks)
        if split is None:
            log.warning(f"ADTree: no candidate condition at iteration {t}, stopping with {t - 1} decision node(s)")
            warnings.append(NO_CANDIDATES)
            break

        parent = masks[split.node_id]
        on_true, on_false = parent & split.holds, parent & ~split.holds
        value_true = prediction_value(float(w[on_true & positive].sum()), float(w[on_true & ~positive].sum()), eps)
        value_false = prediction_value(float(w[on_false & positive].sum()), float(w[on_false & ~positive].sum()), eps)

        contribution = np.where(on_true, value_true, 0.0) + np.where(on_false, value_false, 0.0)
        w = w * np.exp(-y * contribution)

        true_id, false_id = 2 * t - 1, 2 * t
        values.extend([value_true, value_false])
        masks.extend([on_true, on_false])
        children.extend([[], []])
        children[split.node_id].append(t)
        decisions.append(DecisionNode(t, split.node_id, split.condition, true_id, false_id, split.z))
        loss.append(float(w.sum()))
        log.debug(f"ADTree iteration {t}: node {split.node_id}, {split.condition}, Z={split.z:.6f}, loss={loss[-1]:.6f}")

    nodes = tuple(PredictionNode(i, values[i], tuple(children[i])) for i in range(len(values)))
    return ADTreeModel(ds.schema, nodes, tuple(decisions), config, tuple(loss), tuple(warnings))


# === SCORING ===

def _check_schema(model: ADTreeModel, ds: Dataset):
    if ds.fingerprint != model.fingerprint:
        raise SchemaMismatchError("dataset schema does not match the model schema")


def reach_masks(model: ADTreeModel, ds: Dataset) -> Dict[int, np.ndarray]:
    """Boolean mask of the instances reaching each prediction node"""
    _check_schema(model, ds)
    ds.feature_matrix  # raises MissingCellError on gaps
    masks = {ROOT_ID: np.ones(len(ds), dtype=bool)}
    columns: Dict[str, np.ndarray] = {}
    for decision in model.decision_nodes:
        name = decision.condition.attribute
        if name not in columns:
            columns[name] = _column(ds, name)
        holds = decision.condition.holds(columns[name])
        parent = masks[decision.parent]
        masks[decision.true_child] = parent & holds
        masks[decision.false_child] = parent & ~holds
    return masks


def reach_mask(model: ADTreeModel, ds: Dataset, node_id: int) -> np.ndarray:
    return reach_masks(model, ds)[node_id]


def score_dataset(model: ADTreeModel, ds: Dataset) -> np.ndarray:
    """F(x) for every instance: sum of alpha over every prediction node reached"""
    masks = reach_masks(model, ds)
    scores = np.zeros(len(ds))
    for node_id, mask in masks.items():
        scores += np.where(mask, model.node(node_id).value, 0.0)
    return scores


def _single(model: ADTreeModel, x: Sequence[Cell]) -> Dataset:
    x = tuple(x)
    if len(x) != len(model.schema):
        raise SchemaMismatchError(f"instance has {len(x)} cells, model schema has {len(model.schema)}")
    return Dataset(model.schema, (x,))


def score(model: ADTreeModel, x: Sequence[Cell]) -> float:
    """F(x) for one instance (one cell per model schema attribute)"""
    return float(score_dataset(model, _single(model, x))[0])


def classify(model: ADTreeModel, x: Sequence[Cell]) -> Tuple[str, float]:
    """
    Label and margin for one instance

    Returns:
        (positive label if F(x) >= 0 else negative label, |F(x)|)
    """
    f = score(model, x)
    return (model.positive_label if f >= 0 else model.negative_label), abs(f)


def classify_dataset(model: ADTreeModel, ds: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Predicted classes and scores for every instance

    Returns:
        (True where predicted positive, F(x))
    """
    scores = score_dataset(model, ds)
    return scores >= 0, scores
