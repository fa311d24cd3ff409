"""
C4.5 Decision Tree Module
Gain-ratio induction with the average-gain gate and pessimistic-error pruning
"""
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.special import entr

from config import CONFIDENCE_FACTOR, MIN_LEAF, USE_AVERAGE_GAIN_GATE
from data_model import AttributeKind, AttributeRole, AttributeSchema, Cell, Dataset, Schema, require_trainable, schema_fingerprint
from errors import DegenerateSplitError, DomainError, ModelFormatError, SchemaMismatchError
from logger import log

# Gains this close to the average still pass the gate
GAIN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class C45Config:
    min_leaf: int = MIN_LEAF
    confidence: float = CONFIDENCE_FACTOR
    use_average_gain_gate: bool = USE_AVERAGE_GAIN_GATE
    unpruned: bool = False

    def __post_init__(self):
        if self.min_leaf < 1 or int(self.min_leaf) != self.min_leaf:
            raise DomainError(f"min_leaf must be a positive integer, got {self.min_leaf}")
        if not 0 < self.confidence <= 1:
            raise DomainError(f"confidence factor must be in (0, 1], got {self.confidence}")


@dataclass(frozen=True)
class Split:
    """
    Numeric splits are binary (value <= threshold, value > threshold);
    nominal splits have one child per listed category, in list order
    """

    attribute: str
    kind: AttributeKind
    threshold: float = 0.0
    categories: Tuple[int, ...] = ()

    @classmethod
    def numeric(cls, attribute: str, threshold: float) -> "Split":
        return cls(attribute, AttributeKind.NUMERIC, threshold=float(threshold))

    @classmethod
    def nominal(cls, attribute: str, categories: Sequence[int]) -> "Split":
        return cls(attribute, AttributeKind.NOMINAL, categories=tuple(int(c) for c in categories))

    @property
    def arity(self) -> int:
        return 2 if self.kind is AttributeKind.NUMERIC else len(self.categories)

    def route(self, values: np.ndarray) -> np.ndarray:
        """Child index per value; -1 for a category the split never saw"""
        if self.kind is AttributeKind.NUMERIC:
            return np.where(values <= self.threshold, 0, 1)
        lookup = {c: i for i, c in enumerate(self.categories)}
        return np.array([lookup.get(int(v), -1) for v in values], dtype=int)

    def describe(self, attribute: AttributeSchema, child: int) -> str:
        if self.kind is AttributeKind.NUMERIC:
            op = "<=" if child == 0 else ">"
            return f"{self.attribute} {op} {self.threshold:g}"
        return f"{self.attribute} = {attribute.categories[self.categories[child]]}"

    def to_dict(self, attribute: AttributeSchema) -> Dict:
        if self.kind is AttributeKind.NUMERIC:
            return {"attribute": self.attribute, "threshold": self.threshold}
        return {"attribute": self.attribute, "categories": [attribute.categories[c] for c in self.categories]}

    @classmethod
    def from_dict(cls, data: Dict, attribute: AttributeSchema) -> "Split":
        if "threshold" in data:
            if not attribute.is_numeric:
                raise ModelFormatError(f"'{attribute.name}' is not numeric but has a threshold split")
            return cls.numeric(attribute.name, float(data["threshold"]))
        if not attribute.is_nominal:
            raise ModelFormatError(f"'{attribute.name}' is not nominal but has a category split")
        return cls.nominal(attribute.name, [attribute.category_index(label) for label in data["categories"]])


@dataclass(frozen=True)
class C45Node:
    """Tree node; counts are the (positive, negative) training instances that reached it"""

    counts: Tuple[int, int]
    split: Optional[Split] = None
    children: Tuple["C45Node", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    @property
    def total(self) -> int:
        return self.counts[0] + self.counts[1]

    @property
    def predicts_positive(self) -> bool:
        # ties go to the positive class
        return self.counts[0] >= self.counts[1]

    @property
    def errors(self) -> int:
        """Training instances misclassified if this node were a leaf"""
        return self.counts[1] if self.predicts_positive else self.counts[0]

    @property
    def positive_fraction(self) -> float:
        return self.counts[0] / self.total

    @property
    def confidence(self) -> float:
        return max(self.counts) / self.total

    @property
    def largest_child(self) -> int:
        sizes = [c.total for c in self.children]
        return sizes.index(max(sizes))

    def leaves(self) -> List["C45Node"]:
        if self.is_leaf:
            return [self]
        return [leaf for child in self.children for leaf in child.leaves()]

    def size(self) -> int:
        return 1 + sum(child.size() for child in self.children)

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(child.depth() for child in self.children)


# === SPLIT EVALUATION ===

def _class_entropy(positives, totals):
    """Binary class entropy in bits (vectorized over cells)"""
    p = np.asarray(positives, dtype=float) / np.asarray(totals, dtype=float)
    return (entr(p) + entr(1.0 - p)) / math.log(2.0)


def _split_scores(positive: np.ndarray, child: np.ndarray, arity: int) -> Tuple[float, float, float]:
    n = positive.size
    sizes = np.bincount(child, minlength=arity)
    if arity < 2 or (sizes == 0).any():
        raise DegenerateSplitError("split leaves a cell empty; gain ratio is undefined")
    pos = np.bincount(child, weights=positive.astype(float), minlength=arity)
    parent = float(_class_entropy(positive.sum(), n))
    gain = parent - float(np.sum(sizes / n * _class_entropy(pos, sizes)))
    split_info = float(stats.entropy(sizes, base=2))
    return gain, split_info, gain / split_info


def gain_ratio(ds: Dataset, split: Split, rows: Optional[np.ndarray] = None) -> Tuple[float, float, float]:
    """
    Information gain, split information and gain ratio of a split

    Args:
        ds: Dataset
        split: Candidate split
        rows: Instances to evaluate on (all by default)

    Returns:
        (info_gain bits, split_info bits, ratio)
    """
    rows = np.arange(len(ds)) if rows is None else np.asarray(rows)
    values = _column(ds, split.attribute)[rows]
    child = split.route(values)
    if (child < 0).any():
        raise DegenerateSplitError(f"split on '{split.attribute}' does not cover every instance")
    return _split_scores(ds.positive_mask[rows], child, split.arity)


@dataclass
class _Candidate:
    order: int
    split: Split
    gain: float
    split_info: float
    ratio: float
    child: np.ndarray


def _column(ds: Dataset, name: str) -> np.ndarray:
    attribute = ds.attribute(name)
    if attribute.is_numeric:
        return ds.numeric_values(name)
    return ds.codes(name)


def _numeric_candidate(order, name, values, positive, min_leaf) -> Optional[_Candidate]:
    """Best-gain midpoint threshold with at least min_leaf instances on each side"""
    distinct, inverse = np.unique(values, return_inverse=True)
    if distinct.size < 2:
        return None
    n = values.size
    left_n = np.cumsum(np.bincount(inverse))[:-1]
    left_pos = np.cumsum(np.bincount(inverse, weights=positive.astype(float)))[:-1]
    right_n, right_pos = n - left_n, positive.sum() - left_pos
    valid = (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return None
    parent = _class_entropy(positive.sum(), n)
    gains = parent - (left_n / n * _class_entropy(left_pos, left_n) + right_n / n * _class_entropy(right_pos, right_n))
    gains = np.where(valid, gains, -np.inf)
    i = int(np.argmax(gains))
    split = Split.numeric(name, (distinct[i] + distinct[i + 1]) / 2.0)
    child = split.route(values)
    gain, split_info, ratio = _split_scores(positive, child, 2)
    return _Candidate(order, split, gain, split_info, ratio, child)


def _nominal_candidate(order, name, codes, positive, min_leaf) -> Optional[_Candidate]:
    """Multiway split over the categories present; needs two subsets of min_leaf instances"""
    present, child = np.unique(codes, return_inverse=True)
    if present.size < 2:
        return None
    if (np.bincount(child) >= min_leaf).sum() < 2:
        return None
    gain, split_info, ratio = _split_scores(positive, child, present.size)
    return _Candidate(order, Split.nominal(name, present), gain, split_info, ratio, child)


def _choose_split(ds: Dataset, rows: np.ndarray, config: C45Config) -> Optional[_Candidate]:
    positive = ds.positive_mask[rows]
    candidates = []
    for order, attribute in enumerate(ds.features):
        values = _column(ds, attribute.name)[rows]
        if attribute.is_numeric:
            found = _numeric_candidate(order, attribute.name, values, positive, config.min_leaf)
        else:
            found = _nominal_candidate(order, attribute.name, values, positive, config.min_leaf)
        if found is not None and found.gain > GAIN_TOLERANCE:
            candidates.append(found)
    if not candidates:
        return None

    if config.use_average_gain_gate:
        average = sum(c.gain for c in candidates) / len(candidates)
        candidates = [c for c in candidates if c.gain >= average - GAIN_TOLERANCE]

    best = candidates[0]
    for candidate in candidates[1:]:
        if candidate.ratio > best.ratio:
            best = candidate
    return best


# === PRUNING ===

def upper_error_bound(errors: int, n: int, confidence: float = CONFIDENCE_FACTOR) -> float:
    """
    Binomial upper confidence limit on a leaf's error rate

    U(0, N) = 1 - CF^(1/N); otherwise the (1 - CF) quantile of Beta(E + 1, N - E).
    """
    if n <= 0 or errors < 0 or errors > n:
        raise DomainError(f"need 0 <= errors <= n and n > 0, got errors={errors}, n={n}")
    if errors == 0:
        return 1.0 - confidence ** (1.0 / n)
    if errors >= n:
        return 1.0
    return float(stats.beta.ppf(1.0 - confidence, errors + 1, n - errors))


def pessimistic_error(node: C45Node, confidence: float = CONFIDENCE_FACTOR) -> float:
    """Estimated errors: N * U(E, N) for a leaf, the sum over leaves for a subtree"""
    if node.is_leaf:
        return node.total * upper_error_bound(node.errors, node.total, confidence)
    return sum(pessimistic_error(child, confidence) for child in node.children)


def prune(node: C45Node, confidence: float = CONFIDENCE_FACTOR) -> C45Node:
    """
    Bottom-up subtree replacement

    A subtree becomes a leaf when the leaf's estimate is no larger than
    the summed estimates of the (already pruned) subtree.
    """
    if node.is_leaf:
        return node
    pruned = replace(node, children=tuple(prune(child, confidence) for child in node.children))
    as_leaf = C45Node(node.counts)
    if pessimistic_error(as_leaf, confidence) <= pessimistic_error(pruned, confidence) + 1e-12:
        return as_leaf
    return pruned


# === TRAINING ===

@dataclass(frozen=True)
class C45Tree:
    """Fitted tree plus the schema and settings it was grown with"""

    schema: Schema
    config: C45Config
    root: C45Node

    @property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.schema)

    @property
    def positive_label(self) -> str:
        return _target(self.schema).categories[0]

    @property
    def negative_label(self) -> str:
        return _target(self.schema).categories[1]

    def attribute(self, name: str) -> AttributeSchema:
        return next(a for a in self.schema if a.name == name)

    def to_dict(self) -> Dict:
        return {
            "config": {
                "min_leaf": self.config.min_leaf,
                "confidence": self.config.confidence,
                "use_average_gain_gate": self.config.use_average_gain_gate,
                "unpruned": self.config.unpruned,
            },
            "positive_label": self.positive_label,
            "root": self._node_to_dict(self.root),
        }

    def _node_to_dict(self, node: C45Node) -> Dict:
        data = {"counts": list(node.counts)}
        if not node.is_leaf:
            data["split"] = node.split.to_dict(self.attribute(node.split.attribute))
            data["children"] = [self._node_to_dict(child) for child in node.children]
        return data

    @classmethod
    def from_dict(cls, data: Dict, schema: Schema) -> "C45Tree":
        by_name = {a.name: a for a in schema}

        def build(node: Dict) -> C45Node:
            counts = (int(node["counts"][0]), int(node["counts"][1]))
            if "split" not in node:
                return C45Node(counts)
            name = node["split"]["attribute"]
            if name not in by_name:
                raise ModelFormatError(f"split on unknown attribute '{name}'")
            split = Split.from_dict(node["split"], by_name[name])
            children = tuple(build(child) for child in node["children"])
            if len(children) != split.arity:
                raise ModelFormatError(f"split on '{name}' has {len(children)} children, expected {split.arity}")
            return C45Node(counts, split, children)

        try:
            config = C45Config(**data["config"])
            return cls(tuple(schema), config, build(data["root"]))
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise ModelFormatError(f"malformed C4.5 document: {e}") from None

    def render_text(self) -> str:
        lines: List[str] = []
        if self.root.is_leaf:
            lines.append(f": {self._leaf_text(self.root)}")
        else:
            self._render(self.root, 0, lines)
        lines.append("")
        lines.append(f"Number of Leaves  : {len(self.root.leaves())}")
        lines.append(f"Size of the tree : {self.root.size()}")
        return "\n".join(lines)

    def _leaf_text(self, node: C45Node) -> str:
        label = self.positive_label if node.predicts_positive else self.negative_label
        if node.errors:
            return f"{label} ({node.total:.1f}/{node.errors:.1f})"
        return f"{label} ({node.total:.1f})"

    def _render(self, node: C45Node, depth: int, lines: List[str]):
        attribute = self.attribute(node.split.attribute)
        for i, child in enumerate(node.children):
            text = "|   " * depth + node.split.describe(attribute, i)
            if child.is_leaf:
                lines.append(f"{text}: {self._leaf_text(child)}")
            else:
                lines.append(text)
                self._render(child, depth + 1, lines)


def _target(schema: Schema) -> AttributeSchema:
    return next(a for a in schema if a.role is AttributeRole.TARGET)


def _grow(ds: Dataset, rows: np.ndarray, config: C45Config) -> C45Node:
    positives = int(ds.positive_mask[rows].sum())
    counts = (positives, rows.size - positives)
    if positives in (0, rows.size) or rows.size < 2 * config.min_leaf:
        return C45Node(counts)
    best = _choose_split(ds, rows, config)
    if best is None:
        return C45Node(counts)
    children = tuple(_grow(ds, rows[best.child == i], config) for i in range(best.split.arity))
    return C45Node(counts, best.split, children)


def fit_c45(ds: Dataset, config: Optional[C45Config] = None) -> C45Tree:
    """
    Grow a C4.5 tree top-down, then prune it (unless config.unpruned)

    At each node the split with the highest gain ratio wins among the
    candidates whose gain reaches the average positive gain. Each numeric
    attribute contributes its best-gain midpoint threshold.

    Args:
        ds: Training data without missing feature or target cells
        config: Growth and pruning settings

    Returns:
        C45Tree
    """
    config = config or C45Config()
    require_trainable(ds)
    root = _grow(ds, np.arange(len(ds)), config)
    if not config.unpruned:
        grown = root.size()
        root = prune(root, config.confidence)
        log.debug(f"C4.5 pruning: {grown} -> {root.size()} node(s)")
    return C45Tree(ds.schema, config, root)


# === CLASSIFICATION ===

def _descend(node: C45Node, columns: Dict[str, np.ndarray], rows: np.ndarray, leaf_of: List, unseen: List[int]):
    if node.is_leaf:
        for row in rows:
            leaf_of[row] = node
        return
    child = node.split.route(columns[node.split.attribute][rows])
    missing = child < 0
    if missing.any():
        unseen[0] += int(missing.sum())
        child[missing] = node.largest_child
    for i, sub in enumerate(node.children):
        _descend(sub, columns, rows[child == i], leaf_of, unseen)


def leaves_for(tree: C45Tree, ds: Dataset) -> List[C45Node]:
    """The leaf each instance lands in"""
    if ds.fingerprint != tree.fingerprint:
        raise SchemaMismatchError("dataset schema does not match the model schema")
    ds.feature_matrix  # raises MissingCellError on gaps
    columns = {a.name: _column(ds, a.name) for a in ds.features}
    leaf_of: List = [None] * len(ds)
    unseen = [0]
    _descend(tree.root, columns, np.arange(len(ds)), leaf_of, unseen)
    if unseen[0]:
        log.warning(f"C4.5: {unseen[0]} routing step(s) hit a category unseen in training; used the largest branch")
    return leaf_of


def classify_c45_dataset(tree: C45Tree, ds: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Predicted classes and ROC scores for every instance

    Returns:
        (True where predicted positive, positive-class fraction at the leaf)
    """
    leaves = leaves_for(tree, ds)
    predicted = np.array([leaf.predicts_positive for leaf in leaves], dtype=bool)
    scores = np.array([leaf.positive_fraction for leaf in leaves], dtype=float)
    return predicted, scores


def classify_c45(tree: C45Tree, x: Sequence[Cell]) -> Tuple[str, float]:
    """
    Label and leaf purity for one instance

    Returns:
        (leaf majority label, majority count / leaf total)
    """
    x = tuple(x)
    if len(x) != len(tree.schema):
        raise SchemaMismatchError(f"instance has {len(x)} cells, model schema has {len(tree.schema)}")
    leaf = leaves_for(tree, Dataset(tree.schema, (x,)))[0]
    return (tree.positive_label if leaf.predicts_positive else tree.negative_label), leaf.confidence
