"""
Evaluation Module
Stratified cross-validation, confusion matrices, per-class and weighted metrics, ROC/AUC
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn import metrics

from adtree import ADTreeConfig, ADTreeModel, classify_dataset, fit_adtree
from c45 import C45Config, C45Tree, classify_c45_dataset, fit_c45
from config import F_BETA, FOLD_WORKERS, FORMAT_VERSION, K_FOLDS, RANDOM_SEED, REPORT_FORMAT
from data_model import Dataset, require_trainable
from errors import (
    DomainError,
    EmptyDatasetError,
    LengthMismatchError,
    ModelFormatError,
    SingleClassError,
    ToolkitError,
    TooFewInstancesError,
)
from logger import log
from performance import ThreadedFoldRunner

ALGORITHMS = ("adtree", "c45")

SCORE_SOURCES = {
    "adtree": "ADTree margin F(x)",
    "c45": "C4.5 positive-class fraction at the leaf",
}


# === CONFUSION MATRIX AND METRICS ===

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    def swapped(self) -> "ConfusionMatrix":
        """Same predictions with the other class treated as positive"""
        return ConfusionMatrix(tp=self.tn, fn=self.fp, fp=self.fn, tn=self.tp)

    def to_dict(self) -> Dict:
        return {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn}


def _as_positive(labels: Sequence[Any], positive: Any) -> np.ndarray:
    return np.asarray(labels, dtype=object) == positive


def confusion(predictions: Sequence[Any], truth: Sequence[Any], positive: Any = True) -> ConfusionMatrix:
    """
    2x2 confusion matrix

    Args:
        predictions: Predicted labels
        truth: Actual labels
        positive: The label counted as positive (anything else is negative)
    """
    if len(predictions) != len(truth):
        raise LengthMismatchError(f"{len(predictions)} predictions for {len(truth)} labels")
    if len(truth) == 0:
        raise EmptyDatasetError("confusion matrix needs at least one prediction")
    actual = _as_positive(truth, positive).astype(bool)
    predicted = _as_positive(predictions, positive).astype(bool)
    (tp, fn), (fp, tn) = metrics.confusion_matrix(actual, predicted, labels=[True, False])
    return ConfusionMatrix(int(tp), int(fn), int(fp), int(tn))


def f_measure(precision: float, recall: float, beta: float = F_BETA) -> float:
    """F_beta = (1 + b^2) P R / (b^2 P + R); 0 when P = R = 0"""
    if not (0 <= precision <= 1 and 0 <= recall <= 1):
        raise DomainError(f"precision and recall must be in [0, 1], got {precision}, {recall}")
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    denominator = beta * beta * precision + recall
    if denominator == 0:
        return 0.0
    return (1 + beta * beta) * precision * recall / denominator


def _rate(numerator: int, denominator: int) -> float:
    # 0/0 counts as 0
    return numerator / denominator if denominator else 0.0


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    tp_rate: float
    fp_rate: float
    precision: float
    recall: float
    f_measure: float
    support: int
    roc_area: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "label": self.label,
            "tp_rate": self.tp_rate,
            "fp_rate": self.fp_rate,
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "support": self.support,
            "roc_area": self.roc_area,
        }


@dataclass(frozen=True)
class Summary:
    per_class: Tuple[ClassMetrics, ClassMetrics]
    weighted: ClassMetrics
    accuracy: float

    def to_dict(self) -> Dict:
        return {
            "accuracy": self.accuracy,
            "per_class": [c.to_dict() for c in self.per_class],
            "weighted": self.weighted.to_dict(),
        }


def _class_metrics(label: str, tp: int, fn: int, fp: int, tn: int, beta: float, auc: Optional[float]) -> ClassMetrics:
    tp_rate = _rate(tp, tp + fn)
    precision = _rate(tp, tp + fp)
    return ClassMetrics(
        label=label,
        tp_rate=tp_rate,
        fp_rate=_rate(fp, fp + tn),
        precision=precision,
        recall=tp_rate,
        f_measure=f_measure(precision, tp_rate, beta),
        support=tp + fn,
        roc_area=auc,
    )


def summarize(
    cm: ConfusionMatrix,
    beta: float = F_BETA,
    auc: Optional[float] = None,
    labels: Tuple[str, str] = ("positive", "negative"),
) -> Summary:
    """
    Per-class (one-vs-rest) metrics, support-weighted averages and accuracy

    Args:
        cm: Pooled confusion matrix
        beta: F-measure beta
        auc: ROC area (binary: the same for both classes)
        labels: (positive label, negative label) for display
    """
    if cm.total == 0:
        raise EmptyDatasetError("cannot summarize an empty confusion matrix")
    positive = _class_metrics(labels[0], cm.tp, cm.fn, cm.fp, cm.tn, beta, auc)
    negative = _class_metrics(labels[1], cm.tn, cm.fp, cm.fn, cm.tp, beta, auc)

    def weighted(name: str) -> float:
        return (positive.support * getattr(positive, name) + negative.support * getattr(negative, name)) / cm.total

    average = ClassMetrics(
        label="Weighted Avg.",
        tp_rate=weighted("tp_rate"),
        fp_rate=weighted("fp_rate"),
        precision=weighted("precision"),
        recall=weighted("recall"),
        f_measure=weighted("f_measure"),
        support=cm.total,
        roc_area=None if auc is None else weighted("roc_area"),
    )
    return Summary((positive, negative), average, cm.accuracy)


# === ROC ===

@dataclass(frozen=True)
class RocCurve:
    """ROC points from a threshold sweep; thresholds[0] is +inf (nothing predicted positive)"""

    thresholds: Tuple[float, ...]
    fp_rates: Tuple[float, ...]
    tp_rates: Tuple[float, ...]
    auc: float

    @property
    def sensitivity(self) -> Tuple[float, ...]:
        return self.tp_rates

    @property
    def specificity(self) -> Tuple[float, ...]:
        return tuple(1.0 - f for f in self.fp_rates)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "fp_rate": self.fp_rates, "tp_rate": self.tp_rates})

    def to_dict(self) -> Dict:
        return {
            "auc": self.auc,
            "points": [
                {"threshold": t if math.isfinite(t) else None, "fp_rate": f, "tp_rate": r}
                for t, f, r in zip(self.thresholds, self.fp_rates, self.tp_rates)
            ],
        }

    @classmethod
    def from_points(cls, thresholds, fp_rates, tp_rates) -> "RocCurve":
        fpr = np.asarray(fp_rates, dtype=float)
        tpr = np.asarray(tp_rates, dtype=float)
        return cls(
            tuple(float(t) for t in thresholds),
            tuple(float(f) for f in fpr),
            tuple(float(r) for r in tpr),
            float(metrics.auc(fpr, tpr)) if fpr.size >= 2 else 0.5,
        )


def roc_curve(scores: Sequence[float], truth: Sequence[Any], positive: Any = True) -> RocCurve:
    """
    Sweep a threshold down through every distinct score

    Tied scores enter as one block (a diagonal segment); AUC by the trapezoid rule.
    """
    if len(scores) != len(truth):
        raise LengthMismatchError(f"{len(scores)} scores for {len(truth)} labels")
    actual = _as_positive(truth, positive).astype(bool)
    if actual.all() or not actual.any():
        raise SingleClassError("ROC curve needs both classes")
    fpr, tpr, thresholds = metrics.roc_curve(actual, np.asarray(scores, dtype=float), drop_intermediate=False)
    thresholds = thresholds.astype(float)
    thresholds[0] = np.inf
    return RocCurve(
        tuple(float(t) for t in thresholds),
        tuple(float(f) for f in fpr),
        tuple(float(r) for r in tpr),
        float(metrics.auc(fpr, tpr)),
    )


def write_roc_csv(curve: RocCurve, stream):
    """Write "threshold,fp_rate,tp_rate" rows (first threshold is inf)"""
    curve.to_frame().to_csv(stream, index=False, lineterminator="\n")


def read_roc_csv(source) -> RocCurve:
    try:
        frame = pd.read_csv(source)
        return RocCurve.from_points(frame["threshold"], frame["fp_rate"], frame["tp_rate"])
    except (KeyError, ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ModelFormatError(f"malformed ROC CSV: {e}") from None


# === FOLDS ===

def stratified_kfold(ds: Dataset, k: int = K_FOLDS, seed: int = RANDOM_SEED) -> List[np.ndarray]:
    """
    Split instance indices into k disjoint stratified folds

    Each class is shuffled with the seeded generator and dealt round-robin,
    positives first; the negatives continue from the fold after the last
    positive so fold sizes differ by at most one.
    """
    n = len(ds)
    if k < 2 or k > n:
        raise TooFewInstancesError(f"need 2 <= k <= n, got k={k}, n={n}")
    positive = ds.positive_mask
    if positive.all() or not positive.any():
        raise TooFewInstancesError("stratified folds need at least one instance of each class")

    rng = np.random.default_rng(seed)
    folds: List[List[int]] = [[] for _ in range(k)]
    offset = 0
    for members in (np.flatnonzero(positive), np.flatnonzero(~positive)):
        for i, index in enumerate(rng.permutation(members)):
            folds[(offset + i) % k].append(int(index))
        offset = (offset + members.size) % k
    return [np.array(sorted(fold), dtype=int) for fold in folds]


# === LEARNERS ===

@dataclass(frozen=True)
class LearnerSpec:
    """Algorithm tag plus the settings of that algorithm"""

    algorithm: str = "adtree"
    adtree: ADTreeConfig = ADTreeConfig()
    c45: C45Config = C45Config()

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise DomainError(f"unknown algorithm '{self.algorithm}' (choose from {', '.join(ALGORITHMS)})")

    def settings(self) -> Dict:
        if self.algorithm == "adtree":
            return {"iterations": self.adtree.iterations, "epsilon": self.adtree.epsilon}
        return {
            "min_leaf": self.c45.min_leaf,
            "confidence": self.c45.confidence,
            "use_average_gain_gate": self.c45.use_average_gain_gate,
            "unpruned": self.c45.unpruned,
        }


Model = Union[ADTreeModel, C45Tree]


def fit_learner(spec: LearnerSpec, ds: Dataset) -> Model:
    if spec.algorithm == "adtree":
        return fit_adtree(ds, spec.adtree)
    return fit_c45(ds, spec.c45)


def predict_learner(model: Model, ds: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """(True where predicted positive, ROC score) for every instance"""
    if isinstance(model, ADTreeModel):
        return classify_dataset(model, ds)
    return classify_c45_dataset(model, ds)


# === CROSS-VALIDATION ===

@dataclass(frozen=True)
class Prediction:
    index: int
    fold: int
    actual_positive: bool
    predicted_positive: bool
    score: float
    imputed: bool = False


@dataclass(frozen=True)
class EvalReport:
    algorithm: str
    settings: Dict
    k: int
    seed: int
    positive_label: str
    negative_label: str
    confusion: ConfusionMatrix
    summary: Summary
    roc: RocCurve
    predictions: Tuple[Prediction, ...] = ()
    score_source: str = ""
    extra: Dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.confusion.total

    @property
    def accuracy(self) -> float:
        return self.summary.accuracy

    @property
    def imputed_instances(self) -> int:
        return sum(1 for p in self.predictions if p.imputed)

    @property
    def imputed_false_positives(self) -> int:
        """False positives among instances that had at least one imputed cell"""
        return sum(1 for p in self.predictions if p.imputed and p.predicted_positive and not p.actual_positive)

    def check_consistency(self):
        """Accuracy must equal (TP + TN) / n from the embedded confusion matrix"""
        recomputed = (self.confusion.tp + self.confusion.tn) / self.confusion.total
        if abs(recomputed - self.summary.accuracy) > 1e-12:
            raise ToolkitError(f"report accuracy {self.summary.accuracy} != (TP+TN)/n = {recomputed}")
        if len(self.predictions) not in (0, self.n):
            raise ToolkitError(f"report holds {len(self.predictions)} predictions for {self.n} instances")

    def to_dict(self) -> Dict:
        return {
            "format": REPORT_FORMAT,
            "version": FORMAT_VERSION,
            "algorithm": self.algorithm,
            "settings": dict(self.settings),
            "k": self.k,
            "seed": self.seed,
            "n": self.n,
            "positive_label": self.positive_label,
            "negative_label": self.negative_label,
            "score_source": self.score_source,
            "confusion": self.confusion.to_dict(),
            "summary": self.summary.to_dict(),
            "roc": self.roc.to_dict(),
            "imputed": {
                "instances": self.imputed_instances,
                "false_positives": self.imputed_false_positives,
            },
            "predictions": [
                {
                    "index": p.index,
                    "fold": p.fold,
                    "actual": self.positive_label if p.actual_positive else self.negative_label,
                    "predicted": self.positive_label if p.predicted_positive else self.negative_label,
                    "score": p.score,
                    "imputed": p.imputed,
                }
                for p in self.predictions
            ],
            **({"extra": self.extra} if self.extra else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: Dict) -> "EvalReport":
        if data.get("format") != REPORT_FORMAT:
            raise ModelFormatError(f"not a {REPORT_FORMAT} document")
        if data.get("version") != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported report version {data.get('version')}")
        try:
            cm = ConfusionMatrix(**data["confusion"])
            pos, neg = data["positive_label"], data["negative_label"]
            points = data["roc"]["points"]
            roc = RocCurve(
                tuple(math.inf if p["threshold"] is None else float(p["threshold"]) for p in points),
                tuple(float(p["fp_rate"]) for p in points),
                tuple(float(p["tp_rate"]) for p in points),
                float(data["roc"]["auc"]),
            )
            predictions = tuple(
                Prediction(
                    p["index"],
                    p["fold"],
                    p["actual"] == pos,
                    p["predicted"] == pos,
                    float(p["score"]),
                    bool(p.get("imputed", False)),
                )
                for p in data.get("predictions", [])
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed report: {e}") from None
        return cls(
            algorithm=data["algorithm"],
            settings=dict(data.get("settings", {})),
            k=int(data["k"]),
            seed=int(data["seed"]),
            positive_label=pos,
            negative_label=neg,
            confusion=cm,
            summary=summarize(cm, auc=roc.auc, labels=(pos, neg)),
            roc=roc,
            predictions=predictions,
            score_source=data.get("score_source", ""),
            extra=dict(data.get("extra", {})),
        )

    def render_text(self) -> str:
        """Plain-text summary: correctly classified, accuracy by class, confusion matrix"""
        cm, n = self.confusion, self.n
        correct = cm.tp + cm.tn
        lines = [
            f"=== Stratified cross-validation ({self.k} folds, seed {self.seed}) ===",
            f"Algorithm: {self.algorithm} {json.dumps(self.settings, sort_keys=True)}",
            "",
            f"{'Correctly Classified Instances':<40}{correct:>6}{100.0 * correct / n:>14.4f} %",
            f"{'Incorrectly Classified Instances':<40}{n - correct:>6}{100.0 * (n - correct) / n:>14.4f} %",
            f"{'Total Number of Instances':<40}{n:>6}",
            "",
            "=== Detailed Accuracy By Class ===",
            "",
            f"{'':<15}{'TP Rate':>9}{'FP Rate':>9}{'Precision':>11}{'Recall':>9}{'F-Measure':>11}{'ROC Area':>10}  Class",
        ]
        for row in (*self.summary.per_class, self.summary.weighted):
            name = row.label if row is self.summary.weighted else ""
            label = "" if row is self.summary.weighted else row.label
            roc = f"{row.roc_area:>10.3f}" if row.roc_area is not None else f"{'-':>10}"
            lines.append(
                f"{name:<15}{row.tp_rate:>9.3f}{row.fp_rate:>9.3f}{row.precision:>11.3f}"
                f"{row.recall:>9.3f}{row.f_measure:>11.3f}{roc}  {label}".rstrip()
            )
        width = max(len(str(v)) for v in (cm.tp, cm.fn, cm.fp, cm.tn)) + 1
        lines += [
            "",
            "=== Confusion Matrix ===",
            "",
            f"{'a':>{width}}{'b':>{width}}   <-- classified as",
            f"{cm.tp:>{width}}{cm.fn:>{width}} |   a = {self.positive_label}",
            f"{cm.fp:>{width}}{cm.tn:>{width}} |   b = {self.negative_label}",
            "",
            f"ROC scores: {self.score_source}",
        ]
        if self.imputed_instances:
            lines.append(
                f"False positives with imputed values: {self.imputed_false_positives} of {cm.fp}"
                f" ({self.imputed_instances} instances imputed)"
            )
        return "\n".join(lines) + "\n"


def save_report(report: EvalReport, path: Union[str, Path]):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(report.to_json())


def load_report(path: Union[str, Path]) -> EvalReport:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"report is not valid JSON: {e}", file=str(path)) from None
    return EvalReport.from_dict(data)


def cross_validate(
    spec: LearnerSpec,
    ds: Dataset,
    k: int = K_FOLDS,
    seed: int = RANDOM_SEED,
    workers: int = FOLD_WORKERS,
    imputed: Optional[Sequence[bool]] = None,
) -> EvalReport:
    """
    Stratified k-fold cross-validation with pooled predictions

    Args:
        spec: Learner algorithm and settings
        ds: Complete dataset (imputed, no missing cells)
        k: Number of folds
        seed: Fold shuffle seed
        workers: Worker threads (>1 runs folds concurrently; results merge in fold order)
        imputed: Per-instance flag, True where a cell was filled by imputation

    Returns:
        EvalReport over all n held-out predictions
    """
    require_trainable(ds)
    positive = ds.positive_mask
    if positive.all() or not positive.any():
        raise SingleClassError("cross-validation needs both classes")
    if imputed is None:
        imputed = np.zeros(len(ds), dtype=bool)
    imputed = np.asarray(imputed, dtype=bool)
    if imputed.shape != (len(ds),):
        raise LengthMismatchError(f"{imputed.size} imputation flags for {len(ds)} instances")
    folds = stratified_kfold(ds, k, seed)
    everything = np.arange(len(ds))

    def run_fold(index: int, test_rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        try:
            model = fit_learner(spec, ds.subset(np.setdiff1d(everything, test_rows)))
            return predict_learner(model, ds.subset(test_rows))
        except ToolkitError as e:
            raise e.add_context("fold", index)

    log.log_step("CROSS-VALIDATE", f"{spec.algorithm}, {len(ds)} instances, k={k}, seed={seed}")
    if workers > 1:
        results = ThreadedFoldRunner(workers).run(folds, run_fold)
    else:
        results = [run_fold(i, rows) for i, rows in enumerate(folds)]

    predicted = np.zeros(len(ds), dtype=bool)
    scores = np.zeros(len(ds))
    fold_of = np.full(len(ds), -1, dtype=int)
    for index, (rows, (fold_predicted, fold_scores)) in enumerate(zip(folds, results)):
        predicted[rows] = fold_predicted
        scores[rows] = fold_scores
        fold_of[rows] = index

    cm = confusion(predicted, positive)
    curve = roc_curve(scores, positive)
    labels = (ds.positive_label, ds.negative_label)
    report = EvalReport(
        algorithm=spec.algorithm,
        settings=spec.settings(),
        k=k,
        seed=seed,
        positive_label=labels[0],
        negative_label=labels[1],
        confusion=cm,
        summary=summarize(cm, auc=curve.auc, labels=labels),
        roc=curve,
        predictions=tuple(
            Prediction(i, int(fold_of[i]), bool(positive[i]), bool(predicted[i]), float(scores[i]), bool(imputed[i]))
            for i in range(len(ds))
        ),
        score_source=SCORE_SOURCES[spec.algorithm],
    )
    report.check_consistency()
    log.log_step("CROSS-VALIDATE", f"accuracy {report.accuracy:.4f}, AUC {curve.auc:.4f}", status="COMPLETED")
    return report
