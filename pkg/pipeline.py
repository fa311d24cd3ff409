"""
Pipeline Module
Runs ingest -> impute -> discretize -> select/train/evaluate for one command
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

from adtree import ADTreeConfig
from c45 import C45Config
from config import (
    BOOSTING_ITERATIONS,
    CONFIDENCE_FACTOR,
    FOLD_WORKERS,
    K_FOLDS,
    MIN_LEAF,
    RANDOM_SEED,
    SIGNIFICANCE_ALPHA,
    SMOOTHING_EPSILON,
)
from data_model import (
    Dataset,
    DiscretizeRule,
    ImputationReport,
    impute_means,
    read_dataset,
    restrict_features,
)
from evaluation import EvalReport, LearnerSpec, cross_validate, fit_learner
from feature_select import Chi2Result, FeatureSet, LogisticFit, screen_features
from logger import log
from model_io import ModelDocument, Preprocessing


@dataclass(frozen=True)
class RunConfig:
    """Settings of one command run (CLI flags override config.py defaults)"""

    data_path: Optional[Path] = None
    schema_path: Optional[Path] = None
    algorithm: str = "adtree"
    k: int = K_FOLDS
    seed: int = RANDOM_SEED
    iterations: int = BOOSTING_ITERATIONS
    epsilon: float = SMOOTHING_EPSILON
    confidence: float = CONFIDENCE_FACTOR
    min_leaf: int = MIN_LEAF
    unpruned: bool = False
    alpha: float = SIGNIFICANCE_ALPHA
    force_include: Tuple[str, ...] = ()
    discretize: Tuple[DiscretizeRule, ...] = ()
    features: Tuple[str, ...] = ()
    workers: int = FOLD_WORKERS

    def learner(self) -> LearnerSpec:
        return LearnerSpec(
            self.algorithm,
            adtree=ADTreeConfig(self.iterations, self.epsilon),
            c45=C45Config(min_leaf=self.min_leaf, confidence=self.confidence, unpruned=self.unpruned),
        )


class Pipeline:
    def __init__(self, config: RunConfig):
        """
        Data preparation and modelling steps for one run

        Args:
            config: Run settings
        """
        self.config = config
        self.stats = {
            "Instances": 0,
            "Cells imputed": 0,
            "Features used": 0,
        }

    def load(self) -> Dataset:
        """Step 1: parse CSV + schema sidecar"""
        ds = read_dataset(self.config.data_path, self.config.schema_path)
        self.stats["Instances"] = len(ds)
        log.log_step("PARSE", self.config.data_path, status="COMPLETED")
        return ds

    def impute(self, ds: Dataset) -> Tuple[Dataset, ImputationReport]:
        """Step 2: replace missing numeric feature cells with column means"""
        imputed, report = impute_means(ds)
        self.stats["Cells imputed"] = sum(c.count for c in report.columns)
        self.stats["Instances imputed"] = len(report.rows)
        return imputed, report

    def prepare(self, ds: Dataset) -> Tuple[Dataset, Preprocessing, ImputationReport]:
        """Steps 2-4: impute, discretize, restrict features; returns the replayable record"""
        imputed, report = self.impute(ds)
        for rule in self.config.discretize:
            imputed = rule.apply(imputed)
            log.log_step("DISCRETIZE", rule.to_text(), status="COMPLETED")
        if self.config.features:
            imputed = restrict_features(imputed, self.config.features)
        self.stats["Features used"] = len(imputed.features)
        return imputed, Preprocessing(ds.schema, report.means, self.config.discretize, self.config.features), report

    def select(self) -> Tuple[Optional[LogisticFit], List[Chi2Result], FeatureSet]:
        """Screen every feature (Wald for continuous, chi-squared for categorical)"""
        ds, _, _ = self.prepare(self.load())
        logit, chi2s, feature_set = screen_features(ds, self.config.alpha, self.config.force_include)
        self.stats["Features selected"] = len(feature_set.selected)
        return logit, chi2s, feature_set

    def train(self) -> ModelDocument:
        ds, preprocessing, _ = self.prepare(self.load())
        log.log_step("TRAIN", f"{self.config.algorithm} on {len(ds)} instances")
        model = fit_learner(self.config.learner(), ds)
        log.log_step("TRAIN", self.config.algorithm, status="COMPLETED")
        return ModelDocument(model, preprocessing)

    def evaluate(self) -> EvalReport:
        ds, _, imputation = self.prepare(self.load())
        report = cross_validate(
            self.config.learner(),
            ds,
            self.config.k,
            self.config.seed,
            self.config.workers,
            imputed=imputation.row_mask(len(ds)),
        )
        self.stats["Accuracy"] = f"{report.accuracy:.4f}"
        self.stats["ROC area"] = f"{report.roc.auc:.4f}"
        return report

    def summary(self):
        log.session_summary(self.stats)
