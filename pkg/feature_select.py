"""
Feature Selection Module
Logistic regression + Wald tests for continuous attributes,
chi-squared independence tests for categorical attributes
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, gammaincc

from config import (
    IRLS_MAX_ITERATIONS,
    IRLS_TOLERANCE,
    SIGNIFICANCE_ALPHA,
    SINGULAR_TOLERANCE,
)
from data_model import AttributeRole, Dataset, Schema
from errors import (
    DomainError,
    MissingCellError,
    NotConvergedError,
    SchemaError,
    SeparationError,
    TooFewInstancesError,
    UnknownAttributeError,
    ZeroExpectedCellError,
)
from logger import log

INTERCEPT = "(Intercept)"

# Step-halving gives up after this many halvings
MAX_STEP_HALVINGS = 30


# === TAIL PROBABILITY ===

def chi2_sf(x: float, df: int) -> float:
    """
    Upper-tail chi-square probability P(X >= x)

    Evaluates the regularized upper incomplete gamma Q(df/2, x/2)
    (series below a+1, continued fraction above).

    Args:
        x: Statistic, x >= 0
        df: Degrees of freedom, df >= 1

    Returns:
        p-value in [0, 1]
    """
    if math.isnan(x) or x < 0:
        raise DomainError(f"chi-square statistic must be >= 0, got {x}")
    if df < 1 or int(df) != df:
        raise DomainError(f"degrees of freedom must be a positive integer, got {df}")
    return float(gammaincc(df / 2.0, x / 2.0))


# === LOGISTIC REGRESSION ===

@dataclass(frozen=True)
class LogisticFit:
    """Binomial logistic fit; index 0 of every tuple is the intercept"""

    names: Tuple[str, ...]
    coefficients: Tuple[float, ...]
    std_errors: Tuple[float, ...]
    wald_chi2: Tuple[float, ...]
    p_values: Tuple[float, ...]
    converged: bool
    iterations: int
    log_likelihood: float
    loglik_history: Tuple[float, ...] = ()

    @property
    def predictors(self) -> Tuple[str, ...]:
        return self.names[1:]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownAttributeError(f"'{name}' is not a predictor of this fit", attribute=name) from None

    def coefficient(self, name: str) -> float:
        return self.coefficients[self.index(name)]


def wald_statistic(coefficient: float, std_error: float) -> Tuple[float, float]:
    """(beta / SE)^2 and its df=1 tail probability"""
    if not std_error > 0:
        raise DomainError(f"standard error must be positive, got {std_error}")
    chi2 = (coefficient / std_error) ** 2
    return chi2, chi2_sf(chi2, 1)


def _log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def _information(X: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Observed information X'WX; raises SeparationError when it is singular"""
    if weights.max() < SINGULAR_TOLERANCE:
        raise SeparationError("IRLS weights collapsed (classes are separated)")
    info = X.T @ (X * weights[:, None])
    eigenvalues = np.linalg.eigvalsh(info)
    if eigenvalues[0] <= SINGULAR_TOLERANCE * max(eigenvalues[-1], 1.0):
        raise SeparationError("information matrix is singular (separation or collinear predictors)")
    return info


def fit_logistic(
    ds: Dataset,
    predictors: Sequence[str],
    target: Optional[str] = None,
    tolerance: float = IRLS_TOLERANCE,
    max_iterations: int = IRLS_MAX_ITERATIONS,
) -> LogisticFit:
    """
    Fit a binomial logistic regression by iteratively reweighted least squares

    Args:
        ds: Dataset with no missing cells in the predictors
        predictors: Numeric feature names (may be empty: intercept-only fit)
        target: Target name (defaults to the schema target)
        tolerance: Converged when max |delta beta| falls below this
        max_iterations: Iteration cap; hitting it returns converged=False

    Returns:
        LogisticFit with SEs from the inverse information at the optimum
    """
    if target is not None and target != ds.target.name:
        raise UnknownAttributeError(f"'{target}' is not the target attribute", attribute=target)

    columns = [np.ones(len(ds))]
    for name in predictors:
        values = ds.numeric_values(name)
        if np.isnan(values).any():
            raise MissingCellError(f"predictor '{name}' has missing cells; impute first", attribute=name)
        columns.append(values)
    X = np.column_stack(columns)
    y = ds.positive_mask.astype(float)
    n, p = X.shape
    if n < p:
        raise TooFewInstancesError(f"{p - 1} predictor(s) need at least {p} instances, got {n}")

    beta = np.zeros(p)
    loglik = _log_likelihood(X, y, beta)
    history = [loglik]
    converged = False
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        mu = expit(X @ beta)
        info = _information(X, mu * (1.0 - mu))
        step = np.linalg.solve(info, X.T @ (y - mu))

        candidate = beta + step
        candidate_ll = _log_likelihood(X, y, candidate)
        halvings = 0
        while candidate_ll < loglik - 1e-12 and halvings < MAX_STEP_HALVINGS:
            step = step / 2.0
            candidate = beta + step
            candidate_ll = _log_likelihood(X, y, candidate)
            halvings += 1

        beta, loglik = candidate, candidate_ll
        history.append(loglik)
        if np.max(np.abs(step)) < tolerance:
            converged = True
            break

    if not converged:
        log.warning(f"IRLS did not converge in {max_iterations} iterations (log-likelihood {loglik:.6f})")

    mu = expit(X @ beta)
    covariance = np.linalg.inv(_information(X, mu * (1.0 - mu)))
    std_errors = np.sqrt(np.diag(covariance))
    wald = (beta / std_errors) ** 2

    return LogisticFit(
        names=(INTERCEPT,) + tuple(predictors),
        coefficients=tuple(float(b) for b in beta),
        std_errors=tuple(float(s) for s in std_errors),
        wald_chi2=tuple(float(w) for w in wald),
        p_values=tuple(chi2_sf(float(w), 1) for w in wald),
        converged=converged,
        iterations=iterations,
        log_likelihood=loglik,
        loglik_history=tuple(history),
    )


def wald_test(fit: LogisticFit) -> Dict[str, Tuple[float, float]]:
    """
    Wald chi-square and p-value per coefficient

    Returns:
        {name: (chi2, p)} including the intercept
    """
    if not fit.converged:
        raise NotConvergedError("Wald test needs a converged logistic fit")
    return {
        name: wald_statistic(beta, se)
        for name, beta, se in zip(fit.names, fit.coefficients, fit.std_errors)
    }


# === CHI-SQUARED INDEPENDENCE TEST ===

@dataclass(frozen=True)
class Chi2Result:
    attribute: str
    target: str
    statistic: float
    dof: int
    p_value: float
    observed: Tuple[Tuple[int, ...], ...]
    expected: Tuple[Tuple[float, ...], ...]
    row_labels: Tuple[str, ...] = ()
    column_labels: Tuple[str, ...] = ()


def chi_squared_test(ds: Dataset, attr: str, target: Optional[str] = None) -> Chi2Result:
    """
    Pearson chi-squared test of independence between two nominal attributes

    No continuity correction is applied.

    Args:
        ds: Dataset
        attr: Nominal attribute (rows of the table)
        target: Second attribute (columns), defaults to the schema target
    """
    target = target or ds.target.name
    row_attr, col_attr = ds.attribute(attr), ds.attribute(target)
    for attribute in (row_attr, col_attr):
        if not attribute.is_nominal:
            raise SchemaError(f"chi-squared test needs nominal attributes, '{attribute.name}' is numeric")
        if len(attribute.categories) < 2:
            raise DomainError(f"'{attribute.name}' needs at least 2 categories")

    rows, cols = ds.codes(attr), ds.codes(target)
    if (rows < 0).any() or (cols < 0).any():
        raise MissingCellError(f"chi-squared test of '{attr}' vs '{target}' found missing cells", attribute=attr)

    observed = np.zeros((len(row_attr.categories), len(col_attr.categories)))
    np.add.at(observed, (rows, cols), 1)
    total = observed.sum()
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / total if total else observed

    if total == 0 or (expected == 0).any():
        absent = [row_attr.categories[i] for i in np.flatnonzero(observed.sum(axis=1) == 0)]
        absent += [col_attr.categories[j] for j in np.flatnonzero(observed.sum(axis=0) == 0)]
        raise ZeroExpectedCellError(
            f"expected count 0 in '{attr}' x '{target}' (absent categories: {absent})", attribute=attr
        )

    statistic = float(((observed - expected) ** 2 / expected).sum())
    dof = (observed.shape[0] - 1) * (observed.shape[1] - 1)
    return Chi2Result(
        attribute=attr,
        target=target,
        statistic=statistic,
        dof=dof,
        p_value=chi2_sf(statistic, dof),
        observed=tuple(tuple(int(v) for v in row) for row in observed),
        expected=tuple(tuple(float(v) for v in row) for row in expected),
        row_labels=row_attr.categories,
        column_labels=col_attr.categories,
    )


# === SELECTION ===

@dataclass(frozen=True)
class FeatureScore:
    attribute: str
    test: str  # "wald" or "chi2"
    statistic: float
    p_value: float
    dof: int = 1


@dataclass(frozen=True)
class FeatureSet:
    """Selected attributes with the statistics and rule that selected them"""

    selected: Tuple[str, ...]
    scores: Tuple[FeatureScore, ...]
    alpha: float
    force_include: Tuple[str, ...] = ()
    provenance: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "selected": list(self.selected),
            "alpha": self.alpha,
            "force_include": list(self.force_include),
            "provenance": dict(self.provenance),
            "scores": [
                {
                    "attribute": s.attribute,
                    "test": s.test,
                    "statistic": s.statistic,
                    "dof": s.dof,
                    "p_value": s.p_value,
                }
                for s in self.scores
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "FeatureSet":
        scores = tuple(
            FeatureScore(s["attribute"], s["test"], s["statistic"], s["p_value"], s.get("dof", 1))
            for s in data.get("scores", [])
        )
        return cls(
            selected=tuple(data["selected"]),
            scores=scores,
            alpha=float(data["alpha"]),
            force_include=tuple(data.get("force_include", ())),
            provenance=dict(data.get("provenance", {})),
        )


def select_features(
    logit: Optional[LogisticFit],
    chi2s: Iterable[Chi2Result],
    alpha: float = SIGNIFICANCE_ALPHA,
    force_include: Iterable[str] = (),
    schema: Optional[Schema] = None,
) -> FeatureSet:
    """
    Select attributes with p <= alpha, plus an explicit include list

    Args:
        logit: Fit over the continuous attributes (intercept is never selected)
        chi2s: Chi-squared results for categorical attributes
        alpha: Significance level in (0, 1]
        force_include: Names selected regardless of their p-value
        schema: If given, force_include names are checked against its features

    Returns:
        FeatureSet with per-attribute provenance ("threshold", "forced", "threshold+forced")
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must be in (0, 1], got {alpha}")

    scores: List[FeatureScore] = []
    if logit is not None:
        if not logit.converged:
            log.warning("Selecting from a logistic fit that did not converge")
        for name in logit.predictors:
            i = logit.index(name)
            scores.append(FeatureScore(name, "wald", logit.wald_chi2[i], logit.p_values[i], 1))
    for result in chi2s:
        scores.append(FeatureScore(result.attribute, "chi2", result.statistic, result.p_value, result.dof))

    if schema is not None:
        known = {a.name for a in schema if a.role is AttributeRole.FEATURE}
    else:
        known = {s.attribute for s in scores}
    forced = tuple(dict.fromkeys(force_include))
    for name in forced:
        if name not in known:
            raise UnknownAttributeError(f"cannot force-include unknown attribute '{name}'", attribute=name)

    provenance: Dict[str, str] = {}
    for score in scores:
        if score.p_value <= alpha:
            provenance[score.attribute] = "threshold"
    for name in forced:
        provenance[name] = "threshold+forced" if name in provenance else "forced"

    tested = [s.attribute for s in scores]
    selected = [name for name in tested if name in provenance]
    selected += [name for name in forced if name not in tested]
    return FeatureSet(tuple(selected), tuple(scores), alpha, forced, provenance)


def screen_features(
    ds: Dataset,
    alpha: float = SIGNIFICANCE_ALPHA,
    force_include: Iterable[str] = (),
) -> Tuple[Optional[LogisticFit], List[Chi2Result], FeatureSet]:
    """
    Run both screens over every feature of the dataset

    Continuous features go through one joint logistic fit; categorical
    features each get a chi-squared test against the target. Categorical
    features with an absent category are skipped with a warning.
    """
    numeric = [a.name for a in ds.features if a.is_numeric]
    nominal = [a.name for a in ds.features if a.is_nominal]

    logit = fit_logistic(ds, numeric) if numeric else None
    chi2s = []
    for name in nominal:
        try:
            chi2s.append(chi_squared_test(ds, name))
        except ZeroExpectedCellError as e:
            log.warning(f"Skipping chi-squared test for {name}: {e}")

    feature_set = select_features(logit, chi2s, alpha, force_include, schema=ds.schema)
    log.info(f"Selected {len(feature_set.selected)} feature(s): {', '.join(feature_set.selected)}")
    return logit, chi2s, feature_set


def format_selection_table(logit: Optional[LogisticFit], chi2s: Sequence[Chi2Result]) -> str:
    """Plain-text tables: Wald statistics for continuous, chi-squared for categorical attributes"""
    lines = []
    if logit is not None:
        lines.append("Continuous attributes (logistic regression, Wald test)")
        lines.append(f"{'Attribute':<20}{'Chi2 Wald':>12}{'p-value':>10}")
        for name in logit.predictors:
            i = logit.index(name)
            lines.append(f"{name:<20}{logit.wald_chi2[i]:>12.3f}{logit.p_values[i]:>10.4f}")
        if not logit.converged:
            lines.append("(fit did not converge)")
        lines.append("")
    if chi2s:
        lines.append("Categorical attributes (chi-squared test)")
        lines.append(f"{'Attribute':<20}{'Chi2':>12}{'df':>4}{'p-value':>10}")
        for result in chi2s:
            lines.append(f"{result.attribute:<20}{result.statistic:>12.2f}{result.dof:>4}{result.p_value:>10.4f}")
    return "\n".join(lines)
