"""Regression assumption checks and residual-normality analysis.

Implements the checkout battery run on every candidate fit: pairwise
correlation, tolerance/VIF multicollinearity, Durbin-Watson independence,
ANOVA F significance, Levene equal-variance, one-sample Kolmogorov-Smirnov
normality, and empirical CDF tables for external plotting.

Tail probabilities (F and Kolmogorov distributions) come from scipy's
standard series and continued-fraction evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import fdtrc, kolmogorov, ndtr

from .errors import DegenerateDesignError
from .regression import FitResult, RegressionProblem, _qr_solve

TOLERANCE_THRESHOLD_DEFAULT = 0.1
DW_WINDOW_DEFAULT = (1.5, 2.5)
ALPHA_DEFAULT = 0.05
OUTLIER_Z_DEFAULT = 3.0
LINEARITY_MIN_R_DEFAULT = 0.3

CHECKLIST_NAMES = (
    "continuity",
    "linearity",
    "multicollinearity",
    "outliers",
    "parsimony",
    "homoscedasticity",
    "residual-normality",
)


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple
    r: np.ndarray

    def pair(self, a: str, b: str) -> float:
        i, j = self.labels.index(a), self.labels.index(b)
        return float(self.r[i, j])


@dataclass(frozen=True)
class CollinearityEntry:
    label: str
    r_i_squared: float
    tolerance: float
    vif: float
    flagged: bool


@dataclass(frozen=True)
class CollinearityReport:
    entries: tuple
    threshold: float

    @property
    def flagged_labels(self) -> tuple:
        return tuple(e.label for e in self.entries if e.flagged)


@dataclass(frozen=True)
class DurbinWatsonResult:
    statistic: float
    window: tuple
    passed: bool


@dataclass(frozen=True)
class AnovaFResult:
    statistic: float
    significance: float
    df_model: int
    df_resid: int


@dataclass(frozen=True)
class LeveneResult:
    statistic: float
    significance: float
    equal_variances: bool
    group_sizes: tuple


@dataclass(frozen=True)
class NormalityTestResult:
    """One-sample KS against a normal with parameters taken from the sample.

    parameters_estimated flags that the p-value uses the plain Kolmogorov
    distribution even though mean and sd were fitted from the data, which
    makes the test conservative.
    """

    statistic: float
    p_value: float
    n: int
    reject: bool
    fitted_mean: float
    fitted_sd: float
    parameters_estimated: bool = True


@dataclass(frozen=True)
class AssumptionVerdict:
    name: str
    status: str  # "pass" | "warn" | "fail"
    statistic: float
    threshold: str
    detail: str = ""


@dataclass(frozen=True)
class AssumptionChecklist:
    verdicts: tuple

    def __post_init__(self):
        names = tuple(v.name for v in self.verdicts)
        if names != CHECKLIST_NAMES:
            raise ValueError(f"checklist must carry exactly {CHECKLIST_NAMES}, got {names}")

    def __getitem__(self, name: str) -> AssumptionVerdict:
        for verdict in self.verdicts:
            if verdict.name == name:
                return verdict
        raise KeyError(name)

    @property
    def all_pass(self) -> bool:
        return all(v.status == "pass" for v in self.verdicts)


def correlation_matrix(data: np.ndarray, labels: Sequence[str]) -> CorrelationMatrix:
    """Pairwise Pearson coefficients of the named columns.

    Covariance and the standard deviations share the n-1 divisor, so the
    ratio is convention-independent.

    Raises:
        ValueError: fewer than 2 rows, or a constant column
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(labels):
        raise ValueError("data must be 2-d with one column per label")
    n = data.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 rows, got {n}")
    centered = data - data.mean(axis=0)
    sd = np.sqrt(np.sum(centered**2, axis=0) / (n - 1))
    for j, s in enumerate(sd):
        if s == 0.0:
            raise ValueError(f"column {labels[j]!r} is constant; correlation undefined")
    cov = centered.T @ centered / (n - 1)
    r = cov / np.outer(sd, sd)
    r = (r + r.T) / 2.0
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(labels=tuple(labels), r=r)


def collinearity(problem: RegressionProblem, threshold: float = TOLERANCE_THRESHOLD_DEFAULT) -> CollinearityReport:
    """Tolerance and VIF per predictor from auxiliary regressions.

    Each predictor is regressed on all the others (plus an intercept); its
    tolerance is 1 - R_i^2 and its VIF the reciprocal. A predictor is flagged
    when tolerance falls below the threshold (VIF above 1/threshold).

    Raises:
        ValueError: fewer than 2 non-intercept predictors
    """
    start = 1 if problem.intercept else 0
    predictors = problem.x[:, start:]
    labels = problem.term_labels[start:]
    if predictors.shape[1] < 2:
        raise ValueError("collinearity needs at least 2 non-intercept predictors")
    ones = np.ones((problem.n, 1))
    entries = []
    for i, label in enumerate(labels):
        target = predictors[:, i]
        others = np.hstack([ones, np.delete(predictors, i, axis=1)])
        coef, *_ = np.linalg.lstsq(others, target, rcond=None)
        sse = float(np.sum((target - others @ coef) ** 2))
        sst = float(np.sum((target - target.mean()) ** 2))
        if sst == 0.0 or not math.isfinite(sse):
            r_sq = 1.0  # degenerate auxiliary fit: treat as fully explained
        else:
            r_sq = min(1.0, max(0.0, 1.0 - sse / sst))
        tolerance = 1.0 - r_sq
        vif = math.inf if tolerance == 0.0 else 1.0 / tolerance
        entries.append(CollinearityEntry(
            label=label, r_i_squared=r_sq, tolerance=tolerance, vif=vif,
            flagged=tolerance < threshold,
        ))
    return CollinearityReport(entries=tuple(entries), threshold=threshold)


def durbin_watson(residuals: np.ndarray, window: tuple = DW_WINDOW_DEFAULT) -> DurbinWatsonResult:
    """First-order autocorrelation statistic with the acceptance window.

    Raises:
        ValueError: fewer than 2 residuals, or an all-zero residual vector
    """
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size < 2:
        raise ValueError(f"need at least 2 residuals, got {residuals.size}")
    denom = float(np.sum(residuals**2))
    if denom == 0.0:
        raise ValueError("all residuals are zero; statistic undefined")
    statistic = float(np.sum(np.diff(residuals) ** 2) / denom)
    low, high = window
    return DurbinWatsonResult(statistic=statistic, window=window,
                              passed=low <= statistic <= high)


def anova_f(result: FitResult) -> AnovaFResult:
    """Regression-significance F test from a fit's decomposition of variance."""
    k = len(result.beta) - (1 if result.intercept else 0)
    n = result.fitted.shape[0]
    if k < 1:
        raise ValueError("F test needs at least one non-intercept predictor")
    if n <= k + 1:
        raise DegenerateDesignError(f"degrees of freedom exhausted: n={n}, k={k}")
    y = result.fitted + result.residuals
    sse = float(np.sum(result.residuals**2))
    ssr = float(np.sum((result.fitted - np.mean(y)) ** 2))
    df_resid = n - k - 1
    if sse == 0.0:
        return AnovaFResult(statistic=math.inf, significance=0.0,
                            df_model=k, df_resid=df_resid)
    statistic = (ssr / k) / (sse / df_resid)
    significance = float(fdtrc(k, df_resid, statistic))
    return AnovaFResult(statistic=statistic, significance=significance,
                        df_model=k, df_resid=df_resid)


def levene_test(values: np.ndarray, groups: Sequence, alpha: float = ALPHA_DEFAULT) -> LeveneResult:
    """Levene's equal-variance test on absolute deviations from group means.

    Raises:
        ValueError: fewer than 2 groups, or a group with fewer than 2 values
    """
    values = np.asarray(values, dtype=float)
    groups = np.asarray(groups)
    if values.shape[0] != groups.shape[0]:
        raise ValueError("values and groups must have equal length")
    unique = list(dict.fromkeys(groups.tolist()))  # first-appearance order
    if len(unique) < 2:
        raise ValueError(f"need at least 2 groups, got {len(unique)}")
    deviations, sizes = [], []
    for label in unique:
        members = values[groups == label]
        if members.size < 2:
            raise ValueError(f"group {label!r} has fewer than 2 observations")
        deviations.append(np.abs(members - members.mean()))
        sizes.append(members.size)
    n_total = int(sum(sizes))
    g = len(unique)
    grand = float(np.concatenate(deviations).mean())
    between = sum(z.size * (float(z.mean()) - grand) ** 2 for z in deviations)
    within = sum(float(np.sum((z - z.mean()) ** 2)) for z in deviations)
    if within == 0.0:
        statistic = 0.0 if between == 0.0 else math.inf
        significance = 1.0 if between == 0.0 else 0.0
    else:
        statistic = ((n_total - g) / (g - 1)) * (between / within)
        significance = float(fdtrc(g - 1, n_total - g, statistic))
    return LeveneResult(statistic=statistic, significance=significance,
                        equal_variances=significance >= alpha,
                        group_sizes=tuple(sizes))


def ks_normality(values: np.ndarray, alpha: float = ALPHA_DEFAULT) -> NormalityTestResult:
    """One-sample KS statistic against a normal fitted to the sample.

    D is the two-sided sup distance over the order statistics; the p-value is
    the asymptotic Kolmogorov tail at sqrt(n) * D.

    Raises:
        ValueError: fewer than 5 values, or zero sample standard deviation
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 5:
        raise ValueError(f"need at least 5 values, got {n}")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    if sd == 0.0:
        raise ValueError("sample standard deviation is zero; test undefined")
    cdf = ndtr((np.sort(values) - mean) / sd)
    i = np.arange(1, n + 1)
    statistic = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    p_value = float(kolmogorov(math.sqrt(n) * statistic))
    return NormalityTestResult(
        statistic=statistic, p_value=p_value, n=n, reject=p_value < alpha,
        fitted_mean=mean, fitted_sd=sd,
    )


def empirical_cdf(values: np.ndarray) -> list:
    """Right-continuous empirical CDF as (sorted value, cumulative fraction)
    rows with ties merged."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one value")
    unique, counts = np.unique(values, return_counts=True)
    fractions = np.cumsum(counts) / values.size
    return [(float(v), float(p)) for v, p in zip(unique, fractions)]


def quantile_groups(values: np.ndarray, bins: int = 3) -> np.ndarray:
    """Label each value by its quantile bin ("q1".."qN") of the vector."""
    values = np.asarray(values, dtype=float)
    edges = np.quantile(values, np.linspace(0, 1, bins + 1)[1:-1])
    index = np.searchsorted(edges, values, side="right")
    return np.array([f"q{i + 1}" for i in index])


def run_checklist(
    problem: RegressionProblem,
    result: FitResult,
    groups: Sequence = None,
    *,
    tolerance_threshold: float = TOLERANCE_THRESHOLD_DEFAULT,
    dw_window: tuple = DW_WINDOW_DEFAULT,
    alpha: float = ALPHA_DEFAULT,
    outlier_z: float = OUTLIER_Z_DEFAULT,
    linearity_min_r: float = LINEARITY_MIN_R_DEFAULT,
) -> AssumptionChecklist:
    """Run the full assumption battery for one fit.

    Args:
        problem: the design the fit was computed on
        result: the fit under check
        groups: group label per observation for the equal-variance test;
            defaults to tercile bins of the fitted values

    All seven verdicts are always populated.
    """
    start = 1 if problem.intercept else 0
    predictors = problem.x[:, start:]
    predictor_labels = problem.term_labels[start:]
    verdicts = []

    # Continuity: numeric, finite, non-degenerate columns (checked structurally).
    degenerate = [
        label for j, label in enumerate(predictor_labels)
        if not np.all(np.isfinite(predictors[:, j]))
        or np.max(predictors[:, j]) == np.min(predictors[:, j])
    ]
    if not np.all(np.isfinite(problem.y)):
        degenerate.append("<response>")
    verdicts.append(AssumptionVerdict(
        name="continuity",
        status="pass" if not degenerate else "fail",
        statistic=float(len(degenerate)),
        threshold="0 degenerate columns",
        detail=", ".join(degenerate),
    ))

    # Linearity: strongest absolute correlation between a predictor and the response.
    if predictors.shape[1] == 0:
        verdicts.append(AssumptionVerdict(
            name="linearity", status="pass", statistic=1.0,
            threshold=f"max |r| >= {linearity_min_r}", detail="no predictors",
        ))
    else:
        matrix = correlation_matrix(
            np.column_stack([problem.y, predictors]),
            ("<response>",) + tuple(predictor_labels),
        )
        max_r = float(np.max(np.abs(matrix.r[0, 1:])))
        verdicts.append(AssumptionVerdict(
            name="linearity",
            status="pass" if max_r >= linearity_min_r else "warn",
            statistic=max_r,
            threshold=f"max |r| >= {linearity_min_r}",
        ))

    # Multicollinearity: tolerance/VIF; vacuous with fewer than 2 predictors.
    if predictors.shape[1] < 2:
        verdicts.append(AssumptionVerdict(
            name="multicollinearity", status="pass", statistic=1.0,
            threshold=f"tolerance >= {tolerance_threshold}", detail="fewer than 2 predictors",
        ))
    else:
        report = collinearity(problem, threshold=tolerance_threshold)
        min_tol = min(e.tolerance for e in report.entries)
        flagged = report.flagged_labels
        verdicts.append(AssumptionVerdict(
            name="multicollinearity",
            status="fail" if flagged else "pass",
            statistic=min_tol,
            threshold=f"tolerance >= {tolerance_threshold}",
            detail=", ".join(flagged),
        ))

    # Outliers: standardized residuals beyond the z cutoff.
    resid_sd = float(result.residuals.std(ddof=1))
    if resid_sd == 0.0:
        count = 0
    else:
        count = int(np.sum(np.abs(result.residuals / resid_sd) > outlier_z))
    verdicts.append(AssumptionVerdict(
        name="outliers",
        status="pass" if count == 0 else "warn",
        statistic=float(count),
        threshold=f"0 residuals with |z| > {outlier_z}",
    ))

    # Parsimony: Durbin-Watson inside the acceptance window.
    dw = durbin_watson(result.residuals, window=dw_window)
    verdicts.append(AssumptionVerdict(
        name="parsimony",
        status="pass" if dw.passed else "fail",
        statistic=dw.statistic,
        threshold=f"{dw_window[0]} <= DW <= {dw_window[1]}",
    ))

    # Homoscedasticity: Levene across the supplied grouping.
    if groups is None:
        groups = quantile_groups(result.fitted, bins=3)
    levene = levene_test(result.residuals, groups, alpha=alpha)
    verdicts.append(AssumptionVerdict(
        name="homoscedasticity",
        status="pass" if levene.equal_variances else "fail",
        statistic=levene.significance,
        threshold=f"significance >= {alpha}",
        detail=f"W={levene.statistic!r}, groups={levene.group_sizes}",
    ))

    # Residual normality: one-sample KS.
    ks = ks_normality(result.residuals, alpha=alpha)
    verdicts.append(AssumptionVerdict(
        name="residual-normality",
        status="pass" if not ks.reject else "fail",
        statistic=ks.p_value,
        threshold=f"p >= {alpha}",
        detail=f"D={ks.statistic!r}",
    ))

    return AssumptionChecklist(verdicts=tuple(verdicts))
