"""Design-matrix construction, least-squares and robust fitting, fit metrics.

Model functionals are declared as a response transform plus an ordered list
of predictor terms. Power-like fields (p_rx, p_tx, p_lr) arrive in dB, which
is already logarithmic: applying the log10 transform to one of them maps the
dB value to log10 of linear power, i.e. dB/10, so the fitted functional stays
well-defined for negative dB readings. Linear fields (d, f, h) are
transformed literally.

The production solver uses a pivoted QR decomposition; the explicit
normal-equations solution exists only as an independent oracle in the test
suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .dataset import COLUMNS, Dataset
from .errors import DegenerateDesignError, SingularDesignError

TRANSFORMS = ("identity", "log10")

# Fields recorded in dB (power-like); log10 on these means dB/10.
DB_FIELDS = frozenset({"p_rx", "p_tx", "p_lr"})

# A pivoted-QR diagonal below this fraction of the largest diagonal marks the
# design as rank-deficient.
RANK_DIAG_TOL = 1e-10

LAR_TOL_DEFAULT = 1e-8
LAR_MAX_ITER_DEFAULT = 50
LAR_RESIDUAL_FLOOR_DEFAULT = 1e-6


@dataclass(frozen=True)
class Term:
    """One predictor: a named field under a transform, with a coefficient label."""

    field: str
    transform: str = "identity"
    label: str = None

    def __post_init__(self):
        if self.field not in COLUMNS:
            raise ValueError(f"unknown field {self.field!r}; expected one of {COLUMNS}")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}; expected one of {TRANSFORMS}")
        if self.label is None:
            default = self.field if self.transform == "identity" else f"log10_{self.field}"
            object.__setattr__(self, "label", default)

    def to_dict(self) -> dict:
        return {"field": self.field, "transform": self.transform, "label": self.label}

    @classmethod
    def from_dict(cls, data: dict) -> "Term":
        return cls(field=data["field"], transform=data["transform"], label=data["label"])


@dataclass(frozen=True)
class ResponseSpec:
    """The dependent variable: a transformed field, optionally minus a second
    field under the same transform (an offset response)."""

    field: str
    transform: str = "log10"
    minus_field: str = None

    def __post_init__(self):
        if self.field not in COLUMNS:
            raise ValueError(f"unknown field {self.field!r}; expected one of {COLUMNS}")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}; expected one of {TRANSFORMS}")
        if self.minus_field is not None and self.minus_field not in COLUMNS:
            raise ValueError(f"unknown field {self.minus_field!r}; expected one of {COLUMNS}")

    def to_dict(self) -> dict:
        return {"field": self.field, "transform": self.transform, "minus_field": self.minus_field}

    @classmethod
    def from_dict(cls, data: dict) -> "ResponseSpec":
        return cls(field=data["field"], transform=data["transform"],
                   minus_field=data.get("minus_field"))


@dataclass(frozen=True)
class ModelSpec:
    """A declared functional: response, ordered predictor terms, intercept flag."""

    name: str
    response: ResponseSpec
    terms: tuple
    intercept: bool = True

    def __post_init__(self):
        labels = [term.label for term in self.terms]
        if len(set(labels)) != len(labels):
            raise ValueError(f"term labels must be unique, got {labels}")

    @property
    def term_labels(self) -> tuple:
        labels = ("intercept",) if self.intercept else ()
        return labels + tuple(term.label for term in self.terms)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "response": self.response.to_dict(),
            "terms": [term.to_dict() for term in self.terms],
            "intercept": self.intercept,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        return cls(
            name=data["name"],
            response=ResponseSpec.from_dict(data["response"]),
            terms=tuple(Term.from_dict(t) for t in data["terms"]),
            intercept=bool(data["intercept"]),
        )


@dataclass(frozen=True)
class RegressionProblem:
    """Response vector and design matrix ready for fitting.

    The intercept column, when present, is the leading column of ones and the
    leading entry of term_labels.
    """

    y: np.ndarray
    x: np.ndarray
    term_labels: tuple
    intercept: bool = True

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.ndim != 1:
            raise ValueError("x must be 2-d and y 1-d")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("x and y row counts differ")
        if self.x.shape[1] != len(self.term_labels):
            raise ValueError("term_labels must name every design column")
        if self.n <= self.k + 1:
            raise DegenerateDesignError(
                f"need more rows than coefficients: n={self.n}, predictors k={self.k}"
            )

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def k(self) -> int:
        """Number of non-intercept predictors."""
        return self.x.shape[1] - (1 if self.intercept else 0)


@dataclass(frozen=True)
class FitResult:
    """Fitted coefficients plus the residual-based quality metrics."""

    beta: np.ndarray
    term_labels: tuple
    intercept: bool
    residuals: np.ndarray
    fitted: np.ndarray
    s_e: float
    r_squared: float
    method: str
    iterations: int = None
    converged: bool = None

    def coefficients(self) -> dict:
        return {label: float(b) for label, b in zip(self.term_labels, self.beta)}


def transform_column(values: np.ndarray, field: str, transform: str) -> np.ndarray:
    """Apply a term transform to a raw column.

    log10 on a dB-valued field divides by 10 (the dB/10 mapping); log10 on a
    linear field requires strictly positive values.
    """
    values = np.asarray(values, dtype=float)
    if transform == "identity":
        return values
    if transform == "log10":
        if field in DB_FIELDS:
            return values / 10.0
        bad = np.flatnonzero(values <= 0)
        if bad.size:
            raise DegenerateDesignError(
                f"log10 of non-positive value in field {field!r} at row {int(bad[0])}"
            )
        return np.log10(values)
    raise ValueError(f"unknown transform {transform!r}")


def response_vector(data: Dataset, spec: ModelSpec) -> np.ndarray:
    """The transformed response for a dataset under a model spec."""
    resp = spec.response
    y = transform_column(data.column(resp.field), resp.field, resp.transform)
    if resp.minus_field is not None:
        y = y - transform_column(data.column(resp.minus_field), resp.minus_field, resp.transform)
    return y


def design_matrix(data: Dataset, spec: ModelSpec) -> np.ndarray:
    """The design matrix for a dataset under a model spec (no rank checks)."""
    columns = []
    if spec.intercept:
        columns.append(np.ones(len(data)))
    for term in spec.terms:
        columns.append(transform_column(data.column(term.field), term.field, term.transform))
    return np.column_stack(columns)


def build_problem(data: Dataset, spec: ModelSpec) -> RegressionProblem:
    """Assemble a RegressionProblem, rejecting degenerate designs.

    Raises:
        DegenerateDesignError: a transform hits an invalid value, a
            non-intercept column is constant, or there are too few rows
    """
    if len(data) == 0:
        raise DegenerateDesignError("dataset has no rows")
    y = response_vector(data, spec)
    x = design_matrix(data, spec)
    labels = spec.term_labels
    start = 1 if spec.intercept else 0
    for j in range(start, x.shape[1]):
        column = x[:, j]
        if np.max(column) == np.min(column):
            raise DegenerateDesignError(f"predictor column {labels[j]!r} is constant")
    return RegressionProblem(y=y, x=x, term_labels=labels, intercept=spec.intercept)


def _qr_solve(x: np.ndarray, y: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    """Least-squares solve via column-pivoted QR with an explicit rank check."""
    q, r, pivot = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        raise SingularDesignError("empty design matrix", columns=())
    bad = np.flatnonzero(diag < RANK_DIAG_TOL * diag.max())
    if bad.size:
        offending = tuple(labels[pivot[i]] for i in bad)
        raise SingularDesignError(
            f"rank-deficient design; dependent columns: {offending}", columns=offending
        )
    z = q.T @ y
    beta_pivoted = scipy.linalg.solve_triangular(r, z)
    beta = np.empty_like(beta_pivoted)
    beta[pivot] = beta_pivoted
    return beta


def _fit_metrics(y: np.ndarray, fitted: np.ndarray, k: int) -> tuple:
    n = y.shape[0]
    if n <= k + 1:
        raise DegenerateDesignError(f"degrees of freedom exhausted: n={n}, k={k}")
    sse = float(np.sum((y - fitted) ** 2))
    sst = float(np.sum((y - np.mean(y)) ** 2))
    if sst == 0.0:
        raise DegenerateDesignError("response has zero total variance")
    s_e = float(np.sqrt(sse / (n - k - 1)))
    return s_e, 1.0 - sse / sst


def fit_ols(problem: RegressionProblem) -> FitResult:
    """Ordinary least squares via pivoted QR.

    Raises:
        SingularDesignError: rank-deficient design, reporting the offending
            column labels
    """
    beta = _qr_solve(problem.x, problem.y, problem.term_labels)
    fitted = problem.x @ beta
    residuals = problem.y - fitted
    s_e, r_squared = _fit_metrics(problem.y, fitted, problem.k)
    return FitResult(
        beta=beta,
        term_labels=problem.term_labels,
        intercept=problem.intercept,
        residuals=residuals,
        fitted=fitted,
        s_e=s_e,
        r_squared=r_squared,
        method="ols",
    )


def fit_lar(
    problem: RegressionProblem,
    tol: float = LAR_TOL_DEFAULT,
    max_iter: int = LAR_MAX_ITER_DEFAULT,
    residual_floor: float = LAR_RESIDUAL_FLOOR_DEFAULT,
) -> FitResult:
    """Least absolute residuals by iteratively reweighted least squares.

    Weights are 1/max(|residual|, residual_floor); iteration stops once the
    largest coefficient change drops below tol. Non-convergence within
    max_iter is reported on the result, not raised.

    Raises:
        SingularDesignError: the (weighted) design loses rank
    """
    beta = _qr_solve(problem.x, problem.y, problem.term_labels)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        residuals = problem.y - problem.x @ beta
        weights = 1.0 / np.maximum(np.abs(residuals), residual_floor)
        sqrt_w = np.sqrt(weights)
        try:
            new_beta = _qr_solve(problem.x * sqrt_w[:, None], problem.y * sqrt_w,
                                 problem.term_labels)
        except SingularDesignError as exc:
            raise SingularDesignError(
                f"weighted system singular at iteration {iterations}: {exc}",
                columns=exc.columns,
            ) from exc
        delta = float(np.max(np.abs(new_beta - beta)))
        beta = new_beta
        if delta < tol:
            converged = True
            break
    fitted = problem.x @ beta
    residuals = problem.y - fitted
    s_e, r_squared = _fit_metrics(problem.y, fitted, problem.k)
    return FitResult(
        beta=beta,
        term_labels=problem.term_labels,
        intercept=problem.intercept,
        residuals=residuals,
        fitted=fitted,
        s_e=s_e,
        r_squared=r_squared,
        method="lar",
        iterations=iterations,
        converged=converged,
    )


def goodness_of_fit(result: FitResult, y: np.ndarray) -> tuple:
    """(standard error of estimate, coefficient of determination) for a fit.

    Raises:
        DegenerateDesignError: no residual degrees of freedom, or the
            response has zero total variance
    """
    y = np.asarray(y, dtype=float)
    if y.shape != result.fitted.shape:
        raise ValueError("y must match the fitted values in length")
    k = len(result.beta) - (1 if result.intercept else 0)
    return _fit_metrics(y, result.fitted, k)


def coefficient_of_variation(result: FitResult, y: np.ndarray) -> float:
    """Standard error of estimate over the absolute response mean."""
    mean = float(np.mean(y))
    if mean == 0.0:
        raise ValueError("response mean is zero; coefficient of variation undefined")
    return result.s_e / abs(mean)
