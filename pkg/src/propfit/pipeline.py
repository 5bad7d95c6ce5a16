"""End-to-end correction analysis.

Order of operations: noise-band filter, normality gate on the log-domain
discrepancy between measured and simulated power, holdout split, candidate
fits (each preset functional by OLS and by LAR), assumption checklists,
holdout validation, and model selection. If the discrepancy is already
indistinguishable from Gaussian noise, the pipeline stops at the gate and
reports that outcome: there is nothing systematic left to fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    Dataset,
    HOLDOUT_SIZE_DEFAULT,
    NOISE_BAND_DEFAULT,
    filter_noise_band,
    split_holdout,
)
from .diagnostics import (
    ALPHA_DEFAULT,
    AssumptionChecklist,
    DW_WINDOW_DEFAULT,
    NormalityTestResult,
    TOLERANCE_THRESHOLD_DEFAULT,
    CollinearityReport,
    collinearity,
    empirical_cdf,
    ks_normality,
    quantile_groups,
    run_checklist,
)
from .errors import DegenerateDesignError, PipelineStepError
from .regression import (
    FitResult,
    LAR_MAX_ITER_DEFAULT,
    LAR_RESIDUAL_FLOOR_DEFAULT,
    LAR_TOL_DEFAULT,
    ModelSpec,
    ResponseSpec,
    Term,
    build_problem,
    coefficient_of_variation,
    design_matrix,
    fit_lar,
    fit_ols,
    response_vector,
)

PRESET_NAMES = ("hata-form", "full-correction", "offset-correction")

# Residual magnitudes below this fraction of the response scale count as an
# exact fit when summarizing holdout errors.
_EXACT_FIT_RTOL = 1e-9


@dataclass(frozen=True)
class ResidualSeries:
    """Per-record log-domain discrepancy between measured and simulated power."""

    values: np.ndarray
    basis: str = "log10 of linear power (dB/10)"

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ValidationResult:
    """Holdout error summaries (std over |mean|) for the model and for the
    raw simulated predictions."""

    model_error_ratio: float
    lmr_error_ratio: float
    improved: bool
    model_error_std: float
    lmr_error_std: float


@dataclass(frozen=True)
class Candidate:
    """One preset/method combination with everything computed for it."""

    name: str
    preset: str
    method: str
    spec: ModelSpec
    fit: FitResult
    cv: float
    checklist: AssumptionChecklist
    validation: ValidationResult
    dropped_terms: tuple = ()


@dataclass(frozen=True)
class ModelComparison:
    candidates: tuple
    selected: int = None
    selection_rule: str = ""

    @property
    def winner(self) -> Candidate:
        if self.selected is None:
            raise LookupError("no candidate was selected")
        return self.candidates[self.selected]


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for a full run; every field has a working default."""

    noise_band: tuple = NOISE_BAND_DEFAULT  # None disables the filter
    holdout_size: int = HOLDOUT_SIZE_DEFAULT
    seed: int = 42
    presets: tuple = PRESET_NAMES
    lar_tol: float = LAR_TOL_DEFAULT
    lar_max_iter: int = LAR_MAX_ITER_DEFAULT
    lar_residual_floor: float = LAR_RESIDUAL_FLOOR_DEFAULT
    tolerance_threshold: float = TOLERANCE_THRESHOLD_DEFAULT
    dw_window: tuple = DW_WINDOW_DEFAULT
    alpha: float = ALPHA_DEFAULT
    drop_collinear: bool = True
    grouping: str = "p_tx"  # or "fitted-quantiles"


@dataclass(frozen=True)
class PipelineReport:
    provenance: str
    config: PipelineConfig
    rows_in: int
    rows_kept: int
    filter_log: tuple
    gate: NormalityTestResult
    stopped_at_gate: bool
    train_size: int
    holdout_size: int
    comparison: ModelComparison
    cdf_discrepancy: list
    cdf_selected_residuals: list = None


def lmr_residuals(data: Dataset) -> ResidualSeries:
    """log10(linear p_rx) - log10(linear p_lr) per row, i.e. (p_rx - p_lr)/10."""
    values = (data.column("p_rx") - data.column("p_lr")) / 10.0
    return ResidualSeries(values=values)


def model_presets() -> list:
    """The three shipped correction functionals, in stable order.

    hata-form        log(p_rx) ~ log(f) + log(d) + h
    full-correction  log(p_rx) ~ log(p_lr) + log(f) + log(d) + h
    offset-correction  log(p_rx) - log(p_lr) ~ log(d) + log(f)
    """
    return [
        ModelSpec(
            name="hata-form",
            response=ResponseSpec("p_rx", "log10"),
            terms=(Term("f", "log10"), Term("d", "log10"), Term("h", "identity")),
        ),
        ModelSpec(
            name="full-correction",
            response=ResponseSpec("p_rx", "log10"),
            terms=(Term("p_lr", "log10"), Term("f", "log10"),
                   Term("d", "log10"), Term("h", "identity")),
        ),
        ModelSpec(
            name="offset-correction",
            response=ResponseSpec("p_rx", "log10", minus_field="p_lr"),
            terms=(Term("d", "log10"), Term("f", "log10")),
        ),
    ]


def preset_by_name(name: str) -> ModelSpec:
    for spec in model_presets():
        if spec.name == name:
            return spec
    raise LookupError(f"unknown preset {name!r}; valid presets: {PRESET_NAMES}")


def drop_collinear_terms(spec: ModelSpec, report: CollinearityReport) -> ModelSpec:
    """Remove every flagged term from a spec.

    Raises:
        DegenerateDesignError: removal would leave no predictors
    """
    flagged = set(report.flagged_labels)
    if not flagged:
        return spec
    kept = tuple(term for term in spec.terms if term.label not in flagged)
    if not kept:
        raise DegenerateDesignError(
            f"all terms of {spec.name!r} are collinearity-flagged: {sorted(flagged)}"
        )
    return ModelSpec(name=spec.name, response=spec.response, terms=kept,
                     intercept=spec.intercept)


def _error_ratio(errors: np.ndarray, scale: float) -> tuple:
    """(std/|mean| summary, std) with sentinels for exact fits and zero means."""
    std = float(np.std(errors, ddof=1)) if errors.size > 1 else 0.0
    if float(np.max(np.abs(errors), initial=0.0)) <= _EXACT_FIT_RTOL * scale:
        return 0.0, 0.0
    mean = float(np.mean(errors))
    if mean == 0.0:
        return math.inf, std
    return std / abs(mean), std


def validate_holdout(fit: FitResult, spec: ModelSpec, holdout: Dataset) -> ValidationResult:
    """Compare holdout errors of the fitted model against the raw simulation.

    Both error vectors live in the response's log10 scale, and each is
    summarized as std over |mean|. When a mean is exactly zero the ratio is
    reported as inf and the comparison falls back to the stds alone.

    Raises:
        ValueError: empty holdout
    """
    if len(holdout) == 0:
        raise ValueError("holdout is empty")
    y = response_vector(holdout, spec)
    predicted = design_matrix(holdout, spec) @ fit.beta
    model_errors = y - predicted
    lmr_errors = lmr_residuals(holdout).values
    scale = max(1.0, float(np.max(np.abs(y))))
    model_ratio, model_std = _error_ratio(model_errors, scale)
    lmr_ratio, lmr_std = _error_ratio(lmr_errors, scale)
    if math.isinf(model_ratio) or math.isinf(lmr_ratio):
        improved = model_std < lmr_std
    else:
        improved = model_ratio < lmr_ratio
    return ValidationResult(
        model_error_ratio=model_ratio,
        lmr_error_ratio=lmr_ratio,
        improved=improved,
        model_error_std=model_std,
        lmr_error_std=lmr_std,
    )


def _homoscedasticity_groups(train: Dataset, fit: FitResult, grouping: str) -> np.ndarray:
    if grouping == "fitted-quantiles":
        return quantile_groups(fit.fitted, bins=3)
    if grouping != "p_tx":
        raise ValueError(f"grouping must be 'p_tx' or 'fitted-quantiles', got {grouping!r}")
    p_tx = train.column("p_tx")
    labels = np.array([f"p_tx={v!r}" for v in p_tx])
    # Levene needs >= 2 groups with >= 2 members each; otherwise bin instead.
    _, counts = np.unique(labels, return_counts=True)
    if counts.size < 2 or np.min(counts) < 2:
        return quantile_groups(fit.fitted, bins=3)
    return labels


def _select(candidates: list) -> tuple:
    """Index of the winner and the rule text.

    Highest r_squared among candidates whose holdout validation improved on
    the raw simulation; near-ties (within 1e-12) go to the fewer-term model.
    """
    rule = ("highest r_squared among holdout-improved candidates; "
            "ties broken toward fewer terms")
    improved = [i for i, c in enumerate(candidates) if c.validation.improved]
    if not improved:
        return None, rule + " (no candidate improved on the raw simulation)"
    best_r2 = max(candidates[i].fit.r_squared for i in improved)
    contenders = [i for i in improved
                  if best_r2 - candidates[i].fit.r_squared <= 1e-12]
    winner = min(contenders, key=lambda i: (len(candidates[i].fit.beta), i))
    return winner, rule


def run_pipeline(data: Dataset, config: PipelineConfig = PipelineConfig()) -> PipelineReport:
    """Run the full analysis on a loaded, prediction-joined dataset.

    Raises:
        PipelineStepError: a fatal failure in a named step (the gate's
            early exit is a reported outcome, not an error)
    """
    rows_in = len(data)

    # Noise-band filter.
    if config.noise_band is not None:
        try:
            filtered = filter_noise_band(data, config.noise_band)
        except ValueError as exc:
            raise PipelineStepError("noise-filter", str(exc)) from exc
    else:
        filtered = data
    if len(filtered) == 0:
        raise PipelineStepError("noise-filter", "no rows remain after the noise-band filter")

    # Normality gate on the raw discrepancy.
    discrepancy = lmr_residuals(filtered)
    try:
        gate = ks_normality(discrepancy.values, alpha=config.alpha)
    except ValueError as exc:
        raise PipelineStepError("normality-gate", str(exc)) from exc
    cdf_discrepancy = empirical_cdf(discrepancy.values)
    if not gate.reject:
        comparison = ModelComparison(
            candidates=(), selected=None,
            selection_rule=("discrepancy is random (KS p >= alpha); "
                            "no correction fitted"),
        )
        return PipelineReport(
            provenance=data.provenance, config=config,
            rows_in=rows_in, rows_kept=len(filtered),
            filter_log=filtered.filter_log,
            gate=gate, stopped_at_gate=True,
            train_size=len(filtered), holdout_size=0,
            comparison=comparison, cdf_discrepancy=cdf_discrepancy,
        )

    # Holdout split.
    try:
        split = split_holdout(filtered, config.holdout_size, config.seed)
    except ValueError as exc:
        raise PipelineStepError("holdout-split", str(exc)) from exc

    # Candidate fits.
    candidates = []
    for preset_name in config.presets:
        spec = preset_by_name(preset_name)
        try:
            problem = build_problem(split.train, spec)
            dropped = ()
            if config.drop_collinear and problem.k >= 2:
                report = collinearity(problem, threshold=config.tolerance_threshold)
                reduced = drop_collinear_terms(spec, report)
                if reduced is not spec:
                    dropped = tuple(sorted(report.flagged_labels))
                    spec = reduced
                    problem = build_problem(split.train, spec)
            fits = [
                fit_ols(problem),
                fit_lar(problem, tol=config.lar_tol, max_iter=config.lar_max_iter,
                        residual_floor=config.lar_residual_floor),
            ]
            for fit in fits:
                groups = _homoscedasticity_groups(split.train, fit, config.grouping)
                checklist = run_checklist(
                    problem, fit, groups,
                    tolerance_threshold=config.tolerance_threshold,
                    dw_window=config.dw_window, alpha=config.alpha,
                )
                validation = validate_holdout(fit, spec, split.holdout)
                candidates.append(Candidate(
                    name=f"{preset_name}:{fit.method}",
                    preset=preset_name, method=fit.method, spec=spec, fit=fit,
                    cv=coefficient_of_variation(fit, problem.y),
                    checklist=checklist, validation=validation,
                    dropped_terms=dropped,
                ))
        except (ValueError, DegenerateDesignError) as exc:
            raise PipelineStepError(f"fit:{preset_name}", str(exc)) from exc

    selected, rule = _select(candidates)
    comparison = ModelComparison(candidates=tuple(candidates), selected=selected,
                                 selection_rule=rule)
    cdf_selected = (
        empirical_cdf(candidates[selected].fit.residuals) if selected is not None else None
    )
    return PipelineReport(
        provenance=data.provenance, config=config,
        rows_in=rows_in, rows_kept=len(filtered),
        filter_log=filtered.filter_log,
        gate=gate, stopped_at_gate=False,
        train_size=len(split.train), holdout_size=len(split.holdout),
        comparison=comparison,
        cdf_discrepancy=cdf_discrepancy,
        cdf_selected_residuals=cdf_selected,
    )
