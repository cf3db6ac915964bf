"""Rolling cross-validation of the penalty, rolling test forecasts and variant comparison."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from varcast.errors import (BadLag, IndexMismatch, InsufficientHistory,
                            NonFinite, NotAligned, TooFewRows)
from varcast.estimation.design import build_design
from varcast.estimation.solver import (SolverSettings, fit, fit_path,
                                       lambda_grid)
from varcast.models.common import Variant, canonical_order
from varcast.models.series import (MultivariateSeries, SeasonalTransform,
                                   ThreeWaySplit, align,
                                   invert_seasonal_series,
                                   seasonal_difference, split_thirds)
from varcast.models.varx import OBJECTIVE_SCALE, VarxModel

logger = logging.getLogger(__name__)

DIFF_SCALE = 'diff'
LEVEL_SCALE = 'level'


@dataclass(frozen=True)
class CvResult:
    """The outcome of rolling one-step cross-validation over a penalty grid.

    Instance Attributes:
        grid: The penalties, strictly descending.
        scores: The mean squared one-step validation error at each penalty.
        selected_lambda: The penalty with the lowest score; ties go to the larger penalty.
    """

    grid: tuple[float, ...]
    scores: tuple[float, ...]
    selected_lambda: float

    @property
    def selected_index(self) -> int:
        """Return the grid position of the selected penalty."""
        return self.grid.index(self.selected_lambda)

    @property
    def best_score(self) -> float:
        """Return the score of the selected penalty."""
        return self.scores[self.selected_index]


@dataclass(frozen=True, eq=False)
class VariantOutcome:
    """Everything produced while evaluating one variant.

    Instance Attributes:
        variant: The evaluated variant.
        cv: The cross-validation result.
        model: The model refit on train and validation at the selected penalty.
        predictions: The rolling one-step test predictions, on the report scale.
        actuals: The test observations, on the report scale.
        rmse: The per-region test RMSE, in the order of the response labels.
    """

    variant: Variant
    cv: CvResult
    model: VarxModel
    predictions: MultivariateSeries
    actuals: MultivariateSeries
    rmse: np.ndarray


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """Per-region test RMSE of every evaluated variant.

    Instance Attributes:
        regions: The response labels in report order.
        per_region_rmse: A mapping from region to variant code to RMSE.
        config: The effective configuration of the run.
        outcomes: The full outcome of each variant, keyed by variant.
    """

    regions: tuple[str, ...]
    per_region_rmse: dict[str, dict[str, float]]
    config: dict[str, Any]
    outcomes: dict[Variant, VariantOutcome] = field(default_factory=dict)

    @property
    def variants(self) -> tuple[Variant, ...]:
        """Return the evaluated variants in report order."""
        return tuple(self.outcomes)

    def to_frame(self) -> pd.DataFrame:
        """Return the RMSE table with one row per region and one column per variant."""
        frame = pd.DataFrame.from_dict(self.per_region_rmse, orient='index')
        frame = frame.reindex(index=list(self.regions),
                              columns=[variant.value for variant in self.variants])
        frame.index.name = 'region'
        return frame

    def mean_rmse(self, variant: Variant) -> float:
        """Return the RMSE of variant averaged over regions."""
        return float(np.mean([self.per_region_rmse[region][variant.value]
                              for region in self.regions]))


def select_exogenous(exogenous: Optional[MultivariateSeries],
                     variant: Variant) -> Optional[MultivariateSeries]:
    """Return the exogenous rows a variant uses, or None for a pure VAR."""
    if variant is Variant.D:
        return None
    if exogenous is None:
        raise IndexMismatch(f'variant {variant.value} needs exogenous series')
    labels = [label for label in exogenous.labels if variant.selector.accepts(label)]
    if not labels:
        raise IndexMismatch(
            f'no exogenous series match variant {variant.value} ({variant.selector.value})')
    return exogenous.select(labels)


def _check_lags(variant: Variant, s: int) -> None:
    if s == 0 and variant is not Variant.D:
        raise BadLag(f'variant {variant.value} needs an exogenous lag order of at least 1, not 0')


def _check_exogenous(y: MultivariateSeries, x: Optional[MultivariateSeries]) -> None:
    if x is not None and x.index != y.index:
        raise NotAligned('exogenous series must cover exactly the response weeks')


def _rolling_predictions(model: VarxModel, y: MultivariateSeries,
                         x: Optional[MultivariateSeries], start: int) -> np.ndarray:
    """Return one-step forecasts of weeks start..T-1, each from the observed weeks before it."""
    columns = []
    for week in range(start, y.n_weeks):
        x_history = x.values[:, :week] if x is not None else None
        columns.append(model.forecast_one_step(y.values[:, :week], x_history))
    return np.column_stack(columns)


def _refit_predictions(lam: float, y: MultivariateSeries,
                       x: Optional[MultivariateSeries], start: int, p: int, s: int,
                       settings: Optional[SolverSettings], center: bool,
                       standardize: bool) -> np.ndarray:
    """Return one-step forecasts of weeks start..T-1, refitting on all weeks before each."""
    columns = []
    warm_start = None
    for week in range(start, y.n_weeks):
        past_x = x.window(0, week) if x is not None else None
        past = build_design(y.window(0, week), past_x, p, s, center, standardize)
        result = fit(past, lam, settings, warm_start)
        warm_start = result.coefficients
        model = VarxModel.from_solution(result, past)
        x_history = x.values[:, :week] if x is not None else None
        columns.append(model.forecast_one_step(y.values[:, :week], x_history))
    return np.column_stack(columns)


def rolling_one_step_cv(train: MultivariateSeries, validation: MultivariateSeries,
                        exogenous: Optional[MultivariateSeries] = None, p: int = 2, s: int = 1,
                        grid: Optional[Sequence[float]] = None,
                        settings: Optional[SolverSettings] = None, center: bool = True,
                        standardize: bool = False, refit: bool = False, grid_size: int = 20,
                        grid_ratio: float = 0.01) -> CvResult:
    """Choose the penalty by rolling one-step prediction over the validation weeks.

    For each penalty the model is fit once on train and then predicts every validation week
    from the actual weeks before it; with refit=True it is instead refit on all weeks before
    each validation week.

    Args:
        train: The training part of the differenced response.
        validation: The validation part, starting the week after train ends.
        exogenous: The differenced exogenous series covering train and validation, or None
            for a pure VAR (then s must be 0).
        p: The response lag order.
        s: The exogenous lag order.
        grid: The strictly descending penalties. Defaults to a log-spaced grid of grid_size
            values from lambda_max down to grid_ratio * lambda_max.
        settings: Solver settings.
        center: Whether to center the design.
        standardize: Whether to standardize the design columns.
        refit: Whether to refit before every validation week.
        grid_size: The size of the default grid.
        grid_ratio: The smallest-to-largest ratio of the default grid.
    """
    if validation.n_weeks < 1:
        raise TooFewRows('validation part is empty')
    history = train.concat(validation)
    _check_exogenous(history, exogenous)
    x_train = exogenous.window(0, train.n_weeks) if exogenous is not None else None
    problem = build_design(train, x_train, p, s, center, standardize)
    if grid is None:
        grid = lambda_grid(problem, grid_size, grid_ratio, settings)

    actual = validation.values
    scores = []
    for result in fit_path(problem, grid, settings):
        if refit:
            predictions = _refit_predictions(result.lam, history, exogenous,
                                             train.n_weeks, p, s, settings, center, standardize)
        else:
            model = VarxModel.from_solution(result, problem)
            predictions = _rolling_predictions(model, history, exogenous, train.n_weeks)
        score = float(np.mean((predictions - actual) ** 2))
        if not np.isfinite(score):
            raise NonFinite(f'validation score is not finite at lambda={result.lam}')
        logger.debug('lambda=%.6g validation mse=%.6g nonzero=%d',
                     result.lam, score, result.nonzero_count)
        scores.append(score)

    # argmin returns the first minimum, which is the largest penalty on a descending grid
    selected = int(np.argmin(scores))
    return CvResult(tuple(float(lam) for lam in grid), tuple(scores), float(grid[selected]))


def rolling_test_forecast(model: VarxModel, history: MultivariateSeries,
                          test: MultivariateSeries,
                          exogenous: Optional[MultivariateSeries] = None) -> MultivariateSeries:
    """Return one-step forecasts of every test week from the actual weeks before it.

    The model is not refit and predictions are never fed back.

    Args:
        model: The fitted model.
        history: The observed weeks before the test part.
        test: The test part, starting the week after history ends.
        exogenous: Exogenous series covering history and test, if the model uses them.
    """
    if test.n_weeks < 1:
        raise InsufficientHistory('test part is empty')
    if history.n_weeks < max(model.p, model.s):
        raise InsufficientHistory(
            f'{history.n_weeks} history weeks are fewer than the model lags')
    full = history.concat(test)
    x = exogenous if model.s else None
    if x is not None and model.exogenous_labels != x.labels:
        x = x.select(model.exogenous_labels)
    _check_exogenous(full, x)
    predictions = _rolling_predictions(model, full, x, history.n_weeks)
    return test.with_values(predictions)


def rmse(predictions: MultivariateSeries, actuals: MultivariateSeries) -> np.ndarray:
    """Return the root mean squared error of each series over the weeks."""
    if predictions.labels != actuals.labels:
        raise IndexMismatch('predictions and actuals have different labels')
    if predictions.index != actuals.index:
        raise IndexMismatch('predictions and actuals cover different weeks')
    return np.sqrt(np.mean((predictions.values - actuals.values) ** 2, axis=1))


@dataclass(frozen=True, eq=False)
class PreparedVariant:
    """The differenced, split inputs of one variant.

    Instance Attributes:
        variant: The variant.
        split: The thirds of the differenced response.
        transform: The seasonal transform of the raw response.
        exogenous: The differenced exogenous rows the variant uses, over all weeks, or None.
        lags: The exogenous lag order actually used (0 without exogenous rows).
    """

    variant: Variant
    split: ThreeWaySplit
    transform: SeasonalTransform
    exogenous: Optional[MultivariateSeries]
    lags: int

    @property
    def fit_exogenous(self) -> Optional[MultivariateSeries]:
        """Return the exogenous rows over the train and validation weeks."""
        if self.exogenous is None:
            return None
        weeks = self.split.train.n_weeks + self.split.validation.n_weeks
        return self.exogenous.window(0, weeks)


def prepare_variant(claims: MultivariateSeries, exogenous: Optional[MultivariateSeries],
                    variant: Variant, s: int = 1, period: int = 52) -> PreparedVariant:
    """Select the variant's exogenous rows, seasonally difference and split into thirds.

    claims and exogenous must share their weeks (see align).
    """
    _check_lags(variant, s)
    x_raw = select_exogenous(exogenous, variant)
    y_diff, transform = seasonal_difference(claims, period)
    x_diff = seasonal_difference(x_raw, period)[0] if x_raw is not None else None
    return PreparedVariant(variant, split_thirds(y_diff), transform, x_diff,
                           s if x_diff is not None else 0)


def cross_validate_variant(prepared: PreparedVariant, p: int = 2,
                           grid: Optional[Sequence[float]] = None,
                           settings: Optional[SolverSettings] = None, center: bool = True,
                           standardize: bool = False, refit: bool = False,
                           grid_size: int = 20, grid_ratio: float = 0.01) -> CvResult:
    """Run rolling one-step cross-validation on a prepared variant."""
    split = prepared.split
    cv = rolling_one_step_cv(split.train, split.validation, prepared.fit_exogenous, p,
                             prepared.lags, grid, settings, center, standardize, refit,
                             grid_size, grid_ratio)
    logger.info('variant %s: selected lambda=%.6g (validation mse=%.6g)',
                prepared.variant.value, cv.selected_lambda, cv.best_score)
    return cv


def fit_variant(prepared: PreparedVariant, lam: float, p: int = 2,
                settings: Optional[SolverSettings] = None, center: bool = True,
                standardize: bool = False, all_weeks: bool = False) -> VarxModel:
    """Fit a prepared variant at a fixed penalty.

    The model is fit on train and validation, or on every differenced week with
    all_weeks=True. It carries the seasonal transform of the raw response.
    """
    split = prepared.split
    if all_weeks:
        y, x = split.train_validation.concat(split.test), prepared.exogenous
    else:
        y, x = split.train_validation, prepared.fit_exogenous
    problem = build_design(y, x, p, prepared.lags, center, standardize)
    result = fit(problem, lam, settings)
    return VarxModel.from_solution(result, problem, prepared.variant,
                                   seasonal=prepared.transform)


def _dedupe(variants: Sequence[Variant]) -> list[Variant]:
    seen: dict[Variant, int] = {}
    for position, variant in enumerate(variants):
        if variant in seen:
            logger.warning('variant %s requested more than once; the last request wins',
                           variant.value)
        seen[variant] = position
    return sorted(seen, key=lambda variant: list(Variant).index(variant))


def run_variants(claims: MultivariateSeries, exogenous: Optional[MultivariateSeries],
                 variants: Sequence[Variant] = tuple(Variant), p: int = 2, s: int = 1,
                 grid: Optional[Sequence[float]] = None, grid_size: int = 20,
                 grid_ratio: float = 0.01, settings: Optional[SolverSettings] = None,
                 period: int = 52, scale: str = DIFF_SCALE, center: bool = True,
                 standardize: bool = False, refit: bool = False, max_workers: int = 1,
                 show_progress: bool = False,
                 extra_config: Optional[dict[str, Any]] = None) -> EvaluationReport:
    """Evaluate model variants on raw weekly claims and exogenous series.

    Every variant runs the same pipeline: select its exogenous rows, seasonally difference,
    split into thirds, cross-validate the penalty on train/validation, refit on
    train+validation at the selected penalty, forecast the test weeks one step at a time
    and score the forecasts by per-region RMSE.

    Args:
        claims: The raw regional claims.
        exogenous: The raw (normalized, undifferenced) exogenous series, or None when only
            variant D is evaluated.
        variants: The variants to evaluate. Duplicates are dropped with a warning.
        p: The response lag order.
        s: The exogenous lag order, at least 1 for variants A, B and C (ignored by D).
        grid: Fixed penalties for every variant; by default each variant gets its own grid.
        grid_size: The size of the default grid.
        grid_ratio: The smallest-to-largest ratio of the default grid.
        settings: Solver settings.
        period: The seasonal period in weeks.
        scale: 'diff' to score on the seasonally differenced scale, 'level' for raw claims.
        center: Whether to center the design.
        standardize: Whether to standardize the design columns.
        refit: Whether cross-validation refits before every validation week.
        max_workers: The number of variants evaluated concurrently.
        show_progress: Whether to show a progress bar over variants.
        extra_config: Additional entries recorded in the report config.
    """
    if scale not in (DIFF_SCALE, LEVEL_SCALE):
        raise ValueError(f'invalid scale ("{scale}"): expected diff or level')
    settings = settings or SolverSettings()
    variants = _dedupe(variants)
    for variant in variants:
        _check_lags(variant, s)
    if exogenous is not None:
        claims, exogenous = align(claims, exogenous)

    def evaluate(variant: Variant) -> VariantOutcome:
        prepared = prepare_variant(claims, exogenous, variant, s, period)
        cv = cross_validate_variant(prepared, p, grid, settings, center, standardize, refit,
                                    grid_size, grid_ratio)
        model = fit_variant(prepared, cv.selected_lambda, p, settings, center, standardize)

        split = prepared.split
        predictions = rolling_test_forecast(model, split.train_validation, split.test,
                                            prepared.exogenous)
        actuals = split.test
        if scale == LEVEL_SCALE:
            predictions = invert_seasonal_series(predictions, prepared.transform, claims)
            actuals = invert_seasonal_series(actuals, prepared.transform, claims)
        return VariantOutcome(variant, cv, model, predictions, actuals, rmse(predictions, actuals))

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        results = pool.map(evaluate, variants)
        outcomes = list(tqdm(results, total=len(variants), desc='variants',
                             disable=not show_progress))

    order = canonical_order(claims.labels)
    regions = tuple(claims.labels[i] for i in order)
    per_region = {
        claims.labels[i]: {outcome.variant.value: float(outcome.rmse[i]) for outcome in outcomes}
        for i in order
    }
    config = {
        'p': p,
        's': s,
        'period': period,
        'scale': scale,
        'grid': list(grid) if grid is not None else None,
        'grid_size': grid_size,
        'grid_ratio': grid_ratio,
        'center': center,
        'standardize': standardize,
        'cv_refit_each_week': refit,
        'final_fit': 'train+validation',
        'objective_scale': OBJECTIVE_SCALE,
        'solver': {
            'tol': settings.tol,
            'max_iter': settings.max_iter,
            'step': settings.step.value,
            'monotone': settings.monotone,
            'kkt_tol': settings.kkt_tol,
        },
        'variants': [variant.value for variant in variants],
        'weeks': {'first': claims.index.label(0), 'last': claims.index.label(claims.n_weeks - 1)},
        **(extra_config or {}),
    }
    return EvaluationReport(regions, per_region, config,
                            {outcome.variant: outcome for outcome in outcomes})
