"""The fitted sparse VAR-X model."""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from varcast.errors import (InsufficientHistory, MissingFutures,
                            MissingHistory, MissingModel, ShapeMismatch)
from varcast.estimation.design import LassoProblem, restack, unstack
from varcast.estimation.solver import SolverResult
from varcast.models.common import (QUERY_SUFFIX, URL_SUFFIX, ExogenousPolicy,
                                   Variant, canonical_order)
from varcast.models.series import (MultivariateSeries, SeasonalTransform,
                                   TimeIndex, invert_seasonal_difference,
                                   parse_week)


SCHEMA_VERSION = 1
OBJECTIVE_SCALE = '1/(2N)'

History = Union[np.ndarray, MultivariateSeries]


def companion_matrix(theta: np.ndarray) -> np.ndarray:
    """Return the kp x kp companion matrix of the response lag matrices theta (p, k, k)."""
    theta = np.asarray(theta, dtype=np.float64)
    p, k, _ = theta.shape
    companion = np.zeros((k * p, k * p))
    companion[:k] = np.hstack(list(theta))
    companion[k:, :-k] = np.eye(k * (p - 1))
    return companion


def companion_spectral_radius(theta: np.ndarray) -> float:
    """Return the largest eigenvalue modulus of the companion matrix of theta."""
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(theta)))))


def _as_history(history: Optional[History], rows: int, needed: int, name: str) -> np.ndarray:
    """Return history as a rows x n float matrix with n >= needed columns."""
    if history is None:
        raise InsufficientHistory(f'{name} history is required ({needed} weeks)')
    if isinstance(history, MultivariateSeries):
        history = history.values
    history = np.asarray(history, dtype=np.float64)
    if history.ndim == 1:
        history = history.reshape(rows, -1)
    if history.shape[0] != rows:
        raise InsufficientHistory(f'{name} history has {history.shape[0]} rows, expected {rows}')
    if history.shape[1] < needed:
        raise InsufficientHistory(
            f'{name} history has {history.shape[1]} weeks, expected at least {needed}')
    return history


@dataclass(frozen=True)
class SparsityPattern:
    """Coefficient magnitudes of a model, ready for heatmap emission.

    Instance Attributes:
        theta: The magnitudes of Θ, shape (p, k, k), rows and columns in canonical order.
        beta: The magnitudes of β, shape (s, k, m), in canonical order.
        response_labels: The row (and Θ column) labels.
        exogenous_labels: The β column labels.
        theta_counts: The nonzero count of each Θ lag.
        beta_counts: The nonzero count of each β lag.
    """

    theta: np.ndarray
    beta: np.ndarray
    response_labels: tuple[str, ...]
    exogenous_labels: tuple[str, ...]
    theta_counts: tuple[int, ...]
    beta_counts: tuple[int, ...]

    @property
    def total(self) -> int:
        """Return the total number of nonzero coefficients."""
        return sum(self.theta_counts) + sum(self.beta_counts)


@dataclass(frozen=True, eq=False)
class VarxModel:
    """A fitted VAR-X model.

    Forecasts are ``intercept + sum_i theta[i-1] @ y[t-i] + sum_j beta[j-1] @ x[t-j]`` where the
    intercept folds in the centering means recorded at fit time.

    Instance Attributes:
        theta: The response lag matrices, shape (p, k, k).
        beta: The exogenous lag matrices, shape (s, k, m); s is 0 for a pure VAR.
        response_labels: The k response labels.
        exogenous_labels: The m exogenous labels.
        lam: The penalty the model was fit at.
        response_means: The response means subtracted at fit time.
        design_means: The design column means subtracted at fit time.
        variant: The model variant.
        seasonal: The seasonal transform of the raw response, used to report forecasts on
            the original scale, or None.
    """

    theta: np.ndarray
    beta: np.ndarray
    response_labels: tuple[str, ...]
    exogenous_labels: tuple[str, ...]
    lam: float
    response_means: np.ndarray
    design_means: np.ndarray
    variant: Variant = Variant.C
    seasonal: Optional[SeasonalTransform] = None

    def __post_init__(self) -> None:
        k, m = len(self.response_labels), len(self.exogenous_labels)
        theta = np.array(self.theta, dtype=np.float64).reshape(-1, k, k)
        if m == 0:
            beta = np.zeros((0, k, 0))
        else:
            beta = np.array(self.beta, dtype=np.float64).reshape(-1, k, m)
        if theta.shape[0] < 1:
            raise ShapeMismatch('a model needs at least one response lag')
        response_means = np.array(self.response_means, dtype=np.float64).reshape(k)
        design_means = np.array(self.design_means, dtype=np.float64)
        if design_means.shape != (k * theta.shape[0] + m * beta.shape[0],):
            raise ShapeMismatch(f'design means of shape {design_means.shape} do not match lags')
        for array in (theta, beta, response_means, design_means):
            array.setflags(write=False)
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'response_means', response_means)
        object.__setattr__(self, 'design_means', design_means)
        object.__setattr__(self, 'response_labels', tuple(self.response_labels))
        object.__setattr__(self, 'exogenous_labels', tuple(self.exogenous_labels))
        self._check_variant()

    def _check_variant(self) -> None:
        labels = self.exogenous_labels
        if self.variant is Variant.D and (self.s != 0 or labels):
            raise ShapeMismatch('a variant D model has no exogenous coefficients')
        if self.variant is Variant.A and not all(label.endswith(URL_SUFFIX) for label in labels):
            raise ShapeMismatch('a variant A model uses URL click series only')
        if self.variant is Variant.B and not all(label.endswith(QUERY_SUFFIX) for label in labels):
            raise ShapeMismatch('a variant B model uses query series only')

    @property
    def p(self) -> int:
        """Return the response lag order."""
        return self.theta.shape[0]

    @property
    def s(self) -> int:
        """Return the exogenous lag order."""
        return self.beta.shape[0]

    @property
    def k(self) -> int:
        """Return the number of response series."""
        return len(self.response_labels)

    @property
    def m(self) -> int:
        """Return the number of exogenous series."""
        return len(self.exogenous_labels)

    @property
    def intercept(self) -> np.ndarray:
        """Return the constant term implied by the centering means."""
        return self.response_means - self.stacked().T @ self.design_means

    @classmethod
    def from_solution(cls, result: SolverResult, problem: LassoProblem,
                      variant: Variant = Variant.C,
                      seasonal: Optional[SeasonalTransform] = None,
                      lam: Optional[float] = None) -> 'VarxModel':
        """Unstack a solver result into a model.

        Coefficients fit on a standardized design are divided back onto the original scale.
        """
        k = len(problem.response_labels)
        coefficients = np.asarray(result.coefficients, dtype=np.float64)
        if coefficients.shape != (problem.n_columns, k):
            raise ShapeMismatch(
                f'solution of shape {coefficients.shape} does not match the problem '
                f'({problem.n_columns}, {k})')
        coefficients = coefficients / problem.design_scales[:, None]
        theta, beta = unstack(coefficients, problem.blocks, k)
        return cls(
            theta=theta,
            beta=beta,
            response_labels=problem.response_labels,
            exogenous_labels=problem.exogenous_labels,
            lam=result.lam if lam is None else lam,
            response_means=problem.response_means,
            design_means=problem.design_means,
            variant=variant,
            seasonal=seasonal,
        )

    def stacked(self) -> np.ndarray:
        """Return the stacked (k*p + m*s) x k coefficient matrix."""
        return restack(self.theta, self.beta)

    def spectral_radius(self) -> float:
        """Return the spectral radius of the response companion matrix."""
        return companion_spectral_radius(self.theta)

    def is_stable(self) -> bool:
        """Return whether the response dynamics are stable (spectral radius below one)."""
        return self.spectral_radius() < 1.0

    def forecast_one_step(self, y_history: History,
                          x_history: Optional[History] = None) -> np.ndarray:
        """Return the forecast of the week after the histories.

        Args:
            y_history: Differenced responses, k rows, oldest week first; at least p weeks.
            x_history: Differenced exogenous inputs, m rows, oldest week first; at least s
                weeks. Ignored when s is 0.
        """
        y = _as_history(y_history, self.k, self.p, 'response')
        forecast = self.intercept.copy()
        for lag in range(1, self.p + 1):
            forecast += self.theta[lag - 1] @ y[:, -lag]
        if self.s:
            x = _as_history(x_history, self.m, self.s, 'exogenous')
            for lag in range(1, self.s + 1):
                forecast += self.beta[lag - 1] @ x[:, -lag]
        return forecast

    def forecast_h_step(self, y_history: History, x_history: Optional[History] = None,
                        h: int = 2, x_policy: ExogenousPolicy = ExogenousPolicy.HOLD_LAST,
                        x_future: Optional[History] = None) -> np.ndarray:
        """Return h recursive forecasts as a k x h matrix.

        Each forecast is fed back as a pseudo-observation. Exogenous values after the
        history are held at their last value, set to zero, or taken from x_future (which
        then needs at least h - 1 weeks), depending on x_policy.
        """
        if h < 1:
            raise ValueError(f'invalid horizon ({h}): must be at least 1')
        y = _as_history(y_history, self.k, self.p, 'response')
        x = _as_history(x_history, self.m, self.s, 'exogenous') if self.s else None
        future = None
        if x is not None and x_policy is ExogenousPolicy.PROVIDED and h > 1:
            if x_future is None:
                raise MissingFutures('exogenous futures were requested but not provided')
            future = x_future.values if isinstance(x_future, MultivariateSeries) else np.asarray(x_future)
            future = np.asarray(future, dtype=np.float64).reshape(self.m, -1)
            if future.shape[1] < h - 1:
                raise MissingFutures(
                    f'{future.shape[1]} exogenous future weeks given, {h - 1} needed')

        forecasts = []
        for step in range(h):
            forecast = self.forecast_one_step(y, x)
            forecasts.append(forecast)
            y = np.column_stack([y, forecast])
            if x is not None and step < h - 1:
                if x_policy is ExogenousPolicy.HOLD_LAST:
                    upcoming = x[:, -1]
                elif x_policy is ExogenousPolicy.ZEROS:
                    upcoming = np.zeros(self.m)
                else:
                    upcoming = future[:, step]
                x = np.column_stack([x, upcoming])
        return np.column_stack(forecasts)

    def forecast_level(self, diff_forecast: np.ndarray, week_offset: int,
                       raw_history: Optional[MultivariateSeries] = None) -> np.ndarray:
        """Return a differenced forecast on the original scale.

        week_offset counts weeks from the first raw week (the start of the seasonal head).
        """
        if self.seasonal is None:
            raise MissingHistory('model has no seasonal transform to invert')
        return invert_seasonal_difference(diff_forecast, week_offset, self.seasonal, raw_history)

    def sparsity_pattern(self, threshold: float = 0.0) -> SparsityPattern:
        """Return coefficient magnitudes with entries below threshold set to zero."""
        if threshold < 0:
            raise ValueError(f'invalid threshold ({threshold}): must be non-negative')
        rows = canonical_order(self.response_labels)
        columns = canonical_order(self.exogenous_labels)
        theta = np.abs(self.theta)[:, rows][:, :, rows]
        beta = np.abs(self.beta)[:, rows][:, :, columns]
        theta[theta < threshold] = 0.0
        beta[beta < threshold] = 0.0
        return SparsityPattern(
            theta=theta,
            beta=beta,
            response_labels=tuple(self.response_labels[i] for i in rows),
            exogenous_labels=tuple(self.exogenous_labels[j] for j in columns),
            theta_counts=tuple(int(np.count_nonzero(matrix)) for matrix in theta),
            beta_counts=tuple(int(np.count_nonzero(matrix)) for matrix in beta),
        )

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-compatible record of the model."""
        seasonal = None
        if self.seasonal is not None:
            head = self.seasonal.head
            seasonal = {
                'period': self.seasonal.period,
                'start_week': head.index.label(0),
                'labels': list(head.labels),
                'values': head.values.tolist(),
            }
        return {
            'schema_version': SCHEMA_VERSION,
            'variant': self.variant.value,
            'lambda': self.lam,
            'objective_scale': OBJECTIVE_SCALE,
            'p': self.p,
            's': self.s,
            'response_labels': list(self.response_labels),
            'exogenous_labels': list(self.exogenous_labels),
            'response_means': self.response_means.tolist(),
            'design_means': self.design_means.tolist(),
            'theta': [{'lag': i + 1, 'rows': list(self.response_labels),
                       'columns': list(self.response_labels), 'values': matrix.tolist()}
                      for i, matrix in enumerate(self.theta)],
            'beta': [{'lag': j + 1, 'rows': list(self.response_labels),
                      'columns': list(self.exogenous_labels), 'values': matrix.tolist()}
                     for j, matrix in enumerate(self.beta)],
            'seasonal': seasonal,
        }

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> 'VarxModel':
        """Return the model described by a record produced by to_dict."""
        if record.get('schema_version') != SCHEMA_VERSION:
            raise MissingModel(
                f'unsupported model schema version ({record.get("schema_version")})')
        k, m = len(record['response_labels']), len(record['exogenous_labels'])
        seasonal = None
        if record.get('seasonal') is not None:
            entry = record['seasonal']
            head = MultivariateSeries(
                tuple(entry['labels']),
                TimeIndex(parse_week(entry['start_week']), int(entry['period'])),
                np.array(entry['values'], dtype=np.float64))
            seasonal = SeasonalTransform(int(entry['period']), head)
        return cls(
            theta=np.array([block['values'] for block in record['theta']],
                           dtype=np.float64).reshape(int(record['p']), k, k),
            beta=np.array([block['values'] for block in record['beta']],
                          dtype=np.float64).reshape(int(record['s']), k, m),
            response_labels=tuple(record['response_labels']),
            exogenous_labels=tuple(record['exogenous_labels']),
            lam=float(record['lambda']),
            response_means=np.array(record['response_means'], dtype=np.float64),
            design_means=np.array(record['design_means'], dtype=np.float64),
            variant=Variant(record['variant']),
            seasonal=seasonal,
        )

    def save(self, path: Union[str, Path]) -> Path:
        """Write the model as JSON and return the path."""
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + '\n', encoding='utf-8')
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'VarxModel':
        """Read a model written by save. Raise a MissingModel if it is absent or corrupted."""
        path = Path(path)
        try:
            record = json.loads(path.read_text(encoding='utf-8'))
            return cls.from_dict(record)
        except MissingModel:
            raise
        except FileNotFoundError:
            raise MissingModel(f'no model file at {path}') from None
        except (OSError, ValueError, KeyError, TypeError, AttributeError) as e:
            raise MissingModel(f'corrupted model file {path}: {e}') from e
