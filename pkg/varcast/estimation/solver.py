"""Accelerated proximal gradient (FISTA) for the l1-penalized multivariate least squares.

The objective is ``(1 / (2N)) * ||response - design @ B||_F^2 + lambda * ||B||_1`` with the
l1 norm taken entrywise over the stacked coefficients, so one penalty is shared by the
response-lag and exogenous-lag blocks.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from varcast.errors import BadGrid, NonFinite, ShapeMismatch
from varcast.estimation.design import EXOGENOUS, LassoProblem

logger = logging.getLogger(__name__)


class StepRule(Enum):
    """How the gradient step size is chosen."""

    FIXED = 'fixed'
    BACKTRACKING = 'backtracking'


@dataclass(frozen=True)
class SolverSettings:
    """Settings for the FISTA solver.

    Instance Attributes:
        tol: The relative objective change below which iterations stop (once the KKT
            certificate also holds).
        max_iter: The iteration cap.
        step: The step rule. FIXED uses 1/L with L the largest eigenvalue of (1/N) ZᵀZ,
            found by power iteration; BACKTRACKING searches for L each iteration.
        monotone: Whether to keep the objective non-increasing by rejecting uphill steps
            and restarting the momentum.
        kkt_tol: The relative tolerance of the KKT certificate.
        power_tol: The relative tolerance of the power iteration.
        power_max_iter: The iteration cap of the power iteration.
        exogenous_penalty_factor: A multiplier on lambda for exogenous coefficients. The
            default of 1 applies one shared lambda to every coefficient.
    """

    tol: float = 1e-7
    max_iter: int = 10000
    step: StepRule = StepRule.FIXED
    monotone: bool = True
    kkt_tol: float = 1e-3
    power_tol: float = 1e-10
    power_max_iter: int = 1000
    exogenous_penalty_factor: float = 1.0

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError(f'invalid tolerance ({self.tol}): must be positive')
        if self.max_iter < 1:
            raise ValueError(f'invalid iteration cap ({self.max_iter}): must be at least 1')
        if not self.exogenous_penalty_factor > 0:
            raise ValueError('exogenous penalty factor must be positive')


@dataclass(frozen=True, eq=False)
class SolverResult:
    """The outcome of one penalized fit.

    Instance Attributes:
        coefficients: The stacked (k*p + m*s) x k coefficient matrix.
        objective_trace: The objective value after every iteration.
        iterations: The number of iterations run.
        converged: Whether the stopping rule and the KKT certificate were both met.
        lam: The penalty the fit was run at.
    """

    coefficients: np.ndarray
    objective_trace: tuple[float, ...]
    iterations: int
    converged: bool
    lam: float

    @property
    def nonzero_count(self) -> int:
        """Return the number of nonzero coefficients."""
        return int(np.count_nonzero(self.coefficients))


def soft_threshold(x: Union[float, np.ndarray], tau: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Return ``sign(x) * max(|x| - tau, 0)``, the proximal operator of tau * |x|.

    >>> soft_threshold(3.0, 1.0)
    2.0
    >>> soft_threshold(-0.5, 1.0)
    0.0
    """
    if np.any(np.asarray(tau) < 0):
        raise ValueError(f'invalid threshold ({tau}): must be non-negative')
    shrunk = np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    # Drop the sign of zero so that -0.0 never leaks into results
    shrunk = shrunk + 0.0
    if np.ndim(shrunk) == 0:
        return float(shrunk)
    return shrunk


def _penalty_weights(problem: LassoProblem, settings: Optional[SolverSettings]) -> np.ndarray:
    """Return the per-row penalty multipliers of the stacked coefficients as a column."""
    weights = np.ones((problem.n_columns, 1))
    if settings is not None and settings.exogenous_penalty_factor != 1.0:
        weights[problem.columns_of(EXOGENOUS)] = settings.exogenous_penalty_factor
    return weights


def _check_shape(problem: LassoProblem, coefficients: np.ndarray) -> np.ndarray:
    coefficients = np.asarray(coefficients, dtype=np.float64)
    expected = (problem.n_columns, problem.response.shape[1])
    if coefficients.shape != expected:
        raise ShapeMismatch(f'coefficients of shape {coefficients.shape}, expected {expected}')
    return coefficients


def _smooth(problem: LassoProblem, coefficients: np.ndarray) -> float:
    residual = problem.response - problem.design @ coefficients
    return float(np.sum(residual * residual)) / (2.0 * problem.n_rows)


def objective(problem: LassoProblem, coefficients: np.ndarray, lam: float,
              settings: Optional[SolverSettings] = None) -> float:
    """Return the penalized objective at the stacked coefficient matrix."""
    if lam < 0:
        raise ValueError(f'invalid penalty ({lam}): must be non-negative')
    coefficients = _check_shape(problem, coefficients)
    weights = _penalty_weights(problem, settings)
    return _smooth(problem, coefficients) + lam * float(np.sum(weights * np.abs(coefficients)))


def smooth_gradient(problem: LassoProblem, coefficients: np.ndarray) -> np.ndarray:
    """Return the gradient of the least-squares term, ``(1/N) Zᵀ(ZB - response)``."""
    coefficients = _check_shape(problem, coefficients)
    residual = problem.design @ coefficients - problem.response
    return problem.design.T @ residual / problem.n_rows


def lambda_max(problem: LassoProblem, settings: Optional[SolverSettings] = None) -> float:
    """Return the smallest penalty at which the all-zero matrix is optimal."""
    correlation = problem.design.T @ problem.response / problem.n_rows
    weights = _penalty_weights(problem, settings)
    return float(np.max(np.abs(correlation) / weights))


def kkt_satisfied(problem: LassoProblem, coefficients: np.ndarray, lam: float,
                  tol: float = 1e-3, settings: Optional[SolverSettings] = None) -> bool:
    """Return whether coefficients satisfy the lasso optimality conditions.

    Zero entries need ``|g| <= lam * (1 + tol)``; nonzero entries need
    ``|g + lam * sign(B)| <= lam * tol + 1e-8``, where g is the smooth gradient.
    """
    gradient = smooth_gradient(problem, coefficients)
    penalty = lam * _penalty_weights(problem, settings)
    penalty = np.broadcast_to(penalty, gradient.shape)
    zero = coefficients == 0
    zero_ok = np.abs(gradient[zero]) <= penalty[zero] * (1 + tol)
    nonzero = ~zero
    stationary = gradient[nonzero] + penalty[nonzero] * np.sign(coefficients[nonzero])
    nonzero_ok = np.abs(stationary) <= penalty[nonzero] * tol + 1e-8
    return bool(np.all(zero_ok) and np.all(nonzero_ok))


def lipschitz_constant(problem: LassoProblem, tol: float = 1e-10,
                       max_iter: int = 1000) -> tuple[float, bool]:
    """Return the largest eigenvalue of (1/N) ZᵀZ by power iteration, and whether it converged."""
    gram = problem.design.T @ problem.design / problem.n_rows
    vector = np.full(gram.shape[0], 1.0 / math.sqrt(gram.shape[0]))
    estimate = 0.0
    for _ in range(max_iter):
        product = gram @ vector
        norm = float(np.linalg.norm(product))
        if norm == 0.0:
            return 0.0, True
        vector = product / norm
        if abs(norm - estimate) <= tol * norm:
            return norm, True
        estimate = norm
    return estimate, False


def fit(problem: LassoProblem, lam: float, settings: Optional[SolverSettings] = None,
        warm_start: Optional[np.ndarray] = None) -> SolverResult:
    """Minimize the penalized objective at one penalty by FISTA.

    Args:
        problem: The stacked regression problem.
        lam: The penalty (non-negative).
        settings: Solver settings. Defaults to SolverSettings().
        warm_start: An optional starting coefficient matrix.
    """
    settings = settings or SolverSettings()
    if lam < 0:
        raise ValueError(f'invalid penalty ({lam}): must be non-negative')
    n_rows = problem.n_rows
    shape = (problem.n_columns, problem.response.shape[1])
    current = np.zeros(shape) if warm_start is None else _check_shape(problem, warm_start).copy()

    gram = problem.design.T @ problem.design / n_rows
    correlation = problem.design.T @ problem.response / n_rows
    penalty = lam * _penalty_weights(problem, settings)

    step_rule = settings.step
    lipschitz = 1.0
    if step_rule is StepRule.FIXED:
        lipschitz, found = lipschitz_constant(problem, settings.power_tol, settings.power_max_iter)
        if not found:
            logger.info('power iteration did not converge; using backtracking')
            step_rule = StepRule.BACKTRACKING
            lipschitz = 1.0
        elif lipschitz == 0.0:
            # A zero design leaves nothing to fit
            return SolverResult(np.zeros(shape), (objective(problem, np.zeros(shape), lam, settings),),
                                1, True, lam)

    def penalized(coefficients: np.ndarray) -> float:
        value = _smooth(problem, coefficients) + float(np.sum(penalty * np.abs(coefficients)))
        if not math.isfinite(value):
            raise NonFinite(f'objective diverged at lambda={lam}')
        return value

    current_value = penalized(current)
    previous = current
    momentum = 1.0
    search = current
    trace: list[float] = []
    converged = False
    for _ in range(settings.max_iter):
        gradient = gram @ search - correlation
        if step_rule is StepRule.FIXED:
            candidate = soft_threshold(search - gradient / lipschitz, penalty / lipschitz)
        else:
            smooth_search = _smooth(problem, search)
            while True:
                candidate = soft_threshold(search - gradient / lipschitz, penalty / lipschitz)
                delta = candidate - search
                bound = (smooth_search + float(np.sum(gradient * delta))
                         + 0.5 * lipschitz * float(np.sum(delta * delta)))
                if _smooth(problem, candidate) <= bound * (1 + 1e-12) + 1e-300:
                    break
                lipschitz *= 2.0
                if not math.isfinite(lipschitz):
                    raise NonFinite(f'backtracking diverged at lambda={lam}')
        candidate_value = penalized(candidate)

        next_momentum = (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0
        # Tolerate increases at the rounding level
        if settings.monotone and candidate_value > current_value + 1e-14 * abs(current_value):
            accepted, accepted_value = current, current_value
        else:
            accepted, accepted_value = candidate, candidate_value
        previous, current = current, accepted
        search = (current + (momentum / next_momentum) * (candidate - current)
                  + ((momentum - 1.0) / next_momentum) * (current - previous))
        momentum = next_momentum

        change = abs(current_value - accepted_value)
        scale = max(abs(current_value), abs(accepted_value))
        current_value = accepted_value
        trace.append(current_value)
        if change <= settings.tol * scale:
            if kkt_satisfied(problem, current, lam, settings.kkt_tol, settings):
                converged = True
                break
            # Stalled short of optimality: restart the momentum from the current point
            momentum = 1.0
            search = current

    if not np.all(np.isfinite(current)):
        raise NonFinite(f'coefficients diverged at lambda={lam}')
    if not converged:
        logger.warning('solver did not converge at lambda=%.6g after %d iterations',
                       lam, len(trace))
    return SolverResult(current, tuple(trace), len(trace), converged, lam)


def _check_grid(grid: Sequence[float]) -> list[float]:
    grid = [float(value) for value in grid]
    if not grid:
        raise BadGrid('penalty grid is empty')
    if any(not math.isfinite(value) or value < 0 for value in grid):
        raise BadGrid(f'penalty grid must be finite and non-negative: {grid}')
    if any(later >= earlier for earlier, later in zip(grid, grid[1:])):
        raise BadGrid('penalty grid must be strictly descending')
    return grid


def fit_path(problem: LassoProblem, grid: Sequence[float],
             settings: Optional[SolverSettings] = None) -> list[SolverResult]:
    """Fit every penalty in a strictly descending grid, warm-starting each from the last."""
    grid = _check_grid(grid)
    results = []
    warm_start = None
    for lam in grid:
        result = fit(problem, lam, settings, warm_start)
        results.append(result)
        warm_start = result.coefficients
    return results


def lambda_grid(problem: LassoProblem, count: int = 20, ratio: float = 0.01,
                settings: Optional[SolverSettings] = None) -> list[float]:
    """Return count log-spaced penalties from lambda_max down to ratio * lambda_max.

    When lambda_max is zero the all-zero fit is optimal at every penalty and the grid is [0.0].
    """
    if count < 2:
        raise BadGrid(f'invalid grid size ({count}): must be at least 2')
    if not 0 < ratio < 1:
        raise BadGrid(f'invalid grid ratio ({ratio}): must lie in (0, 1)')
    top = lambda_max(problem, settings)
    if top <= 0:
        logger.warning('lambda_max is zero: no column explains the response, using the grid [0.0]')
        return [0.0]
    grid = np.geomspace(top, ratio * top, count)
    grid[0], grid[-1] = top, ratio * top
    return [float(value) for value in grid]
