"""Stacking of lagged responses and exogenous inputs into a penalized regression problem.

Row t of the design holds ``[Y[t-1], ..., Y[t-p], X[t-1], ..., X[t-s]]`` flattened in that
order (response lags first, then exogenous lags, each most recent first), and row t of the
response holds ``Y[t]``, for t from max(p, s) to T - 1.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from varcast.errors import BadLag, NotAligned, ShapeMismatch, TooFewRows
from varcast.models.series import MultivariateSeries, TimeIndex

RESPONSE = 'response'
EXOGENOUS = 'exogenous'


@dataclass(frozen=True)
class ColumnBlock:
    """A contiguous range of design columns holding one lag of one source.

    Instance Attributes:
        source: Either 'response' or 'exogenous'.
        lag: The lag in weeks (1 is the most recent week).
        start: The first column of the block.
        stop: One past the last column of the block.
        labels: The series labels, one per column.
    """

    source: str
    lag: int
    start: int
    stop: int
    labels: tuple[str, ...]

    @property
    def width(self) -> int:
        """Return the number of columns in this block."""
        return self.stop - self.start


@dataclass(frozen=True, eq=False)
class LassoProblem:
    """The stacked least-squares problem for a VAR-X model.

    Instance Attributes:
        design: The N x (k*p + m*s) design matrix (centered and scaled if requested).
        response: The N x k response matrix (centered if requested).
        blocks: The column blocks tiling the design columns.
        p: The response lag order.
        s: The exogenous lag order.
        response_labels: The k response labels.
        exogenous_labels: The m exogenous labels (empty for a pure VAR).
        design_means: The column means subtracted from the design (zeros if not centered).
        response_means: The column means subtracted from the response (zeros if not centered).
        design_scales: The column scales dividing the design (ones if not standardized).
        index: The weeks of the response rows.
    """

    design: np.ndarray
    response: np.ndarray
    blocks: tuple[ColumnBlock, ...]
    p: int
    s: int
    response_labels: tuple[str, ...]
    exogenous_labels: tuple[str, ...]
    design_means: np.ndarray
    response_means: np.ndarray
    design_scales: np.ndarray
    index: TimeIndex

    def __post_init__(self) -> None:
        for name in ('design', 'response', 'design_means', 'response_means', 'design_scales'):
            array = np.array(getattr(self, name), dtype=np.float64, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def n_rows(self) -> int:
        """Return N, the number of stacked weeks."""
        return self.design.shape[0]

    @property
    def n_columns(self) -> int:
        """Return the number of design columns."""
        return self.design.shape[1]

    def column_info(self, column: int) -> tuple[str, int, int]:
        """Return (source, lag, series index) of a design column."""
        for block in self.blocks:
            if block.start <= column < block.stop:
                return block.source, block.lag, column - block.start
        raise IndexError(f'column {column} is outside the design ({self.n_columns} columns)')

    def columns_of(self, source: str) -> list[int]:
        """Return the design columns fed by the given source."""
        return [j for block in self.blocks if block.source == source
                for j in range(block.start, block.stop)]


def build_design(y: MultivariateSeries, x: Optional[MultivariateSeries] = None,
                 p: int = 2, s: int = 1, center: bool = True,
                 standardize: bool = False) -> LassoProblem:
    """Return the stacked regression problem for a VAR-X(p, s) model.

    Args:
        y: The response series (k rows).
        x: The exogenous series (m rows), or None for a pure VAR model.
        p: The number of response lags (at least 1).
        s: The number of exogenous lags (at least 1 with x, exactly 0 without).
        center: Whether to subtract column means from the design and response.
        standardize: Whether to divide design columns by their standard deviation.
    """
    if p < 1:
        raise BadLag(f'invalid response lag order ({p}): must be at least 1')
    if x is None and s != 0:
        raise BadLag(f'exogenous lag order must be 0 without exogenous series, not {s}')
    if x is not None:
        if s < 1:
            raise BadLag(f'invalid exogenous lag order ({s}): must be at least 1')
        if x.index != y.index:
            raise NotAligned('response and exogenous series do not share a time index')

    n_weeks = y.n_weeks
    first = max(p, s)
    if n_weeks - first < 1:
        raise TooFewRows(f'{n_weeks} weeks leave no rows after {first} lags')

    columns = []
    blocks = []
    start = 0
    sources = [(RESPONSE, y, p)] + ([(EXOGENOUS, x, s)] if x is not None else [])
    for source, series, order in sources:
        for lag in range(1, order + 1):
            columns.append(series.values[:, first - lag:n_weeks - lag].T)
            blocks.append(ColumnBlock(source, lag, start, start + series.n_series, series.labels))
            start += series.n_series
    design = np.hstack(columns)
    response = y.values[:, first:].T

    n_columns = design.shape[1]
    design_means = design.mean(axis=0) if center else np.zeros(n_columns)
    response_means = response.mean(axis=0) if center else np.zeros(y.n_series)
    design_scales = np.ones(n_columns)
    if standardize:
        design_scales = design.std(axis=0)
        design_scales[design_scales == 0] = 1.0

    return LassoProblem(
        design=(design - design_means) / design_scales,
        response=response - response_means,
        blocks=tuple(blocks),
        p=p,
        s=s,
        response_labels=y.labels,
        exogenous_labels=x.labels if x is not None else (),
        design_means=design_means,
        response_means=response_means,
        design_scales=design_scales,
        index=y.index.sub(first, n_weeks),
    )


def unstack(coefficients: np.ndarray, blocks: tuple[ColumnBlock, ...],
            k: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a stacked (k*p + m*s) x k coefficient matrix into Θ and β.

    Return theta of shape (p, k, k) and beta of shape (s, k, m), where ``theta[i - 1]``
    multiplies ``Y[t - i]`` and ``beta[j - 1]`` multiplies ``X[t - j]``.
    """
    coefficients = np.asarray(coefficients, dtype=np.float64)
    n_columns = sum(block.width for block in blocks)
    if coefficients.shape != (n_columns, k):
        raise ShapeMismatch(
            f'coefficients of shape {coefficients.shape} do not match ({n_columns}, {k})')
    theta = [coefficients[b.start:b.stop].T for b in blocks if b.source == RESPONSE]
    beta = [coefficients[b.start:b.stop].T for b in blocks if b.source == EXOGENOUS]
    m = beta[0].shape[1] if beta else 0
    return (np.array(theta).reshape(len(theta), k, k),
            np.array(beta).reshape(len(beta), k, m))


def restack(theta: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Return the stacked coefficient matrix of theta (p, k, k) and beta (s, k, m)."""
    parts = [matrix.T for matrix in theta] + [matrix.T for matrix in beta]
    return np.vstack(parts)
