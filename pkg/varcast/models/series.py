"""Weekly multivariate time series and their preprocessing transforms.

All types here are immutable: values are stored as read-only float64 arrays and every
operation returns a new object.
"""
import re
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterator, Optional, Sequence, Union

import numpy as np
import pandas as pd

from varcast.errors import (DuplicateError, IndexMismatch, MissingHistory,
                            NegativeCount, NoOverlap, NonFinite,
                            NonPositiveTotal, SeriesTooShort, ShapeMismatch)

_ISO_WEEK_PATTERN = re.compile(r'^(\d{4})-W(\d{2})$')
_ISO_DATE_PATTERN = re.compile(r'^\d{4}-\d{2}-\d{2}$')


def parse_week(text: str) -> date:
    """Return the Monday of the ISO week identified by text.

    text is either an ISO year-week (``2014-W05``) or a date (``2014-02-01``) inside the week,
    typically the week-ending Saturday. Raise a ValueError if text is neither.

    >>> parse_week('2014-W05')
    datetime.date(2014, 1, 27)
    >>> parse_week('2014-02-01')
    datetime.date(2014, 1, 27)
    """
    text = text.strip()
    if (match := _ISO_WEEK_PATTERN.match(text)) is not None:
        year, week = int(match.group(1)), int(match.group(2))
        try:
            return date.fromisocalendar(year, week, 1)
        except ValueError:
            raise ValueError(
                f'invalid week ("{text}"): {year} has no ISO week {week}') from None
    elif _ISO_DATE_PATTERN.match(text):
        try:
            day = date.fromisoformat(text)
        except ValueError:
            raise ValueError(f'invalid week ("{text}"): not a calendar date') from None
        return day - timedelta(days=day.weekday())
    raise ValueError(
        f'invalid week ("{text}"): expected yyyy-Www or yyyy-mm-dd')


@dataclass(frozen=True)
class TimeIndex:
    """A run of consecutive calendar weeks.

    Instance Attributes:
        start: The Monday of the first ISO week. Any date is accepted on construction and
            moved back to the Monday of its week.
        length: The number of weeks.
    """

    start: date
    length: int

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError(f'invalid index length ({self.length}): must be non-negative')
        monday = self.start - timedelta(days=self.start.weekday())
        object.__setattr__(self, 'start', monday)

    @classmethod
    def from_week(cls, week: str, length: int) -> 'TimeIndex':
        """Return an index of the given length starting at the week identified by week."""
        return cls(parse_week(week), length)

    @property
    def end(self) -> date:
        """Return the Monday of the week after the last week (exclusive end)."""
        return self.week(self.length)

    def week(self, t: int) -> date:
        """Return the Monday of week t (t may lie outside the index)."""
        return self.start + timedelta(weeks=t)

    def label(self, t: int) -> str:
        """Return the ISO year-week label of week t."""
        year, week, _ = self.week(t).isocalendar()
        return f'{year:04d}-W{week:02d}'

    def week_ending(self, t: int) -> date:
        """Return the Saturday ending week t (the convention of weekly claims releases)."""
        return self.week(t) + timedelta(days=5)

    def offset_of(self, day: date) -> int:
        """Return the offset t of the week containing day (may lie outside the index)."""
        monday = day - timedelta(days=day.weekday())
        return (monday - self.start).days // 7

    def sub(self, start: int, stop: int) -> 'TimeIndex':
        """Return the index of weeks start..stop-1."""
        if not 0 <= start <= stop <= self.length:
            raise IndexError(f'invalid window [{start}, {stop}) of an index of length {self.length}')
        return TimeIndex(self.week(start), stop - start)

    def shift(self, weeks: int) -> 'TimeIndex':
        """Return an index of the same length starting the given number of weeks later."""
        return TimeIndex(self.week(weeks), self.length)

    def labels(self) -> list[str]:
        """Return the ISO week labels of every week."""
        return [self.label(t) for t in range(self.length)]

    def __len__(self) -> int:
        return self.length

    def __iter__(self) -> Iterator[date]:
        return (self.week(t) for t in range(self.length))


@dataclass(frozen=True, eq=False)
class MultivariateSeries:
    """A labelled multivariate weekly series.

    Instance Attributes:
        labels: The series names, one per row.
        index: The shared weekly time index.
        values: A read-only matrix with one row per label and one column per week.
    """

    labels: tuple[str, ...]
    index: TimeIndex
    values: np.ndarray

    def __post_init__(self) -> None:
        labels = tuple(str(label) for label in self.labels)
        if len(set(labels)) != len(labels):
            duplicated = sorted({label for label in labels if labels.count(label) > 1})
            raise DuplicateError(f'duplicate series labels: {duplicated}')
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1 and len(labels) == 1:
            values = values.reshape(1, -1)
        if values.ndim != 2 or values.shape != (len(labels), self.index.length):
            raise ShapeMismatch(
                f'values of shape {values.shape} do not match {len(labels)} labels '
                f'and {self.index.length} weeks')
        if not np.all(np.isfinite(values)):
            raise NonFinite('series values must be finite')
        values.setflags(write=False)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'values', values)

    @property
    def n_series(self) -> int:
        """Return the number of series (rows)."""
        return len(self.labels)

    @property
    def n_weeks(self) -> int:
        """Return the number of weeks (columns)."""
        return self.index.length

    def row(self, label: str) -> np.ndarray:
        """Return the values of the series with the given label."""
        try:
            return self.values[self.labels.index(label)]
        except ValueError:
            raise KeyError(f'no series labelled "{label}"') from None

    def select(self, labels: Sequence[str]) -> 'MultivariateSeries':
        """Return the series restricted to (and ordered by) labels."""
        missing = [label for label in labels if label not in self.labels]
        if missing:
            raise IndexMismatch(f'series not present: {missing}')
        rows = [self.labels.index(label) for label in labels]
        return MultivariateSeries(tuple(labels), self.index, self.values[rows])

    def window(self, start: int, stop: int) -> 'MultivariateSeries':
        """Return weeks start..stop-1."""
        return MultivariateSeries(self.labels, self.index.sub(start, stop),
                                  self.values[:, start:stop])

    def concat(self, other: 'MultivariateSeries') -> 'MultivariateSeries':
        """Return this series followed in time by other.

        Raise an IndexMismatch if the labels differ or other does not start the week after
        this series ends.
        """
        if other.labels != self.labels:
            raise IndexMismatch('cannot concatenate series with different labels')
        if other.index.start != self.index.end:
            raise IndexMismatch(
                f'cannot concatenate: {other.index.label(0)} does not follow '
                f'{self.index.label(self.n_weeks - 1)}')
        return MultivariateSeries(self.labels, TimeIndex(self.index.start, self.n_weeks + other.n_weeks),
                                  np.hstack([self.values, other.values]))

    def relabel(self, labels: Sequence[str]) -> 'MultivariateSeries':
        """Return the same values under new labels."""
        return MultivariateSeries(tuple(labels), self.index, self.values)

    def with_values(self, values: np.ndarray) -> 'MultivariateSeries':
        """Return a series with the same labels and index holding values."""
        return MultivariateSeries(self.labels, self.index, values)

    def to_frame(self) -> pd.DataFrame:
        """Return a wide DataFrame with one column per series, indexed by week-ending date."""
        weeks = [self.index.week_ending(t).isoformat() for t in range(self.n_weeks)]
        return pd.DataFrame(self.values.T, index=pd.Index(weeks, name='week'),
                            columns=list(self.labels))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'MultivariateSeries':
        """Return the series held in a wide DataFrame as produced by to_frame.

        The index holds one week per row (any date in the week or an ISO week label) and
        must be contiguous.
        """
        if frame.empty:
            raise ShapeMismatch('cannot build a series from an empty frame')
        weeks = [parse_week(str(week)) for week in frame.index]
        index = TimeIndex(weeks[0], len(weeks))
        if list(index) != weeks:
            raise IndexMismatch('frame weeks are not contiguous and ascending')
        return cls(tuple(frame.columns), index, frame.to_numpy(dtype=np.float64).T)

    def to_long(self) -> pd.DataFrame:
        """Return a long DataFrame with columns week, series, value (series-major order)."""
        weeks = [self.index.week_ending(t).isoformat() for t in range(self.n_weeks)]
        return pd.DataFrame({
            'week': weeks * self.n_series,
            'series': np.repeat(self.labels, self.n_weeks),
            'value': self.values.ravel(),
        })

    def equals(self, other: 'MultivariateSeries') -> bool:
        """Return whether other has identical labels, index and values."""
        return (self.labels == other.labels and self.index == other.index
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class SeasonalTransform:
    """The information needed to undo a seasonal difference.

    Instance Attributes:
        period: The seasonal period in weeks.
        head: The first period weeks of the raw series.
    """

    period: int
    head: MultivariateSeries

    def __post_init__(self) -> None:
        if self.period < 1:
            raise ValueError(f'invalid seasonal period ({self.period}): must be at least 1')
        if self.head.n_weeks != self.period:
            raise ShapeMismatch(
                f'seasonal head has {self.head.n_weeks} weeks, expected {self.period}')


@dataclass(frozen=True)
class ThreeWaySplit:
    """A chronological train/validation/test partition of a series."""

    train: MultivariateSeries
    validation: MultivariateSeries
    test: MultivariateSeries

    @property
    def train_validation(self) -> MultivariateSeries:
        """Return the train and validation parts joined together."""
        return self.train.concat(self.validation)


def seasonal_difference(series: MultivariateSeries,
                        period: int = 52) -> tuple[MultivariateSeries, SeasonalTransform]:
    """Return the seasonal difference of series and the transform needed to invert it.

    Column t of the output is ``series[t + period] - series[t]``; the output index starts
    period weeks after the input index.

    >>> s = MultivariateSeries(('a',), TimeIndex.from_week('2014-W01', 4), [[1, 2, 4, 7]])
    >>> seasonal_difference(s, 2)[0].values.tolist()
    [[3.0, 5.0]]
    """
    if period < 1:
        raise ValueError(f'invalid seasonal period ({period}): must be at least 1')
    if series.n_weeks <= period:
        raise SeriesTooShort(
            f'cannot seasonally difference {series.n_weeks} weeks with period {period}')
    diff = series.values[:, period:] - series.values[:, :-period]
    differenced = MultivariateSeries(
        series.labels, TimeIndex(series.index.week(period), series.n_weeks - period), diff)
    return differenced, SeasonalTransform(period, series.window(0, period))


def _raw_column(raw: MultivariateSeries, week: date, labels: tuple[str, ...]) -> Optional[np.ndarray]:
    """Return the column of raw for the week starting on week, or None if it is outside raw."""
    t = raw.index.offset_of(week)
    if not 0 <= t < raw.n_weeks:
        return None
    if raw.labels != labels:
        raw = raw.select(labels)
    return raw.values[:, t]


def invert_seasonal_difference(diff_value: Union[Sequence[float], np.ndarray],
                               target_week_offset: int,
                               transform: SeasonalTransform,
                               observed_raw: Optional[MultivariateSeries] = None) -> np.ndarray:
    """Return the raw-scale value of a seasonally differenced vector.

    target_week_offset counts weeks from the first raw week (the first week of
    ``transform.head``). The lagged raw value one period earlier is looked up in
    observed_raw, falling back to the head kept by the transform.

    Raise a MissingHistory if neither holds the lagged week.
    """
    head = transform.head
    diff_value = np.asarray(diff_value, dtype=np.float64).reshape(-1)
    if diff_value.shape[0] != head.n_series:
        raise ShapeMismatch(
            f'difference vector has {diff_value.shape[0]} entries, expected {head.n_series}')
    lag_week = head.index.week(target_week_offset - transform.period)
    for source in (observed_raw, head):
        if source is None:
            continue
        column = _raw_column(source, lag_week, head.labels)
        if column is not None:
            return diff_value + column
    raise MissingHistory(
        f'no raw value for week {lag_week.isoformat()} '
        f'(offset {target_week_offset - transform.period})')


def invert_seasonal_series(differenced: MultivariateSeries, transform: SeasonalTransform,
                           observed_raw: Optional[MultivariateSeries] = None) -> MultivariateSeries:
    """Return every week of a differenced series on the raw scale."""
    head = transform.head
    base = head.index.offset_of(differenced.index.start)
    columns = [invert_seasonal_difference(differenced.values[:, t], base + t, transform, observed_raw)
               for t in range(differenced.n_weeks)]
    values = np.column_stack(columns) if columns else np.zeros((differenced.n_series, 0))
    return MultivariateSeries(differenced.labels, differenced.index, values)


def log_ratio_normalize(counts: MultivariateSeries, totals: MultivariateSeries,
                        epsilon: float = 0.5) -> MultivariateSeries:
    """Return ``ln((counts + epsilon) / totals)`` computed week by week.

    totals is a single series shared by every row of counts.
    """
    if epsilon <= 0:
        raise ValueError(f'invalid epsilon ({epsilon}): must be positive')
    if totals.n_series != 1:
        raise IndexMismatch(f'totals must be a single series, got {totals.n_series}')
    if totals.index != counts.index:
        raise IndexMismatch('counts and totals do not share a time index')
    if np.any(totals.values <= 0):
        raise NonPositiveTotal(
            f'totals must be strictly positive (week {totals.index.label(int(np.argmin(totals.values)))})')
    if np.any(counts.values < 0):
        raise NegativeCount('counts must be non-negative')
    return counts.with_values(np.log((counts.values + epsilon) / totals.values))


def split_thirds(series: MultivariateSeries) -> ThreeWaySplit:
    """Split series chronologically into thirds; the test part takes the remainder."""
    if series.n_weeks < 3:
        raise SeriesTooShort(f'cannot split {series.n_weeks} weeks into thirds')
    third = series.n_weeks // 3
    return ThreeWaySplit(
        train=series.window(0, third),
        validation=series.window(third, 2 * third),
        test=series.window(2 * third, series.n_weeks),
    )


def align(a: MultivariateSeries,
          b: MultivariateSeries) -> tuple[MultivariateSeries, MultivariateSeries]:
    """Restrict a and b to the weeks they have in common."""
    start = max(a.index.start, b.index.start)
    end = min(a.index.end, b.index.end)
    if start >= end:
        raise NoOverlap('series have no week in common')

    def restrict(series: MultivariateSeries) -> MultivariateSeries:
        first = series.index.offset_of(start)
        last = series.index.offset_of(end)
        return series.window(first, last)

    return restrict(a), restrict(b)
