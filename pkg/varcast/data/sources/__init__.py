'A module containing dataset sources.'
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
import pandas as pd

from varcast.errors import DuplicateError, GapError, ParseError
from varcast.models.series import MultivariateSeries, TimeIndex, parse_week

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CsvSchema:
    """The column names of a long-format weekly CSV file.

    Instance Attributes:
        week: The column holding the ISO week (yyyy-Www) or a date inside the week.
        series: The column holding the series identifier.
        value: The column holding the observed value.
    """

    week: str = 'week'
    series: str = 'series'
    value: str = 'value'

    @property
    def columns(self) -> list[str]:
        """Return the column names in file order."""
        return [self.week, self.series, self.value]


DEFAULT_SCHEMA = CsvSchema()


class DatasetSource(ABC):
    """An abstract class representing a dataset source."""

    @abstractmethod
    def load(self) -> MultivariateSeries:
        """Read the source and return its contents as a labelled weekly series."""
        raise NotImplementedError


class WeeklyCsvSource(DatasetSource):
    """A dataset source backed by a long-format weekly CSV file on disk.

    Instance Attributes:
        path: The path of the CSV file.
        schema: The column names used by the file.
    """

    path: Path
    schema: CsvSchema

    def __init__(self, path: Union[str, Path], schema: CsvSchema = DEFAULT_SCHEMA) -> None:
        """Initialise a WeeklyCsvSource.

        Args:
            path: The path of the CSV file.
            schema: The column names used by the file. Defaults to week, series, value.
        """
        self.path = Path(path)
        self.schema = schema

    def load(self) -> MultivariateSeries:
        """Parse the CSV file. Raise a FileNotFoundError if it does not exist."""
        if not self.path.is_file():
            raise FileNotFoundError(f'no such file: {self.path}')
        with self.path.open('rb') as stream:
            series = parse_weekly_csv(stream, self.schema)
        logger.info('loaded %d series x %d weeks from %s',
                    series.n_series, series.n_weeks, self.path)
        return series


def parse_weekly_csv(source: BinaryIO, schema: CsvSchema = DEFAULT_SCHEMA) -> MultivariateSeries:
    """Parse a long-format weekly CSV stream into a labelled series.

    Every series must cover the same consecutive run of weeks, from the earliest to the
    latest week in the file. Series keep the order of their first appearance.

    Args:
        source: A binary stream of UTF-8 CSV text with a header row.
        schema: The column names to read.
    """
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, encoding='utf-8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(f'malformed CSV: {e}') from e

    missing = [column for column in schema.columns if column not in frame.columns]
    if missing:
        raise ParseError(f'CSV header is missing columns {missing}')
    if frame.empty:
        raise ParseError('CSV has no data rows')
    # Short rows are padded with NaN by pandas
    frame = frame.fillna('')

    observations: dict[str, dict[date, float]] = {}
    # Line 1 is the header
    for line, (week_text, label, value_text) in enumerate(
            frame[schema.columns].itertuples(index=False, name=None), start=2):
        try:
            week = parse_week(week_text)
        except ValueError as e:
            raise ParseError(f'line {line}: {e}') from None
        label = label.strip()
        if not label:
            raise ParseError(f'line {line}: empty series identifier')
        try:
            value = float(value_text)
        except ValueError:
            raise ParseError(f'line {line}: invalid value ("{value_text}")') from None
        if not math.isfinite(value):
            raise ParseError(f'line {line}: value must be finite, not {value_text}')

        weeks = observations.setdefault(label, {})
        if week in weeks:
            raise DuplicateError(f'line {line}: duplicate week {week.isoformat()} for "{label}"')
        weeks[week] = value

    first = min(min(weeks) for weeks in observations.values())
    last = max(max(weeks) for weeks in observations.values())
    index = TimeIndex(first, (last - first).days // 7 + 1)
    values = np.empty((len(observations), index.length))
    for i, (label, weeks) in enumerate(observations.items()):
        for t, week in enumerate(index):
            if week not in weeks:
                raise GapError(f'series "{label}" is missing week {index.label(t)}')
            values[i, t] = weeks[week]
    return MultivariateSeries(tuple(observations), index, values)


def write_weekly_csv(series: MultivariateSeries, path: Union[str, Path],
                     schema: CsvSchema = DEFAULT_SCHEMA) -> Path:
    """Write series as a long-format CSV with week-ending dates and return the path."""
    frame = series.to_long()
    frame.columns = schema.columns
    path = Path(path)
    frame.to_csv(path, index=False, float_format='%.17g')
    return path
