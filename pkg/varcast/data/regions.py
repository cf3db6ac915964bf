"""Census-region aggregation of state-level series and the regional exogenous signals."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Union

import numpy as np
import pandas as pd

from varcast.errors import (ConfigError, DuplicateError, EmptyRegion,
                            IndexMismatch, ParseError, UnknownState)
from varcast.models.common import REGIONS, query_label, url_label
from varcast.models.series import MultivariateSeries, log_ratio_normalize

logger = logging.getLogger(__name__)

# Standard U.S. Census Bureau division of each state (and DC), by postal code.
_DIVISIONS: dict[str, tuple[tuple[str, str], ...]] = {
    'New England': (
        ('CT', 'Connecticut'), ('ME', 'Maine'), ('MA', 'Massachusetts'),
        ('NH', 'New Hampshire'), ('RI', 'Rhode Island'), ('VT', 'Vermont')),
    'Mid-Atlantic': (
        ('NJ', 'New Jersey'), ('NY', 'New York'), ('PA', 'Pennsylvania')),
    'East North Central': (
        ('IL', 'Illinois'), ('IN', 'Indiana'), ('MI', 'Michigan'), ('OH', 'Ohio'),
        ('WI', 'Wisconsin')),
    'West North Central': (
        ('IA', 'Iowa'), ('KS', 'Kansas'), ('MN', 'Minnesota'), ('MO', 'Missouri'),
        ('NE', 'Nebraska'), ('ND', 'North Dakota'), ('SD', 'South Dakota')),
    'South Atlantic': (
        ('DE', 'Delaware'), ('DC', 'District of Columbia'), ('FL', 'Florida'),
        ('GA', 'Georgia'), ('MD', 'Maryland'), ('NC', 'North Carolina'),
        ('SC', 'South Carolina'), ('VA', 'Virginia'), ('WV', 'West Virginia')),
    'East South Central': (
        ('AL', 'Alabama'), ('KY', 'Kentucky'), ('MS', 'Mississippi'), ('TN', 'Tennessee')),
    'West South Central': (
        ('AR', 'Arkansas'), ('LA', 'Louisiana'), ('OK', 'Oklahoma'), ('TX', 'Texas')),
    'Mountain': (
        ('AZ', 'Arizona'), ('CO', 'Colorado'), ('ID', 'Idaho'), ('MT', 'Montana'),
        ('NV', 'Nevada'), ('NM', 'New Mexico'), ('UT', 'Utah'), ('WY', 'Wyoming')),
    'Pacific': (
        ('AK', 'Alaska'), ('CA', 'California'), ('HI', 'Hawaii'), ('OR', 'Oregon'),
        ('WA', 'Washington')),
}


@dataclass(frozen=True)
class RegionMap:
    """An assignment of states to the nine census regions.

    Instance Attributes:
        mapping: A read-only mapping from state identifier to region name. Every region
            in the canonical order must receive at least one state.
    """

    mapping: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        unknown = sorted({region for region in self.mapping.values() if region not in REGIONS})
        if unknown:
            raise ConfigError(f'unknown region names: {unknown}')
        empty = [region for region in REGIONS if region not in set(self.mapping.values())]
        if empty:
            raise ConfigError(f'region map assigns no state to {empty}')
        object.__setattr__(self, 'mapping', MappingProxyType(dict(self.mapping)))

    @classmethod
    def default(cls) -> 'RegionMap':
        """Return the standard Census division map, keyed by postal code and by state name."""
        mapping = {}
        for region, states in _DIVISIONS.items():
            for code, name in states:
                mapping[code] = region
                mapping[name] = region
        return cls(mapping)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> 'RegionMap':
        """Read a two-column ``state,region`` CSV file."""
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ParseError(f'malformed region map {path}: {e}') from e
        if list(frame.columns) != ['state', 'region']:
            raise ParseError(f'region map {path} must have the header "state,region"')
        mapping: dict[str, str] = {}
        for state, region in frame.itertuples(index=False, name=None):
            state = state.strip()
            if state in mapping:
                raise DuplicateError(f'state "{state}" appears twice in {path}')
            mapping[state] = region.strip()
        return cls(mapping)

    def to_frame(self) -> pd.DataFrame:
        """Return the map as a two-column DataFrame."""
        return pd.DataFrame(sorted(self.mapping.items()), columns=['state', 'region'])

    def region_of(self, label: str) -> str:
        """Return the region of a state label. Region names map to themselves."""
        if label in REGIONS:
            return label
        try:
            return self.mapping[label]
        except KeyError:
            raise UnknownState(f'state "{label}" is not in the region map') from None

    def group(self, labels: tuple[str, ...]) -> dict[str, list[int]]:
        """Return the row positions of labels belonging to each region, in canonical order."""
        groups: dict[str, list[int]] = {region: [] for region in REGIONS}
        for i, label in enumerate(labels):
            groups[self.region_of(label)].append(i)
        return groups


def aggregate_to_regions(states: MultivariateSeries, region_map: RegionMap) -> MultivariateSeries:
    """Return the nine regional totals of state-level counts, in canonical region order."""
    groups = region_map.group(states.labels)
    values = np.zeros((len(REGIONS), states.n_weeks))
    for r, (region, rows) in enumerate(groups.items()):
        if not rows:
            logger.warning('no state series for region %s; its total is zero', region)
            continue
        values[r] = states.values[rows].sum(axis=0)
    return MultivariateSeries(REGIONS, states.index, values)


def _regional_means(series: MultivariateSeries, region_map: RegionMap,
                    kind: str) -> MultivariateSeries:
    groups = region_map.group(series.labels)
    values = np.empty((len(REGIONS), series.n_weeks))
    for r, (region, rows) in enumerate(groups.items()):
        if not rows:
            raise EmptyRegion(f'no {kind} series for region {region}')
        values[r] = series.values[rows].mean(axis=0)
    return MultivariateSeries(REGIONS, series.index, values)


def build_exogenous(query_volumes: MultivariateSeries, url_clicks: MultivariateSeries,
                    search_totals: MultivariateSeries, region_map: RegionMap,
                    epsilon: float = 0.5) -> MultivariateSeries:
    """Return the 18 regional exogenous series.

    Rows are the nine region-average query volumes followed by the nine region-average URL
    click counts, each in canonical region order and each log-ratio normalized by the weekly
    search total of its region. Labels are ``<region>:query`` and ``<region>:url``.

    Args:
        query_volumes: State-level (or region-level) query volume counts.
        url_clicks: State-level (or region-level) URL click counts.
        search_totals: The weekly total number of searches, one row per region.
        region_map: The state to region assignment.
        epsilon: The count offset applied before taking logs.
    """
    if not (query_volumes.index == url_clicks.index == search_totals.index):
        raise IndexMismatch('query, click and total series do not share a time index')
    missing = [region for region in REGIONS if region not in search_totals.labels]
    if missing:
        raise IndexMismatch(f'search totals are missing regions {missing}')

    queries = _regional_means(query_volumes, region_map, 'query')
    clicks = _regional_means(url_clicks, region_map, 'URL click')
    rows = []
    for source in (queries, clicks):
        for region in REGIONS:
            total = search_totals.select([region])
            rows.append(log_ratio_normalize(source.select([region]), total, epsilon).values[0])
    labels = tuple(query_label(region) for region in REGIONS) + \
        tuple(url_label(region) for region in REGIONS)
    return MultivariateSeries(labels, query_volumes.index, np.vstack(rows))
