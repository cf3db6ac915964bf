"""Common models."""
from enum import Enum
from typing import Sequence

# Census divisions in the order used for every report and heatmap.
REGIONS: tuple[str, ...] = (
    'Mid-Atlantic',
    'New England',
    'East North Central',
    'West North Central',
    'West South Central',
    'East South Central',
    'Mountain',
    'Pacific',
    'South Atlantic',
)

QUERY_SUFFIX = ':query'
URL_SUFFIX = ':url'


def query_label(region: str) -> str:
    """Return the exogenous label of the query series for region."""
    return f'{region}{QUERY_SUFFIX}'


def url_label(region: str) -> str:
    """Return the exogenous label of the URL click series for region."""
    return f'{region}{URL_SUFFIX}'


def canonical_order(labels: Sequence[str]) -> list[int]:
    """Return the permutation that sorts labels into canonical region order.

    Labels that are regions (or region-prefixed exogenous labels) sort by region, query rows
    before URL rows within the same region position. If any label is not region-based, the
    identity permutation is returned.
    """
    def key(label: str) -> tuple[int, int]:
        region, _, kind = label.partition(':')
        return ({'': 0, 'query': 0, 'url': 1}[kind], REGIONS.index(region))

    try:
        keys = [key(label) for label in labels]
    except (KeyError, ValueError):
        return list(range(len(labels)))
    return sorted(range(len(labels)), key=lambda i: keys[i])


class ExogenousSelector(Enum):
    """Which exogenous rows a model variant uses."""

    URL_ONLY = 'url-only'
    QUERY_ONLY = 'query-only'
    ALL = 'all'
    NONE = 'none'

    def accepts(self, label: str) -> bool:
        """Return whether an exogenous series with this label is used by the selector."""
        if self is ExogenousSelector.ALL:
            return True
        elif self is ExogenousSelector.URL_ONLY:
            return label.endswith(URL_SUFFIX)
        elif self is ExogenousSelector.QUERY_ONLY:
            return label.endswith(QUERY_SUFFIX)
        return False


class Variant(Enum):
    """A model variant, defined by the exogenous signals it uses."""

    A = 'A'
    B = 'B'
    C = 'C'
    D = 'D'

    @property
    def selector(self) -> ExogenousSelector:
        """Return the exogenous selector for this variant."""
        return {
            Variant.A: ExogenousSelector.URL_ONLY,
            Variant.B: ExogenousSelector.QUERY_ONLY,
            Variant.C: ExogenousSelector.ALL,
            Variant.D: ExogenousSelector.NONE,
        }[self]

    @property
    def description(self) -> str:
        """Return a human readable description of this variant."""
        return {
            Variant.A: 'URL exogenous only (VAR-X)',
            Variant.B: 'Query exogenous only (VAR-X)',
            Variant.C: 'All (VAR-X)',
            Variant.D: 'No exogenous (VAR only)',
        }[self]

    @classmethod
    def parse(cls, code: str) -> 'Variant':
        """Return the variant with the given single-letter code.

        >>> Variant.parse('c')
        <Variant.C: 'C'>
        """
        try:
            return cls(code.strip().upper())
        except ValueError:
            raise ValueError(
                f'invalid variant ("{code}"): expected one of A, B, C, D') from None


class ExogenousPolicy(Enum):
    """How exogenous values are filled in beyond the observed history."""

    HOLD_LAST = 'hold-last'
    ZEROS = 'zeros'
    PROVIDED = 'provided'
