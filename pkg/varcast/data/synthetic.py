"""Synthetic VAR-X data with known coefficients, for oracle tests and fixture bundles."""
import json
import logging
import math
from dataclasses import asdict, dataclass
from datetime import date
from pathlib import Path
from typing import Any, Union

import numpy as np

from varcast.data.regions import RegionMap
from varcast.data.sources import write_weekly_csv
from varcast.errors import InvalidSpec
from varcast.models.common import REGIONS, Variant, query_label, url_label
from varcast.models.series import (MultivariateSeries, SeasonalTransform,
                                   TimeIndex)
from varcast.models.varx import VarxModel, companion_spectral_radius

logger = logging.getLogger(__name__)

BURN_IN = 200

# Fixture bundle scales
_CLAIMS_BASELINE = 10000.0
_SEARCH_TOTAL = 1e8
_LOG_RATIO_BASELINE = math.log(0.01)


@dataclass(frozen=True)
class SyntheticSpec:
    """The parameters of a synthetic VAR-X process.

    Instance Attributes:
        k: The number of response series.
        m: The number of exogenous series.
        weeks: The number of weeks kept after the burn-in.
        p: The response lag order.
        s: The exogenous lag order.
        sparsity: The fraction of coefficients drawn nonzero, in (0, 1].
        spectral_radius: The companion spectral radius Θ is rescaled to, in (0, 1).
        noise_std: The standard deviation of the Gaussian innovations.
        seed: The random seed.
        exogenous_strength: A multiplier on β; 0 gives a pure VAR process.
        start: A date in the first kept week.
    """

    k: int = 9
    m: int = 18
    weeks: int = 178
    p: int = 2
    s: int = 1
    sparsity: float = 0.3
    spectral_radius: float = 0.8
    noise_std: float = 1.0
    seed: int = 0
    exogenous_strength: float = 1.0
    start: date = date(2013, 1, 5)

    def __post_init__(self) -> None:
        for name in ('k', 'm', 'weeks', 'p', 's'):
            if getattr(self, name) < 1:
                raise InvalidSpec(f'invalid {name} ({getattr(self, name)}): must be at least 1')
        if not 0 < self.sparsity <= 1:
            raise InvalidSpec(f'invalid sparsity ({self.sparsity}): must lie in (0, 1]')
        if not 0 < self.spectral_radius < 1:
            raise InvalidSpec(
                f'invalid spectral radius ({self.spectral_radius}): must lie in (0, 1)')
        if self.noise_std < 0:
            raise InvalidSpec(f'invalid noise std ({self.noise_std}): must be non-negative')
        if self.exogenous_strength < 0:
            raise InvalidSpec('exogenous strength must be non-negative')

    def as_record(self) -> dict[str, Any]:
        """Return the spec as a JSON-compatible dict."""
        record = asdict(self)
        record['start'] = self.start.isoformat()
        return record


@dataclass(frozen=True, eq=False)
class SyntheticData:
    """A simulated VAR-X sample and the coefficients that generated it.

    Instance Attributes:
        y: The response series (k rows).
        x: The exogenous series (m rows).
        theta: The true response lag matrices, shape (p, k, k).
        beta: The true exogenous lag matrices, shape (s, k, m).
    """

    y: MultivariateSeries
    x: MultivariateSeries
    theta: np.ndarray
    beta: np.ndarray


def response_labels(k: int) -> tuple[str, ...]:
    """Return region names for k = 9 and generic names otherwise."""
    return REGIONS if k == len(REGIONS) else tuple(f'y{i + 1}' for i in range(k))


def exogenous_labels(k: int, m: int) -> tuple[str, ...]:
    """Return regional query/URL labels for k = 9, m = 18 and generic names otherwise."""
    if k == len(REGIONS) and m == 2 * len(REGIONS):
        return tuple(query_label(r) for r in REGIONS) + tuple(url_label(r) for r in REGIONS)
    return tuple(f'x{j + 1}' for j in range(m))


def simulate_varx(theta: np.ndarray, beta: np.ndarray, x: np.ndarray,
                  noise: np.ndarray) -> np.ndarray:
    """Return the response driven by x and noise through the VAR-X recursion, from zero."""
    p, s = theta.shape[0], beta.shape[0]
    k, n_weeks = noise.shape
    y = np.zeros((k, n_weeks))
    for t in range(max(p, s), n_weeks):
        value = noise[:, t].copy()
        for lag in range(1, p + 1):
            value += theta[lag - 1] @ y[:, t - lag]
        for lag in range(1, s + 1):
            value += beta[lag - 1] @ x[:, t - lag]
        y[:, t] = value
    return y


def generate_synthetic_varx(spec: SyntheticSpec) -> SyntheticData:
    """Draw sparse coefficients and simulate a stable VAR-X sample.

    Θ is rescaled so that its companion spectral radius equals spec.spectral_radius: scaling
    lag i by c**i scales every companion eigenvalue by c. Each exogenous row is a stationary
    AR(1). The first BURN_IN simulated weeks are discarded.
    """
    rng = np.random.default_rng(spec.seed)
    k, m, p, s = spec.k, spec.m, spec.p, spec.s

    theta = rng.standard_normal((p, k, k)) * (rng.random((p, k, k)) < spec.sparsity)
    radius = companion_spectral_radius(theta)
    if radius > 0:
        scale = spec.spectral_radius / radius
        theta = theta * scale ** np.arange(1, p + 1)[:, None, None]
    else:
        logger.warning('drawn response coefficients are all zero; spectral radius stays 0')
    beta = spec.exogenous_strength * rng.standard_normal((s, k, m)) \
        * (rng.random((s, k, m)) < spec.sparsity)

    n_weeks = spec.weeks + BURN_IN
    persistence = rng.uniform(0.2, 0.8, size=m)
    x = np.empty((m, n_weeks))
    x[:, 0] = rng.standard_normal(m) / np.sqrt(1.0 - persistence ** 2)
    shocks = rng.standard_normal((m, n_weeks))
    for t in range(1, n_weeks):
        x[:, t] = persistence * x[:, t - 1] + shocks[:, t]
    noise = spec.noise_std * rng.standard_normal((k, n_weeks))
    y = simulate_varx(theta, beta, x, noise)

    index = TimeIndex(spec.start, spec.weeks)
    return SyntheticData(
        y=MultivariateSeries(response_labels(k), index, y[:, BURN_IN:]),
        x=MultivariateSeries(exogenous_labels(k, m), index, x[:, BURN_IN:]),
        theta=theta,
        beta=beta,
    )


def _integrate(differenced: np.ndarray, head: np.ndarray) -> np.ndarray:
    """Return the raw series whose seasonal difference is differenced, starting from head."""
    period = head.shape[1]
    raw = np.hstack([head, np.zeros_like(differenced)])
    for t in range(differenced.shape[1]):
        raw[:, period + t] = raw[:, t] + differenced[:, t]
    return raw


def write_fixture_bundle(spec: SyntheticSpec, out_dir: Union[str, Path], period: int = 52,
                         epsilon: float = 0.5) -> dict[str, Path]:
    """Write a synthetic claims/query/clicks/totals CSV bundle and return the written paths.

    The VAR-X sample is the seasonal difference of the written series: spec.weeks counts raw
    weeks, of which the first period form a deterministic seasonal baseline. Query and click
    counts are chosen so that their log-ratio to the regional totals reproduces the sampled
    exogenous series. The true coefficients are saved as a variant C model file.
    """
    if spec.weeks <= period + max(spec.p, spec.s):
        raise InvalidSpec(f'{spec.weeks} weeks are too few for seasonal period {period}')
    if spec.k != len(REGIONS) or spec.m != 2 * len(REGIONS):
        raise InvalidSpec('fixture bundles need k=9 regions and m=18 exogenous series')
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    data = generate_synthetic_varx(
        SyntheticSpec(**{**asdict(spec), 'weeks': spec.weeks - period}))
    index = TimeIndex(spec.start, spec.weeks)
    season = np.sin(2 * np.pi * np.arange(period) / period)

    claims_head = _CLAIMS_BASELINE * (1 + 0.2 * season) + 500.0 * np.arange(spec.k)[:, None]
    claims = MultivariateSeries(data.y.labels, index, _integrate(data.y.values, claims_head))

    levels_head = _LOG_RATIO_BASELINE + 0.1 * np.tile(season, (spec.m, 1))
    levels = _integrate(data.x.values, levels_head)
    counts = np.exp(levels) * _SEARCH_TOTAL - epsilon
    if np.any(counts < 0):
        raise InvalidSpec('exogenous levels too low to express as counts; lower noise or radius')
    n_regions = len(REGIONS)
    query = MultivariateSeries(REGIONS, index, counts[:n_regions])
    clicks = MultivariateSeries(REGIONS, index, counts[n_regions:])
    totals = MultivariateSeries(REGIONS, index, np.full((n_regions, spec.weeks), _SEARCH_TOTAL))

    truth = VarxModel(
        theta=data.theta,
        beta=data.beta,
        response_labels=data.y.labels,
        exogenous_labels=data.x.labels,
        lam=0.0,
        response_means=np.zeros(spec.k),
        design_means=np.zeros(spec.k * spec.p + spec.m * spec.s),
        variant=Variant.C,
        seasonal=SeasonalTransform(period, claims.window(0, period)),
    )

    paths = {
        'claims': write_weekly_csv(claims, out_dir / 'claims.csv'),
        'query': write_weekly_csv(query, out_dir / 'query.csv'),
        'clicks': write_weekly_csv(clicks, out_dir / 'clicks.csv'),
        'totals': write_weekly_csv(totals, out_dir / 'totals.csv'),
        'regions': out_dir / 'regions.csv',
        'truth': truth.save(out_dir / 'true_coefficients.json'),
        'record': out_dir / 'synth.json',
    }
    RegionMap.default().to_frame().to_csv(paths['regions'], index=False)
    record = {'spec': spec.as_record(), 'period': period, 'epsilon': epsilon,
              'files': {name: path.name for name, path in paths.items()}}
    paths['record'].write_text(json.dumps(record, indent=2) + '\n', encoding='utf-8')
    return paths
