"""Run configuration: defaults from the settings module, a key-value file, and overrides."""
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional, Union

from config import settings
from varcast.errors import ConfigError
from varcast.estimation.solver import SolverSettings
from varcast.models.common import Variant
from varcast.utils import nullable_convert, parse_bool, parse_list

SCALES = ('diff', 'level')
INPUT_FILES = ('claims', 'query', 'clicks', 'totals', 'regions')


def _path_or_none(value: Any) -> Optional[Path]:
    if isinstance(value, str) and not value.strip():
        return None
    return nullable_convert(value, Path)


def _variants(value: Any) -> tuple[Variant, ...]:
    if isinstance(value, Variant):
        return (value,)
    items = value if isinstance(value, (list, tuple)) else parse_list(value)
    return tuple(item if isinstance(item, Variant) else Variant.parse(item) for item in items)


@dataclass(frozen=True)
class RunConfig:
    """The effective configuration of a command.

    Instance Attributes:
        claims: The claims CSV (per state or per region).
        query: The query volume CSV.
        clicks: The URL click CSV.
        totals: The total query volume CSV.
        regions: A state-to-region mapping CSV; the census divisions when None.
        p: The response lag order.
        s: The exogenous lag order.
        period: The seasonal period in weeks.
        grid_size: The number of penalties in the default grid.
        grid_ratio: The smallest-to-largest penalty ratio of the default grid.
        variants: The variants to evaluate.
        epsilon: The count offset of the log-ratio normalization.
        scale: Whether RMSE is reported on the differenced ('diff') or raw ('level') scale.
        seed: The random seed.
        out: The output directory.
        tol: The solver tolerance.
        max_iter: The solver iteration cap.
        standardize: Whether to standardize design columns.
        refit: Whether cross-validation refits before every validation week.
        max_workers: The number of variants evaluated concurrently.
    """

    claims: Optional[Path] = None
    query: Optional[Path] = None
    clicks: Optional[Path] = None
    totals: Optional[Path] = None
    regions: Optional[Path] = None
    p: int = settings.P
    s: int = settings.S
    period: int = settings.PERIOD
    grid_size: int = settings.GRID_SIZE
    grid_ratio: float = settings.GRID_RATIO
    variants: tuple[Variant, ...] = _variants(settings.VARIANTS)
    epsilon: float = settings.EPSILON
    scale: str = settings.SCALE
    seed: int = settings.SEED
    out: Path = Path(settings.OUT)
    tol: float = settings.TOL
    max_iter: int = settings.MAX_ITER
    standardize: bool = False
    refit: bool = False
    max_workers: int = 1

    def __post_init__(self) -> None:
        if self.p < 1 or self.s < 0:
            raise ConfigError(
                f'invalid lag orders (p={self.p}, s={self.s}): need p >= 1 and s >= 0')
        if self.period < 1:
            raise ConfigError(f'invalid period ({self.period}): must be at least 1')
        if self.grid_size < 2:
            raise ConfigError(f'invalid grid size ({self.grid_size}): must be at least 2')
        if not 0 < self.grid_ratio < 1:
            raise ConfigError(f'invalid grid ratio ({self.grid_ratio}): must lie in (0, 1)')
        if self.epsilon <= 0:
            raise ConfigError(f'invalid epsilon ({self.epsilon}): must be positive')
        if self.scale not in SCALES:
            raise ConfigError(f'invalid scale ("{self.scale}"): expected diff or level')
        if not self.variants:
            raise ConfigError('at least one variant is required')
        if self.max_workers < 1:
            raise ConfigError(f'invalid max workers ({self.max_workers}): must be at least 1')

    @property
    def solver_settings(self) -> SolverSettings:
        """Return the solver settings this configuration implies."""
        return SolverSettings(tol=self.tol, max_iter=self.max_iter)

    def require_inputs(self, *names: str) -> None:
        """Raise a ConfigError unless every named input file is configured and exists."""
        for name in names:
            path = getattr(self, name)
            if path is None:
                raise ConfigError(f'no {name} file configured')
            if not Path(path).is_file():
                raise ConfigError(f'{name} file not found: {path}')

    def as_record(self) -> dict[str, Any]:
        """Return the configuration as a JSON-compatible dict."""
        record = {}
        for field in fields(self):
            value = getattr(self, field.name)
            if isinstance(value, Path):
                value = str(value)
            elif field.name == 'variants':
                value = [variant.value for variant in value]
            record[field.name] = value
        return record


_CONVERTERS: dict[str, Callable[[Any], Any]] = {
    **{name: _path_or_none for name in INPUT_FILES},
    'p': int,
    's': int,
    'period': int,
    'grid_size': int,
    'grid_ratio': float,
    'variants': _variants,
    'epsilon': float,
    'scale': lambda value: str(value).strip().lower(),
    'seed': int,
    'out': Path,
    'tol': float,
    'max_iter': int,
    'standardize': parse_bool,
    'refit': parse_bool,
    'max_workers': int,
}


def _convert(key: str, value: Any) -> Any:
    if key not in _CONVERTERS:
        raise ConfigError(f'unknown configuration key ("{key}")')
    try:
        return _CONVERTERS[key](value)
    except ValueError as e:
        raise ConfigError(f'invalid value for {key} ("{value}"): {e}') from None


def parse_config_file(path: Union[str, Path]) -> dict[str, Any]:
    """Return the converted settings of a ``key = value`` configuration file.

    Blank lines and ``#`` comments are ignored. Relative input paths are resolved against
    the directory of the file.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f'cannot read configuration file {path}: {e.strerror}') from None

    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f'{path}:{number}: expected "key = value"')
        key, value = (part.strip() for part in line.split('=', 1))
        values[key] = _convert(key, value)

    for name in (*INPUT_FILES, 'out'):
        if values.get(name) is not None and not values[name].is_absolute():
            values[name] = path.parent / values[name]
    return values


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[dict[str, Any]] = None) -> RunConfig:
    """Return the configuration layered from settings, an optional file and overrides.

    Overrides (typically command-line flags) win over the file, which wins over the
    settings module. Overrides whose value is None are ignored.
    """
    config = RunConfig()
    if path is not None:
        config = replace(config, **parse_config_file(path))
    if overrides:
        given = {key: _convert(key, value) for key, value in overrides.items() if value is not None}
        config = replace(config, **given)
    return config
