"""The varcast command line."""
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Iterator, Optional

import click
import numpy as np
from yaspin import yaspin

from varcast import __version__
from varcast.artifacts import (ArtifactWriter, write_cv, write_forecast,
                               write_report, write_sparsity)
from varcast.config import RunConfig, load_config
from varcast.data.regions import (RegionMap, aggregate_to_regions,
                                  build_exogenous)
from varcast.data.sources import WeeklyCsvSource
from varcast.data.synthetic import SyntheticSpec, write_fixture_bundle
from varcast.errors import VarcastError
from varcast.evaluation import (cross_validate_variant, fit_variant,
                                prepare_variant, run_variants)
from varcast.models.common import ExogenousPolicy, Variant
from varcast.models.series import (MultivariateSeries, TimeIndex, align,
                                   invert_seasonal_difference,
                                   seasonal_difference)
from varcast.models.varx import VarxModel


LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


@contextmanager
def _stage(name: str) -> Iterator[None]:
    """Show a spinner while a pipeline stage runs and turn its errors into a ClickException."""
    with yaspin(text=name, timer=True) as spinner:
        try:
            yield
            spinner.ok('✅ ')
        except (VarcastError, OSError) as e:
            spinner.fail('💥 ')  # something went wrong!
            spinner.write(str(e))
            raise click.ClickException(f'{name} failed: {e}')


def _run_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """Attach the configuration options shared by the pipeline commands."""
    options = [
        click.option('--config', 'config_path', type=click.Path(dir_okay=False),
                     help='A key = value configuration file.'),
        click.option('--claims', type=click.Path(dir_okay=False),
                     help='Weekly claims CSV (per state or per region).'),
        click.option('--query', type=click.Path(dir_okay=False), help='Query volume CSV.'),
        click.option('--clicks', type=click.Path(dir_okay=False), help='URL click CSV.'),
        click.option('--totals', type=click.Path(dir_okay=False),
                     help='Total search volume CSV, one series per region.'),
        click.option('--regions', type=click.Path(dir_okay=False),
                     help='State to region mapping CSV (default: census divisions).'),
        click.option('--out', type=click.Path(file_okay=False), help='Output directory.'),
        click.option('--p', type=click.IntRange(min=1), help='Response lag order.'),
        click.option('--s', type=click.IntRange(min=0), help='Exogenous lag order.'),
        click.option('--period', type=click.IntRange(min=1), help='Seasonal period in weeks.'),
        click.option('--grid-size', type=click.IntRange(min=2), help='Number of penalties.'),
        click.option('--grid-ratio', type=click.FloatRange(0, 1, min_open=True, max_open=True),
                     help='Smallest to largest penalty ratio.'),
        click.option('--variants', help='Comma-separated variants among A, B, C, D.'),
        click.option('--scale', type=click.Choice(['diff', 'level']),
                     help='Scale the RMSE is reported on.'),
        click.option('--seed', type=int, help='Random seed.'),
        click.option('--epsilon', type=click.FloatRange(0, min_open=True),
                     help='Count offset of the log-ratio normalization.'),
        click.option('--refit/--no-refit', default=None,
                     help='Refit before every validation week during cross-validation.'),
        click.option('--standardize/--no-standardize', default=None,
                     help='Standardize design columns.'),
        click.option('--workers', 'max_workers', type=click.IntRange(min=1),
                     help='Variants evaluated concurrently.'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _configure(config_path: Optional[str], **overrides: Any) -> RunConfig:
    try:
        return load_config(config_path, overrides)
    except VarcastError as e:
        raise click.UsageError(str(e))


def _load_claims(config: RunConfig, region_map: RegionMap) -> MultivariateSeries:
    config.require_inputs('claims')
    return aggregate_to_regions(WeeklyCsvSource(config.claims).load(), region_map)


def _load_exogenous(config: RunConfig, region_map: RegionMap) -> MultivariateSeries:
    config.require_inputs('query', 'clicks', 'totals')
    query = WeeklyCsvSource(config.query).load()
    clicks = WeeklyCsvSource(config.clicks).load()
    totals = WeeklyCsvSource(config.totals).load()
    query, clicks = align(query, clicks)
    query, totals = align(query, totals)
    clicks, _ = align(clicks, totals)
    return build_exogenous(query, clicks, totals, region_map, config.epsilon)


def _load_inputs(config: RunConfig, needs_exogenous: bool) -> tuple[MultivariateSeries,
                                                                     Optional[MultivariateSeries]]:
    region_map = RegionMap.from_csv(config.regions) if config.regions else RegionMap.default()
    claims = _load_claims(config, region_map)
    exogenous = _load_exogenous(config, region_map) if needs_exogenous else None
    if exogenous is not None:
        claims, exogenous = align(claims, exogenous)
    return claims, exogenous


def _needs_exogenous(config: RunConfig, variants: tuple[Variant, ...]) -> bool:
    return config.s > 0 and any(variant is not Variant.D for variant in variants)


def _run_record(config: RunConfig) -> dict[str, Any]:
    """Return the configuration recorded in reports, without the output location."""
    record = config.as_record()
    record.pop('out')
    for name in ('claims', 'query', 'clicks', 'totals', 'regions'):
        if record[name] is not None:
            record[name] = Path(record[name]).name
    return record


def _write_run(writer: ArtifactWriter, command: str, record: dict[str, Any]) -> None:
    """Write run.json, the effective configuration of the command that filled the directory."""
    writer.write_json('run.json', {'command': command, 'config': record})


@click.group()
@click.option('--verbose', '-v', count=True, help='Log INFO (-v) or DEBUG (-vv) messages.')
@click.version_option(__version__)
def cli(verbose: int) -> None:
    """Sparse VAR-X forecasting of weekly regional unemployment claims."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)


@cli.command('evaluate')
@_run_options
def evaluate_command(config_path: Optional[str], **overrides: Any) -> None:
    """Compare variants by rolling one-step test RMSE per region."""
    config = _configure(config_path, **overrides)
    with ArtifactWriter(config.out) as writer:
        with _stage('Loading data'):
            claims, exogenous = _load_inputs(config, _needs_exogenous(config, config.variants))
        with _stage('Evaluating variants'):
            report = run_variants(
                claims, exogenous, config.variants, p=config.p, s=config.s,
                grid_size=config.grid_size, grid_ratio=config.grid_ratio,
                settings=config.solver_settings, period=config.period, scale=config.scale,
                standardize=config.standardize, refit=config.refit,
                max_workers=config.max_workers, show_progress=True,
                extra_config={'run': _run_record(config)},
            )
        with _stage('Writing report'):
            write_report(writer, report)
            _write_run(writer, 'evaluate', _run_record(config))
    click.echo(report.to_frame().to_string(float_format=lambda value: f'{value:.4f}'))


@cli.command('cv')
@_run_options
@click.option('--variant', type=click.Choice([v.value for v in Variant], case_sensitive=False),
              default='C', show_default=True, help='The variant to cross-validate.')
def cv_command(config_path: Optional[str], variant: str, **overrides: Any) -> None:
    """Cross-validate the penalty of one variant and write cv.csv."""
    config = _configure(config_path, **overrides)
    variant = Variant.parse(variant)
    with ArtifactWriter(config.out) as writer:
        with _stage('Loading data'):
            claims, exogenous = _load_inputs(config, _needs_exogenous(config, (variant,)))
        with _stage(f'Cross-validating variant {variant.value}'):
            prepared = prepare_variant(claims, exogenous, variant, config.s, config.period)
            cv = cross_validate_variant(prepared, config.p, None, config.solver_settings,
                                        standardize=config.standardize, refit=config.refit,
                                        grid_size=config.grid_size,
                                        grid_ratio=config.grid_ratio)
        with _stage('Writing scores'):
            write_cv(writer, cv)
            _write_run(writer, 'cv', {**_run_record(config), 'variant': variant.value})
    click.echo(f'selected lambda: {cv.selected_lambda:.6g} (validation mse {cv.best_score:.6g})')


@cli.command('fit')
@_run_options
@click.option('--variant', type=click.Choice([v.value for v in Variant], case_sensitive=False),
              default='C', show_default=True, help='The variant to fit.')
@click.option('--lambda', 'lam', type=click.FloatRange(min=0),
              help='A fixed penalty (default: selected by cross-validation).')
def fit_command(config_path: Optional[str], variant: str, lam: Optional[float],
                **overrides: Any) -> None:
    """Fit one variant on every differenced week and write model.json."""
    config = _configure(config_path, **overrides)
    variant = Variant.parse(variant)
    with ArtifactWriter(config.out) as writer:
        with _stage('Loading data'):
            claims, exogenous = _load_inputs(config, _needs_exogenous(config, (variant,)))
            prepared = prepare_variant(claims, exogenous, variant, config.s, config.period)
        if lam is None:
            with _stage(f'Cross-validating variant {variant.value}'):
                cv = cross_validate_variant(prepared, config.p, None, config.solver_settings,
                                            standardize=config.standardize, refit=config.refit,
                                            grid_size=config.grid_size,
                                            grid_ratio=config.grid_ratio)
                write_cv(writer, cv)
            lam = cv.selected_lambda
        with _stage(f'Fitting variant {variant.value}'):
            model = fit_variant(prepared, lam, config.p, config.solver_settings,
                                standardize=config.standardize, all_weeks=True)
            writer.track(model.save(writer.path('model.json')))
            _write_run(writer, 'fit', {**_run_record(config), 'variant': variant.value,
                                      'lambda': lam})
    click.echo(f'lambda: {lam:.6g}, nonzero coefficients: '
               f'{int(np.count_nonzero(model.stacked()))}, '
               f'spectral radius: {model.spectral_radius():.4f}')


def _level_forecasts(model: VarxModel, forecasts: np.ndarray,
                     claims: MultivariateSeries) -> Optional[np.ndarray]:
    """Return forecasts on the raw scale, feeding earlier levels back for long horizons."""
    if model.seasonal is None:
        return None
    transform = model.seasonal
    raw = claims.select(model.response_labels)
    offset = transform.head.index.offset_of(raw.index.end)
    levels = []
    for step in range(forecasts.shape[1]):
        level = invert_seasonal_difference(forecasts[:, step], offset + step, transform, raw)
        levels.append(level)
        raw = raw.concat(MultivariateSeries(raw.labels, TimeIndex(raw.index.end, 1),
                                                  level[:, None]))
    return np.column_stack(levels)


@cli.command('forecast')
@_run_options
@click.option('--model', 'model_path', required=True, type=click.Path(dir_okay=False),
              help='A model file written by fit.')
@click.option('--horizon', type=click.IntRange(min=1), default=2, show_default=True,
              help='Number of weeks ahead.')
@click.option('--x-policy', type=click.Choice([p.value for p in ExogenousPolicy]),
              default=ExogenousPolicy.HOLD_LAST.value, show_default=True,
              help='How exogenous inputs are filled in beyond the data.')
@click.option('--x-future', type=click.Path(dir_okay=False),
              help='Differenced future exogenous values (for --x-policy provided).')
def forecast_command(config_path: Optional[str], model_path: str, horizon: int, x_policy: str,
                     x_future: Optional[str], **overrides: Any) -> None:
    """Forecast the weeks after the data with a saved model and write forecast.csv."""
    config = _configure(config_path, **overrides)
    with ArtifactWriter(config.out) as writer:
        with _stage('Loading model'):
            model = VarxModel.load(model_path)
        with _stage('Loading data'):
            claims, exogenous = _load_inputs(config, model.s > 0)
            period = model.seasonal.period if model.seasonal else config.period
            y = seasonal_difference(claims.select(model.response_labels), period)[0]
            x = None
            if exogenous is not None:
                x = seasonal_difference(exogenous.select(model.exogenous_labels), period)[0]
            future = None
            if x_future is not None:
                future = WeeklyCsvSource(x_future).load().select(model.exogenous_labels)
        with _stage('Forecasting'):
            forecasts = model.forecast_h_step(y, x, horizon, ExogenousPolicy(x_policy), future)
            levels = _level_forecasts(model, forecasts, claims)
            write_forecast(writer, model.response_labels, forecasts,
                           TimeIndex(y.index.end, horizon), levels)
            _write_run(writer, 'forecast', {**_run_record(config), 'model': Path(model_path).name,
                                           'horizon': horizon, 'x_policy': x_policy})
    click.echo(f'wrote {horizon}-week forecasts to {writer.path("forecast.csv")}')


@cli.command('sparsity')
@click.option('--model', 'model_path', required=True, type=click.Path(dir_okay=False),
              help='A model file written by fit.')
@click.option('--out', type=click.Path(file_okay=False), default='out', show_default=True,
              help='Output directory.')
@click.option('--threshold', type=click.FloatRange(min=0), default=0.0, show_default=True,
              help='Magnitudes below this are reported as zero.')
@click.option('--svg', is_flag=True, default=False, help='Also write SVG heatmaps.')
def sparsity_command(model_path: str, out: str, threshold: float, svg: bool) -> None:
    """Write the coefficient sparsity pattern of a saved model."""
    with ArtifactWriter(out) as writer:
        with _stage('Loading model'):
            model = VarxModel.load(model_path)
        with _stage('Writing sparsity pattern'):
            pattern = model.sparsity_pattern(threshold)
            write_sparsity(writer, pattern, svg)
            _write_run(writer, 'sparsity', {'model': Path(model_path).name,
                                           'threshold': threshold, 'svg': svg})
    for lag, count in enumerate(pattern.theta_counts, start=1):
        click.echo(f'theta lag {lag}: {count} nonzero')
    for lag, count in enumerate(pattern.beta_counts, start=1):
        click.echo(f'beta lag {lag}: {count} nonzero')


@cli.command('synth')
@click.option('--out', type=click.Path(file_okay=False), default='synth', show_default=True,
              help='Output directory.')
@click.option('--seed', type=int, default=0, show_default=True, help='Random seed.')
@click.option('--weeks', type=click.IntRange(min=1), default=178, show_default=True,
              help='Number of raw weeks.')
@click.option('--p', type=click.IntRange(min=1), default=2, show_default=True)
@click.option('--s', type=click.IntRange(min=1), default=1, show_default=True)
@click.option('--sparsity', type=click.FloatRange(0, 1, min_open=True), default=0.3,
              show_default=True, help='Fraction of nonzero coefficients.')
@click.option('--spectral-radius', type=click.FloatRange(0, 1, min_open=True, max_open=True),
              default=0.8, show_default=True)
@click.option('--noise-std', type=click.FloatRange(min=0), default=1.0, show_default=True)
@click.option('--exogenous-strength', type=click.FloatRange(min=0), default=1.0,
              show_default=True, help='Multiplier on the exogenous coefficients.')
@click.option('--period', type=click.IntRange(min=1), default=52, show_default=True)
@click.option('--start', type=click.DateTime(formats=['%Y-%m-%d']), default='2013-01-05',
              show_default=True, help='A date in the first week.')
def synth_command(out: str, seed: int, weeks: int, p: int, s: int, sparsity: float,
                  spectral_radius: float, noise_std: float, exogenous_strength: float,
                  period: int, start: Any) -> None:
    """Write a synthetic input bundle with known coefficients."""
    with _stage('Generating synthetic data'):
        spec = SyntheticSpec(weeks=weeks, p=p, s=s, sparsity=sparsity,
                             spectral_radius=spectral_radius, noise_std=noise_std, seed=seed,
                             exogenous_strength=exogenous_strength, start=start.date())
        paths = write_fixture_bundle(spec, Path(out), period)
    for name, path in paths.items():
        click.echo(f'{name}: {path}')


if __name__ == '__main__':
    cli()
