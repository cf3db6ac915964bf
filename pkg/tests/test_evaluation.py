import logging
import time

import numpy as np
import pytest

from varcast.data.regions import RegionMap, build_exogenous
from varcast.data.sources import WeeklyCsvSource
from varcast.data.synthetic import (SyntheticSpec, generate_synthetic_varx,
                                    write_fixture_bundle)
from varcast.errors import (BadLag, IndexMismatch, InsufficientHistory,
                            NotAligned, TooFewRows)
from varcast.estimation.design import build_design
from varcast.estimation.solver import SolverSettings, lambda_max
from varcast.evaluation import (LEVEL_SCALE, cross_validate_variant,
                                fit_variant, prepare_variant, rmse,
                                rolling_one_step_cv, rolling_test_forecast,
                                run_variants, select_exogenous)
from varcast.models.common import REGIONS, Variant, query_label, url_label
from varcast.models.series import MultivariateSeries, TimeIndex
from varcast.models.varx import VarxModel

REGION_PAIR = ('Pacific', 'Mountain')
PAIR_EXOGENOUS = (query_label('Pacific'), query_label('Mountain'),
                  url_label('Pacific'), url_label('Mountain'))


def weekly(values, labels, start='2014-W01'):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    return MultivariateSeries(tuple(labels), TimeIndex.from_week(start, values.shape[1]), values)


@pytest.fixture(scope='module')
def bundle(tmp_path_factory):
    """Return raw claims and exogenous series of a synthetic fixture bundle."""
    paths = write_fixture_bundle(SyntheticSpec(seed=0), tmp_path_factory.mktemp('bundle'))
    claims = WeeklyCsvSource(paths['claims']).load()
    exogenous = build_exogenous(
        WeeklyCsvSource(paths['query']).load(), WeeklyCsvSource(paths['clicks']).load(),
        WeeklyCsvSource(paths['totals']).load(), RegionMap.from_csv(paths['regions']))
    return claims, exogenous


def url_driven(seed, weeks=300, strength=1.0, noise=0.3):
    """Return raw claims and exogenous series whose first differences follow a URL-driven
    VAR-X: only the URL click rows move the response, scaled by strength."""
    rng = np.random.default_rng(seed)
    x = np.zeros((4, weeks))
    for t in range(1, weeks):
        x[:, t] = 0.5 * x[:, t - 1] + rng.standard_normal(4)
    y = np.zeros((2, weeks))
    for t in range(1, weeks):
        y[:, t] = 0.3 * y[:, t - 1] + strength * x[2:, t - 1] + noise * rng.standard_normal(2)
    # Integrate so that a period-1 difference recovers the sample
    claims = weekly(np.cumsum(y, axis=1), REGION_PAIR)
    exogenous = weekly(np.cumsum(x, axis=1), PAIR_EXOGENOUS)
    return claims, exogenous


def generated(seed, strength, noise, weeks=240):
    """Return raw claims and exogenous series integrated from a generated VAR-X sample, so that
    a period-1 difference recovers the sample."""
    data = generate_synthetic_varx(SyntheticSpec(weeks=weeks, seed=seed, noise_std=noise,
                                                 exogenous_strength=strength))
    claims = data.y.with_values(np.cumsum(data.y.values, axis=1))
    exogenous = data.x.with_values(np.cumsum(data.x.values, axis=1))
    return claims, exogenous


def test_rmse_example():
    predictions = weekly([[1.0, 2.0]], ['Pacific'])
    actuals = weekly([[4.0, 6.0]], ['Pacific'])
    np.testing.assert_allclose(rmse(predictions, actuals), [np.sqrt(12.5)])


def test_rmse_mismatch():
    with pytest.raises(IndexMismatch):
        rmse(weekly([[1.0]], ['a']), weekly([[1.0]], ['b']))
    with pytest.raises(IndexMismatch):
        rmse(weekly([[1.0]], ['a']), weekly([[1.0]], ['a'], start='2014-W02'))


def test_select_exogenous():
    exogenous = weekly(np.zeros((4, 3)), PAIR_EXOGENOUS)
    assert select_exogenous(exogenous, Variant.A).labels == PAIR_EXOGENOUS[2:]
    assert select_exogenous(exogenous, Variant.B).labels == PAIR_EXOGENOUS[:2]
    assert select_exogenous(exogenous, Variant.C).labels == PAIR_EXOGENOUS
    assert select_exogenous(exogenous, Variant.D) is None
    with pytest.raises(IndexMismatch):
        select_exogenous(None, Variant.C)
    with pytest.raises(IndexMismatch):
        select_exogenous(weekly(np.zeros((1, 3)), ['Pacific:query']), Variant.A)


def test_cv_at_lambda_max_scores_training_mean():
    rng = np.random.default_rng(0)
    series = weekly(rng.standard_normal((2, 30)), REGION_PAIR)
    train, validation = series.window(0, 20), series.window(20, 30)
    top = lambda_max(build_design(train, p=2, s=0))
    cv = rolling_one_step_cv(train, validation, p=2, s=0, grid=[top])
    assert cv.selected_lambda == top
    assert cv.selected_index == 0
    means = train.values[:, 2:].mean(axis=1)
    expected = np.mean((validation.values - means[:, None]) ** 2)
    assert cv.best_score == pytest.approx(expected, rel=1e-9)


def test_cv_ties_go_to_the_larger_penalty():
    rng = np.random.default_rng(1)
    series = weekly(rng.standard_normal((2, 30)), REGION_PAIR)
    train, validation = series.window(0, 20), series.window(20, 30)
    top = lambda_max(build_design(train, p=1, s=0))
    cv = rolling_one_step_cv(train, validation, p=1, s=0, grid=[3 * top, 2 * top])
    assert cv.scores[0] == cv.scores[1]
    assert cv.selected_lambda == 3 * top


def test_cv_default_grid():
    claims, exogenous = url_driven(0, weeks=90)
    train, validation = claims.window(0, 30), claims.window(30, 60)
    cv = rolling_one_step_cv(train, validation, exogenous.window(0, 60), p=1, s=1, grid_size=4)
    assert len(cv.grid) == 4
    assert cv.grid == tuple(sorted(cv.grid, reverse=True))
    assert len(cv.scores) == 4


def test_cv_on_constant_differences_selects_zero_penalty():
    claims = weekly(np.vstack([np.arange(40.0), 3.0 * np.arange(40.0)]), REGION_PAIR)
    report = run_variants(claims, None, variants=[Variant.D], p=1, period=1, grid_size=5)
    outcome = report.outcomes[Variant.D]
    assert outcome.cv.grid == (0.0,)
    assert outcome.cv.selected_lambda == 0.0
    np.testing.assert_allclose(outcome.rmse, 0.0, atol=1e-9)


def test_cv_refit_predicts_running_means_at_large_penalty():
    rng = np.random.default_rng(2)
    values = rng.standard_normal((2, 24))
    series = weekly(values, REGION_PAIR)
    train, validation = series.window(0, 16), series.window(16, 24)
    huge = 100 * lambda_max(build_design(series, p=1, s=0))
    refit = rolling_one_step_cv(train, validation, p=1, s=0, grid=[huge], refit=True)
    means = np.column_stack([values[:, 1:week].mean(axis=1) for week in range(16, 24)])
    expected = np.mean((values[:, 16:] - means) ** 2)
    assert refit.best_score == pytest.approx(expected, rel=1e-9)


def test_cv_rejects_empty_validation():
    series = weekly(np.arange(10.0), ['Pacific'])
    with pytest.raises(TooFewRows):
        rolling_one_step_cv(series, series.window(10, 10), p=1, s=0, grid=[1.0])


def test_cv_rejects_misaligned_exogenous():
    series = weekly(np.arange(10.0), ['Pacific'])
    exogenous = weekly(np.arange(9.0), ['Pacific:url'])
    with pytest.raises(NotAligned):
        rolling_one_step_cv(series.window(0, 5), series.window(5, 10), exogenous, p=1, s=1,
                            grid=[1.0])


def scalar_model():
    return VarxModel(np.array([[[0.5]]]), np.zeros((0, 1, 0)), ('Pacific',), (), 0.0,
                     np.zeros(1), np.zeros(1), Variant.D)


def test_rolling_test_forecast_uses_actual_weeks():
    series = weekly([[2.0, 4.0, 8.0, 6.0]], ['Pacific'])
    predictions = rolling_test_forecast(scalar_model(), series.window(0, 2), series.window(2, 4))
    np.testing.assert_allclose(predictions.values, [[2.0, 4.0]])
    assert predictions.index == series.window(2, 4).index


def test_rolling_test_forecast_does_not_look_ahead():
    rng = np.random.default_rng(3)
    model = VarxModel(rng.standard_normal((2, 2, 2)) * 0.3, np.zeros((0, 2, 0)), REGION_PAIR,
                      (), 0.0, np.zeros(2), np.zeros(4), Variant.D)
    values = rng.standard_normal((2, 20))
    series = weekly(values, REGION_PAIR)
    baseline = rolling_test_forecast(model, series.window(0, 10), series.window(10, 20))

    perturbed_values = values.copy()
    perturbed_values[:, 14] += 100.0
    perturbed = weekly(perturbed_values, REGION_PAIR)
    changed = rolling_test_forecast(model, perturbed.window(0, 10), perturbed.window(10, 20))
    np.testing.assert_array_equal(changed.values[:, :5], baseline.values[:, :5])
    assert not np.allclose(changed.values[:, 5], baseline.values[:, 5])


def test_rolling_test_forecast_insufficient_history():
    series = weekly(np.arange(6.0), ['Pacific'])
    with pytest.raises(InsufficientHistory):
        rolling_test_forecast(scalar_model(), series, series.window(6, 6))
    model = VarxModel(np.zeros((3, 1, 1)), np.zeros((0, 1, 0)), ('Pacific',), (), 0.0,
                      np.zeros(1), np.zeros(3), Variant.D)
    with pytest.raises(InsufficientHistory):
        rolling_test_forecast(model, series.window(0, 2), series.window(2, 6))


def test_prepare_variant_lags():
    claims, exogenous = url_driven(0, weeks=60)
    assert prepare_variant(claims, exogenous, Variant.A, s=1, period=1).lags == 1
    pure = prepare_variant(claims, exogenous, Variant.D, s=1, period=1)
    assert pure.lags == 0
    assert pure.exogenous is None
    assert prepare_variant(claims, None, Variant.D, s=0, period=1).lags == 0
    with pytest.raises(BadLag):
        prepare_variant(claims, exogenous, Variant.C, s=0, period=1)


def test_prepare_variant_splits_differenced_weeks():
    claims, exogenous = url_driven(0, weeks=61)
    prepared = prepare_variant(claims, exogenous, Variant.B, s=1, period=1)
    assert prepared.split.train.n_weeks == 20
    assert prepared.split.test.n_weeks == 20
    assert prepared.exogenous.labels == PAIR_EXOGENOUS[:2]
    assert prepared.fit_exogenous.n_weeks == 40
    np.testing.assert_allclose(prepared.split.train.values[:, 0],
                               claims.values[:, 1] - claims.values[:, 0])


def test_fit_variant_attaches_transform():
    claims, exogenous = url_driven(1, weeks=90)
    prepared = prepare_variant(claims, exogenous, Variant.A, s=1, period=1)
    cv = cross_validate_variant(prepared, p=1, grid_size=3)
    model = fit_variant(prepared, cv.selected_lambda, p=1)
    assert model.variant is Variant.A
    assert model.exogenous_labels == PAIR_EXOGENOUS[2:]
    assert model.seasonal is prepared.transform
    everything = fit_variant(prepared, cv.selected_lambda, p=1, all_weeks=True)
    assert not np.array_equal(everything.stacked(), model.stacked())


def test_run_variants_full_scale(bundle):
    claims, exogenous = bundle
    report = run_variants(claims, exogenous, grid_size=4, grid_ratio=0.1)
    frame = report.to_frame()
    assert frame.shape == (9, 4)
    assert list(frame.index) == list(REGIONS)
    assert list(frame.columns) == ['A', 'B', 'C', 'D']
    assert frame.index.name == 'region'
    assert np.all(np.isfinite(frame.values)) and np.all(frame.values > 0)
    assert report.config['variants'] == ['A', 'B', 'C', 'D']
    assert report.config['final_fit'] == 'train+validation'
    assert report.outcomes[Variant.D].model.s == 0
    assert report.outcomes[Variant.C].model.beta.shape == (1, 9, 18)
    assert report.outcomes[Variant.A].predictions.n_weeks == 42


def test_run_variants_is_deterministic(bundle):
    claims, exogenous = bundle
    first = run_variants(claims, exogenous, variants=[Variant.C, Variant.D], grid_size=3,
                         grid_ratio=0.1)
    second = run_variants(claims, exogenous, variants=[Variant.C, Variant.D], grid_size=3,
                          grid_ratio=0.1, max_workers=2)
    assert first.per_region_rmse == second.per_region_rmse


def test_run_variants_drops_duplicates(bundle, caplog):
    claims, exogenous = bundle
    with caplog.at_level(logging.WARNING):
        report = run_variants(claims, exogenous, variants=[Variant.D, Variant.D], grid_size=3,
                              grid_ratio=0.1)
    assert report.variants == (Variant.D,)
    assert 'more than once' in caplog.text


def test_run_variants_level_scale(bundle):
    claims, exogenous = bundle
    report = run_variants(claims, exogenous, variants=[Variant.D], grid_size=3, grid_ratio=0.1,
                          scale=LEVEL_SCALE)
    outcome = report.outcomes[Variant.D]
    np.testing.assert_allclose(outcome.actuals.values, claims.values[:, 136:], rtol=1e-9)
    assert report.config['scale'] == 'level'


def test_run_variants_rejects_unknown_scale(bundle):
    claims, exogenous = bundle
    with pytest.raises(ValueError):
        run_variants(claims, exogenous, scale='log')


def test_run_variants_rejects_exogenous_variants_without_exogenous_lags(bundle):
    claims, exogenous = bundle
    with pytest.raises(BadLag):
        run_variants(claims, exogenous, variants=[Variant.A, Variant.D], s=0, grid_size=3)
    report = run_variants(claims, None, variants=[Variant.D], s=0, grid_size=3, grid_ratio=0.1)
    assert report.variants == (Variant.D,)


def test_run_variants_pure_var_without_exogenous():
    claims, _ = url_driven(2, weeks=90)
    report = run_variants(claims, None, variants=[Variant.D], period=1, p=1, grid_size=3)
    assert report.regions == ('Mountain', 'Pacific')


@pytest.mark.parametrize('seed', range(3))
def test_url_signal_is_found_by_url_variants(seed):
    claims, exogenous = url_driven(seed)
    report = run_variants(claims, exogenous, p=1, s=1, period=1, grid_size=5,
                          settings=SolverSettings(max_iter=5000))
    assert report.mean_rmse(Variant.A) < report.mean_rmse(Variant.B)
    assert report.mean_rmse(Variant.A) < report.mean_rmse(Variant.D)
    assert report.mean_rmse(Variant.C) < report.mean_rmse(Variant.D)


def test_exogenous_signal_median_over_seeds():
    ratios = []
    for seed in range(11):
        claims, exogenous = generated(seed, strength=1.0, noise=0.3)
        report = run_variants(claims, exogenous, variants=[Variant.C, Variant.D], p=2, s=1,
                              period=1, grid_size=5)
        ratios.append(report.mean_rmse(Variant.C) / report.mean_rmse(Variant.D))
    assert np.median(ratios) <= 1.0


def test_pure_var_is_competitive_without_exogenous_signal():
    ratios = []
    for seed in range(11):
        claims, exogenous = generated(seed, strength=0.0, noise=1.0)
        report = run_variants(claims, exogenous, p=2, s=1, period=1, grid_size=5)
        best = min(report.mean_rmse(variant) for variant in report.variants)
        ratios.append(report.mean_rmse(Variant.D) / best)
    assert np.median(ratios) <= 1.05


def test_noise_free_cv_reaches_small_penalty_end():
    claims, exogenous = url_driven(4, weeks=121, noise=0.0)
    prepared = prepare_variant(claims, exogenous, Variant.A, s=1, period=1)
    cv = cross_validate_variant(prepared, p=1, grid_size=5)
    assert cv.scores[-1] < 1e-2 * cv.scores[0]
    assert cv.best_score <= cv.scores[0]


def test_variant_design_has_only_selected_columns():
    claims, exogenous = url_driven(5, weeks=61)
    prepared = prepare_variant(claims, exogenous, Variant.A, s=1, period=1)
    problem = build_design(prepared.split.train, prepared.fit_exogenous.window(0, 20), p=1, s=1)
    exogenous_blocks = [block for block in problem.blocks if block.source == 'exogenous']
    assert exogenous_blocks
    for block in exogenous_blocks:
        assert all(label.endswith(':url') for label in block.labels)


def test_full_scale_default_grid_runs_quickly(bundle):
    claims, exogenous = bundle
    started = time.perf_counter()
    report = run_variants(claims, exogenous, grid_size=20)
    assert time.perf_counter() - started < 60.0
    assert report.to_frame().shape == (9, 4)
    assert all(len(outcome.cv.grid) == 20 for outcome in report.outcomes.values())
