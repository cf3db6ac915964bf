import json

import numpy as np
import pytest

from varcast.data.regions import RegionMap, build_exogenous
from varcast.data.sources import WeeklyCsvSource
from varcast.data.synthetic import (SyntheticSpec, exogenous_labels,
                                    generate_synthetic_varx, response_labels,
                                    simulate_varx, write_fixture_bundle)
from varcast.errors import InvalidSpec
from varcast.models.common import REGIONS
from varcast.models.series import seasonal_difference
from varcast.models.varx import VarxModel, companion_spectral_radius


def test_default_shapes_and_labels():
    data = generate_synthetic_varx(SyntheticSpec())
    assert data.y.values.shape == (9, 178)
    assert data.x.values.shape == (18, 178)
    assert data.y.labels == REGIONS
    assert data.x.labels[0] == 'Mid-Atlantic:query'
    assert data.x.labels[-1] == 'South Atlantic:url'
    assert data.theta.shape == (2, 9, 9)
    assert data.beta.shape == (1, 9, 18)


def test_generic_labels():
    assert response_labels(3) == ('y1', 'y2', 'y3')
    assert exogenous_labels(3, 2) == ('x1', 'x2')


def test_same_seed_same_sample():
    first = generate_synthetic_varx(SyntheticSpec(seed=7))
    second = generate_synthetic_varx(SyntheticSpec(seed=7))
    assert first.y.equals(second.y)
    assert first.x.equals(second.x)
    np.testing.assert_array_equal(first.theta, second.theta)
    assert not first.y.equals(generate_synthetic_varx(SyntheticSpec(seed=8)).y)


@pytest.mark.parametrize('radius', [0.5, 0.8, 0.95])
def test_spectral_radius_is_rescaled(radius):
    data = generate_synthetic_varx(SyntheticSpec(spectral_radius=radius, seed=1))
    assert companion_spectral_radius(data.theta) == pytest.approx(radius, rel=1e-9)


def test_sparsity_controls_nonzero_fraction():
    data = generate_synthetic_varx(SyntheticSpec(k=20, m=20, sparsity=0.1, seed=2))
    fraction = np.count_nonzero(data.theta) / data.theta.size
    assert 0.03 < fraction < 0.2


def test_zero_exogenous_strength_gives_pure_var():
    data = generate_synthetic_varx(SyntheticSpec(exogenous_strength=0.0, seed=3))
    assert not data.beta.any()


def test_zero_dynamics_give_zero_response():
    x = np.random.default_rng(0).standard_normal((2, 30))
    y = simulate_varx(np.zeros((2, 3, 3)), np.zeros((1, 3, 2)), x, np.zeros((3, 30)))
    assert not y.any()


def test_zero_dynamics_pass_noise_through():
    noise = np.random.default_rng(1).standard_normal((3, 30))
    y = simulate_varx(np.zeros((2, 3, 3)), np.zeros((1, 3, 2)), np.zeros((2, 30)), noise)
    np.testing.assert_array_equal(y[:, 2:], noise[:, 2:])


@pytest.mark.parametrize('changes', [
    {'k': 0}, {'s': 0}, {'sparsity': 0.0}, {'sparsity': 1.5}, {'spectral_radius': 1.0},
    {'spectral_radius': 0.0}, {'noise_std': -1.0}, {'exogenous_strength': -0.1},
])
def test_invalid_spec(changes):
    with pytest.raises(InvalidSpec):
        SyntheticSpec(**changes)


def test_fixture_bundle_needs_regions(tmp_path):
    with pytest.raises(InvalidSpec):
        write_fixture_bundle(SyntheticSpec(k=3, m=2), tmp_path)


def test_fixture_bundle_needs_weeks(tmp_path):
    with pytest.raises(InvalidSpec):
        write_fixture_bundle(SyntheticSpec(weeks=53), tmp_path)


def test_fixture_bundle_reproduces_sample(tmp_path):
    spec = SyntheticSpec(seed=4)
    paths = write_fixture_bundle(spec, tmp_path)
    for name in ('claims', 'query', 'clicks', 'totals', 'regions', 'truth', 'record'):
        assert paths[name].exists()

    claims = WeeklyCsvSource(paths['claims']).load()
    assert claims.n_weeks == 178
    differenced, _ = seasonal_difference(claims, 52)
    sample = generate_synthetic_varx(SyntheticSpec(seed=4, weeks=126))
    np.testing.assert_allclose(differenced.values, sample.y.values, atol=1e-6)

    exogenous = build_exogenous(
        WeeklyCsvSource(paths['query']).load(), WeeklyCsvSource(paths['clicks']).load(),
        WeeklyCsvSource(paths['totals']).load(), RegionMap.from_csv(paths['regions']))
    differenced_x, _ = seasonal_difference(exogenous, 52)
    assert differenced_x.labels == sample.x.labels
    np.testing.assert_allclose(differenced_x.values, sample.x.values, atol=1e-8)

    truth = VarxModel.load(paths['truth'])
    np.testing.assert_array_equal(truth.theta, sample.theta)
    assert truth.seasonal.period == 52

    record = json.loads(paths['record'].read_text())
    assert record['spec']['seed'] == 4
    assert record['files']['claims'] == 'claims.csv'
