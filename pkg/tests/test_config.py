from pathlib import Path

import pytest

from varcast.config import RunConfig, load_config, parse_config_file
from varcast.errors import ConfigError
from varcast.models.common import Variant


def write_config(tmp_path, text):
    path = tmp_path / 'run.conf'
    path.write_text(text)
    return path


def test_defaults_come_from_settings():
    config = load_config()
    assert config.p == 2
    assert config.s == 1
    assert config.period == 52
    assert config.variants == (Variant.A, Variant.B, Variant.C, Variant.D)
    assert config.scale == 'diff'
    assert config.solver_settings.max_iter == config.max_iter


def test_file_overrides_settings(tmp_path):
    path = write_config(tmp_path, """
        # lag orders
        p = 3
        s = 0   # pure VAR
        variants = d, c
        standardize = yes
        claims = data/claims.csv
        out = /tmp/results
    """)
    config = load_config(path)
    assert (config.p, config.s) == (3, 0)
    assert config.variants == (Variant.D, Variant.C)
    assert config.standardize is True
    assert config.claims == tmp_path / 'data' / 'claims.csv'
    assert config.out == Path('/tmp/results')


def test_overrides_win_over_file(tmp_path):
    path = write_config(tmp_path, 'p = 3\ngrid_size = 5\n')
    config = load_config(path, {'p': 1, 'grid_size': None, 'scale': 'LEVEL'})
    assert config.p == 1
    assert config.grid_size == 5
    assert config.scale == 'level'


def test_none_input_path(tmp_path):
    path = write_config(tmp_path, 'regions = none\ntotals =\n')
    values = parse_config_file(path)
    assert values['regions'] is None
    assert values['totals'] is None


@pytest.mark.parametrize('text', [
    'unknown = 1\n',
    'p = two\n',
    'p\n',
    'variants = A, E\n',
    'refit = maybe\n',
])
def test_invalid_file(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match='cannot read'):
        load_config(tmp_path / 'absent.conf')


@pytest.mark.parametrize('changes', [
    {'p': 0}, {'s': -1}, {'period': 0}, {'grid_size': 1}, {'grid_ratio': 1.0},
    {'epsilon': 0.0}, {'scale': 'log'}, {'variants': ()}, {'max_workers': 0},
])
def test_invalid_values(changes):
    with pytest.raises(ConfigError):
        RunConfig(**changes)


def test_unknown_override():
    with pytest.raises(ConfigError, match='unknown'):
        load_config(overrides={'lambda': 0.1})


def test_require_inputs(tmp_path):
    claims = tmp_path / 'claims.csv'
    claims.write_text('week,series,value\n')
    config = RunConfig(claims=claims, query=tmp_path / 'absent.csv')
    config.require_inputs('claims')
    with pytest.raises(ConfigError, match='not found'):
        config.require_inputs('query')
    with pytest.raises(ConfigError, match='no clicks file'):
        config.require_inputs('clicks')


def test_as_record_is_json_compatible():
    record = RunConfig(claims=Path('claims.csv'), variants=(Variant.B,)).as_record()
    assert record['claims'] == 'claims.csv'
    assert record['variants'] == ['B']
    assert record['query'] is None
    assert record['out'] == 'out'
