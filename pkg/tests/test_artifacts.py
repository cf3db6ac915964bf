import json

import numpy as np
import pandas as pd
import pytest

from varcast.artifacts import (ArtifactWriter, write_cv, write_forecast,
                               write_sparsity)
from varcast.evaluation import CvResult
from varcast.models.common import Variant
from varcast.models.series import TimeIndex
from varcast.models.varx import VarxModel


def small_pattern():
    theta = np.array([[[0.0, -2.0], [0.5, 0.0]]])
    beta = np.array([[[1.5], [0.0]]])
    model = VarxModel(theta, beta, ('Pacific', 'Mountain'), ('Pacific:url',), 0.0,
                      np.zeros(2), np.zeros(3), Variant.A)
    return model.sparsity_pattern()


def test_writer_removes_partial_outputs(tmp_path):
    with pytest.raises(RuntimeError):
        with ArtifactWriter(tmp_path / 'out') as writer:
            written = writer.write_json('first.json', {'a': 1})
            assert written.exists()
            raise RuntimeError('boom')
    assert not (tmp_path / 'out' / 'first.json').exists()


def test_writer_keeps_outputs_on_success(tmp_path):
    with ArtifactWriter(tmp_path) as writer:
        path = writer.write_json('record.json', {'b': [1, 2], 'a': None})
    assert json.loads(path.read_text()) == {'a': None, 'b': [1, 2]}
    assert path.read_text().index('"a"') < path.read_text().index('"b"')


@pytest.mark.parametrize('name', ['', '.', '..', 'sub/file.csv', '../escape.csv'])
def test_writer_rejects_nested_names(tmp_path, name):
    with pytest.raises(ValueError):
        ArtifactWriter(tmp_path).path(name)


def test_write_cv_marks_selection(tmp_path):
    cv = CvResult((1.0, 0.5, 0.25), (3.0, 2.0, 2.5), 0.5)
    frame = pd.read_csv(write_cv(ArtifactWriter(tmp_path), cv))
    assert list(frame.columns) == ['lambda', 'mse', 'selected']
    assert frame['selected'].tolist() == [False, True, False]
    assert frame['lambda'].tolist() == [1.0, 0.5, 0.25]


def test_write_sparsity_csv_in_canonical_order(tmp_path):
    paths = write_sparsity(ArtifactWriter(tmp_path), small_pattern())
    assert [path.name for path in paths] == ['theta_lag1.csv', 'beta_lag1.csv']
    theta = pd.read_csv(paths[0], index_col='region')
    assert list(theta.index) == ['Mountain', 'Pacific']
    assert theta.loc['Pacific', 'Mountain'] == 2.0
    beta = pd.read_csv(paths[1], index_col='region')
    assert beta.loc['Pacific', 'Pacific:url'] == 1.5


def test_write_sparsity_svg_is_reproducible(tmp_path):
    first = write_sparsity(ArtifactWriter(tmp_path / 'a'), small_pattern(), svg=True)
    second = write_sparsity(ArtifactWriter(tmp_path / 'b'), small_pattern(), svg=True)
    svgs = [path for path in first if path.suffix == '.svg']
    assert [path.name for path in svgs] == ['theta_lag1.svg', 'beta_lag1.svg']
    for one, other in zip(first, second):
        assert one.read_bytes() == other.read_bytes()


def test_write_forecast_rows(tmp_path):
    index = TimeIndex.from_week('2014-W10', 2)
    forecasts = np.array([[1.0, 2.0], [3.0, 4.0]])
    path = write_forecast(ArtifactWriter(tmp_path), ('Pacific', 'Mountain'), forecasts, index,
                          levels=forecasts + 100)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ['week', 'horizon', 'region', 'forecast', 'level']
    assert frame['horizon'].tolist() == [1, 1, 2, 2]
    assert frame['region'].tolist() == ['Pacific', 'Mountain', 'Pacific', 'Mountain']
    assert frame['level'].tolist() == [101.0, 103.0, 102.0, 104.0]
    assert frame['week'][0] == index.week_ending(0).isoformat()
