from typing import Any

import pytest

from varcast.utils import nullable_convert, parse_bool, parse_list


def convert_value(value: Any):
    return value * 2


def test_nullable_convert_None():
    value = None
    assert nullable_convert(value, lambda x: x) == value


def test_nullable_convert_none_string():
    assert nullable_convert(' None ', int) is None


def test_nullable_convert_convert(mocker):
    mocked_convert = mocker.patch(f'{__name__}.convert_value')
    value = 2
    nullable_convert(value, convert_value)
    mocked_convert.assert_called_once_with(value)


@pytest.mark.parametrize('text', ['true', 'Yes', 'ON', '1'])
def test_parse_bool_true(text):
    assert parse_bool(text) is True


@pytest.mark.parametrize('text', ['false', 'No', 'off', '0'])
def test_parse_bool_false(text):
    assert parse_bool(text) is False


def test_parse_bool_invalid():
    with pytest.raises(ValueError):
        parse_bool('maybe')


def test_parse_list():
    assert parse_list('A, B,,C ') == ['A', 'B', 'C']
    assert parse_list(('C', ' D')) == ['C', 'D']
