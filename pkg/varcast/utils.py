"""Helper functions."""
from typing import Any, Callable


def nullable_convert(value: Any, func: Callable[[Any], Any]) -> Any:
    """Convert a value given a conversion function, while silently handling an input of None
    or the string 'none'.
    """
    if value is None or (isinstance(value, str) and value.strip().lower() == 'none'):
        return None
    else:
        return func(value)


def parse_bool(value: Any) -> bool:
    """Return the boolean represented by value.

    Accepts booleans and the strings true/false, yes/no, on/off and 1/0 (case insensitive).
    Raise a ValueError for anything else.
    """
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in {'true', 'yes', 'on', '1'}:
        return True
    elif text in {'false', 'no', 'off', '0'}:
        return False
    raise ValueError(f'invalid boolean ("{value}")')


def parse_list(value: Any) -> list[str]:
    """Split a comma-separated string into a list of stripped, non-empty items.

    >>> parse_list('A, B,,C')
    ['A', 'B', 'C']
    """
    if isinstance(value, (list, tuple)):
        return [str(item).strip() for item in value if str(item).strip()]
    return [item.strip() for item in str(value).split(',') if item.strip()]
