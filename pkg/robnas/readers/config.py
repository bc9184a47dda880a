"""
Reading experiment configs (see :mod:`data.experiment <robnas.data.experiment>` for the layout).

.. autofunction:: read_config
.. autofunction:: config_from_dict
.. autofunction:: config_to_dict
.. autofunction:: apply_overrides
"""

import dataclasses
import enum
import json
import tomllib
from pathlib import Path
from typing import Any, Dict, Mapping, Union

from robnas.data.cell import Genotype
from robnas.data.experiment import SECTIONS, ExperimentConfig
from robnas.data.network import NetworkSpec
from robnas.errors import NotFoundError, ParseError, ValidationError


def read_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Reads ``*.toml`` or ``*.json`` config.

    Raises:
        NotFoundError: if the file doesn't exist
        ParseError: if it isn't valid TOML/JSON
        ValidationError: for unknown keys (named by their dotted path) or invalid values
    """

    path = Path(path)
    if not path.is_file():
        raise NotFoundError(f"Config not found: {path}")
    text = path.read_text(encoding='utf-8')

    if path.suffix == '.toml':
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ParseError(f"Invalid TOML in {path}: {e}") from None
    elif path.suffix == '.json':
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"Invalid JSON in {path}: {e.msg}", line_no=e.lineno) from None
    else:
        raise ValidationError(f"Config should be .toml or .json, got {path.name}")

    return config_from_dict(data)


def config_from_dict(data: Mapping[str, Any], cls: type = ExperimentConfig, prefix: str = ''):
    """
    Builds config (or, with ``cls``, one of its sections) from plain data, recursively.
    """

    if not isinstance(data, Mapping):
        raise ValidationError(f"Config section {prefix.rstrip('.') or '<root>'} should be a table, got {data!r}")

    names = {f.name for f in dataclasses.fields(cls)}
    sections = SECTIONS.get(cls, {})
    values: Dict[str, Any] = {}
    for key, value in data.items():
        dotted = f'{prefix}{key}'
        if key not in names:
            raise ValidationError(f"Unknown config key {dotted!r}")
        if key in sections and value is not None:
            value = config_from_dict(value, sections[key], f'{dotted}.')
        elif isinstance(value, list):
            value = tuple(value)
        values[key] = value

    try:
        if cls is NetworkSpec:
            return NetworkSpec.from_dict(values)
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"Config section {prefix.rstrip('.') or '<root>'}: {e}") from None


def _plain(value):
    if isinstance(value, NetworkSpec):
        return value.to_dict()
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, Genotype):
        return str(value)
    if isinstance(value, (tuple, list)):
        return [_plain(item) for item in value]
    return value


def config_to_dict(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Plain-data form of a config, readable back by :func:`config_from_dict`. Written next to
    every run's artifacts, so the run can be repeated.
    """
    return _plain(config)


def apply_overrides(config, overrides: Mapping[str, Any]):
    """
    Copy of ``config`` with values replaced by dotted path (``{'search.budget': 10}``), as the
    command line flags do. ``None`` values are skipped.
    """

    nested: Dict[str, Dict[str, Any]] = {}
    direct: Dict[str, Any] = {}
    for path, value in overrides.items():
        if value is None:
            continue
        head, _, rest = path.partition('.')
        if rest:
            nested.setdefault(head, {})[rest] = value
        else:
            direct[head] = value

    for head, inner in nested.items():
        direct[head] = apply_overrides(getattr(config, head), inner)
    if not direct:
        return config
    try:
        return dataclasses.replace(config, **direct)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"Invalid override: {e}") from None
