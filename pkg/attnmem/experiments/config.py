# Copyright 2025 The attnmem authors.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

# Sweep configuration: a flat mapping read from a key=value or YAML file,
# overridden by --set key=value, validated against SCHEMA and turned into
# a SweepConfig.

import logging
import math

import attr
import jsonschema
import numpy as np
import yaml

from attnmem.common.errors import ConfigError, InvalidArgument
from attnmem.common.types import (
    AlignmentMode,
    SolverOptions,
    SweepAxis,
    SweepConfig,
    SweepMode,
    )
from attnmem.experiments.sweep import validate

log = logging.getLogger('attnmem.experiments.config')

_POSITIVE = {"type": "number", "minimum": 0, "exclusiveMinimum": True}
_NON_NEGATIVE = {"type": "number", "minimum": 0}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-04/schema#",
    "title": "sweep",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": [m.value for m in SweepMode]},
        "f_name": {"type": "string"},
        "f_param_B": _POSITIVE,
        "f_param_C": _POSITIVE,
        "f_param_r": {"type": "number", "minimum": 0, "maximum": 1},
        "axis": {"enum": [a.value for a in SweepAxis]},
        "grid": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 1,
            },
        "grid_start": {"type": "number"},
        "grid_stop": {"type": "number"},
        "grid_num": {"type": "integer", "minimum": 1},
        "grid_scale": {"enum": ["log", "linear"]},
        "n": {"type": "integer", "minimum": 2},
        "p": _POSITIVE,
        "c": _POSITIVE,
        "gamma": _POSITIVE,
        "snr": _NON_NEGATIVE,
        "snr_scales_with_c": {"type": "boolean"},
        "alignment": {"enum": [a.value for a in AlignmentMode]},
        "trials": {"type": "integer", "minimum": 0},
        "master_seed": {"type": "integer", "minimum": 0},
        "quad_nodes": {"type": "integer", "minimum": 64},
        "tol": _POSITIVE,
        "max_iter": {"type": "integer", "minimum": 1},
        "damping": {
            "type": "number", "minimum": 0, "exclusiveMinimum": True,
            "maximum": 1,
            },
        "fd_step_rel": _POSITIVE,
        "workers": {"type": "integer", "minimum": 1},
        },
    }

_GRID_RANGE = ('grid_start', 'grid_stop', 'grid_num', 'grid_scale')
_SOLVER_KEYS = ('tol', 'max_iter', 'damping', 'fd_step_rel')
# enum-valued keys; YAML would read alignment=null as None
_STRING_KEYS = ('mode', 'f_name', 'axis', 'grid_scale', 'alignment')


def _coerce(value):
    # YAML 1.1 reads 1e-2 as a string
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(value, list):
        return [_coerce(v) for v in value]
    return value


def parse_value(text):
    try:
        return _coerce(yaml.safe_load(text))
    except yaml.YAMLError:
        return text.strip()


def _normalize(key, value):
    if key in _STRING_KEYS and value is None:
        return 'null'
    return value


def _split(line, where):
    key, sep, value = line.partition('=')
    key = key.strip()
    if not sep or not key:
        raise ConfigError("{}: expected key=value, got {!r}".format(
            where, line))
    if key in _STRING_KEYS:
        return key, value.strip()
    return key, parse_value(value)


def parse_key_values(text, source='<config>'):
    config = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, value = _split(line, '{}:{}'.format(source, lineno))
        config[key] = value
    return config


def load_config_file(path):
    path = str(path)
    try:
        with open(path) as fp:
            text = fp.read()
    except OSError as e:
        raise ConfigError("cannot read {}: {}".format(path, e))
    if path.endswith(('.yaml', '.yml')):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError("cannot parse {}: {}".format(path, e))
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError("{} must hold a flat mapping".format(path))
        return {
            str(k): _normalize(str(k), _coerce(v)) for k, v in data.items()
            }
    return parse_key_values(text, path)


def parse_overrides(overrides):
    """--set key=value arguments as a mapping, later ones winning."""
    return dict(_split(item, '--set') for item in overrides or ())


def validate_mapping(mapping):
    try:
        jsonschema.validate(mapping, SCHEMA)
    except jsonschema.ValidationError as e:
        key = e.path[0] if e.path else None
        if key is None and e.validator == 'additionalProperties':
            unknown = set(mapping) - set(SCHEMA['properties'])
            key = ', '.join(sorted(unknown))
        log.debug("config rejected: %s", e.message)
        raise ConfigError("invalid config: {}".format(e.message), key)


def build_grid(mapping):
    if 'grid' in mapping:
        if any(k in mapping for k in _GRID_RANGE):
            raise ConfigError(
                "give either grid or grid_start/grid_stop, not both", 'grid')
        return [float(x) for x in mapping['grid']]
    if 'grid_start' not in mapping or 'grid_stop' not in mapping:
        raise ConfigError("no axis grid configured", 'grid')
    start, stop = mapping['grid_start'], mapping['grid_stop']
    num = mapping.get('grid_num', 30)
    if mapping.get('grid_scale', 'log') == 'linear':
        return [float(x) for x in np.linspace(start, stop, num)]
    if start <= 0 or stop <= 0:
        raise ConfigError("log grids need positive ends", 'grid_start')
    return [float(x) for x in np.logspace(
        math.log10(start), math.log10(stop), num)]


def _dimensions(mapping):
    defaults = attr.fields(SweepConfig)
    n = mapping.get('n', defaults.n.default)
    if 'c' not in mapping:
        return n, float(mapping.get('p', defaults.p.default))
    p = mapping['c'] * n
    if 'p' in mapping and not math.isclose(mapping['p'], p, rel_tol=1e-9):
        raise ConfigError(
            "p={} disagrees with c={} and n={}".format(
                mapping['p'], mapping['c'], n), 'c')
    return n, float(p)


def build_config(mapping):
    validate_mapping(mapping)
    n, p = _dimensions(mapping)
    f_params = {
        key[len('f_param_'):]: float(value)
        for key, value in mapping.items() if key.startswith('f_param_')
        }
    kw = dict(
        mode=SweepMode(mapping.get('mode', 'theory-attention')),
        f_name=mapping.get('f_name', 'tanh'),
        f_params=f_params,
        axis=SweepAxis(mapping.get('axis', 'gamma')),
        axis_grid=build_grid(mapping),
        n=n,
        p=p,
        alignment=AlignmentMode(mapping.get('alignment', 'null')),
        )
    for key in 'gamma', 'snr':
        if key in mapping:
            kw[key] = float(mapping[key])
    if 'snr_scales_with_c' in mapping:
        kw['snr_scales_with_c'] = mapping['snr_scales_with_c']
    for key in 'trials', 'master_seed', 'quad_nodes', 'workers':
        if key in mapping:
            kw[key] = int(mapping[key])
    try:
        kw['solver'] = SolverOptions(**{
            key: mapping[key] for key in _SOLVER_KEYS if key in mapping})
        config = SweepConfig(**kw)
        validate(config)
    except InvalidArgument as e:
        raise ConfigError(str(e))
    return config


def load_config(path=None, overrides=(), base=None):
    """Merge base, the file at path and --set overrides into a SweepConfig."""
    mapping = dict(base or {})
    if path is not None:
        mapping.update(load_config_file(path))
    mapping.update(parse_overrides(overrides))
    return build_config(mapping)
