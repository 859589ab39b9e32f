from pathlib import Path
from typing import Dict, Union

import yaml

from squeeze.internal import util
from squeeze.internal.quant.binary import BinarizeMode
from squeeze.internal.quant.packing import Supervision
from squeeze.internal.quant.uniform import MIN_BITS, MAX_BITS
from squeeze.internal.salience.hessian import DEFAULT_DAMPING
from squeeze.internal.salience.pbar import RangeMode, DEFAULT_LAMBDA, DEFAULT_RATIO
from squeeze.utils.errors import ConfigsError

_ENUMS = {
    'supervision': Supervision,
    'binarize_mode': BinarizeMode,
    'range_mode': RangeMode,
}

_BINARIZE_ALIASES = {'bare_sign': 'bare', 'scaled_sign': 'scaled'}


class QuantConfig:
    r"""
    Settings of a quantization run.

    ``lambda`` is a keyword in Python, so the attribute is ``lam``;
    dictionaries and YAML files use ``lambda``.
    """

    def __init__(self, *,
                 k_high: int = 4,
                 salient_ratio: float = DEFAULT_RATIO,
                 lam: float = DEFAULT_LAMBDA,
                 supervision: Union[Supervision, str] = Supervision.fias,
                 binarize_mode: Union[BinarizeMode, str] = BinarizeMode.scaled_sign,
                 compensation: bool = False,
                 damping_fraction: float = DEFAULT_DAMPING,
                 range_mode: Union[RangeMode, str] = RangeMode.raw,
                 per_layer_params: bool = False,
                 staged: bool = True):
        self.k_high = k_high
        self.salient_ratio = salient_ratio
        self.lam = lam
        self.supervision = _to_enum('supervision', supervision)
        self.binarize_mode = _to_enum('binarize_mode', binarize_mode)
        self.compensation = compensation
        self.damping_fraction = damping_fraction
        self.range_mode = _to_enum('range_mode', range_mode)
        self.per_layer_params = per_layer_params
        self.staged = staged

        self.validate()

    def validate(self):
        if isinstance(self.k_high, bool) or not isinstance(self.k_high, int) or \
                not MIN_BITS <= self.k_high <= MAX_BITS:
            raise ConfigsError(f"k_high must be an integer in [{MIN_BITS}, {MAX_BITS}], got {self.k_high!r}")
        if not _is_number(self.salient_ratio) or not 0 <= self.salient_ratio <= 1:
            raise ConfigsError(f"salient_ratio must lie in [0, 1], got {self.salient_ratio!r}")
        if not _is_number(self.lam) or not self.lam >= 0:
            raise ConfigsError(f"lambda must be non-negative, got {self.lam!r}")
        if not _is_number(self.damping_fraction) or not self.damping_fraction >= 0:
            raise ConfigsError(f"damping_fraction must be non-negative, got {self.damping_fraction!r}")
        for key in ('compensation', 'per_layer_params', 'staged'):
            if not isinstance(getattr(self, key), bool):
                raise ConfigsError(f"{key} must be a boolean, got {getattr(self, key)!r}")

    @classmethod
    def from_dict(cls, data: Dict[str, any]):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigsError(f"Configurations must be a mapping, got {type(data).__name__}")
        params = {}
        for key, value in data.items():
            if key == 'lambda':
                key = 'lam'
            if key not in _KEYS:
                raise ConfigsError(f"Unknown configuration key: {key}")
            if key in _FLOAT_KEYS and isinstance(value, str):
                # YAML reads exponents without a dot (3e-4) as strings
                try:
                    value = float(value)
                except ValueError:
                    raise ConfigsError(f"{key} must be a number, got {value!r}")
            params[key] = value
        return cls(**params)

    def to_dict(self):
        return {
            'k_high': self.k_high,
            'salient_ratio': self.salient_ratio,
            'lambda': self.lam,
            'supervision': self.supervision.value,
            'binarize_mode': self.binarize_mode.value,
            'compensation': self.compensation,
            'damping_fraction': self.damping_fraction,
            'range_mode': self.range_mode.value,
            'per_layer_params': self.per_layer_params,
            'staged': self.staged,
        }

    def replace(self, **kwargs) -> 'QuantConfig':
        r"""
        A copy with some settings changed
        """
        data = self.to_dict()
        data['lam'] = data.pop('lambda')
        data.update(kwargs)
        return QuantConfig(**data)

    def __eq__(self, other):
        if not isinstance(other, QuantConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"QuantConfig({self.to_dict()})"


_KEYS = {'k_high', 'salient_ratio', 'lam', 'supervision', 'binarize_mode', 'compensation',
         'damping_fraction', 'range_mode', 'per_layer_params', 'staged'}
_FLOAT_KEYS = {'salient_ratio', 'lam', 'damping_fraction'}


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _to_enum(key: str, value):
    enum = _ENUMS[key]
    if isinstance(value, enum):
        return value
    if key == 'binarize_mode':
        value = _BINARIZE_ALIASES.get(value, value)
    try:
        return enum(value)
    except ValueError:
        raise ConfigsError(f"Invalid {key}: {value!r}, expected one of {[e.value for e in enum]}")


def load_config(path: Union[str, Path], overrides: Dict[str, any] = None) -> QuantConfig:
    r"""
    Read a YAML configuration file; ``overrides`` take precedence over file values
    """
    try:
        data = util.yaml_load(util.read_bytes(path).decode('utf-8'))
    except (UnicodeDecodeError, yaml.YAMLError) as e:
        raise ConfigsError(f"{path}: cannot parse configurations: {e}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigsError(f"{path}: configurations must be a mapping")
    data = dict(data)
    data.update(overrides or {})
    return QuantConfig.from_dict(data)
