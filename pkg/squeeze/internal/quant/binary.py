from enum import Enum
from typing import Union, Sequence, Tuple

import numpy as np

from squeeze.utils.errors import EmptyInput


class BinarizeMode(Enum):
    bare_sign = 'bare'
    scaled_sign = 'scaled'


class BinParams:
    r"""
    Per-row binarization scale. ``bare_sign`` always has ``alpha == 1``.
    """
    alpha: np.float32
    mode: BinarizeMode

    def __init__(self, *, alpha: float, mode: BinarizeMode):
        self.mode = BinarizeMode(mode)
        self.alpha = np.float32(1. if self.mode is BinarizeMode.bare_sign else alpha)
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {alpha}")

    def __eq__(self, other):
        if not isinstance(other, BinParams):
            return NotImplemented
        return self.mode is other.mode and self.alpha == other.alpha

    def __repr__(self):
        return f"BinParams(alpha={float(self.alpha)!r}, mode={self.mode.name})"


def sign(values: Union[np.ndarray, Sequence[float]]) -> np.ndarray:
    r"""
    ``+1`` for ``x > 0`` and ``-1`` otherwise (zero maps to ``-1``), as ``int8``
    """
    values = np.asarray(values)
    return np.where(values > 0, 1, -1).astype(np.int8)


def bin_params_for(values: np.ndarray, mode: BinarizeMode) -> BinParams:
    if mode is BinarizeMode.bare_sign:
        return BinParams(alpha=1., mode=mode)
    values = np.asarray(values, dtype=np.float64)
    return BinParams(alpha=float(np.mean(np.abs(values))), mode=mode)


def binarize_row(row: Union[np.ndarray, Sequence[float]], mode: BinarizeMode) -> Tuple[np.ndarray, BinParams]:
    r"""
    Sign codes for ``row`` and its :class:`BinParams`;
    ``scaled_sign`` sets ``alpha = mean(|row|)``.
    """
    row = np.asarray(row, dtype=np.float32).ravel()
    if row.size == 0:
        raise EmptyInput('Cannot binarize an empty row')
    return sign(row), bin_params_for(row, BinarizeMode(mode))


def debinarize(signs: np.ndarray, params: BinParams) -> np.ndarray:
    return params.alpha * np.asarray(signs, dtype=np.float32)


def binarize_matrix(w: np.ndarray, mode: BinarizeMode) -> np.ndarray:
    r"""
    Element-wise binarized value of every weight, using each row's own scale.
    This is the measurement quantizer for the activation-range salience.
    """
    w = np.asarray(w, dtype=np.float32)
    out = np.empty_like(w)
    for i in range(w.shape[0]):
        signs, params = binarize_row(w[i], mode)
        out[i] = debinarize(signs, params)
    return out
