"""
# Weight salience

* ``V``: Hessian salience, ``w_ij^2 / [H^-1]_jj^2``
* ``B``: change of the output channel's activation range over calibration tokens
  when ``w_ij`` alone is replaced by its binarized value
* ``M = V + λB``: the combined metric the salient mask is selected on
"""
from enum import Enum
from typing import Callable, Dict

import numpy as np

from squeeze.internal.store.container import Tensor, TensorContainer
from squeeze.internal.quant.uniform import round_half_away
from squeeze.utils.errors import DimensionMismatch, NonPositiveDiagonal, ShapeMismatch

DEFAULT_LAMBDA = 3e-4
DEFAULT_RATIO = 0.2


class RangeMode(Enum):
    raw = 'raw'
    absolute = 'absolute'


def compute_v(w: np.ndarray, hinv_diag: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    hinv_diag = np.asarray(hinv_diag, dtype=np.float64).ravel()
    if w.ndim != 2 or hinv_diag.shape[0] != w.shape[1]:
        raise DimensionMismatch(f"Inverse Hessian diagonal of length {hinv_diag.shape[0]} "
                                f"does not match weights of shape {list(w.shape)}")
    if np.any(hinv_diag <= 0):
        bad = int(np.argmax(hinv_diag <= 0))
        raise NonPositiveDiagonal(f"Inverse Hessian diagonal entry {bad} is {hinv_diag[bad]}")
    return w ** 2 / (hinv_diag ** 2)[None, :]


def _token_range(y: np.ndarray, mode: RangeMode) -> np.ndarray:
    if mode is RangeMode.absolute:
        y = np.abs(y)
    return y.max(axis=0) - y.min(axis=0)


def compute_b(w: np.ndarray, x: np.ndarray,
              quant_fn: Callable[[np.ndarray], np.ndarray],
              range_mode: RangeMode = RangeMode.raw) -> np.ndarray:
    r"""
    Activation-range salience.

    ``quant_fn`` maps the whole weight matrix to its element-wise binarized values.
    Perturbing ``w_ij`` only changes output channel ``i``, so
    ``Y_hat[:, i] = Y[:, i] + (w_hat_ij - w_ij) X[:, j]`` is evaluated for a whole row at once.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 2 or x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise DimensionMismatch(f"Calibration activations of shape {list(np.shape(x))} do not match "
                                f"weights of shape {list(np.shape(w))}")
    if x.shape[0] == 0:
        raise DimensionMismatch('Activation salience needs at least one calibration token')

    w_hat = np.asarray(quant_fn(w), dtype=np.float64)
    if w_hat.shape != w.shape:
        raise DimensionMismatch(f"Measurement quantizer returned shape {list(w_hat.shape)} "
                                f"for weights of shape {list(w.shape)}")
    delta = w_hat - w
    y = x @ w.T

    mode = RangeMode(range_mode)
    b = np.empty(w.shape, dtype=np.float64)
    for i in range(w.shape[0]):
        b[i] = _token_range(y[:, i][:, None] + x * delta[i][None, :], mode)
    return b


def combine_pbar(v: np.ndarray, b: np.ndarray, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if v.shape != b.shape:
        raise ShapeMismatch(f"Salience maps differ in shape: V {list(v.shape)}, B {list(b.shape)}")
    if not lam >= 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    return v + lam * b


class SalienceMask:
    r"""
    Layer-wide salient selection. ``mask`` is ``True`` where a weight keeps its k-bit code.
    """

    def __init__(self, *, mask: np.ndarray, ratio_requested: float, count_selected: int):
        self.mask = mask
        self.ratio_requested = ratio_requested
        self.count_selected = count_selected

    def __repr__(self):
        return f"<SalienceMask {self.count_selected}/{self.mask.size} ratio={self.ratio_requested}>"


def salient_count(ratio: float, total: int) -> int:
    return int(np.clip(round_half_away(ratio * total), 0, total))


def select_salient(m: np.ndarray, ratio: float = DEFAULT_RATIO) -> SalienceMask:
    r"""
    Top ``round(ratio * total)`` entries of ``m``; equal values go to the lower
    row-major index.
    """
    if not 0 <= ratio <= 1:
        raise ValueError(f"Salient ratio must lie in [0, 1], got {ratio}")
    m = np.asarray(m, dtype=np.float64)
    count = salient_count(ratio, m.size)
    order = np.argsort(-m.ravel(), kind='stable')
    flat = np.zeros(m.size, dtype=bool)
    flat[order[:count]] = True
    return SalienceMask(mask=flat.reshape(m.shape), ratio_requested=ratio, count_selected=count)


class SalienceMaps:
    v: np.ndarray
    b: np.ndarray
    m: np.ndarray
    lambda_used: float

    def __init__(self, *, v: np.ndarray, b: np.ndarray, lambda_used: float, m: np.ndarray = None):
        self.v = v
        self.b = b
        self.lambda_used = lambda_used
        self.m = combine_pbar(v, b, lambda_used) if m is None else m

    def summary(self) -> Dict[str, Dict[str, float]]:
        return {key: {'mean': float(np.mean(value)),
                      'max': float(np.max(value)),
                      'min': float(np.min(value))}
                for key, value in (('v', self.v), ('b', self.b))}

    def to_container(self, layer: str, container: TensorContainer = None) -> TensorContainer:
        r"""
        Adds ``<layer>.V``, ``<layer>.B`` and ``<layer>.M`` tensors
        """
        if container is None:
            container = TensorContainer()
        for suffix, value in (('V', self.v), ('B', self.b), ('M', self.m)):
            container.add(Tensor(name=f'{layer}.{suffix}', data=value.astype(np.float32)))
        return container
