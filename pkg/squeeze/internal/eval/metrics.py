from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from squeeze.internal.quant.packed_model import PackedModel
from squeeze.internal.quant.packing import unpack_mixed
from squeeze.internal.store.model_spec import Model, layer_forward
from squeeze.utils.errors import DimensionMismatch, EmptySample

DEFAULT_BINS = 256
DEFAULT_SMOOTHING = 1e-10
DEFAULT_OUTLIER_FACTOR = 4.


def layer_output_error(w: np.ndarray, w_hat: np.ndarray, x: np.ndarray) -> Dict[str, float]:
    r"""
    ``mse`` and ``max_abs`` of ``X W_hat^T`` against ``X W^T``
    """
    w = np.asarray(w, dtype=np.float64)
    w_hat = np.asarray(w_hat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != w_hat.shape or w.ndim != 2 or x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise DimensionMismatch(f"Weights {list(w.shape)}, {list(w_hat.shape)} and inputs "
                                f"{list(x.shape)} are not consistent")
    diff = x @ w.T - x @ w_hat.T
    return {'mse': float(np.mean(diff ** 2)), 'max_abs': float(np.max(np.abs(diff)))}


class HistogramSpec:
    r"""
    Binning for activation distributions.
    When ``range`` is ``None`` the bins span both compared samples.
    """

    def __init__(self, *, bin_count: int = DEFAULT_BINS,
                 range: Optional[Tuple[float, float]] = None,
                 smoothing: float = DEFAULT_SMOOTHING):
        if bin_count <= 0:
            raise ValueError(f"bin_count must be positive, got {bin_count}")
        if smoothing < 0:
            raise ValueError(f"smoothing must be non-negative, got {smoothing}")
        self.bin_count = bin_count
        self.range = range
        self.smoothing = smoothing

    def to_dict(self):
        return {'bin_count': self.bin_count,
                'range': list(self.range) if self.range is not None else 'auto',
                'smoothing': self.smoothing}


def activation_kl(sample_fp: np.ndarray, sample_q: np.ndarray, spec: HistogramSpec = None) -> float:
    r"""
    ``D_KL(p || q)`` of the binned full-precision (``p``) and quantized (``q``) activations
    """
    if spec is None:
        spec = HistogramSpec()
    sample_fp = np.asarray(sample_fp, dtype=np.float64).ravel()
    sample_q = np.asarray(sample_q, dtype=np.float64).ravel()
    if sample_fp.size == 0 or sample_q.size == 0:
        raise EmptySample('Cannot compare activation distributions of an empty sample')

    if spec.range is None:
        lo = min(sample_fp.min(), sample_q.min())
        hi = max(sample_fp.max(), sample_q.max())
    else:
        lo, hi = spec.range
    if hi <= lo:
        hi = lo + 1.

    p, _ = np.histogram(sample_fp, bins=spec.bin_count, range=(lo, hi))
    q, _ = np.histogram(sample_q, bins=spec.bin_count, range=(lo, hi))
    p = p / p.sum() + spec.smoothing
    q = q / q.sum() + spec.smoothing

    return max(float(stats.entropy(p, q)), 0.)


def range_stats(y: np.ndarray, *, outlier_factor: float = DEFAULT_OUTLIER_FACTOR) -> pd.DataFrame:
    r"""
    Per output channel ``min``, ``max``, ``range`` and the number of values
    further than ``outlier_factor * IQR`` from the channel median
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] == 0:
        raise DimensionMismatch(f"Expected N×d_out outputs with N ≥ 1, got shape {list(y.shape)}")
    lo = y.min(axis=0)
    hi = y.max(axis=0)
    median = np.median(y, axis=0)
    q1, q3 = np.percentile(y, [25, 75], axis=0)
    outliers = np.count_nonzero(np.abs(y - median[None, :]) > outlier_factor * (q3 - q1)[None, :], axis=0)

    return pd.DataFrame({'channel': np.arange(y.shape[1]),
                         'min': lo, 'max': hi, 'range': hi - lo,
                         'outlier_count': outliers.astype(np.int64)})


def forward_outputs(model: Model, inputs: np.ndarray, weights: List[np.ndarray] = None) -> List[np.ndarray]:
    r"""
    Output of every layer; ``weights`` replaces the model's own weights when given
    """
    if weights is None:
        weights = [model.weight(i) for i in range(len(model))]
    outputs = []
    x = np.asarray(inputs, dtype=np.float64)
    for i in range(len(model)):
        x = layer_forward(x, weights[i], model.nonlinearity(i))
        outputs.append(x)
    return outputs


def dequantized_weights(model: Model, packed: PackedModel) -> List[np.ndarray]:
    return [unpack_mixed(packed[name]) for name in model.names]


def final_output_mse(model: Model, inputs: np.ndarray, packed: PackedModel) -> float:
    fp = forward_outputs(model, inputs)[-1]
    q = forward_outputs(model, inputs, dequantized_weights(model, packed))[-1]
    return float(np.mean((fp - q) ** 2))
