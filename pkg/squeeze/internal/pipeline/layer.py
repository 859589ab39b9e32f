"""
# Staged quantization of one layer

1. every row is quantized to ``k_high`` bits;
2. salience ``M = V + λB`` is computed on the dequantized stage-one weights
   and the top ``salient_ratio`` weights are selected;
3. salient weights keep their stage-one codes and the rest are binarized,
   optionally with column-wise error compensation.
"""
from typing import Dict, List, Optional

import numpy as np

from squeeze.internal.quant.binary import BinParams, BinarizeMode, binarize_matrix, binarize_row, sign
from squeeze.internal.quant.packing import PackedLayer, ConfigEcho, BitBudget, pack_mixed, mean_bits, \
    unpack_mixed
from squeeze.internal.quant.uniform import QuantParams, fit_rows, quantize_rows, quantize_uniform, \
    dequantize_uniform, round_half_away
from squeeze.internal.salience.hessian import HessianState, accumulate_hessian, invert_hessian
from squeeze.internal.salience.pbar import SalienceMaps, compute_v, compute_b, select_salient
from squeeze.utils.errors import DimensionMismatch, EmptyInput
from .compensate import gptq_compensate, output_error
from .configs import QuantConfig


def reconstruction_mse(w: np.ndarray, w_hat: np.ndarray, x: np.ndarray) -> float:
    r"""
    ``||(W - W_hat) X^T||_F^2 / (N d_out)``
    """
    y = (np.asarray(w, dtype=np.float64) - np.asarray(w_hat, dtype=np.float64)) @ \
        np.asarray(x, dtype=np.float64).T
    return float(np.mean(y ** 2))


class LayerReport:
    name: str
    bits: BitBudget
    mse: float
    stage1_mse: float
    salient_count: int
    salience: Dict[str, Dict[str, float]]
    row_error: Optional[List[float]]

    def __init__(self, *, name: str, bits: BitBudget, mse: float, stage1_mse: float,
                 salient_count: int, salience: Dict[str, Dict[str, float]],
                 row_error: Optional[List[float]] = None):
        self.name = name
        self.bits = bits
        self.mse = mse
        self.stage1_mse = stage1_mse
        self.salient_count = salient_count
        self.salience = salience
        self.row_error = row_error

    @property
    def mean_bits(self) -> float:
        return self.bits.payload_bits

    def to_dict(self):
        res = {
            'name': self.name,
            'mean_bits': self.mean_bits,
            'bits': self.bits.to_dict(),
            'mse': self.mse,
            'stage1_mse': self.stage1_mse,
            'salient_count': self.salient_count,
            'v': self.salience['v'],
            'b': self.salience['b'],
        }
        if self.row_error is not None:
            res['row_error'] = self.row_error
        return res


def _row_alpha(base: np.ndarray, mode: BinarizeMode) -> List[BinParams]:
    r"""
    ``alpha`` is the mean magnitude of the whole row, salient weights included
    """
    return [binarize_row(row, mode)[1] for row in base]


class LayerQuantizer:
    r"""
    Quantizes layers with one :class:`QuantConfig`.

    The Hessian, its inverse and the salience maps of the last layer are kept
    on the instance for inspection.
    """

    hessian: Optional[HessianState]
    maps: Optional[SalienceMaps]

    def __init__(self, config: QuantConfig):
        self.config = config
        self.hessian = None
        self.maps = None

    def _stage_one(self, w: np.ndarray):
        row_params = fit_rows(w, self.config.k_high, per_layer=self.config.per_layer_params)
        codes, w_hat = quantize_rows(w, row_params)
        return row_params, codes, w_hat

    def _staged_value(self, value: np.ndarray, params: QuantParams) -> np.ndarray:
        if not self.config.staged:
            return value
        return dequantize_uniform(quantize_uniform(value, params), params)

    def _compensate(self, w, mask, row_params, row_bin, hinv):
        d_out = w.shape[0]
        alphas = np.array([b.alpha for b in row_bin], dtype=np.float32)
        s = np.array([p.s for p in row_params], dtype=np.float32)
        z = np.array([p.z for p in row_params], dtype=np.float32)
        max_code = np.array([p.max_code for p in row_params], dtype=np.float64)

        def fake_quantize(column: np.ndarray) -> np.ndarray:
            codes = np.clip(round_half_away(column / s.astype(np.float64)) + z, 0, max_code)
            return s * (codes.astype(np.float32) - z)

        def quantize_column(q: int, column: np.ndarray):
            staged = fake_quantize(column) if self.config.staged else column
            binary = alphas * sign(staged).astype(np.float32)
            return np.where(mask[:, q], fake_quantize(column), binary)

        _, adjusted = gptq_compensate(w, quantize_column, hinv)

        codes = [quantize_uniform(adjusted[i, mask[i]], row_params[i]) for i in range(d_out)]
        signs = [sign(self._staged_value(adjusted[i, ~mask[i]], row_params[i])) for i in range(d_out)]
        return np.concatenate(codes), np.concatenate(signs)

    def quantize(self, w: np.ndarray, x: np.ndarray, *, name: str = 'layer',
                 hessian: Optional[HessianState] = None) -> (PackedLayer, LayerReport):
        r"""
        Arguments:
            w: ``d_out × d_in`` weights
            x: ``N × d_in`` calibration inputs of the layer
            name: layer name stored in the packed layer
            hessian: precomputed Hessian of ``x``; accumulated from ``x`` when omitted
        """
        config = self.config
        w = np.asarray(w, dtype=np.float32)
        x = np.asarray(x, dtype=np.float64)
        if w.ndim != 2 or x.ndim != 2 or x.shape[1] != w.shape[1]:
            raise DimensionMismatch(f"Layer {name}: calibration inputs of shape {list(x.shape)} do not "
                                    f"match weights of shape {list(w.shape)}")
        if x.shape[0] == 0:
            raise EmptyInput(f"Layer {name}: no calibration tokens")

        row_params, stage1_codes, w4 = self._stage_one(w)
        base = w4 if config.staged else w

        if hessian is None:
            hessian = accumulate_hessian(HessianState.zeros(w.shape[1]), x)
        self.hessian = hessian
        hinv = invert_hessian(hessian, config.damping_fraction)

        v = compute_v(base, hinv.diag)
        mode = config.binarize_mode
        b = compute_b(base, x, lambda m: binarize_matrix(m, mode), config.range_mode)
        self.maps = SalienceMaps(v=v, b=b, lambda_used=config.lam)
        mask = select_salient(self.maps.m, config.salient_ratio).mask

        row_bin = _row_alpha(base, mode)

        if config.compensation:
            codes, signs = self._compensate(w, mask, row_params, row_bin, hinv.inverse)
        else:
            codes = stage1_codes[mask]
            signs = sign(base[~mask])

        echo = ConfigEcho(ratio=config.salient_ratio, lam=config.lam)
        packed = pack_mixed(codes, signs, mask, row_params, row_bin, echo,
                            name=name, per_layer_params=config.per_layer_params)

        w_hat = unpack_mixed(packed)
        report = LayerReport(name=name,
                             bits=mean_bits(packed),
                             mse=reconstruction_mse(w, w_hat, x),
                             stage1_mse=reconstruction_mse(w, w4, x),
                             salient_count=int(np.count_nonzero(mask)),
                             salience=self.maps.summary(),
                             row_error=[float(e) for e in output_error(w, w_hat, x)]
                             if config.compensation else None)
        return packed, report


def quantize_layer(w: np.ndarray, x: np.ndarray, config: QuantConfig, *,
                   name: str = 'layer') -> (PackedLayer, LayerReport):
    return LayerQuantizer(config).quantize(w, x, name=name)
