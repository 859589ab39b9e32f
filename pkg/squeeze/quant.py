"""
Uniform k-bit quantization, binarization and the mixed-precision packed format.
"""
from squeeze.internal.quant.binary import BinarizeMode, BinParams, binarize_row, binarize_matrix, debinarize, sign
from squeeze.internal.quant.packed_model import PackedModel, load_packed, save_packed, encode_packed, \
    decode_packed
from squeeze.internal.quant.packing import PackedLayer, ConfigEcho, Supervision, BitBudget, pack_mixed, \
    unpack_mixed, mean_bits
from squeeze.internal.quant.uniform import QuantParams, compute_uniform_params, quantize_uniform, \
    dequantize_uniform, round_half_away

__all__ = ['BinarizeMode', 'BinParams', 'binarize_row', 'binarize_matrix', 'debinarize', 'sign',
           'PackedModel', 'load_packed', 'save_packed', 'encode_packed', 'decode_packed',
           'PackedLayer', 'ConfigEcho', 'Supervision', 'BitBudget', 'pack_mixed', 'unpack_mixed', 'mean_bits',
           'QuantParams', 'compute_uniform_params', 'quantize_uniform', 'dequantize_uniform', 'round_half_away']
