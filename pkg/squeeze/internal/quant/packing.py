"""
# Mixed-precision packed layers

A packed layer keeps three bit planes over the ``d_out × d_in`` weight grid,
all in row-major order:

* ``mask``: one bit per weight, ``1`` for salient (k-bit) and ``0`` for binarized,
  MSB first within each byte;
* ``codes``: the k-bit codes of salient weights, LSB first
  (for k = 4 this is nibble packing with the low nibble first);
* ``signs``: one bit per binarized weight, ``-1 → 0`` and ``+1 → 1``, MSB first.

Trailing pad bits are always zero.
"""
from enum import Enum
from fractions import Fraction
from typing import List, Sequence, Union

import numpy as np

from squeeze.utils.errors import CountMismatch, DimensionMismatch, CorruptMask
from .binary import BinParams, BinarizeMode, debinarize
from .uniform import QuantParams, dequantize_uniform, check_bits

# s: f32, z: u8, k: u8, alpha: f32
ROW_PARAM_BITS = 32 + 8 + 8 + 32


class Supervision(Enum):
    fias = 'fias'
    general = 'general'


class ConfigEcho:
    r"""
    The settings a layer was quantized with, stored alongside it.
    Floats are kept at float32, the precision of the packed file.
    """

    def __init__(self, *, ratio: float, lam: float):
        self.ratio = np.float32(ratio)
        self.lam = np.float32(lam)

    def to_dict(self):
        return {'ratio': float(self.ratio), 'lambda': float(self.lam)}

    def __eq__(self, other):
        if not isinstance(other, ConfigEcho):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8).ravel(), bitorder='big').tobytes()


def unpack_bits(raw: bytes, count: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder='big', count=count)


def pack_codes(codes: np.ndarray, k: int) -> bytes:
    codes = np.asarray(codes, dtype=np.uint8).ravel()
    bits = np.unpackbits(codes[:, None], axis=1, bitorder='little')[:, :k]
    return np.packbits(bits.ravel(), bitorder='little').tobytes()


def unpack_codes(raw: bytes, count: int, k: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder='little', count=count * k)
    bits = bits.reshape(count, k)
    padded = np.zeros((count, 8), dtype=np.uint8)
    padded[:, :k] = bits
    return np.packbits(padded, axis=1, bitorder='little').ravel()


def _n_bytes(n_bits: int) -> int:
    return (n_bits + 7) // 8


def _has_clean_padding(raw: bytes, n_bits: int, *, lsb_first: bool = False) -> bool:
    pad = len(raw) * 8 - n_bits
    if pad == 0 or not raw:
        return True
    if lsb_first:
        return raw[-1] >> (8 - pad) == 0
    return (raw[-1] & ((1 << pad) - 1)) == 0


class PackedLayer:
    r"""
    Bit-packed mixed-precision weights of one linear layer.
    Use :func:`pack_mixed` to build one and :func:`unpack_mixed` to get dense weights back.
    """
    name: str
    d_out: int
    d_in: int
    k: int
    mask: bytes
    codes: bytes
    signs: bytes
    row_params: List[QuantParams]
    row_bin: List[BinParams]
    config_echo: ConfigEcho
    per_layer_params: bool

    def __init__(self, *, name: str, d_out: int, d_in: int, k: int,
                 mask: bytes, codes: bytes, signs: bytes,
                 row_params: List[QuantParams], row_bin: List[BinParams],
                 config_echo: ConfigEcho, per_layer_params: bool = False):
        self.name = name
        self.d_out = int(d_out)
        self.d_in = int(d_in)
        self.k = int(k)
        self.mask = bytes(mask)
        self.codes = bytes(codes)
        self.signs = bytes(signs)
        self.row_params = list(row_params)
        self.row_bin = list(row_bin)
        self.config_echo = config_echo
        self.per_layer_params = per_layer_params

    @property
    def n_total(self) -> int:
        return self.d_out * self.d_in

    @property
    def mask_array(self) -> np.ndarray:
        r"""
        Boolean ``d_out × d_in`` salience mask
        """
        if len(self.mask) != _n_bytes(self.n_total):
            raise CorruptMask(f"Layer {self.name}: mask has {len(self.mask)} bytes, "
                              f"expected {_n_bytes(self.n_total)}")
        return unpack_bits(self.mask, self.n_total).astype(bool).reshape(self.d_out, self.d_in)

    @property
    def n_salient(self) -> int:
        return int(np.count_nonzero(self.mask_array))

    @property
    def n_binary(self) -> int:
        return self.n_total - self.n_salient

    @property
    def binarize_mode(self) -> BinarizeMode:
        return self.row_bin[0].mode if self.row_bin else BinarizeMode.scaled_sign

    def salient_codes(self) -> np.ndarray:
        return unpack_codes(self.codes, self.n_salient, self.k)

    def sign_values(self) -> np.ndarray:
        return np.where(unpack_bits(self.signs, self.n_binary) > 0, 1, -1).astype(np.int8)

    def __eq__(self, other):
        if not isinstance(other, PackedLayer):
            return NotImplemented
        return (self.name == other.name and self.d_out == other.d_out and self.d_in == other.d_in and
                self.k == other.k and self.mask == other.mask and self.codes == other.codes and
                self.signs == other.signs and self.row_params == other.row_params and
                self.row_bin == other.row_bin and self.config_echo == other.config_echo and
                self.per_layer_params == other.per_layer_params)

    def __repr__(self):
        return f"<PackedLayer {self.name} {self.d_out}x{self.d_in} k={self.k} salient={self.n_salient}>"


def pack_mixed(codes: Union[np.ndarray, Sequence[int]],
               signs: Union[np.ndarray, Sequence[int]],
               mask: np.ndarray,
               row_params: List[QuantParams],
               row_bin: List[BinParams],
               config_echo: ConfigEcho, *,
               name: str = 'layer',
               per_layer_params: bool = False) -> PackedLayer:
    r"""
    Pack salient codes and binarized signs under ``mask``.

    Arguments:
        codes: k-bit codes of the salient positions, row-major
        signs: ``±1`` signs of the binarized positions, row-major
        mask: ``d_out × d_in`` booleans, ``True`` for salient
        row_params: one :class:`QuantParams` per row, all with the same ``k``
        row_bin: one :class:`BinParams` per row
        config_echo: settings echoed into the packed layer
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DimensionMismatch(f"Layer {name}: mask must be 2-D, got shape {list(mask.shape)}")
    d_out, d_in = mask.shape
    if len(row_params) != d_out or len(row_bin) != d_out:
        raise DimensionMismatch(f"Layer {name}: {len(row_params)} row params and {len(row_bin)} "
                                f"binarization params for {d_out} rows")
    ks = {p.k for p in row_params}
    if len(ks) != 1:
        raise DimensionMismatch(f"Layer {name}: rows use different bit widths {sorted(ks)}")
    k = ks.pop()
    check_bits(k)

    codes = np.asarray(codes).ravel()
    signs = np.asarray(signs).ravel()
    n_salient = int(np.count_nonzero(mask))
    if codes.size != n_salient:
        raise CountMismatch(f"Layer {name}: {codes.size} codes for {n_salient} salient positions")
    if signs.size != mask.size - n_salient:
        raise CountMismatch(f"Layer {name}: {signs.size} signs for {mask.size - n_salient} binarized positions")
    if codes.size > 0 and (codes.min() < 0 or codes.max() > 2 ** k - 1):
        raise CountMismatch(f"Layer {name}: codes do not fit in {k} bits")
    if signs.size > 0 and not np.all(np.isin(signs, (-1, 1))):
        raise CountMismatch(f"Layer {name}: signs must be -1 or +1")

    return PackedLayer(name=name, d_out=d_out, d_in=d_in, k=k,
                       mask=pack_bits(mask),
                       codes=pack_codes(codes, k),
                       signs=pack_bits(signs > 0),
                       row_params=row_params, row_bin=row_bin,
                       config_echo=config_echo,
                       per_layer_params=per_layer_params)


def unpack_mixed(layer: PackedLayer) -> np.ndarray:
    r"""
    Dense float32 ``d_out × d_in`` weights: salient positions via the row
    :class:`QuantParams`, binarized positions via the row :class:`BinParams`.
    """
    mask = layer.mask_array
    n_salient = int(np.count_nonzero(mask))
    n_binary = layer.n_total - n_salient
    if not _has_clean_padding(layer.mask, layer.n_total):
        raise CorruptMask(f"Layer {layer.name}: non-zero padding after the mask")
    if len(layer.codes) != _n_bytes(n_salient * layer.k) or not _has_clean_padding(
            layer.codes, n_salient * layer.k, lsb_first=True):
        raise CorruptMask(f"Layer {layer.name}: mask marks {n_salient} salient weights but the code "
                          f"plane has {len(layer.codes)} bytes")
    if len(layer.signs) != _n_bytes(n_binary) or not _has_clean_padding(layer.signs, n_binary):
        raise CorruptMask(f"Layer {layer.name}: mask marks {n_binary} binarized weights but the sign "
                          f"plane has {len(layer.signs)} bytes")

    codes = layer.salient_codes()
    signs = layer.sign_values()

    dense = np.zeros((layer.d_out, layer.d_in), dtype=np.float32)
    c = 0
    b = 0
    for i in range(layer.d_out):
        row_mask = mask[i]
        n_s = int(np.count_nonzero(row_mask))
        n_b = layer.d_in - n_s
        dense[i, row_mask] = dequantize_uniform(codes[c:c + n_s], layer.row_params[i])
        dense[i, ~row_mask] = debinarize(signs[b:b + n_b], layer.row_bin[i])
        c += n_s
        b += n_b

    return dense


class BitBudget:
    r"""
    Storage cost per weight.

    * ``payload_bits``: ``(n_bin + k * n_sal) / n_total``
    * ``mask_bits``: always 1
    * ``param_bits``: per-row scale, zero point, bit width and alpha amortized over the layer
    * ``total_bits``: the sum of the three
    * ``bound``: ``1 * r + k * (1 - r) + 1`` with ``r`` the binarized fraction;
      ``payload_bits + mask_bits`` never exceeds it
    """

    def __init__(self, *, payload: Fraction, param_bits: Fraction, k: int, n_binary: int, n_total: int):
        self.payload = payload
        self.k = k
        self.n_binary = n_binary
        self.n_total = n_total
        self.param = param_bits

    @property
    def payload_bits(self) -> float:
        return float(self.payload)

    @property
    def mask_bits(self) -> float:
        return 1.

    @property
    def param_bits(self) -> float:
        return float(self.param)

    @property
    def total_bits(self) -> float:
        return float(self.payload + 1 + self.param)

    @property
    def bound(self) -> Fraction:
        r = Fraction(self.n_binary, self.n_total)
        return r + self.k * (1 - r) + 1

    def to_dict(self):
        return {'payload_bits': self.payload_bits,
                'mask_bits': self.mask_bits,
                'param_bits': self.param_bits,
                'total_bits': self.total_bits}


def mean_bits(layer: PackedLayer) -> BitBudget:
    r"""
    Average storage bits per weight of a packed layer
    """
    n_total = layer.n_total
    n_salient = layer.n_salient
    n_binary = n_total - n_salient
    payload = Fraction(n_binary + layer.k * n_salient, n_total)
    params = Fraction(ROW_PARAM_BITS * layer.d_out, n_total)
    return BitBudget(payload=payload, param_bits=params, k=layer.k, n_binary=n_binary, n_total=n_total)
