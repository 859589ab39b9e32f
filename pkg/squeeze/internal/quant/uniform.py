from typing import Union, Sequence

import numpy as np

from squeeze.utils.errors import EmptyInput, BadBits, CodeOutOfRange

MIN_BITS = 2
MAX_BITS = 8
EPSILON_SCALE = 1e-8


def round_half_away(x: Union[np.ndarray, float]) -> np.ndarray:
    r"""
    Round to nearest, ties away from zero (``np.round`` rounds ties to even)
    """
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def check_bits(k: int):
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or not MIN_BITS <= k <= MAX_BITS:
        raise BadBits(f"Bit width must be an integer in [{MIN_BITS}, {MAX_BITS}], got {k!r}")


class QuantParams:
    r"""
    Asymmetric uniform quantizer: ``code = clamp(round(w / s) + z, 0, 2^k - 1)``
    and ``w_hat = s * (code - z)``.

    ``s`` is held as float32 so that parameters read back from a packed file
    dequantize to exactly the same values.
    """
    k: int
    s: np.float32
    z: int

    def __init__(self, *, k: int, s: float, z: int):
        check_bits(k)
        self.k = int(k)
        self.s = np.float32(s)
        self.z = int(z)
        if not self.s > 0:
            raise ValueError(f"Scale must be positive, got {s}")
        if not 0 <= self.z <= self.max_code:
            raise ValueError(f"Zero point {z} out of range for {k} bits")

    @property
    def max_code(self) -> int:
        return 2 ** self.k - 1

    def to_dict(self):
        return {'k': self.k, 's': float(self.s), 'z': self.z}

    def __eq__(self, other):
        if not isinstance(other, QuantParams):
            return NotImplemented
        return self.k == other.k and self.s == other.s and self.z == other.z

    def __repr__(self):
        return f"QuantParams(k={self.k}, s={float(self.s)!r}, z={self.z})"


def compute_uniform_params(values: Union[np.ndarray, Sequence[float]], k: int) -> QuantParams:
    r"""
    Fit scale and zero point to ``values``.

    The fitting range is ``[min(min, 0), max(max, 0)]`` so that zero is representable
    and the zero point stays within ``[0, 2^k - 1]``;
    ``s = (max - min) / (2^k - 1)`` and ``z = round(-min / s)``.
    When the range collapses (all values zero) ``s`` falls back to ``1e-8`` and ``z = 0``.
    """
    check_bits(k)
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyInput('Cannot fit quantization parameters to an empty sequence')

    lo = min(float(values.min()), 0.)
    hi = max(float(values.max()), 0.)
    max_code = 2 ** k - 1
    if hi == lo:
        return QuantParams(k=k, s=EPSILON_SCALE, z=0)

    s = np.float32((hi - lo) / max_code)
    z = int(np.clip(round_half_away(-lo / np.float64(s)), 0, max_code))
    return QuantParams(k=k, s=s, z=z)


def quantize_uniform(values: Union[np.ndarray, Sequence[float]], params: QuantParams) -> np.ndarray:
    r"""
    Integer codes in ``[0, 2^k - 1]``, as ``uint8``
    """
    values = np.asarray(values, dtype=np.float64)
    codes = round_half_away(values / np.float64(params.s)) + params.z
    return np.clip(codes, 0, params.max_code).astype(np.uint8)


def dequantize_uniform(codes: Union[np.ndarray, Sequence[int]], params: QuantParams) -> np.ndarray:
    r"""
    ``s * (code - z)`` in float32
    """
    codes = np.asarray(codes)
    if codes.size > 0 and (codes.min() < 0 or codes.max() > params.max_code):
        raise CodeOutOfRange(f"Codes must lie in [0, {params.max_code}] for {params.k} bits")
    return params.s * (codes.astype(np.float32) - np.float32(params.z))


def fit_rows(w: np.ndarray, k: int, *, per_layer: bool = False):
    r"""
    One :class:`QuantParams` per output row of ``w``; with ``per_layer`` every row
    shares the parameters fitted over the whole matrix.
    """
    if per_layer:
        shared = compute_uniform_params(w, k)
        return [shared for _ in range(w.shape[0])]
    return [compute_uniform_params(row, k) for row in w]


def quantize_rows(w: np.ndarray, row_params) -> (np.ndarray, np.ndarray):
    r"""
    Codes and dequantized values for every row of ``w``
    """
    codes = np.empty(w.shape, dtype=np.uint8)
    w_hat = np.empty(w.shape, dtype=np.float32)
    for i, p in enumerate(row_params):
        codes[i] = quantize_uniform(w[i], p)
        w_hat[i] = dequantize_uniform(codes[i], p)
    return codes, w_hat
