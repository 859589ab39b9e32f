"""
# S10P packed models

```
magic "S10P" | version u16 | layer_count u32 | layers...
```

Each layer:

```
name (u16 length + UTF-8) | d_out u32 | d_in u32 | flags u8 | ratio f32 | lambda f32 |
mask | row_params (d_out × {s f32, z u8, k u8}) | row_alpha (d_out × f32) | codes | signs
```

``flags``: bit 0 scaled sign and bit 1 per-layer parameters.
All integers are little-endian; plane lengths follow from the mask popcount and ``k``.
"""
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterator, List, Union

import numpy as np

from squeeze.internal import util
from squeeze.utils.errors import MagicMismatch, VersionUnsupported, CorruptMask, ContainerError
from .binary import BinParams, BinarizeMode
from .packing import PackedLayer, ConfigEcho, unpack_bits
from .uniform import QuantParams, MIN_BITS, MAX_BITS

MAGIC = b'S10P'
VERSION = 1
SUPPORTED_VERSIONS = {1}

FLAG_SCALED_SIGN = 1 << 0
FLAG_PER_LAYER = 1 << 1

_PREAMBLE = struct.Struct('<4sHI')
_LAYER_HEAD = struct.Struct('<IIBff')
_ROW_PARAM = struct.Struct('<fBB')


class PackedModel:
    r"""
    Ordered packed layers of a model, keyed by weight name
    """
    layers: Dict[str, PackedLayer]

    def __init__(self, layers: List[PackedLayer] = None, *, version: int = VERSION):
        self.version = version
        self.layers = OrderedDict()
        for layer in layers or []:
            if layer.name in self.layers:
                raise ContainerError(f"Duplicate layer name {layer.name}")
            self.layers[layer.name] = layer

    def __getitem__(self, name: str) -> PackedLayer:
        return self.layers[name]

    def __contains__(self, name: str) -> bool:
        return name in self.layers

    def __iter__(self) -> Iterator[PackedLayer]:
        return iter(self.layers.values())

    def __len__(self):
        return len(self.layers)

    def __eq__(self, other):
        if not isinstance(other, PackedModel):
            return NotImplemented
        return list(self.layers.keys()) == list(other.layers.keys()) and all(
            a == b for a, b in zip(self, other))


def _encode_layer(layer: PackedLayer) -> bytes:
    name = layer.name.encode('utf-8')
    flags = 0
    if layer.binarize_mode is BinarizeMode.scaled_sign:
        flags |= FLAG_SCALED_SIGN
    if layer.per_layer_params:
        flags |= FLAG_PER_LAYER

    parts = [struct.pack('<H', len(name)), name,
             _LAYER_HEAD.pack(layer.d_out, layer.d_in, flags,
                              layer.config_echo.ratio, layer.config_echo.lam),
             layer.mask]
    parts += [_ROW_PARAM.pack(p.s, p.z, p.k) for p in layer.row_params]
    parts.append(np.asarray([b.alpha for b in layer.row_bin], dtype='<f4').tobytes())
    parts += [layer.codes, layer.signs]
    return b''.join(parts)


def encode_packed(model: PackedModel) -> bytes:
    return b''.join([_PREAMBLE.pack(MAGIC, VERSION, len(model))] + [_encode_layer(l) for l in model])


class _Reader:
    def __init__(self, raw: bytes, source: str):
        self.raw = raw
        self.pos = 0
        self.source = source

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.raw):
            raise ContainerError(f"{self.source}: truncated while reading {what}")
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct, what: str):
        return fmt.unpack(self.take(fmt.size, what))


def _decode_layer(reader: _Reader) -> PackedLayer:
    name_length, = struct.unpack('<H', reader.take(2, 'layer name length'))
    name = reader.take(name_length, 'layer name').decode('utf-8')
    d_out, d_in, flags, ratio, lam = reader.unpack(_LAYER_HEAD, f'layer {name} header')
    if d_out <= 0 or d_in <= 0:
        raise ContainerError(f"Layer {name}: invalid shape {d_out}x{d_in}")

    n_total = d_out * d_in
    mask = reader.take((n_total + 7) // 8, f'layer {name} mask')
    n_salient = int(np.count_nonzero(unpack_bits(mask, n_total)))

    mode = BinarizeMode.scaled_sign if flags & FLAG_SCALED_SIGN else BinarizeMode.bare_sign
    row_params = []
    for _ in range(d_out):
        s, z, k = reader.unpack(_ROW_PARAM, f'layer {name} row parameters')
        if not MIN_BITS <= k <= MAX_BITS:
            raise CorruptMask(f"Layer {name}: invalid bit width {k}")
        try:
            row_params.append(QuantParams(k=k, s=s, z=z))
        except ValueError as e:
            raise ContainerError(f"Layer {name}: {e}") from e
    alphas = np.frombuffer(reader.take(4 * d_out, f'layer {name} alphas'), dtype='<f4')
    row_bin = [BinParams(alpha=float(a), mode=mode) for a in alphas]

    k = row_params[0].k
    codes = reader.take((n_salient * k + 7) // 8, f'layer {name} codes')
    signs = reader.take((n_total - n_salient + 7) // 8, f'layer {name} signs')

    echo = ConfigEcho(ratio=ratio, lam=lam)
    return PackedLayer(name=name, d_out=d_out, d_in=d_in, k=k,
                       mask=mask, codes=codes, signs=signs,
                       row_params=row_params, row_bin=row_bin,
                       config_echo=echo, per_layer_params=bool(flags & FLAG_PER_LAYER))


def decode_packed(raw: bytes, *, source: str = '<bytes>') -> PackedModel:
    if len(raw) < _PREAMBLE.size or raw[:4] != MAGIC:
        raise MagicMismatch(f"{source}: not an S10P packed model (magic {raw[:4]!r})")
    _, version, layer_count = _PREAMBLE.unpack_from(raw, 0)
    if version not in SUPPORTED_VERSIONS:
        raise VersionUnsupported(f"{source}: packed model version {version} is not supported")

    reader = _Reader(raw, source)
    reader.pos = _PREAMBLE.size
    layers = [_decode_layer(reader) for _ in range(layer_count)]
    if reader.pos != len(raw):
        raise ContainerError(f"{source}: {len(raw) - reader.pos} trailing bytes")

    return PackedModel(layers, version=version)


def load_packed(path: Union[str, Path]) -> PackedModel:
    return decode_packed(util.read_bytes(path), source=str(path))


def save_packed(model: PackedModel, path: Union[str, Path]):
    util.atomic_write(path, encode_packed(model))
