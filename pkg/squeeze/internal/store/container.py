"""
# S10T tensor containers

A container is an ordered set of named, 2-D, little-endian float32 matrices.

```
magic "S10T" | version u16 | header_length u32 | header (UTF-8 JSON) | payload
```

The header is a JSON array of ``{name, shape, offset, length}`` records;
``offset`` is relative to the start of the payload and ``length`` is in bytes.
"""
import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Union

import numpy as np

from squeeze.internal import util
from squeeze.utils.errors import MagicMismatch, VersionUnsupported, ShapeMismatch, NonFiniteValue, \
    ContainerError

MAGIC = b'S10T'
VERSION = 1
SUPPORTED_VERSIONS = {1}
ENDIANNESS = 'little'

_PREAMBLE = struct.Struct('<4sHI')
_DTYPE = np.dtype('<f4')


class Tensor:
    r"""
    A named row-major float32 matrix.
    ``data`` is always a C-contiguous ``float32`` array of two dimensions.
    """
    name: str
    data: np.ndarray

    def __init__(self, *, name: str, data: Union[np.ndarray, List]):
        if not isinstance(name, str) or name == '':
            raise ContainerError(f"Tensor name must be a non-empty string, got {name!r}")
        data = np.ascontiguousarray(np.asarray(data, dtype=np.float32))
        if data.ndim != 2:
            raise ShapeMismatch(f"Tensor {name}: only 2-D tensors are supported, got shape {list(data.shape)}")
        if any(d <= 0 for d in data.shape):
            raise ShapeMismatch(f"Tensor {name}: dimensions must be positive, got {list(data.shape)}")

        self.name = name
        self.data = data

    @property
    def shape(self) -> List[int]:
        return [int(d) for d in self.data.shape]

    def validate(self):
        if not np.all(np.isfinite(self.data)):
            bad = int(np.count_nonzero(~np.isfinite(self.data)))
            raise NonFiniteValue(f"Tensor {self.name}: {bad} non-finite values")

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (self.name == other.name and
                self.shape == other.shape and
                self.data.tobytes() == other.data.tobytes())

    def __repr__(self):
        return f"<Tensor {self.name} shape={self.shape}>"


class TensorContainer:
    r"""
    Ordered map of tensor name to :class:`Tensor`.

    Containers are read-only after loading and can be shared across threads.
    Equality is bitwise on the tensor data.
    """
    tensors: Dict[str, Tensor]
    version: int

    def __init__(self, tensors: Optional[List[Tensor]] = None, *, version: int = VERSION):
        self.version = version
        self.tensors = OrderedDict()
        for t in tensors or []:
            self.add(t)

    def add(self, tensor: Tensor):
        if tensor.name in self.tensors:
            raise ContainerError(f"Duplicate tensor name {tensor.name}")
        self.tensors[tensor.name] = tensor

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.tensors.values())

    def __len__(self):
        return len(self.tensors)

    def names(self) -> List[str]:
        return list(self.tensors.keys())

    @property
    def manifest(self) -> Dict[str, any]:
        return {'version': self.version, 'endianness': ENDIANNESS}

    def __eq__(self, other):
        if not isinstance(other, TensorContainer):
            return NotImplemented
        return self.names() == other.names() and all(a == b for a, b in zip(self, other))

    def __repr__(self):
        return f"<TensorContainer {len(self)} tensors>"


def encode_container(container: TensorContainer) -> bytes:
    header = []
    payload = []
    offset = 0
    for t in container:
        t.validate()
        raw = t.data.astype(_DTYPE, copy=False).tobytes(order='C')
        header.append({'name': t.name, 'shape': t.shape, 'offset': offset, 'length': len(raw)})
        payload.append(raw)
        offset += len(raw)

    header_bytes = json.dumps(header, separators=(',', ':')).encode('utf-8')
    return _PREAMBLE.pack(MAGIC, VERSION, len(header_bytes)) + header_bytes + b''.join(payload)


def decode_container(raw: bytes, *, source: str = '<bytes>') -> TensorContainer:
    if len(raw) < _PREAMBLE.size or raw[:4] != MAGIC:
        raise MagicMismatch(f"{source}: not an S10T container (magic {raw[:4]!r})")
    _, version, header_length = _PREAMBLE.unpack_from(raw, 0)
    if version not in SUPPORTED_VERSIONS:
        raise VersionUnsupported(f"{source}: container version {version} is not supported")

    start = _PREAMBLE.size
    if start + header_length > len(raw):
        raise ContainerError(f"{source}: header is truncated")
    try:
        header = json.loads(raw[start:start + header_length].decode('utf-8'))
    except (UnicodeDecodeError, ValueError) as e:
        raise ContainerError(f"{source}: header is not valid JSON: {e}") from e
    if not isinstance(header, list):
        raise ContainerError(f"{source}: header must be a JSON array")

    payload = memoryview(raw)[start + header_length:]
    container = TensorContainer(version=version)
    for record in header:
        try:
            name = record['name']
            shape = [int(d) for d in record['shape']]
            offset = int(record['offset'])
            length = int(record['length'])
        except (KeyError, TypeError, ValueError) as e:
            raise ContainerError(f"{source}: malformed header record {record!r}") from e

        if len(shape) != 2:
            raise ShapeMismatch(f"Tensor {name}: only 2-D tensors are supported, got shape {shape}")
        expected = int(np.prod(shape)) * _DTYPE.itemsize
        if length != expected or offset < 0 or offset + length > len(payload):
            raise ShapeMismatch(f"Tensor {name}: payload of {length} bytes does not match "
                                f"shape {shape} ({expected} bytes)")

        data = np.frombuffer(payload[offset:offset + length], dtype=_DTYPE).reshape(shape)
        tensor = Tensor(name=name, data=data.astype(np.float32))
        tensor.validate()
        container.add(tensor)

    return container


def load_container(path: Union[str, Path]) -> TensorContainer:
    r"""
    Load and validate an S10T container.

    Raises:
        MagicMismatch, VersionUnsupported, ShapeMismatch, NonFiniteValue, IoFailure
    """
    return decode_container(util.read_bytes(path), source=str(path))


def save_container(container: TensorContainer, path: Union[str, Path]):
    r"""
    Write ``container`` to ``path`` atomically.
    ``load_container(path) == container`` holds bit for bit.
    """
    util.atomic_write(path, encode_container(container))
