import hashlib
import os
import tempfile
from pathlib import Path
from typing import Union

import numpy as np
import yaml

from squeeze.utils.errors import IoFailure


def yaml_load(s: str):
    return yaml.load(s, Loader=yaml.FullLoader)


def atomic_write(path: Union[str, Path], data: Union[bytes, str]):
    r"""
    Writes ``data`` to a temporary file next to ``path`` and renames it into place,
    so readers never see a partially written file.
    """
    path = Path(path)
    if isinstance(data, str):
        data = data.encode('utf-8')

    fd = None
    tmp_name = None
    try:
        if not path.parent.exists():
            path.parent.mkdir(parents=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f'.{path.name}.', dir=str(path.parent))
        with os.fdopen(fd, 'wb') as f:
            fd = None
            f.write(data)
        os.replace(tmp_name, str(path))
        tmp_name = None
    except OSError as e:
        raise IoFailure(f"Cannot write {path}: {e}") from e
    finally:
        if fd is not None:
            os.close(fd)
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)


def read_bytes(path: Union[str, Path]) -> bytes:
    try:
        with open(str(path), 'rb') as f:
            return f.read()
    except OSError as e:
        raise IoFailure(f"Cannot read {path}: {e}") from e


def digest(*arrays: np.ndarray, extra: str = '') -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    h.update(extra.encode('utf-8'))
    return h.hexdigest()
