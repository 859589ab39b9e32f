import json
from pathlib import Path
from typing import Union

import pandas as pd

from squeeze.internal import util


def write_json(result, path: Union[str, Path]):
    r"""
    Write anything with a ``to_dict()``
    """
    util.atomic_write(path, json.dumps(result.to_dict(), indent=2) + '\n')


def write_csv(frame: pd.DataFrame, path: Union[str, Path]):
    util.atomic_write(path, frame.to_csv(index=False))


def write_result(result, path: Union[str, Path]):
    r"""
    ``<path>`` as JSON and, for results with a ``to_frame()``, ``<path>`` with a ``.csv``
    suffix as plot-ready ``setting, layer, metric, value`` rows.
    Results with a ``to_range_frame()`` also get per-channel range rows in
    ``<path>`` with a ``.ranges.csv`` suffix.
    """
    path = Path(path)
    write_json(result, path)
    if hasattr(result, 'to_frame'):
        write_csv(result.to_frame(), path.with_suffix('.csv'))
    if hasattr(result, 'to_range_frame'):
        write_csv(result.to_range_frame(), path.with_suffix('.ranges.csv'))
