import json
from pathlib import Path
from typing import List, Optional, Union

from squeeze.internal import util
from .configs import QuantConfig
from .layer import LayerReport

PROXY_NOTE = ('Reconstruction error ||(W - W_hat) X^T||^2 over calibration tokens is a proxy metric; '
              'it is not a language-model perplexity or accuracy measurement.')


class QuantReport:
    r"""
    One :class:`LayerReport` per layer, in model order, with the configuration used
    """
    layers: List[LayerReport]
    config: QuantConfig
    wall_time: Optional[float]

    def __init__(self, *, layers: List[LayerReport], config: QuantConfig, wall_time: Optional[float] = None):
        self.layers = layers
        self.config = config
        self.wall_time = wall_time

    def __getitem__(self, name: str) -> LayerReport:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def to_dict(self, *, timing: bool = False):
        res = {
            'note': PROXY_NOTE,
            'config': self.config.to_dict(),
            'layers': [l.to_dict() for l in self.layers],
        }
        if timing and self.wall_time is not None:
            res['wall_time'] = self.wall_time
        return res

    def to_json(self, *, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing=timing), indent=2) + '\n'


def save_report(report: QuantReport, path: Union[str, Path], *, timing: bool = False):
    r"""
    Wall time is left out unless ``timing`` is set, so that runs with the same
    inputs produce identical reports.
    """
    util.atomic_write(path, report.to_json(timing=timing))
