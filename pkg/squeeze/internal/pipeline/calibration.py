from typing import List, Optional, Union

import numpy as np

from squeeze.internal import util
from squeeze.internal.quant.packed_model import PackedModel
from squeeze.internal.quant.packing import Supervision, unpack_mixed
from squeeze.internal.store.model_spec import Model, layer_forward
from squeeze.utils.errors import MissingPrefix


class CalibrationRecord:
    r"""
    Input activations ``X_l`` of every calibrated layer.

    In ``fias`` mode every ``X_l`` comes from the full-precision forward pass.
    In ``general`` mode ``X_l`` comes from a forward pass where the layers before
    ``l`` use their dequantized packed weights.
    """
    activations: List[np.ndarray]
    mode: Supervision
    source_hash: str

    def __init__(self, *, activations: List[np.ndarray], mode: Supervision, source_hash: str):
        self.activations = activations
        self.mode = mode
        self.source_hash = source_hash

    def __getitem__(self, index: int) -> np.ndarray:
        return self.activations[index]

    def __len__(self):
        return len(self.activations)


def calibration_pass(model: Model, inputs: np.ndarray,
                     mode: Union[Supervision, str] = Supervision.fias,
                     quantized_prefix: Optional[PackedModel] = None,
                     upto: Optional[int] = None) -> CalibrationRecord:
    r"""
    Forward ``inputs`` through the model and record the input of layers ``0..upto``
    (all layers by default).

    Raises:
        DimensionMismatch: ``inputs`` do not fit the first layer
        MissingPrefix: ``general`` mode without packed weights for a layer before ``upto``
    """
    mode = Supervision(mode)
    inputs = np.asarray(inputs, dtype=np.float64)
    model.check_inputs(inputs)
    if upto is None:
        upto = len(model) - 1
    if not 0 <= upto < len(model):
        raise IndexError(f"Layer index {upto} out of range for {len(model)} layers")

    hash_extra = mode.value
    if mode is Supervision.general:
        for i in range(upto):
            name = model.names[i]
            if quantized_prefix is None or name not in quantized_prefix:
                raise MissingPrefix(f"General supervision needs the packed weights of layer {name} "
                                    f"before calibrating layer {model.names[upto]}")
        hash_extra += ':' + ','.join(model.names[:upto])

    if mode is Supervision.fias:
        activations = model.forward(inputs, upto)
    else:
        activations = [inputs]
        for i in range(upto):
            w = unpack_mixed(quantized_prefix[model.names[i]])
            activations.append(layer_forward(activations[-1], w, model.nonlinearity(i)))

    weights = [model.weight(i) for i in range(len(model))]
    return CalibrationRecord(activations=activations, mode=mode,
                             source_hash=util.digest(inputs, *weights, extra=hash_extra))
