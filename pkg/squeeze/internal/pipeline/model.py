import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from squeeze import logger, monit
from squeeze.internal.quant.packed_model import PackedModel
from squeeze.internal.quant.packing import PackedLayer, Supervision, unpack_mixed
from squeeze.internal.salience.hessian import HessianState, accumulate_hessian
from squeeze.internal.salience.pbar import SalienceMaps
from squeeze.internal.store.model_spec import Model, layer_forward
from squeeze.logger import Text
from .calibration import calibration_pass
from .configs import QuantConfig
from .layer import LayerQuantizer, LayerReport
from .report import QuantReport


def resolve_threads(threads: int) -> int:
    if threads < 0:
        raise ValueError(f"Number of threads must be non-negative, got {threads}")
    if threads == 0:
        return os.cpu_count() or 1
    return threads


class ModelQuantizer:
    r"""
    Quantizes every layer of a model.

    With ``fias`` supervision all layers are calibrated on the full-precision
    activations, so layers are independent and may be quantized in parallel.
    With ``general`` supervision layer ``l`` is calibrated through the already
    quantized layers ``0..l-1``, so layers run in order.

    ``activations``, ``hessians`` and ``salience`` hold the calibration inputs,
    Hessians and salience maps of every layer from the last run.
    """

    activations: List[np.ndarray]
    hessians: List[HessianState]
    salience: List[SalienceMaps]

    def __init__(self, config: QuantConfig, *, threads: int = 1):
        self.config = config
        self.threads = resolve_threads(threads)
        self.activations = []
        self.hessians = []
        self.salience = []

    def _quantize_one(self, model: Model, index: int, x: np.ndarray,
                      hessian: HessianState) -> Tuple[PackedLayer, LayerReport, SalienceMaps]:
        quantizer = LayerQuantizer(self.config)
        packed, report = quantizer.quantize(model.weight(index), x, name=model.names[index], hessian=hessian)
        return packed, report, quantizer.maps

    def _run_fias(self, model: Model, inputs: np.ndarray):
        with monit.section('Calibrate'):
            record = calibration_pass(model, inputs, Supervision.fias)
        self.activations = list(record.activations)
        self.hessians = [accumulate_hessian(HessianState.zeros(x.shape[1]), x) for x in self.activations]

        if self.threads > 1 and len(model) > 1:
            logger.debug(f"Quantizing {len(model)} layers on {self.threads} threads")
            with monit.section('Quantize layers', total_steps=len(model)):
                with ThreadPoolExecutor(max_workers=self.threads) as executor:
                    futures = [executor.submit(self._quantize_one, model, i, self.activations[i], self.hessians[i])
                               for i in range(len(model))]
                    results = []
                    for i, f in enumerate(futures):
                        results.append(f.result())
                        monit.progress(i + 1)
            return results

        logger.debug(f"Quantizing {len(model)} layers sequentially")
        results = []
        for i in range(len(model)):
            with monit.section(f'Quantize {model.names[i]}'):
                results.append(self._quantize_one(model, i, self.activations[i], self.hessians[i]))
        return results

    def _run_general(self, model: Model, inputs: np.ndarray):
        logger.debug(f"Quantizing {len(model)} layers sequentially (general supervision)")
        model.check_inputs(inputs)
        self.activations = []
        self.hessians = []
        results = []
        x = np.asarray(inputs, dtype=np.float64)
        for i in range(len(model)):
            if i > 0:
                w_hat = unpack_mixed(results[-1][0])
                x = layer_forward(x, w_hat, model.nonlinearity(i - 1))
            hessian = accumulate_hessian(HessianState.zeros(x.shape[1]), x)
            self.activations.append(x)
            self.hessians.append(hessian)
            with monit.section(f'Quantize {model.names[i]}'):
                results.append(self._quantize_one(model, i, x, hessian))
        return results

    def quantize(self, model: Model, inputs: np.ndarray) -> Tuple[PackedModel, QuantReport]:
        start = time.time()
        inputs = np.asarray(inputs, dtype=np.float64)
        model.check_inputs(inputs)
        if self.config.supervision is Supervision.fias:
            results = self._run_fias(model, inputs)
        else:
            results = self._run_general(model, inputs)

        packed = PackedModel([p for p, _, _ in results])
        self.salience = [m for _, _, m in results]
        report = QuantReport(layers=[r for _, r, _ in results], config=self.config,
                             wall_time=time.time() - start)

        for r in report.layers:
            logger.log([(r.name, Text.key), ': ',
                        (f'{r.mean_bits:.3f}', Text.value), ' bits, mse ',
                        (f'{r.mse:.4g}', Text.value), ', salient ',
                        (str(r.salient_count), Text.value)])
        return packed, report


def quantize_model(model: Model, inputs: np.ndarray, config: Optional[QuantConfig] = None, *,
                   threads: int = 1) -> Tuple[PackedModel, QuantReport]:
    r"""
    Quantize all layers of ``model``, calibrated on ``inputs``.

    Nothing is written to disk; use :func:`squeeze.quant.save_packed` to persist the result.
    """
    return ModelQuantizer(config or QuantConfig(), threads=threads).quantize(model, inputs)
