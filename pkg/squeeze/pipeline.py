"""
Staged mixed-precision quantization of a model.

Example::
    >>> from squeeze import pipeline, store
    >>> model = store.Model(store.load_model_spec('model.json'), store.load_container('model.s10t'))
    >>> packed, report = pipeline.quantize_model(model, inputs, pipeline.QuantConfig(salient_ratio=0.2))
"""
from squeeze.internal.pipeline.calibration import CalibrationRecord, calibration_pass
from squeeze.internal.pipeline.compensate import gptq_compensate, output_error
from squeeze.internal.pipeline.configs import QuantConfig, load_config
from squeeze.internal.pipeline.layer import LayerQuantizer, LayerReport, quantize_layer, reconstruction_mse
from squeeze.internal.pipeline.model import ModelQuantizer, quantize_model
from squeeze.internal.pipeline.report import QuantReport, save_report, PROXY_NOTE

__all__ = ['CalibrationRecord', 'calibration_pass', 'gptq_compensate', 'output_error',
           'QuantConfig', 'load_config', 'LayerQuantizer', 'LayerReport', 'quantize_layer', 'reconstruction_mse',
           'ModelQuantizer', 'quantize_model', 'QuantReport', 'save_report', 'PROXY_NOTE']
