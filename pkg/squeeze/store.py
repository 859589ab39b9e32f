"""
Loading, validating and persisting named matrices and model layer specs.
"""
from squeeze.internal.store.container import Tensor, TensorContainer, load_container, save_container
from squeeze.internal.store.model_spec import Nonlinearity, LayerSpec, ModelSpec, Model, Diagnostic, \
    validate_model, load_model_spec, save_model_spec

__all__ = ['Tensor', 'TensorContainer', 'load_container', 'save_container',
           'Nonlinearity', 'LayerSpec', 'ModelSpec', 'Model', 'Diagnostic',
           'validate_model', 'load_model_spec', 'save_model_spec']
