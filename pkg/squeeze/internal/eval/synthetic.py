from typing import Tuple

import numpy as np

from squeeze.internal.store.container import Tensor, TensorContainer
from squeeze.internal.store.model_spec import LayerSpec, ModelSpec, Nonlinearity

OUTLIER_SCALE = 20.


def layer_name(index: int) -> str:
    return f'layers.{index}.weight'


def synthetic_stack(n_layers: int = 12, width: int = 16, n_tokens: int = 64, *,
                    seed: int = 0) -> Tuple[ModelSpec, TensorContainer, np.ndarray]:
    r"""
    A seeded stack of ``width × width`` linear layers with calibration inputs.

    Hidden layers use ``relu`` and the last one is linear.
    A few input channels are scaled by ``OUTLIER_SCALE`` to imitate the
    large-magnitude activation channels of language models.

    Returns:
        the model spec, its weights and ``n_tokens × width`` inputs
    """
    if n_layers < 1 or width < 1 or n_tokens < 1:
        raise ValueError(f"Invalid synthetic stack n_layers={n_layers} width={width} n_tokens={n_tokens}")
    rng = np.random.default_rng(seed)

    layers = []
    container = TensorContainer()
    for i in range(n_layers):
        is_last = i == n_layers - 1
        nonlinearity = Nonlinearity.identity if is_last else Nonlinearity.relu
        scale = np.sqrt((1. if is_last else 2.) / width)
        w = rng.normal(0., scale, size=(width, width))
        container.add(Tensor(name=layer_name(i), data=w))
        layers.append(LayerSpec(weight_name=layer_name(i), nonlinearity=nonlinearity))

    inputs = rng.normal(0., 1., size=(n_tokens, width))
    n_outliers = max(1, width // 16)
    outliers = rng.choice(width, size=n_outliers, replace=False)
    inputs[:, outliers] *= OUTLIER_SCALE

    spec = ModelSpec(layers=layers, notes=f'synthetic stack seed={seed} n_layers={n_layers} width={width}')
    return spec, container, inputs.astype(np.float32)
