"""
# Sweeps and comparisons

Every sweep quantizes the whole model once per setting and measures

* the calibration reconstruction error of each layer,
* the mean squared error of the final output against full precision,
* the mean payload bits per weight over the model,
* the KL divergence of one designated layer's output distribution.

These are proxies for language-model quality; claims about which setting is best
are recorded as observations and never enforced.
"""
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from squeeze import logger
from squeeze.internal.pipeline.configs import QuantConfig
from squeeze.internal.pipeline.model import ModelQuantizer
from squeeze.internal.pipeline.report import PROXY_NOTE
from squeeze.internal.quant.packed_model import PackedModel
from squeeze.internal.quant.packing import Supervision, mean_bits
from squeeze.internal.quant.uniform import check_bits
from squeeze.internal.store.model_spec import Model
from squeeze.logger import Text
from squeeze.utils.errors import ConfigsError
from squeeze.utils.notice import squeeze_notice
from .metrics import HistogramSpec, activation_kl, forward_outputs, dequantized_weights, range_stats

MODEL = '*'
DEFAULT_LAMBDAS = [1e-2, 1e-3, 3e-4, 1e-4, 1e-5]
MONOTONE_TOLERANCE = 0.05
RANGE_COLUMNS = ['layer', 'weights', 'channel', 'min', 'max', 'range', 'outlier_count']


class SweepAxis(Enum):
    intermediate_bits = 'intermediate_bits'
    salient_ratio = 'salient_ratio'
    lambda_ = 'lambda'
    ablation = 'ablation'


class SweepPoint:
    setting: Union[int, float, str]
    layer_mse: Dict[str, float]
    final_mse: float
    mean_bits: float
    kl: Optional[float]
    hamming: Optional[Dict[str, int]]

    def __init__(self, *, setting, layer_mse: Dict[str, float], final_mse: float, mean_bits: float,
                 kl: Optional[float] = None, hamming: Optional[Dict[str, int]] = None):
        self.setting = setting
        self.layer_mse = layer_mse
        self.final_mse = final_mse
        self.mean_bits = mean_bits
        self.kl = kl
        self.hamming = hamming

    @property
    def total_mse(self) -> float:
        return float(sum(self.layer_mse.values()))

    def to_dict(self):
        res = {'setting': self.setting,
               'layer_mse': self.layer_mse,
               'final_mse': self.final_mse,
               'mean_bits': self.mean_bits,
               'kl': self.kl}
        if self.hamming is not None:
            res['hamming'] = self.hamming
        return res

    def rows(self) -> List[Dict[str, any]]:
        rows = [{'setting': self.setting, 'layer': name, 'metric': 'mse', 'value': v}
                for name, v in self.layer_mse.items()]
        rows.append({'setting': self.setting, 'layer': MODEL, 'metric': 'final_mse', 'value': self.final_mse})
        rows.append({'setting': self.setting, 'layer': MODEL, 'metric': 'mean_bits', 'value': self.mean_bits})
        if self.kl is not None:
            rows.append({'setting': self.setting, 'layer': MODEL, 'metric': 'kl', 'value': self.kl})
        for name, d in (self.hamming or {}).items():
            rows.append({'setting': self.setting, 'layer': name, 'metric': 'hamming', 'value': d})
        return rows


class SweepResult:
    r"""
    One :class:`SweepPoint` per requested setting, sorted by setting
    (ablation variants keep their own order)
    """

    def __init__(self, *, axis: SweepAxis, points: List[SweepPoint], config: QuantConfig,
                 observations: List[str] = None):
        self.axis = axis
        self.points = points
        self.config = config
        self.observations = observations or []

    @property
    def settings(self) -> list:
        return [p.setting for p in self.points]

    def __getitem__(self, setting) -> SweepPoint:
        for p in self.points:
            if p.setting == setting:
                return p
        raise KeyError(setting)

    def to_dict(self):
        return {'note': PROXY_NOTE,
                'axis': self.axis.value,
                'config': self.config.to_dict(),
                'points': [p.to_dict() for p in self.points],
                'observations': self.observations}

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for p in self.points:
            rows += p.rows()
        return pd.DataFrame(rows, columns=['setting', 'layer', 'metric', 'value'])


def model_mean_bits(packed: PackedModel) -> float:
    r"""
    Payload bits per weight over all layers
    """
    bits = Fraction(0)
    total = 0
    for layer in packed:
        bits += mean_bits(layer).payload * layer.n_total
        total += layer.n_total
    return float(bits / total)


def _resolve_layer(model: Model, kl_layer: Optional[Union[int, str]]) -> int:
    if kl_layer is None:
        return len(model) - 1
    if isinstance(kl_layer, str):
        if kl_layer not in model.names:
            raise ConfigsError(f"Unknown layer {kl_layer}")
        return model.names.index(kl_layer)
    if not -len(model) <= kl_layer < len(model):
        raise ConfigsError(f"Layer index {kl_layer} out of range for {len(model)} layers")
    return kl_layer % len(model)


def _run_point(model: Model, inputs: np.ndarray, config: QuantConfig, setting, *,
               threads: int, kl_layer: int, histogram: HistogramSpec):
    packed, report = ModelQuantizer(config, threads=threads).quantize(model, inputs)
    fp = forward_outputs(model, inputs)
    q = forward_outputs(model, inputs, dequantized_weights(model, packed))
    point = SweepPoint(setting=setting,
                       layer_mse={r.name: r.mse for r in report.layers},
                       final_mse=float(np.mean((fp[-1] - q[-1]) ** 2)),
                       mean_bits=model_mean_bits(packed),
                       kl=activation_kl(fp[kl_layer], q[kl_layer], histogram))
    return point, packed


def _log_point(axis: SweepAxis, point: SweepPoint):
    logger.log([(f'{axis.value}={point.setting}', Text.key), ': final mse ',
                (f'{point.final_mse:.4g}', Text.value), ', bits ',
                (f'{point.mean_bits:.3f}', Text.value), ', kl ',
                (f'{point.kl:.4g}', Text.value)])


def sweep_bits(model: Model, inputs: np.ndarray, config: QuantConfig, k_list: Sequence[int], *,
               threads: int = 1, kl_layer: Optional[Union[int, str]] = None,
               histogram: HistogramSpec = None) -> SweepResult:
    r"""
    Quantize with each intermediate bit width in ``k_list``
    """
    for k in k_list:
        check_bits(k)
    layer = _resolve_layer(model, kl_layer)
    histogram = histogram or HistogramSpec()
    points = []
    for k in sorted(k_list):
        point, _ = _run_point(model, inputs, config.replace(k_high=k), k,
                              threads=threads, kl_layer=layer, histogram=histogram)
        _log_point(SweepAxis.intermediate_bits, point)
        points.append(point)

    observations = []
    if len(points) > 1 and 4 in k_list:
        best = min(points, key=lambda p: p.kl)
        if best.setting == 4:
            observations.append(f'k=4 has the lowest KL divergence at layer {model.names[layer]}')
        else:
            observations.append(f'k={best.setting} has a lower KL divergence than k=4 '
                                f'at layer {model.names[layer]}; k=4 is not the closest here')
            squeeze_notice(observations[-1])
    return SweepResult(axis=SweepAxis.intermediate_bits, points=points, config=config,
                       observations=observations)


def sweep_ratio(model: Model, inputs: np.ndarray, config: QuantConfig, ratios: Sequence[float], *,
                threads: int = 1, kl_layer: Optional[Union[int, str]] = None,
                histogram: HistogramSpec = None) -> SweepResult:
    r"""
    Quantize with each salient ratio in ``ratios``
    """
    for r in ratios:
        if not 0 <= r <= 1:
            raise ValueError(f"Salient ratio must lie in [0, 1], got {r}")
    layer = _resolve_layer(model, kl_layer)
    histogram = histogram or HistogramSpec()
    points = []
    for r in sorted(ratios):
        point, _ = _run_point(model, inputs, config.replace(salient_ratio=r), r,
                              threads=threads, kl_layer=layer, histogram=histogram)
        _log_point(SweepAxis.salient_ratio, point)
        points.append(point)

    observations = []
    for a, b in zip(points, points[1:]):
        if b.total_mse > a.total_mse * (1 + MONOTONE_TOLERANCE):
            observations.append(f'reconstruction error increases from ratio {a.setting} to {b.setting} '
                                f'({a.total_mse:.4g} to {b.total_mse:.4g})')
            squeeze_notice(observations[-1])
    if len(points) > 1 and not observations:
        observations.append('reconstruction error does not increase with the salient ratio')
    return SweepResult(axis=SweepAxis.salient_ratio, points=points, config=config,
                       observations=observations)


def sweep_lambda(model: Model, inputs: np.ndarray, config: QuantConfig,
                 lambdas: Sequence[float] = None, *,
                 threads: int = 1, kl_layer: Optional[Union[int, str]] = None,
                 histogram: HistogramSpec = None) -> SweepResult:
    r"""
    Quantize with each ``λ``, reporting how many mask bits of every layer differ
    from the Hessian-only (``λ = 0``) selection
    """
    if lambdas is None:
        lambdas = DEFAULT_LAMBDAS
    for lam in lambdas:
        if not lam >= 0:
            raise ValueError(f"lambda must be non-negative, got {lam}")
    layer = _resolve_layer(model, kl_layer)
    histogram = histogram or HistogramSpec()

    _, baseline = _run_point(model, inputs, config.replace(lam=0.), 0.,
                             threads=threads, kl_layer=layer, histogram=histogram)
    base_masks = {l.name: l.mask_array for l in baseline}

    points = []
    for lam in sorted(lambdas):
        point, packed = _run_point(model, inputs, config.replace(lam=lam), lam,
                                   threads=threads, kl_layer=layer, histogram=histogram)
        point.hamming = {l.name: int(np.count_nonzero(l.mask_array != base_masks[l.name])) for l in packed}
        _log_point(SweepAxis.lambda_, point)
        points.append(point)

    changed = [p.setting for p in points if any(p.hamming.values())]
    observations = [f'masks differ from the Hessian-only selection for lambda in {changed}'
                    if changed else 'no lambda changes the Hessian-only selection']
    return SweepResult(axis=SweepAxis.lambda_, points=points, config=config, observations=observations)


class SupervisionReport:
    r"""
    Calibration drift between ``fias`` and ``general`` supervision
    """

    def __init__(self, *, layers: List[Dict[str, any]], final_mse_fias: float, final_mse_general: float,
                 config: QuantConfig, observations: List[str]):
        self.layers = layers
        self.final_mse_fias = final_mse_fias
        self.final_mse_general = final_mse_general
        self.config = config
        self.observations = observations

    def to_dict(self):
        return {'note': PROXY_NOTE,
                'config': self.config.to_dict(),
                'layers': self.layers,
                'final_mse': {'fias': self.final_mse_fias, 'general': self.final_mse_general},
                'observations': self.observations}

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for layer in self.layers:
            for metric in ('activation_diff', 'mse_fias', 'mse_general'):
                rows.append({'setting': 'supervision', 'layer': layer['name'],
                             'metric': metric, 'value': layer[metric]})
        rows.append({'setting': 'fias', 'layer': MODEL, 'metric': 'final_mse', 'value': self.final_mse_fias})
        rows.append({'setting': 'general', 'layer': MODEL, 'metric': 'final_mse',
                     'value': self.final_mse_general})
        return pd.DataFrame(rows, columns=['setting', 'layer', 'metric', 'value'])


def compare_supervision(model: Model, inputs: np.ndarray, config: QuantConfig, *,
                        threads: int = 1) -> SupervisionReport:
    r"""
    Quantize with both supervision modes and compare the calibration activations
    of every layer and the final outputs
    """
    if len(model) < 2:
        squeeze_notice('Supervision modes only differ on models with two or more layers; '
                       'the comparison of a one-layer model is trivially zero')

    runs = {}
    for mode in (Supervision.fias, Supervision.general):
        quantizer = ModelQuantizer(config.replace(supervision=mode), threads=threads)
        packed, report = quantizer.quantize(model, inputs)
        runs[mode] = (quantizer, packed, report)

    fias, general = runs[Supervision.fias], runs[Supervision.general]
    layers = []
    for i, name in enumerate(model.names):
        layers.append({'name': name,
                       'activation_diff': float(np.linalg.norm(fias[0].activations[i] - general[0].activations[i])),
                       'mse_fias': fias[2].layers[i].mse,
                       'mse_general': general[2].layers[i].mse})

    fp = forward_outputs(model, inputs)[-1]
    final = {}
    for mode, (_, packed, _) in runs.items():
        q = forward_outputs(model, inputs, dequantized_weights(model, packed))[-1]
        final[mode] = float(np.mean((fp - q) ** 2))

    if final[Supervision.fias] <= final[Supervision.general]:
        observations = ['fias final-output error is not above general supervision']
    else:
        observations = ['general supervision has a lower final-output error than fias on this model']
        squeeze_notice(observations[0])

    return SupervisionReport(layers=layers,
                             final_mse_fias=final[Supervision.fias],
                             final_mse_general=final[Supervision.general],
                             config=config, observations=observations)


ABLATION_VARIANTS = ['full', '-PBAR', '-FIAS', '-PBAR-FIAS', '-PBAR-FIAS-staged']


def _ablation_config(config: QuantConfig, variant: str) -> QuantConfig:
    changes = {}
    if 'PBAR' in variant:
        changes['lam'] = 0.
    if 'FIAS' in variant:
        changes['supervision'] = Supervision.general
    if 'staged' in variant:
        changes['staged'] = False
    return config.replace(**changes)


def ablation(model: Model, inputs: np.ndarray, config: QuantConfig, *,
             threads: int = 1, kl_layer: Optional[Union[int, str]] = None,
             histogram: HistogramSpec = None) -> SweepResult:
    r"""
    Remove the components one at a time:
    ``-PBAR`` sets ``λ = 0``, ``-FIAS`` uses general supervision
    and ``-staged`` measures salience and binarizes on the original weights.
    """
    layer = _resolve_layer(model, kl_layer)
    histogram = histogram or HistogramSpec()
    points = []
    for variant in ABLATION_VARIANTS:
        point, _ = _run_point(model, inputs, _ablation_config(config, variant), variant,
                              threads=threads, kl_layer=layer, histogram=histogram)
        _log_point(SweepAxis.ablation, point)
        points.append(point)

    full = points[0]
    worse = [p.setting for p in points[1:] if p.final_mse >= full.final_mse]
    observations = [f'variants not better than the full method: {worse}']
    return SweepResult(axis=SweepAxis.ablation, points=points, config=config, observations=observations)


class KLReport:
    r"""
    Per layer KL divergence and range statistics of the output
    under the packed model against full precision.
    ``channels`` has one row per layer, weights and output channel.
    """

    def __init__(self, *, layers: List[Dict[str, any]], histogram: HistogramSpec,
                 channels: Optional[pd.DataFrame] = None):
        self.layers = layers
        self.histogram = histogram
        self.channels = channels if channels is not None else pd.DataFrame(columns=RANGE_COLUMNS)

    def to_dict(self):
        return {'note': PROXY_NOTE, 'histogram': self.histogram.to_dict(), 'layers': self.layers}

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for layer in self.layers:
            for metric, value in layer.items():
                if metric != 'name':
                    rows.append({'setting': 'packed', 'layer': layer['name'], 'metric': metric, 'value': value})
        return pd.DataFrame(rows, columns=['setting', 'layer', 'metric', 'value'])

    def to_range_frame(self) -> pd.DataFrame:
        return self.channels


def kl_report(model: Model, inputs: np.ndarray, packed: PackedModel,
              histogram: HistogramSpec = None, *, outlier_factor: float = 4.) -> KLReport:
    histogram = histogram or HistogramSpec()
    fp = forward_outputs(model, inputs)
    q = forward_outputs(model, inputs, dequantized_weights(model, packed))
    layers = []
    channels = []
    for name, y_fp, y_q in zip(model.names, fp, q):
        stats_fp = range_stats(y_fp, outlier_factor=outlier_factor)
        stats_q = range_stats(y_q, outlier_factor=outlier_factor)
        layers.append({'name': name,
                       'kl': activation_kl(y_fp, y_q, histogram),
                       'range_fp': float(stats_fp['range'].mean()),
                       'range_q': float(stats_q['range'].mean()),
                       'outliers_fp': int(stats_fp['outlier_count'].sum()),
                       'outliers_q': int(stats_q['outlier_count'].sum())})
        for weights, stats in (('fp', stats_fp), ('packed', stats_q)):
            channels.append(stats.assign(layer=name, weights=weights))
    return KLReport(layers=layers, histogram=histogram,
                    channels=pd.concat(channels, ignore_index=True)[RANGE_COLUMNS] if channels else None)
