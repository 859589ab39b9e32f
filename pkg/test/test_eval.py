import json
import math
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from squeeze.evaluate import HistogramSpec, layer_output_error, activation_kl, range_stats, synthetic_stack, \
    sweep_bits, sweep_ratio, sweep_lambda, compare_supervision, ablation, kl_report, model_mean_bits, \
    final_output_mse, write_result, supervision_study, ABLATION_VARIANTS, DEFAULT_STUDY_BITS
from squeeze.pipeline import QuantConfig, quantize_model
from squeeze.store import Model
from squeeze.utils.errors import DimensionMismatch, EmptySample, ConfigsError


def _model(n_layers=3, width=10, n_tokens=32, seed=0):
    spec, container, inputs = synthetic_stack(n_layers, width, n_tokens, seed=seed)
    return Model(spec, container), inputs


def test_layer_output_error():
    assert layer_output_error([[1.]], [[0.]], [[1.]]) == {'mse': 1., 'max_abs': 1.}

    w = np.array([[1., 2.], [3., 4.]])
    x = np.array([[1., 0.], [0., 2.]])
    res = layer_output_error(w, w, x)
    assert res['mse'] == 0. and res['max_abs'] == 0.

    try:
        layer_output_error(w, w, np.ones((2, 3)))
    except DimensionMismatch:
        pass
    else:
        assert False


def test_activation_kl():
    rng = np.random.default_rng(0)
    y = rng.normal(size=(64, 8))
    assert activation_kl(y, y) == 0.

    kl = activation_kl([1., 1., 1., 1.], [0., 1.], HistogramSpec(bin_count=2, range=(0., 1.)))
    assert abs(kl - math.log(2)) < 1e-6

    for _ in range(1000):
        a, b = rng.normal(size=100), rng.normal(0.5, 2., size=100)
        assert activation_kl(a, b) >= 0.

    try:
        activation_kl([], [1.])
    except EmptySample:
        pass
    else:
        assert False


def test_range_stats():
    y = np.array([[0., 5.], [1., 5.], [2., 5.], [3., 5.], [100., 5.]])
    stats = range_stats(y)
    assert list(stats.columns) == ['channel', 'min', 'max', 'range', 'outlier_count']
    assert stats['range'].tolist() == [100., 0.]
    assert stats['outlier_count'].tolist() == [1, 0]


def test_synthetic_stack():
    spec, container, inputs = synthetic_stack(4, 32, 16, seed=3)
    again = synthetic_stack(4, 32, 16, seed=3)
    assert container == again[1]
    assert np.array_equal(inputs, again[2])
    assert inputs.shape == (16, 32)
    assert container.names() == [f'layers.{i}.weight' for i in range(4)]
    assert [l.nonlinearity.value for l in spec.layers] == ['relu', 'relu', 'relu', 'identity']


def test_sweep_bits():
    model, inputs = _model()
    result = sweep_bits(model, inputs, QuantConfig(), [4])
    _, report = quantize_model(model, inputs, QuantConfig())
    point = result[4]
    assert point.layer_mse == {r.name: r.mse for r in report.layers}
    assert point.kl >= 0.

    result = sweep_bits(model, inputs, QuantConfig(), [8, 2, 4])
    assert result.settings == [2, 4, 8]
    assert len(result.observations) == 1


def test_sweep_ratio_bits():
    model, inputs = _model()
    result = sweep_ratio(model, inputs, QuantConfig(), [0.5, 0.2])
    assert result.settings == [0.2, 0.5]
    assert result[0.2].mean_bits == 1.6
    assert result[0.5].mean_bits == 2.5

    try:
        sweep_ratio(model, inputs, QuantConfig(), [1.5])
    except ValueError:
        pass
    else:
        assert False


def test_sweep_lambda():
    model, inputs = _model()
    result = sweep_lambda(model, inputs, QuantConfig(), [1e-2, 0.])
    assert result.settings == [0., 1e-2]
    assert set(result[0.].hamming.values()) == {0}
    assert set(result[1e-2].hamming) == set(model.names)

    try:
        sweep_lambda(model, inputs, QuantConfig(), [1e-3], kl_layer='missing')
    except ConfigsError:
        pass
    else:
        assert False


def test_compare_supervision():
    model, inputs = _model(n_layers=1)
    report = compare_supervision(model, inputs, QuantConfig())
    assert report.layers[0]['activation_diff'] == 0.
    assert report.layers[0]['mse_fias'] == report.layers[0]['mse_general']
    assert report.final_mse_fias == report.final_mse_general

    model, inputs = _model(n_layers=4)
    report = compare_supervision(model, inputs, QuantConfig())
    assert report.layers[0]['activation_diff'] == 0.
    assert all(l['activation_diff'] > 0. for l in report.layers[1:])

def test_supervision_study():
    result = supervision_study(QuantConfig(), n_stacks=20, n_layers=12, width=16, n_tokens=64)
    assert [s['seed'] for s in result.stacks] == list(range(20))
    assert all(s['best_k'] in DEFAULT_STUDY_BITS for s in result.stacks)
    assert all(sorted(s['kl']) == DEFAULT_STUDY_BITS for s in result.stacks)
    assert sum(result.best_bits.values()) == 20
    assert 0 <= result.fias_not_worse <= 20
    assert result.fias_majority == (result.fias_not_worse > 10)
    assert len(result.observations) == 2
    assert f'on {result.fias_not_worse} of 20 stacks' in result.observations[0]

    data = result.to_dict()
    assert data['fias_majority'] == result.fias_majority
    assert sum(data['best_bits'].values()) == 20
    frame = result.to_frame()
    assert set(frame['setting']) == {f'seed={s}' for s in range(20)}
    assert len(frame) == 20 * (3 + len(DEFAULT_STUDY_BITS))

    try:
        supervision_study(QuantConfig(), n_stacks=0)
    except ValueError:
        pass
    else:
        assert False



def test_ablation():
    model, inputs = _model()
    result = ablation(model, inputs, QuantConfig())
    assert result.settings == ABLATION_VARIANTS
    assert len(result.observations) == 1


def test_kl_report():
    model, inputs = _model()
    packed, _ = quantize_model(model, inputs, QuantConfig())
    report = kl_report(model, inputs, packed, HistogramSpec(bin_count=64))
    assert [l['name'] for l in report.layers] == model.names
    assert all(l['kl'] >= 0. for l in report.layers)
    assert report.to_dict()['histogram']['bin_count'] == 64
    assert final_output_mse(model, inputs, packed) > 0.
    assert 0. < model_mean_bits(packed) < 4.

def test_kl_report_ranges():
    model, inputs = _model()
    packed, _ = quantize_model(model, inputs, QuantConfig())
    report = kl_report(model, inputs, packed)
    channels = report.to_range_frame()
    assert list(channels.columns) == ['layer', 'weights', 'channel', 'min', 'max', 'range', 'outlier_count']
    assert len(channels) == 2 * sum(model.weight(i).shape[0] for i in range(len(model)))
    for layer in report.layers:
        rows = channels[channels['layer'] == layer['name']]
        assert set(rows['weights']) == {'fp', 'packed'}
        fp = rows[rows['weights'] == 'fp']
        assert abs(fp['range'].mean() - layer['range_fp']) < 1e-9
        assert int(fp['outlier_count'].sum()) == layer['outliers_fp']
        assert np.allclose(fp['max'] - fp['min'], fp['range'])

    with tempfile.TemporaryDirectory() as d:
        write_result(report, Path(d) / 'kl.json')
        written = pd.read_csv(Path(d) / 'kl.ranges.csv')
        assert (Path(d) / 'kl.csv').exists()
    assert len(written) == len(channels)
    assert written['channel'].tolist() == channels['channel'].tolist()



def test_write_result():
    model, inputs = _model(n_layers=2)
    result = sweep_ratio(model, inputs, QuantConfig(), [0.2])
    with tempfile.TemporaryDirectory() as d:
        write_result(result, Path(d) / 'ratio.json')
        data = json.loads((Path(d) / 'ratio.json').read_text())
        frame = pd.read_csv(Path(d) / 'ratio.csv')
    assert data['axis'] == 'salient_ratio'
    assert 'proxy' in data['note']
    assert list(frame.columns) == ['setting', 'layer', 'metric', 'value']
    assert set(frame['metric']) == {'mse', 'final_mse', 'mean_bits', 'kl'}


if __name__ == '__main__':
    test_layer_output_error()
    test_activation_kl()
    test_range_stats()
    test_synthetic_stack()
    test_sweep_bits()
    test_sweep_ratio_bits()
    test_sweep_lambda()
    test_compare_supervision()
    test_supervision_study()
    test_ablation()
    test_kl_report()
    test_kl_report_ranges()
    test_write_result()
