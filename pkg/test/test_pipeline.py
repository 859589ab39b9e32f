import json
import tempfile
from pathlib import Path

import numpy as np

from squeeze.evaluate import synthetic_stack
from squeeze.pipeline import QuantConfig, load_config, calibration_pass, gptq_compensate, quantize_layer, \
    LayerQuantizer, ModelQuantizer, quantize_model, save_report, reconstruction_mse
from squeeze.quant import BinarizeMode, Supervision, PackedModel, encode_packed, unpack_mixed, mean_bits
from squeeze.salience import HessianState, accumulate_hessian, invert_hessian, compute_v
from squeeze.store import Tensor, TensorContainer, ModelSpec, LayerSpec, Model
from squeeze.internal.quant.uniform import fit_rows, quantize_rows
from squeeze.utils.errors import ConfigsError, MissingPrefix, ZeroPivot


def _stack_model(n_layers=12, width=16, n_tokens=64, seed=0):
    spec, container, inputs = synthetic_stack(n_layers, width, n_tokens, seed=seed)
    return Model(spec, container), inputs


def _model(weights, nonlinearity='identity'):
    container = TensorContainer([Tensor(name=f'l{i}', data=w) for i, w in enumerate(weights)])
    spec = ModelSpec(layers=[LayerSpec(weight_name=f'l{i}', nonlinearity=nonlinearity)
                             for i in range(len(weights))])
    return Model(spec, container)


def test_config():
    c = QuantConfig()
    assert c.to_dict() == {'k_high': 4, 'salient_ratio': 0.2, 'lambda': 3e-4, 'supervision': 'fias',
                           'binarize_mode': 'scaled', 'compensation': False, 'damping_fraction': 0.01,
                           'range_mode': 'raw', 'per_layer_params': False, 'staged': True}
    assert QuantConfig.from_dict(c.to_dict()) == c
    assert QuantConfig.from_dict({'binarize_mode': 'bare_sign'}).binarize_mode is BinarizeMode.bare_sign

    for data in ({'salient_ratio': 1.5}, {'k_high': 9}, {'lambda': -1.}, {'unknown': 1},
                 {'supervision': 'greedy'}, {'compensation': 'yes'}):
        try:
            QuantConfig.from_dict(data)
        except ConfigsError:
            pass
        else:
            assert False, data


def test_load_config():
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / 'quant.yaml'
        path.write_text('salient_ratio: 0.5\nlambda: 3e-3\nsupervision: general\n')
        c = load_config(path, {'salient_ratio': 0.1})
    assert c.salient_ratio == 0.1
    assert c.lam == 3e-3
    assert c.supervision is Supervision.general


def test_calibration_pass():
    rng = np.random.default_rng(0)
    inputs = rng.normal(size=(5, 4))

    model = _model([rng.normal(size=(3, 4))])
    for mode in (Supervision.fias, Supervision.general):
        assert np.array_equal(calibration_pass(model, inputs, mode)[0], inputs)

    model = _model([np.eye(4), np.eye(4)])
    assert np.array_equal(calibration_pass(model, inputs)[1], inputs)

    weights = [rng.normal(size=(4, 4)) for _ in range(3)]
    model = _model(weights)
    x3 = inputs @ weights[0].T.astype(np.float32) @ weights[1].T.astype(np.float32)
    record = calibration_pass(model, inputs)
    assert np.allclose(record[2], x3, atol=1e-5)

    try:
        calibration_pass(model, inputs, Supervision.general)
    except MissingPrefix:
        pass
    else:
        assert False

    config = QuantConfig(salient_ratio=0., binarize_mode='bare')
    prefix = PackedModel([quantize_layer(model.weight(i), record[i], config, name=model.names[i])[0]
                          for i in range(2)])
    general = calibration_pass(model, inputs, Supervision.general, prefix)
    assert np.array_equal(general[0], record[0])
    assert np.max(np.abs(general[2] - record[2])) > 1e-6
    assert general.source_hash != record.source_hash


def test_compensate_recurrence():
    hinv = np.array([[2., 0.5], [0.5, 1.]])
    w_hat, adjusted = gptq_compensate(np.array([1.3, 2.]), lambda q, c: np.round(c), hinv)
    assert np.allclose(adjusted, [1.3, 2. - 0.3 * 0.5 / 2.])
    assert np.allclose(w_hat, [1., 2.])

    w = np.array([[1.3, 2.7, -0.4]])
    _, adjusted = gptq_compensate(w, lambda q, c: np.round(c), np.diag([1., 2., 3.]))
    assert np.array_equal(adjusted, w)

    try:
        gptq_compensate(w, lambda q, c: c, np.diag([1., 0., 3.]))
    except ZeroPivot:
        pass
    else:
        assert False


def test_layer_degenerate_ratios():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(6, 8)).astype(np.float32)
    x = rng.normal(size=(20, 8))

    packed, report = quantize_layer(w, x, QuantConfig(salient_ratio=1.))
    assert report.mse == report.stage1_mse
    _, w4 = quantize_rows(w, fit_rows(w, 4))
    assert np.array_equal(unpack_mixed(packed), w4)

    packed, _ = quantize_layer(w, x, QuantConfig(salient_ratio=0., binarize_mode='bare'))
    assert set(np.unique(unpack_mixed(packed)).tolist()) <= {-1., 1.}


def test_layer_counts():
    rng = np.random.default_rng(2)
    w = rng.normal(size=(8, 8))
    x = rng.normal(size=(32, 8))
    packed, report = quantize_layer(w, x, QuantConfig())
    assert packed.n_salient == 13
    assert report.salient_count == 13
    assert mean_bits(packed).payload * 64 == 51 + 4 * 13


def test_salience_on_stage_one():
    rng = np.random.default_rng(3)
    w = rng.normal(size=(4, 6)).astype(np.float32)
    x = rng.normal(size=(16, 6))
    quantizer = LayerQuantizer(QuantConfig())
    quantizer.quantize(w, x)
    _, w4 = quantize_rows(w, fit_rows(w, 4))
    assert not np.array_equal(w4, w)
    diag = invert_hessian(accumulate_hessian(HessianState.zeros(6), x), 0.01).diag
    assert np.array_equal(quantizer.maps.v, compute_v(w4, diag))
    assert not np.array_equal(quantizer.maps.v, compute_v(w, diag))


def test_compensation_efficacy():
    better = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        w = rng.normal(size=(16, 16)).astype(np.float32)
        x = rng.normal(size=(128, 16)) @ rng.normal(size=(16, 16))
        plain, _ = quantize_layer(w, x, QuantConfig())
        compensated, _ = quantize_layer(w, x, QuantConfig(compensation=True))
        if reconstruction_mse(w, unpack_mixed(compensated), x) < reconstruction_mse(w, unpack_mixed(plain), x):
            better += 1
    assert better >= 95, better


def test_compensation_diagonal_hessian():
    rng = np.random.default_rng(4)
    w = rng.normal(size=(5, 6)).astype(np.float32)
    x = np.concatenate([np.diag(rng.uniform(0.5, 2., size=6)), np.diag(rng.uniform(0.5, 2., size=6))])
    for staged in (True, False):
        plain, r1 = quantize_layer(w, x, QuantConfig(staged=staged))
        compensated, r2 = quantize_layer(w, x, QuantConfig(staged=staged, compensation=True))
        assert plain == compensated
        assert r1.mse == r2.mse

def test_binarized_scale():
    rng = np.random.default_rng(5)
    w = rng.normal(size=(7, 12)).astype(np.float32)
    x = rng.normal(size=(40, 12))
    _, w4 = quantize_rows(w, fit_rows(w, 4))
    for compensation in (False, True):
        packed, _ = quantize_layer(w, x, QuantConfig(compensation=compensation))
        assert 0 < packed.n_salient < w.size
        for i, params in enumerate(packed.row_bin):
            assert params.alpha == np.float32(np.mean(np.abs(w4[i].astype(np.float64))))

    packed, _ = quantize_layer(w, x, QuantConfig(staged=False))
    for i, params in enumerate(packed.row_bin):
        assert params.alpha == np.float32(np.mean(np.abs(w[i].astype(np.float64))))


def test_single_layer_supervision():
    model, inputs = _stack_model(n_layers=1)
    fias, _ = quantize_model(model, inputs, QuantConfig())
    general, _ = quantize_model(model, inputs, QuantConfig(supervision='general'))
    assert encode_packed(fias) == encode_packed(general)
    assert fias == general


def test_fias_invariance():
    model, inputs = _stack_model()
    quantizer = ModelQuantizer(QuantConfig())
    packed, report = quantizer.quantize(model, inputs)

    reference = calibration_pass(model, inputs)
    for i in range(len(model)):
        h = accumulate_hessian(HessianState.zeros(16), reference[i]).h
        assert np.array_equal(quantizer.hessians[i].h, h)
        assert packed[model.names[i]].n_salient == 51

    assert [r.name for r in report.layers] == model.names

    general = ModelQuantizer(QuantConfig(supervision='general'))
    general.quantize(model, inputs)
    assert np.array_equal(general.hessians[0].h, quantizer.hessians[0].h)
    assert np.max(np.abs(general.hessians[2].h - quantizer.hessians[2].h)) > 1e-6


def test_parallel_determinism():
    model, inputs = _stack_model(n_layers=4)
    one, _ = quantize_model(model, inputs, QuantConfig(), threads=1)
    many, _ = quantize_model(model, inputs, QuantConfig(), threads=4)
    assert encode_packed(one) == encode_packed(many)


def test_report():
    model, inputs = _stack_model(n_layers=3)
    _, report = quantize_model(model, inputs, QuantConfig())
    with tempfile.TemporaryDirectory() as d:
        save_report(report, Path(d) / 'a.json')
        data = json.loads((Path(d) / 'a.json').read_text())
        save_report(report, Path(d) / 'b.json', timing=True)
        timed = json.loads((Path(d) / 'b.json').read_text())
    assert 'wall_time' not in data
    assert 'wall_time' in timed
    assert [l['name'] for l in data['layers']] == model.names
    assert data['config']['lambda'] == 3e-4
    assert 'proxy' in data['note']


if __name__ == '__main__':
    test_config()
    test_load_config()
    test_calibration_pass()
    test_compensate_recurrence()
    test_layer_degenerate_ratios()
    test_layer_counts()
    test_salience_on_stage_one()
    test_compensation_efficacy()
    test_compensation_diagonal_hessian()
    test_binarized_scale()
    test_single_layer_supervision()
    test_fias_invariance()
    test_parallel_determinism()
    test_report()
