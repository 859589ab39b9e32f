from fractions import Fraction

import numpy as np

from squeeze.quant import QuantParams, compute_uniform_params, quantize_uniform, dequantize_uniform, \
    BinarizeMode, BinParams, binarize_row, debinarize, pack_mixed, unpack_mixed, mean_bits, ConfigEcho, \
    PackedModel, encode_packed, decode_packed
from squeeze.internal.quant.packing import pack_codes, unpack_codes, pack_bits, PackedLayer
from squeeze.internal.quant.uniform import fit_rows, quantize_rows
from squeeze.utils.errors import BadBits, EmptyInput, CodeOutOfRange, CountMismatch, CorruptMask, \
    MagicMismatch, ContainerError


def _random_layer(rng, d_out, d_in, ratio, *, k=4, mode=BinarizeMode.scaled_sign, name='layer'):
    w = rng.normal(size=(d_out, d_in)).astype(np.float32)
    row_params = fit_rows(w, k)
    codes, _ = quantize_rows(w, row_params)
    mask = np.zeros(d_out * d_in, dtype=bool)
    mask[rng.permutation(d_out * d_in)[:int(round(ratio * d_out * d_in))]] = True
    mask = mask.reshape(d_out, d_in)
    row_bin = [BinParams(alpha=float(np.mean(np.abs(w[i]))), mode=mode) for i in range(d_out)]
    signs = np.where(w[~mask] > 0, 1, -1)
    echo = ConfigEcho(ratio=ratio, lam=3e-4)
    layer = pack_mixed(codes[mask], signs, mask, row_params, row_bin, echo, name=name)

    expected = np.empty((d_out, d_in), dtype=np.float32)
    for i in range(d_out):
        expected[i, mask[i]] = dequantize_uniform(codes[i, mask[i]], row_params[i])
        expected[i, ~mask[i]] = row_bin[i].alpha * np.where(w[i, ~mask[i]] > 0, 1, -1).astype(np.float32)
    return layer, expected


def test_uniform_params():
    p = compute_uniform_params([-1., 0., 2.], 2)
    assert p.s == 1. and p.z == 1

    p = compute_uniform_params([0., 15.], 4)
    assert p.s == 1. and p.z == 0

    p = compute_uniform_params([0., 0., 0.], 4)
    assert p.s == np.float32(1e-8) and p.z == 0

    p = compute_uniform_params([5., 5., 5.], 4)
    assert p.s == np.float32(5. / 15.) and p.z == 0
    assert quantize_uniform([5., 5., 5.], p).tolist() == [15, 15, 15]
    assert np.all(np.abs(dequantize_uniform([15], p) - 5.) <= float(p.s) / 2)

    p = compute_uniform_params([-3., -3.], 4)
    assert p.s == np.float32(3. / 15.) and p.z == 15

    for k in (0, 1, 9, 4.0, True):
        try:
            compute_uniform_params([1.], k)
        except BadBits:
            pass
        else:
            assert False

    try:
        compute_uniform_params([], 4)
    except EmptyInput:
        pass
    else:
        assert False


def test_quantize_dequantize():
    p = QuantParams(k=2, s=1., z=1)
    assert quantize_uniform([2.], p)[0] == 3
    assert quantize_uniform([-100.], p)[0] == 0
    assert quantize_uniform([0.], p)[0] == p.z
    assert dequantize_uniform([3], p)[0] == 2.
    assert dequantize_uniform([p.z], p)[0] == 0.

    try:
        dequantize_uniform([4], p)
    except CodeOutOfRange:
        pass
    else:
        assert False


def test_round_trip_bound():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        row = rng.uniform(-10, 10, size=int(rng.integers(1, 513)))
        for k in (2, 4, 8):
            p = compute_uniform_params(row, k)
            assert 0 <= p.z <= 2 ** k - 1
            w_hat = dequantize_uniform(quantize_uniform(row, p), p)
            assert np.all(np.abs(row - w_hat) <= float(p.s) / 2 + 1e-6)


def test_binarize():
    signs, params = binarize_row([0., 0., 0.], BinarizeMode.bare_sign)
    assert signs.tolist() == [-1, -1, -1]
    assert params.alpha == 1.

    signs, params = binarize_row([1., -2., 3.], BinarizeMode.scaled_sign)
    assert signs.tolist() == [1, -1, 1]
    assert params.alpha == 2.
    assert debinarize(signs, params).tolist() == [2., -2., 2.]

    signs, params = binarize_row([-0.5], 'bare')
    assert debinarize(signs, params).tolist() == [-1.]

    try:
        binarize_row([], BinarizeMode.scaled_sign)
    except EmptyInput:
        pass
    else:
        assert False


def test_bit_order():
    assert pack_codes([1, 2], 4) == bytes([0x21])
    assert unpack_codes(bytes([0x21]), 2, 4).tolist() == [1, 2]
    assert pack_bits([1, 0, 0, 0, 0, 0, 0, 0, 1]) == bytes([0x80, 0x80])

    codes = np.arange(8, dtype=np.uint8)
    assert unpack_codes(pack_codes(codes, 3), 8, 3).tolist() == codes.tolist()


def test_pack_unpack():
    rng = np.random.default_rng(2)
    for ratio in (0., 0.2, 1.):
        layer, expected = _random_layer(rng, 8, 8, ratio)
        assert np.array_equal(unpack_mixed(layer), expected)
        if ratio == 1.:
            assert layer.signs == b'' and len(layer.codes) == 32
        if ratio == 0.:
            assert layer.codes == b''

    for _ in range(1000):
        d_out, d_in = int(rng.integers(1, 65)), int(rng.integers(1, 65))
        layer, expected = _random_layer(rng, d_out, d_in, float(rng.uniform()), k=int(rng.integers(2, 9)))
        assert np.array_equal(unpack_mixed(layer), expected)
        raw = encode_packed(PackedModel([layer]))
        decoded = decode_packed(raw)
        assert decoded[layer.name] == layer
        assert encode_packed(decoded) == raw


def test_code_plane_padding():
    p = QuantParams(k=4, s=1., z=0)
    b = BinParams(alpha=1., mode='scaled')
    echo = ConfigEcho(ratio=1., lam=0.)
    codes = list(range(3, 16))
    layer = pack_mixed(codes, [], [[True] * 13], [p], [b], echo)
    assert len(layer.codes) == 7 and layer.codes[-1] == 0x0f
    assert unpack_mixed(layer)[0].tolist() == [float(c) for c in codes]

    p3 = QuantParams(k=3, s=1., z=0)
    layer = pack_mixed([7] * 5, [1, -1], [[True] * 5 + [False] * 2], [p3], [b], echo)
    assert unpack_mixed(layer)[0].tolist() == [7.] * 5 + [1., -1.]

    layer = pack_mixed(codes, [], [[True] * 13], [p], [b], echo)
    for mask, planes in ((layer.mask, layer.codes[:-1] + bytes([0xff])),
                         (layer.mask[:-1] + bytes([layer.mask[-1] | 1]), layer.codes)):
        corrupt = PackedLayer(name='padded', d_out=1, d_in=13, k=4, mask=mask, codes=planes,
                              signs=b'', row_params=[p], row_bin=[b], config_echo=echo)
        try:
            unpack_mixed(corrupt)
        except CorruptMask:
            pass
        else:
            assert False



def test_single_element():
    echo = ConfigEcho(ratio=1., lam=0.)
    p = QuantParams(k=4, s=0.5, z=3)
    layer = pack_mixed([3], [], [[True]], [p], [BinParams(alpha=1., mode='scaled')], echo)
    assert unpack_mixed(layer)[0, 0] == 0.

    layer = pack_mixed([], [-1], [[False]], [p], [BinParams(alpha=0.7, mode='scaled')], echo)
    assert unpack_mixed(layer)[0, 0] == np.float32(-0.7)


def test_pack_errors():
    p = QuantParams(k=4, s=1., z=0)
    b = BinParams(alpha=1., mode='scaled')
    echo = ConfigEcho(ratio=0.5, lam=0.)
    try:
        pack_mixed([1, 2], [1], [[True, False]], [p], [b], echo)
    except CountMismatch:
        pass
    else:
        assert False

    layer = pack_mixed([1], [1], [[True, False]], [p], [b], echo)
    corrupt = PackedLayer(name='broken', d_out=1, d_in=2, k=4, mask=layer.mask, codes=layer.codes + b'\x00',
                          signs=layer.signs, row_params=[p], row_bin=[b], config_echo=echo)
    try:
        unpack_mixed(corrupt)
    except CorruptMask as e:
        assert 'broken' in str(e)
    else:
        assert False


def test_mean_bits():
    rng = np.random.default_rng(3)
    layer, _ = _random_layer(rng, 10, 10, 0.2)
    bits = mean_bits(layer)
    assert bits.payload == Fraction(8, 5)
    assert bits.mask_bits == 1.
    assert bits.payload + 1 <= bits.bound

    layer, _ = _random_layer(rng, 10, 10, 0.5)
    bits = mean_bits(layer)
    assert bits.payload == Fraction(5, 2)
    assert bits.param_bits == 80 * 10 / 100

    layer, _ = _random_layer(rng, 8, 8, 0.2)
    assert mean_bits(layer).payload == Fraction(51 + 4 * 13, 64)


def test_packed_model():
    rng = np.random.default_rng(4)
    layers = [_random_layer(rng, 6, 5, 0.2, name='l0')[0],
              _random_layer(rng, 3, 6, 0.5, k=8, mode=BinarizeMode.bare_sign, name='l1')[0]]
    layers[1].config_echo = ConfigEcho(ratio=0.5, lam=1e-2)
    model = PackedModel(layers)
    raw = encode_packed(model)
    decoded = decode_packed(raw)
    assert decoded == model
    assert encode_packed(decoded) == raw
    assert decoded['l1'].config_echo.to_dict() == {'ratio': 0.5, 'lambda': float(np.float32(1e-2))}
    assert decoded['l1'].binarize_mode is BinarizeMode.bare_sign
    for a, b in zip(model, decoded):
        assert np.array_equal(unpack_mixed(a), unpack_mixed(b))

    try:
        decode_packed(b'S10T' + raw[4:])
    except MagicMismatch:
        pass
    else:
        assert False

    try:
        decode_packed(raw + b'\x00')
    except ContainerError:
        pass
    else:
        assert False


if __name__ == '__main__':
    test_uniform_params()
    test_quantize_dequantize()
    test_round_trip_bound()
    test_binarize()
    test_bit_order()
    test_pack_unpack()
    test_code_plane_padding()
    test_single_element()
    test_pack_errors()
    test_mean_bits()
    test_packed_model()
