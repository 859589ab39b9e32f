import numpy as np

from squeeze.quant import BinarizeMode, binarize_matrix
from squeeze.salience import HessianState, accumulate_hessian, invert_hessian, compute_v, compute_b, \
    combine_pbar, select_salient, SalienceMaps, RangeMode
from squeeze.utils.errors import DimensionMismatch, NotPositiveDefinite, ZeroSamples, NonPositiveDiagonal, \
    ShapeMismatch


def _naive_b(w, x, w_hat, mode=RangeMode.raw):
    b = np.zeros(w.shape)
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            perturbed = w.copy()
            perturbed[i, j] = w_hat[i, j]
            y = x @ perturbed.T
            if mode is RangeMode.absolute:
                y = np.abs(y)
            b[i, j] = y[:, i].max() - y[:, i].min()
    return b


def test_accumulate():
    state = accumulate_hessian(HessianState.zeros(3), np.eye(3))
    assert np.array_equal(state.h, 2 * np.eye(3))
    assert state.n_samples == 3

    state = accumulate_hessian(HessianState.zeros(2), np.array([[1., 2.], [3., 4.]]))
    assert np.array_equal(state.h, 2 * np.array([[10., 14.], [14., 20.]]))

    rng = np.random.default_rng(0)
    x1, x2 = rng.normal(size=(5, 4)), rng.normal(size=(7, 4))
    two = accumulate_hessian(accumulate_hessian(HessianState.zeros(4), x1), x2)
    one = accumulate_hessian(HessianState.zeros(4), np.concatenate([x1, x2]))
    assert np.allclose(two.h, one.h, rtol=1e-6, atol=0)
    merged = accumulate_hessian(HessianState.zeros(4), x2).merge(accumulate_hessian(HessianState.zeros(4), x1))
    assert np.allclose(merged.h, one.h, rtol=1e-6, atol=0)
    assert merged.n_samples == 12

    try:
        accumulate_hessian(HessianState.zeros(3), np.ones((2, 4)))
    except DimensionMismatch:
        pass
    else:
        assert False


def test_invert():
    state = accumulate_hessian(HessianState.zeros(3), np.eye(3))
    inv = invert_hessian(state, 0.)
    assert np.allclose(inv.inverse, 0.5 * np.eye(3))

    state = accumulate_hessian(HessianState.zeros(2), np.array([[1., 2.], [3., 4.]]))
    inv = invert_hessian(state, 0.)
    assert np.allclose(inv.inverse, np.array([[20., -14.], [-14., 10.]]) / 8)
    assert np.max(np.abs(state.h @ inv.inverse - np.eye(2))) <= 1e-4

    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.normal(size=(32, 8))
        state = accumulate_hessian(HessianState.zeros(8), x)
        inv = invert_hessian(state, 0.01)
        h = state.h + inv.damping * np.eye(8)
        assert np.max(np.abs(h @ inv.inverse - np.eye(8))) <= 1e-4
        assert np.all(inv.diag > 0)

def test_invert_ill_conditioned():
    rng = np.random.default_rng(2)
    for condition in (1e2, 1e4, 1e6):
        for _ in range(10):
            left, _ = np.linalg.qr(rng.normal(size=(32, 8)))
            right, _ = np.linalg.qr(rng.normal(size=(8, 8)))
            singular = np.logspace(0., -np.log10(condition) / 2, 8)
            x = (left * singular) @ right.T
            state = accumulate_hessian(HessianState.zeros(8), x)
            assert np.linalg.cond(state.h) <= condition * 1.01
            for damping_fraction in (0., 0.01):
                inv = invert_hessian(state, damping_fraction)
                h = state.h + inv.damping * np.eye(8)
                assert np.max(np.abs(h @ inv.inverse - np.eye(8))) <= 1e-4



def test_singular():
    x = np.array([[1., 1., 0.], [2., 2., 0.]])
    state = accumulate_hessian(HessianState.zeros(3), x)
    try:
        invert_hessian(state, 0.)
    except NotPositiveDefinite:
        pass
    else:
        assert False

    inv = invert_hessian(state, 0.01)
    assert np.all(np.isfinite(inv.inverse))

    try:
        invert_hessian(HessianState.zeros(3), 0.01)
    except ZeroSamples:
        pass
    else:
        assert False


def test_compute_v():
    assert np.array_equal(compute_v(np.zeros((2, 3)), np.ones(3)), np.zeros((2, 3)))
    assert compute_v(np.array([[2.]]), np.array([0.5]))[0, 0] == 16.

    rng = np.random.default_rng(2)
    w = rng.normal(size=(4, 5))
    d = rng.uniform(0.1, 1., size=5)
    assert np.allclose(compute_v(w, 2 * d), compute_v(w, d) / 4)

    try:
        compute_v(w, np.array([1., 1., 0., 1., 1.]))
    except NonPositiveDiagonal:
        pass
    else:
        assert False


def test_compute_b_oracle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        d_out, d_in, n = int(rng.integers(1, 9)), int(rng.integers(1, 9)), int(rng.integers(1, 17))
        w = rng.normal(size=(d_out, d_in))
        x = rng.normal(size=(n, d_in))
        quant_fn = lambda m: binarize_matrix(m, BinarizeMode.scaled_sign)
        w_hat = quant_fn(w).astype(np.float64)
        for mode in (RangeMode.raw, RangeMode.absolute):
            assert np.allclose(compute_b(w, x, quant_fn, mode), _naive_b(w, x, w_hat, mode), rtol=0, atol=1e-6)


def test_compute_b_edges():
    rng = np.random.default_rng(4)
    w = rng.normal(size=(3, 4))
    x = rng.normal(size=(6, 4))
    y = x @ w.T
    b = compute_b(w, x, lambda m: m)
    assert np.allclose(b, (y.max(axis=0) - y.min(axis=0))[:, None] * np.ones((1, 4)))

    b = compute_b(w, x[:1], lambda m: binarize_matrix(m, BinarizeMode.scaled_sign))
    assert np.array_equal(b, np.zeros((3, 4)))

    try:
        compute_b(w, np.ones((2, 5)), lambda m: m)
    except DimensionMismatch:
        pass
    else:
        assert False


def test_combine():
    v = np.array([[1., 2.]])
    b = np.array([[1000., 0.]])
    assert np.array_equal(combine_pbar(v, b, 0.), v)
    assert np.allclose(combine_pbar(v, b, 1e-3), [[2., 2.]])

    try:
        combine_pbar(v, np.ones((2, 2)), 1e-3)
    except ShapeMismatch:
        pass
    else:
        assert False


def test_select():
    assert select_salient(np.ones((3, 3)), 1.).mask.all()

    mask = select_salient(np.array([[3., 1.], [2., 4.]]), 0.5).mask
    assert mask.tolist() == [[True, False], [False, True]]

    s = select_salient(np.ones((2, 2)), 0.25)
    assert s.count_selected == 1
    assert s.mask.tolist() == [[True, False], [False, False]]

    rng = np.random.default_rng(5)
    m = rng.normal(size=(10, 10))
    for ratio, count in ((0., 0), (0.2, 20), (0.5, 50), (1., 100)):
        s = select_salient(m, ratio)
        assert s.count_selected == count
        assert int(np.count_nonzero(s.mask)) == count


def test_pbar_reduction():
    rng = np.random.default_rng(6)
    for _ in range(100):
        w = rng.normal(size=(6, 6))
        x = rng.normal(size=(12, 6))
        inv = invert_hessian(accumulate_hessian(HessianState.zeros(6), x), 0.01)
        v = compute_v(w, inv.diag)
        b = compute_b(w, x, lambda m: binarize_matrix(m, BinarizeMode.scaled_sign))
        assert np.array_equal(select_salient(combine_pbar(v, b, 0.), 0.2).mask, select_salient(v, 0.2).mask)


def test_lambda_changes_selection():
    v = np.array([[2., 1.]])
    b = np.array([[0., 1000.]])
    assert select_salient(combine_pbar(v, b, 0.), 0.5).mask.tolist() == [[True, False]]
    assert select_salient(combine_pbar(v, b, 1e-2), 0.5).mask.tolist() == [[False, True]]


def test_maps_container():
    v = np.array([[1., 2.]])
    b = np.array([[3., 4.]])
    maps = SalienceMaps(v=v, b=b, lambda_used=0.5)
    assert np.array_equal(maps.m, v + 0.5 * b)
    c = maps.to_container('l0')
    assert c.names() == ['l0.V', 'l0.B', 'l0.M']


if __name__ == '__main__':
    test_accumulate()
    test_invert()
    test_invert_ill_conditioned()
    test_singular()
    test_compute_v()
    test_compute_b_oracle()
    test_compute_b_edges()
    test_combine()
    test_select()
    test_pbar_reduction()
    test_lambda_changes_selection()
    test_maps_container()
