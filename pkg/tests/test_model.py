import mpmath
import numpy as np
import pytest

from align_lab.errors import DimensionMismatch, NonFiniteInput, ParseError, ShapeMismatch
from align_lab.model import (MlpParams, TwoStream, cross_entropy, ema_couple, forward,
                             init_params, load_two_stream, loss_and_grads, lr_at,
                             save_two_stream, sgd_step)

mpmath.mp.dps = 50


def mp_forward(params, x):
    """Arbitrary-precision forward pass written without numpy."""
    W1, b1, W2, b2 = (a.tolist() for a in params.arrays())
    hidden = [max(mpmath.mpf(0), mpmath.fsum(mpmath.mpf(w) * mpmath.mpf(xi)
                                             for w, xi in zip(row, x)) + mpmath.mpf(b))
              for row, b in zip(W1, b1)]
    logits = [mpmath.fsum(mpmath.mpf(w) * h for w, h in zip(row, hidden)) + mpmath.mpf(b)
              for row, b in zip(W2, b2)]
    exps = [mpmath.exp(z) for z in logits]
    total = mpmath.fsum(exps)
    return [float(e / total) for e in exps]


def test_zero_params_give_uniform():
    p = MlpParams(np.zeros((4, 3)), np.zeros(4), np.zeros((5, 4)), np.zeros(5))
    np.testing.assert_allclose(forward(p, [1.0, -2.0, 3.0]), 0.2)


def test_equal_logits_give_half():
    for t in (-50.0, 0.0, 3.0, 700.0):
        p = MlpParams(np.zeros((2, 1)), np.zeros(2), np.zeros((2, 2)), np.array([t, t]))
        np.testing.assert_allclose(forward(p, [1.0]), [0.5, 0.5])


def test_forward_matches_mpmath(rng):
    for _ in range(20):
        params = init_params(5, 7, 4, rng)
        params.b1 = rng.normal(size=7)
        params.b2 = rng.normal(size=4)
        x = rng.normal(size=5)
        out = forward(params, x)
        np.testing.assert_allclose(out, mp_forward(params, x), rtol=0, atol=1e-10)
        assert abs(out.sum() - 1) < 1e-9


def test_forward_errors(rng):
    p = init_params(3, 4, 2, rng)
    with pytest.raises(DimensionMismatch):
        forward(p, [1.0, 2.0])
    with pytest.raises(NonFiniteInput):
        forward(p, [1.0, np.nan, 0.0])


def _flat(params):
    return np.concatenate([a.ravel() for a in params.arrays()])


def _unflat(vec, like):
    out, k = [], 0
    for a in like.arrays():
        out.append(vec[k:k + a.size].reshape(a.shape))
        k += a.size
    return MlpParams(*out)


def finite_difference(params, batch, eta, step=1e-5):
    theta = _flat(params)
    grad = np.zeros_like(theta)
    for j in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[j] += step
        dn[j] -= step
        grad[j] = (loss_and_grads(_unflat(up, params), *batch, eta)[0].total
                   - loss_and_grads(_unflat(dn, params), *batch, eta)[0].total) / (2 * step)
    return grad


def random_instance(rng, d=3, h=4, n=3):
    params = init_params(d, h, n, rng)
    params.b1 = rng.normal(scale=0.5, size=h)
    params.b2 = rng.normal(scale=0.5, size=n)
    k_lab, k_unl = int(rng.integers(0, 5)), int(rng.integers(0, 5))
    if k_lab + k_unl == 0:
        k_lab = 1
    batch = (rng.normal(size=(k_lab, d)), rng.integers(0, n, size=k_lab),
             rng.normal(size=(k_unl, d)), rng.dirichlet(np.ones(n), size=k_unl))
    return params, batch


def relative_error(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


@pytest.mark.parametrize("eta", [0.0, 0.5, 1.0])
def test_gradients_match_finite_differences(eta):
    rng = np.random.default_rng(int(eta * 10) + 3)
    for _ in range(20):
        params, batch = random_instance(rng)
        _, grads = loss_and_grads(params, *batch, eta)
        fd = finite_difference(params, batch, eta)
        assert relative_error(_flat(grads), fd).max() < 1e-4


def test_loss_contracts(rng):
    params = init_params(3, 4, 3, rng)
    xl, yl = rng.normal(size=(4, 3)), rng.integers(0, 3, 4)
    xu, qu = rng.normal(size=(6, 3)), rng.dirichlet(np.ones(3), size=6)
    sup_only = loss_and_grads(params, xl, yl, np.zeros((0, 3)), np.zeros((0, 3)), 1.0)[0]
    with_unl = loss_and_grads(params, xl, yl, xu, qu, 0.0)[0]
    assert with_unl.total == sup_only.total == sup_only.supervised
    assert with_unl.unsupervised >= 0
    empty = loss_and_grads(params, np.zeros((0, 3)), [], np.zeros((0, 3)), np.zeros((0, 3)), 1.0)
    assert empty[0].total == 0.0 and np.all(_flat(empty[1]) == 0)
    with pytest.raises(DimensionMismatch):
        loss_and_grads(params, xl, yl[:2], xu, qu, 1.0)


def test_perfect_prediction_loss_near_zero():
    p = MlpParams(np.zeros((1, 1)), np.zeros(1), np.zeros((2, 1)), np.array([60.0, -60.0]))
    loss, _ = loss_and_grads(p, [[0.0]], [0], np.zeros((0, 1)), np.zeros((0, 2)), 1.0)
    assert loss.supervised < 1e-12
    assert cross_entropy(np.array([0.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(-np.log(1e-12))


def test_sgd_step(rng):
    p = init_params(3, 4, 2, rng)
    zero = MlpParams(*(np.zeros_like(a) for a in p.arrays()))
    assert all(np.array_equal(a, b) for a, b in zip(sgd_step(p, zero, 0.1).arrays(), p.arrays()))
    one = MlpParams(np.ones((1, 1)), np.zeros(1), np.ones((1, 1)), np.zeros(1))
    g = MlpParams(np.full((1, 1), 2.0), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
    assert sgd_step(one, g, 0.5).W1[0, 0] == 0.0


def test_lr_schedule():
    base = 1e-4
    assert lr_at(1, base) == base
    assert lr_at(49, base) == base
    assert lr_at(50, base) == pytest.approx(base * 0.1)
    assert lr_at(125, base) == pytest.approx(base * 0.01)
    assert lr_at(256, base) == pytest.approx(base * 0.01)


def test_ema_couple():
    enc = (np.zeros((1, 1)), np.zeros(1))
    ts = TwoStream(enc, (np.ones((1, 1)), np.ones(1)), (np.zeros((2, 1)), np.zeros(2)), 0.95)
    out = ema_couple(ts)
    assert out.encoder1[0][0, 0] == pytest.approx(0.05)
    assert out.encoder2 is ts.encoder2 and out.head is ts.head
    same = TwoStream(ts.encoder2, ts.encoder2, ts.head)
    assert np.array_equal(ema_couple(same).encoder1[0], ts.encoder2[0])
    with pytest.raises(ShapeMismatch):
        ema_couple(TwoStream((np.zeros((2, 1)), np.zeros(2)), ts.encoder2, ts.head))


def test_ema_geometric_convergence(rng):
    ts = TwoStream.from_params(init_params(3, 4, 2, rng))
    ts.encoder2 = (ts.encoder2[0] + 1.0, ts.encoder2[1] - 2.0)
    gap = np.abs(ts.encoder1[0] - ts.encoder2[0]).max()
    for k in range(1, 30):
        ts = ema_couple(ts)
        np.testing.assert_allclose(np.abs(ts.encoder1[0] - ts.encoder2[0]).max(),
                                   gap * 0.95 ** k, rtol=1e-9)


def test_binary_round_trip(tmp_path, rng):
    ts = TwoStream.from_params(init_params(3, 4, 2, rng))
    ts = ema_couple(TwoStream(ts.encoder1, (ts.encoder2[0] * 2, ts.encoder2[1] + 1), ts.head))
    path = tmp_path / "p.bin"
    save_two_stream(ts, path)
    raw = path.read_bytes()
    assert raw[:5] == b"ALAB1"
    assert np.frombuffer(raw[5:17], dtype="<u4").tolist() == [3, 4, 2]
    assert len(raw) == 17 + 8 * (12 + 4 + 12 + 4 + 8 + 2)
    # encoder1 W1 comes first, row-major
    np.testing.assert_array_equal(np.frombuffer(raw[17:17 + 96], dtype="<f8"),
                                  ts.encoder1[0].ravel())
    back = load_two_stream(path)
    for a, b in zip((*back.encoder1, *back.encoder2, *back.head),
                    (*ts.encoder1, *ts.encoder2, *ts.head)):
        np.testing.assert_array_equal(a, b)
    path.write_bytes(raw[:-8])
    with pytest.raises(ParseError):
        load_two_stream(path)
