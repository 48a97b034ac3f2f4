import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from grnppg import autodiff as ad
from helpers import check_grads, numeric_grad, rel_err

RNG = np.random.default_rng(1234)


def leaf(shape, rng=RNG, lo=-1.0, hi=1.0):
    return ad.Tensor(rng.uniform(lo, hi, size=shape), requires_grad=True)


# ---------------------------------------------------------------- matmul


def test_matmul_identity_and_zero():
    A = ad.Tensor([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(ad.matmul(A, ad.Tensor(np.eye(2))).data, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(ad.matmul(A, ad.Tensor(np.zeros((2, 2)))).data, np.zeros((2, 2)))


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ad.DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        ad.matmul(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((2, 3))))


def test_matmul_grad_matches_finite_differences():
    A, B = leaf((3, 4)), leaf((4, 2))
    assert check_grads(lambda: ad.sum(ad.matmul(A, B)), [A, B]) < 1e-6


def test_matmul_grad_is_dC_Bt():
    A, B = leaf((3, 4)), leaf((4, 2))
    G = RNG.normal(size=(3, 2))
    ad.backward(ad.sum(ad.mul(ad.matmul(A, B), ad.Tensor(G))))
    np.testing.assert_allclose(A.grad, G @ B.data.T, atol=1e-14)
    np.testing.assert_allclose(B.grad, A.data.T @ G, atol=1e-14)


def test_batched_matmul_grad():
    A, B = leaf((2, 3, 4)), leaf((4, 5))
    assert check_grads(lambda: ad.sum(ad.tanh(ad.matmul(A, B))), [A, B]) < 1e-6


# ---------------------------------------------------------------- elementwise


def test_elementwise_spot_values():
    assert ad.elementwise("exp", ad.Tensor([0.0])).data[0] == 1.0
    assert ad.elementwise("tanh", ad.Tensor([0.0])).data[0] == 0.0
    assert ad.elementwise("scale", ad.Tensor([2.0]), 3.0).data[0] == 6.0
    assert ad.elementwise("negate", ad.Tensor([2.0])).data[0] == -2.0


def test_log_derivative_at_two():
    x = ad.Tensor([2.0], requires_grad=True)
    ad.backward(ad.sum(ad.elementwise("log", x)))
    assert abs(x.grad[0] - 0.5) < 1e-9
    fd = numeric_grad(lambda: float(np.log(x.data).sum()), x.data)
    assert abs(fd[0] - 0.5) < 1e-9


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_log_domain_error(bad):
    with pytest.raises(ad.DomainError):
        ad.log(ad.Tensor([1.0, bad]))


def test_shape_mismatch_is_dimension_error():
    with pytest.raises(ad.DimensionError):
        ad.add(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((3, 2))))
    with pytest.raises(ad.DimensionError):
        ad.mul(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones(2)))


def test_trailing_vector_broadcast():
    a, b = leaf((4, 3)), leaf((3,))
    np.testing.assert_array_equal(ad.add(a, b).data, a.data + b.data)
    assert check_grads(lambda: ad.sum(ad.tanh(ad.mul(a, b))), [a, b]) < 1e-6


@pytest.mark.parametrize("op", ["add", "sub", "mul"])
def test_binary_grads(op):
    for _ in range(10):
        a, b = leaf((3, 2)), leaf((3, 2))
        assert check_grads(lambda: ad.sum(ad.tanh(ad.elementwise(op, a, b))), [a, b]) < 1e-4


@pytest.mark.parametrize("op", ["exp", "log", "tanh", "negate", "scale"])
def test_unary_grads(op):
    for _ in range(10):
        a = leaf((2, 3), lo=0.2, hi=2.0)
        arg = 0.7 if op == "scale" else None
        w = ad.Tensor(RNG.normal(size=(2, 3)))
        assert check_grads(lambda: ad.sum(ad.mul(ad.elementwise(op, a, arg), w)), [a]) < 1e-4


# ---------------------------------------------------------------- shape ops


def test_shape_op_grads():
    for _ in range(10):
        a, b = leaf((2, 3)), leaf((2, 4))
        w = ad.Tensor(RNG.normal(size=(3, 2)))
        assert check_grads(lambda: ad.sum(ad.mul(ad.transpose(a, (1, 0)), w)), [a]) < 1e-4
        assert check_grads(lambda: ad.sum(ad.tanh(ad.reshape(a, (3, 2)))), [a]) < 1e-4
        assert check_grads(lambda: ad.sum(ad.tanh(ad.concat([a, b], axis=1))), [a, b]) < 1e-4
        assert check_grads(lambda: ad.sum(ad.tanh(a[:, 1:])), [a]) < 1e-4
        assert check_grads(lambda: ad.mean(ad.tanh(ad.sum(a, axis=0))), [a]) < 1e-4


def test_getitem_repeated_index_accumulates():
    a = ad.Tensor([1.0, 2.0, 3.0], requires_grad=True)
    ad.backward(ad.sum(a[np.array([0, 0, 2])]))
    np.testing.assert_array_equal(a.grad, [2.0, 0.0, 1.0])


# ---------------------------------------------------------------- softmax


def test_softmax_spot_values():
    np.testing.assert_allclose(ad.softmax_rows(ad.Tensor([[0.0, 0.0]])).data, [[0.5, 0.5]])
    big = ad.softmax_rows(ad.Tensor([[1000.0, 0.0]])).data
    assert np.all(np.isfinite(big))
    assert big[0, 0] == pytest.approx(1.0) and big[0, 1] == pytest.approx(0.0, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6),
                  elements=st.floats(-700, 700)))
def test_softmax_rows_sum_to_one(x):
    s = ad.softmax_rows(ad.Tensor(x)).data
    assert np.all(s >= 0)
    assert np.max(np.abs(s.sum(axis=-1) - 1.0)) < 1e-12


def test_softmax_jvp_matches_finite_differences():
    for _ in range(10):
        a = leaf((3, 5), lo=-3, hi=3)
        v = RNG.normal(size=(3, 5))
        w = ad.Tensor(RNG.normal(size=(3, 5)))
        assert check_grads(lambda: ad.sum(ad.mul(ad.softmax_rows(a), w)), [a]) < 1e-5
        # directional derivative along v
        a.grad = None
        ad.backward(ad.sum(ad.mul(ad.softmax_rows(a), w)))
        analytic = float((a.grad * v).sum())
        h = 1e-5

        def f(x):
            e = np.exp(x - x.max(axis=-1, keepdims=True))
            return float(((e / e.sum(axis=-1, keepdims=True)) * w.data).sum())

        fd = (f(a.data + h * v) - f(a.data - h * v)) / (2 * h)
        assert rel_err(analytic, fd) < 1e-5


def test_softmax_rejects_non_finite():
    with pytest.raises(ad.DomainError):
        ad.softmax_rows(ad.Tensor([[np.inf, 0.0]]))


# ---------------------------------------------------------------- layer norm


def _ln(a, eps=1e-5):
    d = a.shape[-1]
    return ad.layer_norm(a, ad.Tensor(np.ones(d)), ad.Tensor(np.zeros(d)), eps)


def test_layer_norm_constant_row_is_zero():
    np.testing.assert_array_equal(_ln(ad.Tensor([[3.0, 3.0, 3.0]])).data, [[0.0, 0.0, 0.0]])


def test_layer_norm_moments():
    x = RNG.normal(2.0, 3.0, size=(20, 8))
    out = _ln(ad.Tensor(x), eps=1e-14).data
    assert np.max(np.abs(out.mean(axis=-1))) < 1e-10
    assert np.max(np.abs(out.var(axis=-1) - 1.0)) < 1e-10
    # with the default eps the variance is exactly var / (var + eps)
    out = _ln(ad.Tensor(x)).data
    v = x.var(axis=-1)
    np.testing.assert_allclose(out.var(axis=-1), v / (v + 1e-5), rtol=1e-12)


def test_layer_norm_shift_invariance():
    x = RNG.normal(size=(5, 6))
    np.testing.assert_allclose(_ln(ad.Tensor(x)).data, _ln(ad.Tensor(x + 7.25)).data, atol=1e-8)


def test_layer_norm_gradients():
    for _ in range(10):
        a, g, b = leaf((4, 5)), leaf((5,)), leaf((5,))
        w = ad.Tensor(RNG.normal(size=(4, 5)))
        assert check_grads(lambda: ad.sum(ad.mul(ad.layer_norm(a, g, b), w)), [a, g, b]) < 1e-5


def test_layer_norm_degenerate_axis():
    with pytest.raises(ad.DimensionError):
        _ln(ad.Tensor(np.ones((3, 1))))


# ---------------------------------------------------------------- dropout


def test_dropout_identities():
    x = ad.Tensor(RNG.normal(size=(4, 4)))
    rng = ad.rng_from_seed(0)
    assert ad.dropout(x, 0.0, rng, training=True).data is x.data
    np.testing.assert_array_equal(ad.dropout(x, 0.25, rng, training=False).data, x.data)


def test_dropout_fraction_and_scaling():
    x = ad.Tensor(np.ones(10**6))
    out = ad.dropout(x, 0.25, ad.rng_from_seed(7), training=True).data
    frac = np.mean(out == 0.0)
    assert abs(frac - 0.25) < 0.002
    np.testing.assert_allclose(out[out != 0], 1 / 0.75)


def test_dropout_bad_p():
    with pytest.raises(ValueError):
        ad.dropout(ad.Tensor([1.0]), 1.0, ad.rng_from_seed(0), training=True)


def test_dropout_gradient_uses_same_mask():
    a = leaf((6, 6))
    out = ad.dropout(a, 0.5, ad.rng_from_seed(3), training=True)
    mask = out.data / a.data
    ad.backward(ad.sum(out))
    np.testing.assert_allclose(a.grad, mask)


# ---------------------------------------------------------------- init


def test_glorot_moments():
    w = ad.glorot_normal_init((100, 100), ad.rng_from_seed(0)).data
    assert abs(w.var() - 0.01) < 0.2 * 0.01
    assert abs(w.mean()) < 0.01


def test_glorot_deterministic():
    a = ad.glorot_normal_init((7, 3), ad.rng_from_seed(42)).data
    b = ad.glorot_normal_init((7, 3), ad.rng_from_seed(42)).data
    np.testing.assert_array_equal(a, b)


def test_glorot_rejects_non_2d():
    with pytest.raises(ad.DimensionError):
        ad.glorot_normal_init((3,), ad.rng_from_seed(0))


# ---------------------------------------------------------------- adam


def test_adam_first_step_moves_by_lr():
    p = [np.array([1.0])]
    st_ = ad.AdamState(lr=0.01)
    ad.adam_step(p, [np.array([1.0])], st_)
    # m̂ = 1, v̂ = 1, so the step is lr / (1 + eps)
    assert p[0][0] == pytest.approx(1.0 - 0.01 / (1 + 1e-8), abs=1e-15)
    assert st_.t == 1


def test_adam_two_steps_hand_executed():
    p = [np.array([0.5])]
    s = ad.AdamState(lr=0.1)
    g1, g2 = 2.0, -1.0
    ad.adam_step(p, [np.array([g1])], s)
    ad.adam_step(p, [np.array([g2])], s)
    m = 0.9 * (0.1 * g1) + 0.1 * g2
    v = 0.999 * (0.001 * g1**2) + 0.001 * g2**2
    step2 = 0.1 * (m / (1 - 0.9**2)) / (np.sqrt(v / (1 - 0.999**2)) + 1e-8)
    expected = 0.5 - 0.1 * g1 / (abs(g1) + 1e-8) - step2
    assert p[0][0] == pytest.approx(expected, abs=1e-14)


def test_adam_zero_grad_keeps_param():
    p = [np.array([1.5, -2.0])]
    s = ad.AdamState()
    ad.adam_step(p, [np.zeros(2)], s)
    ad.adam_step(p, [None], s)
    np.testing.assert_array_equal(p[0], [1.5, -2.0])
    assert s.t == 2


def test_adam_shape_mismatch():
    with pytest.raises(ad.DimensionError):
        ad.adam_step([np.zeros(3)], [np.zeros(2)], ad.AdamState())


def _tiny_run(seed):
    rng = ad.rng_from_seed(seed)
    W = ad.glorot_normal_init((4, 3), rng)
    x = ad.Tensor(rng.normal(size=(8, 4)))
    opt = ad.Adam([W], lr=0.05)
    for _ in range(5):
        opt.zero_grad()
        ad.backward(ad.mean(ad.tanh(ad.matmul(x, W))))
        opt.step()
    return W.data


def test_training_bit_reproducible():
    assert _tiny_run(3).tobytes() == _tiny_run(3).tobytes()
    assert _tiny_run(3).tobytes() != _tiny_run(4).tobytes()


# ---------------------------------------------------------------- backward


def test_backward_sum_and_square():
    x = ad.Tensor([1.0, 2.0, 3.0], requires_grad=True)
    ad.backward(ad.sum(x))
    np.testing.assert_array_equal(x.grad, [1, 1, 1])
    x = ad.Tensor([1.0, 2.0], requires_grad=True)
    ad.backward(ad.sum(ad.mul(x, x)))
    np.testing.assert_array_equal(x.grad, [2, 4])


def test_backward_twice_raises():
    x = ad.Tensor([1.0, 2.0], requires_grad=True)
    loss = ad.sum(ad.mul(x, x))
    ad.backward(loss)
    with pytest.raises(ad.GraphError):
        ad.backward(loss)


def test_backward_non_scalar_raises():
    with pytest.raises(ad.GraphError):
        ad.backward(ad.tanh(ad.Tensor([1.0, 2.0], requires_grad=True)))


def test_diamond_graph_accumulates():
    x = ad.Tensor([0.3], requires_grad=True)
    y = ad.tanh(x)
    ad.backward(ad.sum(ad.add(ad.mul(y, y), y)))
    t = np.tanh(0.3)
    assert x.grad[0] == pytest.approx((2 * t + 1) * (1 - t * t), rel=1e-14)


def test_three_layer_composite():
    for trial in range(10):
        rng = np.random.default_rng(trial)
        x = ad.Tensor(rng.normal(size=(5, 4)))
        W1, b1 = leaf((4, 6), rng), leaf((6,), rng)
        W2, b2 = leaf((6, 6), rng), leaf((6,), rng)
        W3 = leaf((6, 1), rng)
        g, be = leaf((6,), rng), leaf((6,), rng)

        def build():
            h = ad.tanh(ad.add(ad.matmul(x, W1), b1))
            h = ad.layer_norm(ad.exp(ad.scale(ad.add(ad.matmul(h, W2), b2), 0.5)), g, be)
            z = ad.matmul(ad.softmax_rows(h), W3)
            return ad.bce_with_logits(ad.reshape(z, (5,)), [0, 1, 1, 0, 1])

        assert check_grads(build, [W1, b1, W2, b2, W3, g, be]) < 1e-4


def test_bce_and_logmeanexp_grads():
    for _ in range(10):
        z = leaf((7,), lo=-4, hi=4)
        y = RNG.integers(0, 2, size=7)
        assert check_grads(lambda: ad.bce_with_logits(z, y), [z]) < 1e-4
        assert check_grads(lambda: ad.logmeanexp(z), [z]) < 1e-4


def test_bce_matches_formula_and_is_stable():
    z = np.array([-50.0, -1.0, 0.0, 2.0, 800.0])
    y = np.array([0, 1, 1, 0, 1])
    got = float(ad.bce_with_logits(ad.Tensor(z), y).data)
    p = 1 / (1 + np.exp(-z[:4]))
    ref = -(y[:4] * np.log(p) + (1 - y[:4]) * np.log(1 - p)).sum() / 5
    assert got == pytest.approx(ref, rel=1e-12)


def test_logmeanexp_no_overflow():
    v = float(ad.logmeanexp(ad.Tensor([1000.0, 1000.0])).data)
    assert v == pytest.approx(1000.0)


def test_no_grad_builds_no_graph():
    x = ad.Tensor([1.0], requires_grad=True)
    with ad.no_grad():
        y = ad.tanh(x)
    assert not y.requires_grad and y._parents == ()


def test_forward_outputs_finite():
    x = ad.Tensor(RNG.normal(size=(10, 10)) * 30)
    for out in (ad.tanh(x), ad.softmax_rows(x), _ln(x), ad.exp(ad.scale(x, 0.1))):
        assert np.all(np.isfinite(out.data))
