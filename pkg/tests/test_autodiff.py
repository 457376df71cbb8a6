import numpy as np
import pytest

from gridlore.autodiff import (
    ShapeMismatch,
    Tensor,
    add,
    concat,
    conv2d,
    embed_bow_grid,
    embed_rows,
    exp,
    grad_check,
    log,
    matmul,
    maxpool_hw,
    mul,
    narrow,
    neg,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    sub,
    tanh,
    tsum,
)

# ---------------------------------------------------------------------------
# Independent central-difference oracle over raw numpy buffers.


def numeric_grad(scalar_fn, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    grads = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grads.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + eps
        f_plus = scalar_fn()
        flat[i] = saved - eps
        f_minus = scalar_fn()
        flat[i] = saved
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grads


def check_op(build, *arrays, tol=5e-7):
    """Compare backward() against the numeric oracle on every input array."""
    tensors = [Tensor(a) for a in arrays]
    out = build(*tensors)
    weights = np.cos(np.arange(out.data.size, dtype=np.float64)).reshape(out.data.shape)

    loss = tsum(mul(out, Tensor(weights)))
    loss.backward()

    for t, raw in zip(tensors, arrays):
        def scalar():
            fresh = build(*[Tensor(a) for a in arrays])
            return float((fresh.data * weights).sum())

        want = numeric_grad(scalar, raw)
        assert t.grad is not None
        np.testing.assert_allclose(t.grad, want, rtol=tol, atol=tol)


def rand(*shape, seed=0):
    return np.random.default_rng(seed).normal(size=shape)


# ---------------------------------------------------------------------------
# Elementwise and reductions


def test_add_sub_mul_grads():
    check_op(add, rand(4, 3), rand(4, 3, seed=1))
    check_op(sub, rand(4, 3), rand(4, 3, seed=1))
    check_op(mul, rand(4, 3), rand(4, 3, seed=1))
    check_op(neg, rand(5))


def test_broadcast_grads_unbroadcast():
    check_op(add, rand(3), rand(2, 3, seed=1))
    check_op(mul, rand(2, 1), rand(2, 3, seed=1))
    x = Tensor([1.0, 2.0, 3.0])
    y = tsum(x * 2.0 + 1.0)
    y.backward()
    np.testing.assert_allclose(x.grad, [2.0, 2.0, 2.0])


@pytest.mark.parametrize("op", [relu, sigmoid, tanh, exp])
def test_pointwise_grads(op):
    check_op(op, rand(3, 4) + 0.1)


def test_log_sqrt_grads_on_positive_inputs():
    positive = np.abs(rand(3, 3)) + 0.5
    check_op(log, positive)
    check_op(sqrt, positive)


def test_relu_values_and_dead_zone():
    x = Tensor([-2.0, 0.0, 3.0])
    y = tsum(relu(x))
    y.backward()
    np.testing.assert_allclose(relu(x).data, [0.0, 0.0, 3.0])
    np.testing.assert_allclose(x.grad, [0.0, 0.0, 1.0])


def test_tsum_axis_grads():
    check_op(lambda t: tsum(t, axis=0), rand(4, 3))
    check_op(lambda t: tsum(t, axis=1), rand(4, 3))
    total = tsum(Tensor(rand(4, 3)))
    assert total.data.shape == ()


def test_reuse_accumulates_gradient():
    x = Tensor([3.0])
    y = tsum(x * x + x)  # d/dx = 2x + 1
    y.backward()
    np.testing.assert_allclose(x.grad, [7.0])


def test_diamond_graph_gradient():
    x = Tensor(2.0)
    y = (x + x) * x  # 2x^2, d/dx = 4x
    y.backward()
    np.testing.assert_allclose(x.grad, 8.0)


# ---------------------------------------------------------------------------
# Matrix products


def test_matmul_all_arities():
    check_op(matmul, rand(4), rand(4, seed=1))            # dot
    check_op(matmul, rand(4), rand(4, 3, seed=1))         # vec @ mat
    check_op(matmul, rand(3, 4), rand(4, seed=1))         # mat @ vec
    check_op(matmul, rand(3, 4), rand(4, 2, seed=1))      # mat @ mat


def test_matmul_value_matches_numpy():
    a, b = rand(3, 4), rand(4, 2, seed=1)
    np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data, a @ b)


def test_matmul_shape_errors():
    with pytest.raises(ShapeMismatch):
        matmul(Tensor(rand(3, 4)), Tensor(rand(3, 4, seed=1)))
    with pytest.raises(ShapeMismatch):
        matmul(Tensor(rand(2, 2, 2)), Tensor(rand(2)))


# ---------------------------------------------------------------------------
# Shape surgery


def test_reshape_round_trip():
    check_op(lambda t: reshape(t, (2, 6)), rand(3, 4))
    x = Tensor(rand(3, 4))
    assert reshape(reshape(x, (12,)), (3, 4)).data.shape == (3, 4)


def test_concat_and_narrow():
    check_op(lambda a, b: concat([a, b], axis=0), rand(2, 3), rand(4, 3, seed=1))
    check_op(lambda a, b: concat([a, b], axis=1), rand(2, 3), rand(2, 2, seed=1))
    check_op(lambda t: narrow(t, 1, 4), rand(6))
    joined = concat([Tensor([1.0, 2.0]), Tensor([3.0])])
    np.testing.assert_allclose(joined.data, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(narrow(joined, 0, 2).data, [1.0, 2.0])


def test_narrow_requires_vector():
    with pytest.raises(ShapeMismatch):
        narrow(Tensor(rand(2, 2)), 0, 1)


# ---------------------------------------------------------------------------
# Softmax


def test_softmax_uniform_on_equal_logits():
    y = softmax(Tensor([0.0, 0.0]))
    np.testing.assert_allclose(y.data, [0.5, 0.5])
    y = softmax(Tensor([7.0, 7.0, 7.0, 7.0]))
    np.testing.assert_allclose(y.data, [0.25] * 4)


def test_softmax_is_shift_invariant_and_normalized():
    x = rand(6)
    a = softmax(Tensor(x)).data
    b = softmax(Tensor(x + 100.0)).data
    np.testing.assert_allclose(a, b)
    assert a.sum() == pytest.approx(1.0)
    assert (a > 0).all()


def test_softmax_grad():
    check_op(softmax, rand(5))


def test_softmax_grad_closed_form():
    x = rand(4)
    t = Tensor(x)
    y = softmax(t)
    loss = tsum(mul(y, Tensor([1.0, 0.0, 0.0, 0.0])))  # selects y[0]
    loss.backward()
    p = np.exp(x - x.max())
    p /= p.sum()
    want = p[0] * (np.eye(4)[0] - p)
    np.testing.assert_allclose(t.grad, want, rtol=1e-10, atol=1e-12)


def test_softmax_requires_vector():
    with pytest.raises(ShapeMismatch):
        softmax(Tensor(rand(2, 3)))


# ---------------------------------------------------------------------------
# Convolution and pooling


def test_conv2d_identity_kernel():
    x = rand(2, 4, 5)
    kernel = np.zeros((2, 2, 1, 1))
    kernel[0, 0, 0, 0] = 1.0
    kernel[1, 1, 0, 0] = 1.0
    out = conv2d(Tensor(x), Tensor(kernel))
    np.testing.assert_allclose(out.data, x)


def test_conv2d_hand_computed_sums():
    x = np.arange(1.0, 10.0).reshape(1, 3, 3)
    ones = np.ones((1, 1, 3, 3))
    out = conv2d(Tensor(x), Tensor(ones)).data[0]
    assert out[1, 1] == pytest.approx(45.0)  # full window
    assert out[0, 0] == pytest.approx(1 + 2 + 4 + 5)  # zero padding clips it
    assert out[2, 2] == pytest.approx(5 + 6 + 8 + 9)


def test_conv2d_bias_broadcasts_per_channel():
    x = rand(1, 3, 3)
    k = rand(2, 1, 3, 3, seed=1)
    plain = conv2d(Tensor(x), Tensor(k)).data
    biased = conv2d(Tensor(x), Tensor(k), Tensor([1.0, -2.0])).data
    np.testing.assert_allclose(biased[0], plain[0] + 1.0)
    np.testing.assert_allclose(biased[1], plain[1] - 2.0)


def test_conv2d_grads():
    check_op(conv2d, rand(2, 3, 4), rand(3, 2, 3, 3, seed=1))
    check_op(conv2d, rand(1, 5, 5), rand(2, 1, 1, 1, seed=1))
    check_op(
        lambda x, k, b: conv2d(x, k, b),
        rand(2, 3, 3),
        rand(2, 2, 3, 3, seed=1),
        rand(2, seed=2),
    )


def test_conv2d_shape_errors():
    with pytest.raises(ShapeMismatch):
        conv2d(Tensor(rand(3, 3)), Tensor(rand(1, 1, 3, 3)))
    with pytest.raises(ShapeMismatch):
        conv2d(Tensor(rand(2, 3, 3)), Tensor(rand(1, 1, 2, 2)))  # even kernel
    with pytest.raises(ShapeMismatch):
        conv2d(Tensor(rand(2, 3, 3)), Tensor(rand(1, 3, 3, 3)))  # channel mismatch


def test_maxpool_values_and_grads():
    x = rand(3, 4, 4)
    out = maxpool_hw(Tensor(x))
    np.testing.assert_allclose(out.data, x.reshape(3, -1).max(axis=1))
    check_op(maxpool_hw, rand(2, 3, 3, seed=3))


def test_maxpool_tie_goes_to_first_cell():
    x = np.zeros((1, 2, 2))  # every cell ties at the max
    t = Tensor(x)
    tsum(maxpool_hw(t)).backward()
    want = np.zeros((1, 2, 2))
    want[0, 0, 0] = 1.0
    np.testing.assert_allclose(t.grad, want)


def test_maxpool_requires_chw():
    with pytest.raises(ShapeMismatch):
        maxpool_hw(Tensor(rand(3, 3)))


# ---------------------------------------------------------------------------
# Embeddings


def test_embed_rows_selects_rows():
    table = rand(6, 4)
    out = embed_rows(Tensor(table), [2, 0, 2])
    np.testing.assert_allclose(out.data, table[[2, 0, 2]])


def test_embed_rows_accumulates_repeats():
    t = Tensor(rand(5, 3))
    tsum(embed_rows(t, [1, 1, 4])).backward()
    np.testing.assert_allclose(t.grad[1], [2.0, 2.0, 2.0])
    np.testing.assert_allclose(t.grad[4], [1.0, 1.0, 1.0])
    np.testing.assert_allclose(t.grad[0], [0.0, 0.0, 0.0])


def test_embed_rows_rejects_empty():
    with pytest.raises(ShapeMismatch):
        embed_rows(Tensor(rand(5, 3)), [])


def test_embed_bow_grid_sums_cell_tokens():
    table = rand(5, 3)
    grid = [[[0, 1], []], [[4], [2, 2, 3]]]
    out = embed_bow_grid(Tensor(table), grid)
    assert out.data.shape == (3, 2, 2)
    np.testing.assert_allclose(out.data[:, 0, 0], table[0] + table[1])
    np.testing.assert_allclose(out.data[:, 0, 1], 0.0)
    np.testing.assert_allclose(out.data[:, 1, 1], 2 * table[2] + table[3])


def test_embed_bow_grid_grads():
    table = rand(5, 3)
    grid = [[[0, 1], []], [[4], [2, 2, 3]]]
    t = Tensor(table)
    loss = tsum(embed_bow_grid(t, grid))
    loss.backward()

    def scalar():
        return float(embed_bow_grid(Tensor(table), grid).data.sum())

    np.testing.assert_allclose(t.grad, numeric_grad(scalar, table), rtol=1e-6, atol=1e-7)


# ---------------------------------------------------------------------------
# Engine-level checks


def test_backward_needs_a_scalar():
    with pytest.raises(ValueError):
        Tensor([1.0, 2.0]).backward()


def test_operator_sugar_lifts_python_numbers():
    x = Tensor([1.0, 2.0])
    y = tsum(2.0 * x - 1.0 + (-x))
    y.backward()
    np.testing.assert_allclose(y.data, 1.0)
    np.testing.assert_allclose(x.grad, [1.0, 1.0])


def test_grad_check_passes_on_linear_layer():
    w = Tensor(rand(3, 4))
    b = Tensor(rand(3, seed=1))
    x = Tensor(rand(4, seed=2))

    def f():
        return tsum(relu(add(matmul(w, x), b)))

    assert grad_check(f, [w, b, x]) < 1e-8


def test_grad_check_resets_state_between_runs():
    w = Tensor(rand(2, 2))

    def f():
        return tsum(mul(w, w))

    first = grad_check(f, [w])
    second = grad_check(f, [w])
    assert first == pytest.approx(second)
