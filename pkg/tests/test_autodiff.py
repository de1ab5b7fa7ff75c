import math

import numpy as np
import pytest

from crann.autodiff import (
    Adam,
    AdamState,
    BatchNorm2d,
    Tensor,
    adam_step,
    backward,
    concat,
    conv2d_same,
    gather_grid,
    lstm_cell,
    matmul,
    mse,
    mul,
    no_grad,
    relu,
    scatter_grid,
    sigmoid,
    softmax,
    stack,
    tanh,
    tensor_mean,
    tensor_sum,
    xavier_array,
    xavier_init,
)
from crann.errors import ConstructionError, ContractError, DimensionError, TrainingError

from fd import assert_grads_close, numeric_grad


def leaf(values):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)


# ---------------------------------------------------------------- matmul


def test_matmul_identity():
    out = matmul(Tensor(np.eye(2)), Tensor([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(out.data, [[1.0, 2.0], [3.0, 4.0]])


def test_matmul_hand_case():
    out = matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
    assert out.data.tolist() == [[11.0]]


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError) as err:
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))
    assert "(2, 3)" in str(err.value)


def test_matmul_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    a = leaf(rng.normal(size=(3, 4)))
    b = leaf(rng.normal(size=(4, 2)))

    loss = tensor_sum(mul(matmul(a, b), matmul(a, b)))
    backward(loss)

    def evaluate():
        with no_grad():
            prod = a.data @ b.data
            return (prod * prod).sum()

    num_a, num_b = numeric_grad(evaluate, [a.data, b.data])
    assert_grads_close(a.grad, num_a, "matmul dA")
    assert_grads_close(b.grad, num_b, "matmul dB")


# ---------------------------------------------------------------- conv2d


def test_conv2d_zero_input_zero_bias_gives_zero():
    x = Tensor(np.zeros((1, 2, 4, 4)))
    kernels = Tensor(np.random.default_rng(1).normal(size=(3, 2, 3, 3)))
    out = conv2d_same(x, kernels, Tensor(np.zeros(3)))
    assert not out.data.any()


def test_conv2d_ones_hand_counts():
    # 3x3 grid of ones, all-ones kernel: output counts covered neighbours.
    x = Tensor(np.ones((1, 1, 3, 3)))
    out = conv2d_same(x, Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros(1)))
    expected = np.array([[4.0, 6.0, 4.0], [6.0, 9.0, 6.0], [4.0, 6.0, 4.0]])
    np.testing.assert_allclose(out.data[0, 0], expected)


def test_conv2d_rejects_non_3x3_kernels():
    with pytest.raises(ConstructionError):
        conv2d_same(Tensor(np.zeros((1, 1, 4, 4))), Tensor(np.zeros((1, 1, 5, 5))), Tensor(np.zeros(1)))


def test_conv2d_rejects_channel_mismatch():
    with pytest.raises(DimensionError):
        conv2d_same(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))), Tensor(np.zeros(1)))


def test_conv2d_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    x = leaf(rng.normal(size=(2, 2, 3, 4)))
    kernels = leaf(rng.normal(size=(3, 2, 3, 3)))
    bias = leaf(rng.normal(size=3))
    weights = rng.normal(size=(2, 3, 3, 4))

    loss = tensor_sum(mul(conv2d_same(x, kernels, bias), Tensor(weights)))
    backward(loss)

    def evaluate():
        with no_grad():
            out = conv2d_same(Tensor(x.data), Tensor(kernels.data), Tensor(bias.data))
            return (out.data * weights).sum()

    numeric = numeric_grad(evaluate, [x.data, kernels.data, bias.data])
    assert_grads_close(x.grad, numeric[0], "conv dx")
    assert_grads_close(kernels.grad, numeric[1], "conv dk")
    assert_grads_close(bias.grad, numeric[2], "conv db")


# ---------------------------------------------------------------- lstm_cell


def test_lstm_cell_all_zero():
    x, h, c = Tensor(np.zeros((1, 1))), Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2)))
    w, b = Tensor(np.zeros((3, 8))), Tensor(np.zeros(8))
    h_new, c_new = lstm_cell(x, h, c, w, b)
    assert not h_new.data.any() and not c_new.data.any()


def test_lstm_cell_scalar_hand_evaluation():
    x, h, c = Tensor([[0.5]]), Tensor([[0.3]]), Tensor([[0.2]])
    weight = Tensor([[0.1, 0.2, 0.3, 0.4], [-0.1, 0.5, -0.2, 0.3]])
    bias = Tensor([0.01, 0.02, 0.03, 0.04])
    h_new, c_new = lstm_cell(x, h, c, weight, bias)

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    gate_i = sig(0.5 * 0.1 + 0.3 * -0.1 + 0.01)
    gate_f = sig(0.5 * 0.2 + 0.3 * 0.5 + 0.02)
    gate_g = math.tanh(0.5 * 0.3 + 0.3 * -0.2 + 0.03)
    gate_o = sig(0.5 * 0.4 + 0.3 * 0.3 + 0.04)
    c_expected = gate_f * 0.2 + gate_i * gate_g
    h_expected = gate_o * math.tanh(c_expected)
    assert abs(c_new.item() - c_expected) < 1e-12
    assert abs(h_new.item() - h_expected) < 1e-12


def test_lstm_cell_size_mismatch():
    with pytest.raises(DimensionError):
        lstm_cell(Tensor(np.zeros((1, 1))), Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 3))), Tensor(np.zeros((3, 8))), Tensor(np.zeros(8)))


def test_lstm_chain_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    hidden = 3
    weight = leaf(rng.normal(size=(1 + hidden, 4 * hidden)) * 0.5)
    bias = leaf(rng.normal(size=4 * hidden) * 0.1)
    inputs = rng.normal(size=(3, 1, 1))

    def run():
        h, c = Tensor(np.zeros((1, hidden))), Tensor(np.zeros((1, hidden)))
        for step in range(3):
            h, c = lstm_cell(Tensor(inputs[step]), h, c, weight, bias)
        return tensor_sum(mul(h, h))

    loss = run()
    backward(loss)

    def evaluate():
        with no_grad():
            return run().item()

    numeric = numeric_grad(evaluate, [weight.data, bias.data])
    assert_grads_close(weight.grad, numeric[0], "lstm chained dW")
    assert_grads_close(bias.grad, numeric[1], "lstm chained db")


# ---------------------------------------------------------------- softmax


def test_softmax_symmetry():
    out = softmax(Tensor([0.0, 0.0, 0.0]), axis=0)
    np.testing.assert_allclose(out.data, np.full(3, 1.0 / 3.0), atol=1e-15)


def test_softmax_large_values_stable():
    out = softmax(Tensor([1000.0, 0.0]), axis=0)
    assert np.isfinite(out.data).all()
    assert out.data[0] > 1.0 - 1e-9 and out.data[1] < 1e-9


def test_softmax_hand_case():
    out = softmax(Tensor([math.log(1.0), math.log(2.0), math.log(3.0)]), axis=0)
    np.testing.assert_allclose(out.data, [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0], atol=1e-12)


def test_softmax_invalid_axis():
    with pytest.raises(DimensionError):
        softmax(Tensor([1.0, 2.0]), axis=3)


def test_softmax_slices_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(11)
    for _ in range(20):
        values = rng.normal(size=(4, 5)) * 10.0
        out = softmax(Tensor(values), axis=1)
        np.testing.assert_allclose(out.data.sum(axis=1), np.ones(4), atol=1e-9)
        shifted = softmax(Tensor(values + 123.456), axis=1)
        np.testing.assert_allclose(out.data, shifted.data, atol=1e-9)


def test_softmax_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    x = leaf(rng.normal(size=(3, 4)))
    weights = rng.normal(size=(3, 4))
    loss = tensor_sum(mul(softmax(x, axis=1), Tensor(weights)))
    backward(loss)

    def evaluate():
        with no_grad():
            return (softmax(Tensor(x.data), axis=1).data * weights).sum()

    assert_grads_close(x.grad, numeric_grad(evaluate, [x.data])[0], "softmax dx")


# ---------------------------------------------------------------- backward


def test_backward_sum_gives_ones():
    x = leaf(np.arange(6, dtype=float).reshape(2, 3))
    backward(tensor_sum(x))
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_backward_hand_calculus():
    w = leaf([2.0])
    prediction = w * 3.0
    residual = prediction - 1.0
    backward(tensor_sum(residual * residual))
    assert abs(w.grad[0] - 30.0) < 1e-12


def test_backward_rejects_non_scalar():
    x = leaf(np.ones(3))
    with pytest.raises(ContractError):
        backward(x * 2.0)


def test_backward_rejects_repeat():
    x = leaf(np.ones(3))
    loss = tensor_sum(x)
    backward(loss)
    with pytest.raises(ContractError):
        backward(loss)


def test_backward_accumulates_shared_subexpression():
    x = leaf([3.0])
    y = x * x + x * 2.0  # dy/dx = 2x + 2 = 8
    backward(tensor_sum(y))
    assert abs(x.grad[0] - 8.0) < 1e-12


def test_random_composed_graphs_match_finite_differences():
    rng = np.random.default_rng(17)
    op_names = ["add", "mul", "tanh", "sigmoid", "matmul", "softmax"]
    for trial in range(10):
        n = int(rng.integers(2, 4))
        leaves = [leaf(rng.normal(size=(n, n))) for _ in range(3)]

        plan = [op_names[int(rng.integers(len(op_names)))] for _ in range(6)]
        picks = rng.integers(0, 100, size=(6, 2)).tolist()

        def run(values):
            pool = [Tensor(v) if not isinstance(v, Tensor) else v for v in values]
            for step, name in enumerate(plan):
                a = pool[picks[step][0] % len(pool)]
                b = pool[picks[step][1] % len(pool)]
                if name == "add":
                    pool.append(a + b)
                elif name == "mul":
                    pool.append(mul(a, b))
                elif name == "tanh":
                    pool.append(tanh(a))
                elif name == "sigmoid":
                    pool.append(sigmoid(a))
                elif name == "matmul":
                    pool.append(matmul(a, b))
                elif name == "softmax":
                    pool.append(softmax(a, axis=1))
            return tensor_mean(mul(pool[-1], pool[-1]))

        loss = run(leaves)
        backward(loss)

        def evaluate():
            with no_grad():
                return run([lf.data for lf in leaves]).item()

        numeric = numeric_grad(evaluate, [lf.data for lf in leaves])
        for i, lf in enumerate(leaves):
            analytic = lf.grad if lf.grad is not None else np.zeros_like(lf.data)
            assert_grads_close(analytic, numeric[i], f"graph {trial} leaf {i}")


# ---------------------------------------------------------------- adam


def test_adam_zero_gradient_keeps_params_and_counts_step():
    param = leaf([1.5])
    param.grad = np.zeros(1)
    state = AdamState()
    adam_step({"w": param}, state, lr=0.1)
    assert param.data[0] == 1.5
    assert state.t == 1


def test_adam_first_step_is_minus_lr():
    param = leaf([0.0])
    param.grad = np.ones(1)
    adam_step({"w": param}, AdamState(), lr=0.01)
    assert abs(param.data[0] + 0.01) < 1e-9


def test_adam_converges_on_quadratic():
    param = leaf([1.0])
    optimizer = Adam({"w": param}, lr=0.1)
    for _ in range(200):
        optimizer.zero_grad()
        backward(tensor_sum(param * param))
        optimizer.step()
    assert abs(param.data[0]) < 1e-2


def test_adam_rejects_non_finite_gradient():
    param = leaf([0.0])
    param.grad = np.array([np.nan])
    with pytest.raises(TrainingError) as err:
        adam_step({"spatial.weight": param}, AdamState(), lr=0.1)
    assert "spatial.weight" in str(err.value)


def test_adam_rejects_non_positive_lr():
    with pytest.raises(ContractError):
        adam_step({"w": leaf([0.0])}, AdamState(), lr=0.0)


# ---------------------------------------------------------------- xavier


def test_xavier_deterministic_for_seed():
    a = xavier_init((5, 7), 42)
    b = xavier_init((5, 7), 42)
    np.testing.assert_array_equal(a.data, b.data)


def test_xavier_variance_matches_glorot():
    values = xavier_array((100, 100), 0)
    expected = 2.0 / 200.0
    assert abs(values.var() - expected) / expected < 0.2


def test_xavier_support_bound():
    values = xavier_array((100, 100), 1)
    bound = math.sqrt(6.0 / 200.0)
    assert np.all(np.abs(values) <= bound)


def test_xavier_rejects_degenerate_shapes():
    with pytest.raises(ContractError):
        xavier_array((0, 4), 0)
    with pytest.raises(ContractError):
        xavier_array((5,), 0)


# ---------------------------------------------------------------- other primitives


@pytest.mark.parametrize("shape_a,shape_b", [((3, 4), (3, 4)), ((3, 4), (4,)), ((2, 1, 4), (3, 4))])
def test_add_mul_broadcast_gradients(shape_a, shape_b):
    rng = np.random.default_rng(23)
    a = leaf(rng.normal(size=shape_a))
    b = leaf(rng.normal(size=shape_b))
    weights = rng.normal(size=np.broadcast_shapes(shape_a, shape_b))

    loss = tensor_sum(mul(mul(a + b, a + b) + mul(a, b), Tensor(weights)))
    backward(loss)

    def evaluate():
        s = a.data + b.data
        return ((s * s + a.data * b.data) * weights).sum()

    numeric = numeric_grad(evaluate, [a.data, b.data])
    assert_grads_close(a.grad, numeric[0], "broadcast dA")
    assert_grads_close(b.grad, numeric[1], "broadcast dB")


def test_unary_gradients_match_finite_differences():
    rng = np.random.default_rng(29)
    # keep relu inputs away from the kink
    base = rng.normal(size=(3, 3))
    base[np.abs(base) < 0.2] += 0.5
    for op, fn in [(tanh, np.tanh), (sigmoid, None), (relu, None)]:
        x = leaf(base.copy())
        weights = rng.normal(size=(3, 3))
        loss = tensor_sum(mul(op(x), Tensor(weights)))
        backward(loss)

        def evaluate():
            with no_grad():
                return (op(Tensor(x.data)).data * weights).sum()

        assert_grads_close(x.grad, numeric_grad(evaluate, [x.data])[0], op.__name__)


def test_concat_stack_getitem_gradients():
    rng = np.random.default_rng(31)
    a = leaf(rng.normal(size=(2, 3)))
    b = leaf(rng.normal(size=(2, 2)))
    joined = concat([a, b], axis=1)
    stacked = stack([joined[:, 1:4], joined[:, 0:3]], axis=0)
    weights = rng.normal(size=stacked.shape)
    loss = tensor_sum(mul(stacked, Tensor(weights)))
    backward(loss)

    def evaluate():
        j = np.concatenate([a.data, b.data], axis=1)
        s = np.stack([j[:, 1:4], j[:, 0:3]], axis=0)
        return (s * weights).sum()

    numeric = numeric_grad(evaluate, [a.data, b.data])
    assert_grads_close(a.grad, numeric[0], "concat dA")
    assert_grads_close(b.grad, numeric[1], "concat dB")


def test_scatter_gather_roundtrip_and_gradients():
    rng = np.random.default_rng(37)
    rows = np.array([0, 0, 1])
    cols = np.array([0, 1, 0])
    x = leaf(rng.normal(size=(2, 4, 3)))
    grid = scatter_grid(x, (2, 2), rows, cols)
    assert grid.data[..., 1, 1].max() == 0.0  # unused cell stays zero
    back = gather_grid(grid, rows, cols)
    np.testing.assert_array_equal(back.data, x.data)

    weights = rng.normal(size=back.shape)
    loss = tensor_sum(mul(back, Tensor(weights)))
    backward(loss)
    assert_grads_close(x.grad, weights, "scatter/gather grad")


def test_mse_matches_hand_values_and_shape_check():
    assert mse(Tensor([1.0, 1.0]), Tensor([0.0, 2.0])).item() == 1.0
    assert mse(Tensor([3.0]), Tensor([3.0])).item() == 0.0
    with pytest.raises(DimensionError):
        mse(Tensor([1.0, 2.0]), Tensor([[1.0, 2.0]]))


def test_batchnorm_train_eval_and_gradients():
    rng = np.random.default_rng(41)
    bn = BatchNorm2d(3)
    x = leaf(rng.normal(loc=2.0, scale=3.0, size=(4, 3, 2, 2)))
    out = bn(x)
    # batch statistics: normalized output has ~zero mean, ~unit variance per channel
    np.testing.assert_allclose(out.data.mean(axis=(0, 2, 3)), np.zeros(3), atol=1e-9)
    np.testing.assert_allclose(out.data.var(axis=(0, 2, 3)), np.ones(3), atol=1e-3)
    assert bn.buffers()["running_mean"].any()

    weights = rng.normal(size=out.shape)
    loss = tensor_sum(mul(out, Tensor(weights)))
    backward(loss)

    def evaluate():
        with no_grad():
            fresh = BatchNorm2d(3)
            fresh.gamma.data = bn.gamma.data
            fresh.beta.data = bn.beta.data
            return (fresh(Tensor(x.data)).data * weights).sum()

    numeric = numeric_grad(evaluate, [x.data, bn.gamma.data, bn.beta.data])
    assert_grads_close(x.grad, numeric[0], "bn dx")
    assert_grads_close(bn.gamma.grad, numeric[1], "bn dgamma")
    assert_grads_close(bn.beta.grad, numeric[2], "bn dbeta")

    bn.set_training(False)
    frozen = bn(Tensor(x.data))
    again = bn(Tensor(x.data))
    np.testing.assert_array_equal(frozen.data, again.data)  # eval mode has no side effects


def test_forward_determinism_is_bit_identical():
    rng = np.random.default_rng(43)
    values = rng.normal(size=(4, 4))
    first = softmax(tanh(matmul(Tensor(values), Tensor(values))), axis=1).data
    second = softmax(tanh(matmul(Tensor(values), Tensor(values))), axis=1).data
    assert first.tobytes() == second.tobytes()


def test_no_grad_blocks_graph_construction():
    x = leaf(np.ones(3))
    with no_grad():
        y = tensor_sum(x * 2.0)
    assert not y.requires_grad
