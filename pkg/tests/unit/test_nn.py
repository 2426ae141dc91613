import numpy as np
import pytest

from incident_fusion.errors import DimensionError
from incident_fusion.nn import (
    ACTIVATIONS,
    DenseLayer,
    LstmLayer,
    OptimizerState,
    activate,
    activate_grad,
    check_layers,
    clip_by_global_norm,
    dense_backward,
    dense_forward,
    gradient_check,
    load_model,
    loss_mse,
    loss_softmax_ce,
    lstm_backward,
    lstm_forward,
    numeric_gradient,
    optimizer_step,
    save_model,
    softmax,
)


def test_activation_values():
    """Spot values of each activation, including relu'(0) = 0."""
    assert activate(-1.0, "relu") == 0.0
    assert activate(0.0, "sigmoid") == 0.5
    assert activate(-1.0, "elu") == pytest.approx(np.exp(-1.0) - 1.0)
    assert activate(2.0, "identity") == 2.0
    assert activate_grad(0.0, "relu") == 0.0
    assert activate_grad(0.0, "tanh") == 1.0
    assert activate_grad(0.0, "sigmoid") == 0.25


def test_sigmoid_saturates_without_overflow():
    with np.errstate(over="raise"):
        out = activate(np.array([-1000.0, 1000.0]), "sigmoid")
    np.testing.assert_allclose(out, [0.0, 1.0])


@pytest.mark.parametrize("kind", ACTIVATIONS)
def test_activation_derivative_matches_finite_difference(kind):
    x = np.random.default_rng(0).normal(size=50)
    x = x[np.abs(x) > 1e-3]
    h = 1e-6
    numeric = (activate(x + h, kind) - activate(x - h, kind)) / (2 * h)
    np.testing.assert_allclose(activate_grad(x, kind), numeric, rtol=1e-5, atol=1e-8)


def test_unknown_activation():
    with pytest.raises(ValueError, match="unknown activation"):
        activate(1.0, "swish")


def test_all_layer_gradients_over_twenty_seeds():
    """Dense, LSTM and both losses agree with central differences to 1e-4."""
    worst = check_layers(n_seeds=20)
    assert set(worst) == {f"dense-{a}" for a in ACTIVATIONS} | {"lstm", "mse", "softmax-ce"}
    for name, err in worst.items():
        assert err < 1e-4, name


def test_dense_input_gradient():
    rng = np.random.default_rng(3)
    layer = DenseLayer.initialize(4, 2, "tanh", rng)
    x = rng.normal(size=(3, 4))
    target = rng.normal(size=(3, 2))
    out, cache = dense_forward(layer, x)
    grad_x, _ = dense_backward(layer, cache, loss_mse(out, target)[1])
    numeric = numeric_gradient(lambda: loss_mse(dense_forward(layer, x)[0], target)[0], x)
    np.testing.assert_allclose(grad_x, numeric, rtol=1e-5, atol=1e-9)


def test_dense_one_by_one_example():
    """w=2, b=1, x=3 gives 7; with upstream gradient 1, dL/dw = 3, dL/db = 1 and dL/dx = 2."""
    layer = DenseLayer([[2.0]], [1.0], "identity")
    out, cache = dense_forward(layer, np.array([[3.0]]))
    np.testing.assert_array_equal(out, [[7.0]])
    grad_x, grads = dense_backward(layer, cache, np.array([[1.0]]))
    np.testing.assert_array_equal(grads["weights"], [[3.0]])
    np.testing.assert_array_equal(grads["bias"], [1.0])
    np.testing.assert_array_equal(grad_x, [[2.0]])


def _lstm_1x1(W_i=0.0, W_f=0.0, W_o=0.0, W_g=0.0, b_i=0.0, b_f=0.0, b_o=0.0, b_g=0.0):
    weights = {"W_i": W_i, "W_f": W_f, "W_o": W_o, "W_g": W_g}
    biases = {"b_i": b_i, "b_f": b_f, "b_o": b_o, "b_g": b_g}
    return LstmLayer(
        1, 1,
        **{k: np.array([[v, 0.0]]) for k, v in weights.items()},
        **{k: np.array([v]) for k, v in biases.items()},
    )


def test_lstm_with_zero_weights_stays_at_zero():
    layer = LstmLayer(3, 4, **{f"W_{g}": np.zeros((4, 7)) for g in "ifog"}, **{f"b_{g}": np.zeros(4) for g in "ifog"})
    h, _ = lstm_forward(layer, np.random.default_rng(0).normal(size=(2, 9, 3)))
    np.testing.assert_array_equal(h, np.zeros((2, 4)))


def test_lstm_single_step_by_hand():
    """One step from h0 = c0 = 0: c1 = i * g and h1 = o * tanh(c1)."""
    layer = _lstm_1x1(W_i=1.0, W_o=0.5, W_g=2.0, b_g=-1.0)
    h, _ = lstm_forward(layer, np.array([[1.0]]))
    i = 1.0 / (1.0 + np.exp(-1.0))
    o = 1.0 / (1.0 + np.exp(-0.5))
    c = i * np.tanh(1.0)
    assert h[0] == pytest.approx(o * np.tanh(c), rel=1e-12)
    assert h[0] == pytest.approx(0.3147, abs=5e-4)


def test_lstm_cache_has_one_entry_per_step():
    layer = LstmLayer.initialize(2, 3, np.random.default_rng(1))
    _, cache = lstm_forward(layer, np.random.default_rng(2).normal(size=(200, 2)))
    assert cache.steps == 200
    assert len(cache.gates) == len(cache.c_prev) == len(cache.tanh_c) == 200


def test_lstm_gradients_are_linear_in_the_upstream_gradient():
    """A zero upstream gradient gives zero gradients; doubling it doubles every gradient."""
    rng = np.random.default_rng(4)
    layer = LstmLayer.initialize(3, 2, rng)
    _, cache = lstm_forward(layer, rng.normal(size=(2, 5, 3)))
    zero = lstm_backward(layer, cache, np.zeros((2, 2)))
    assert all(not np.any(g) for g in zero.values())
    upstream = rng.normal(size=(2, 2))
    once = lstm_backward(layer, cache, upstream)
    twice = lstm_backward(layer, cache, 2.0 * upstream)
    assert set(once) == set(layer.parameters())
    for name, grad in once.items():
        np.testing.assert_allclose(twice[name], 2.0 * grad, rtol=1e-12)


def test_sgd_step_example():
    """lr 0.1 on w = 1 with gradient 1 gives 0.9."""
    params = {"w": np.array([1.0])}
    optimizer_step(OptimizerState("sgd", 0.1), params, {"w": np.array([1.0])})
    np.testing.assert_allclose(params["w"], [0.9])


def test_adam_first_step_moves_by_the_learning_rate():
    """After bias correction the first Adam step has magnitude lr whatever the gradient scale."""
    params = {"w": np.array([1.0, 1.0, 1.0])}
    optimizer_step(OptimizerState("adam", 0.01), params, {"w": np.array([1e-3, 5.0, -200.0])})
    np.testing.assert_allclose(params["w"], [0.99, 0.99, 1.01], rtol=1e-6)


def test_lstm_gradients_longer_sequence():
    rng = np.random.default_rng(11)
    layer = LstmLayer.initialize(3, 4, rng)
    seq = rng.normal(size=(2, 6, 3))
    target = rng.normal(size=(2, 4))
    hT, cache = lstm_forward(layer, seq)
    grads = lstm_backward(layer, cache, loss_mse(hT, target)[1])
    err = gradient_check(lambda: loss_mse(lstm_forward(layer, seq)[0], target)[0], layer.parameters(), grads)
    assert err < 1e-4


def test_lstm_unbatched_and_shape_errors():
    layer = LstmLayer.initialize(2, 3, np.random.default_rng(0))
    h, _ = lstm_forward(layer, np.zeros((5, 2)))
    assert h.shape == (3,)
    with pytest.raises(DimensionError):
        lstm_forward(layer, np.zeros((1, 5, 4)))


def test_softmax_ce_uniform_logits():
    """Five equal logits give ln 5."""
    value, grad = loss_softmax_ce(np.zeros((1, 5)), np.eye(5)[[2]])
    assert value == pytest.approx(np.log(5))
    np.testing.assert_allclose(grad, [[0.2, 0.2, -0.8, 0.2, 0.2]])
    np.testing.assert_allclose(softmax(np.array([1000.0, 1000.0])), [0.5, 0.5])


def test_softmax_ce_rejects_soft_targets():
    with pytest.raises(ValueError, match="one-hot"):
        loss_softmax_ce(np.zeros((1, 2)), np.array([[0.5, 0.5]]))


def test_mse_shape_mismatch():
    with pytest.raises(DimensionError):
        loss_mse(np.zeros(3), np.zeros(4))


def test_adam_minimises_a_quadratic():
    params = {"w": np.array([5.0, -3.0])}
    state = OptimizerState("adam", learning_rate=0.1)
    for _ in range(500):
        optimizer_step(state, params, {"w": 2.0 * params["w"]})
    np.testing.assert_allclose(params["w"], 0.0, atol=1e-2)
    assert state.step == 500


def test_clip_by_global_norm():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_by_global_norm(grads, 1.0) == 5.0
    np.testing.assert_allclose([grads["a"][0], grads["b"][0]], [0.6, 0.8])


def test_model_file_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    dense = DenseLayer.initialize(3, 2, "elu", rng)
    lstm = LstmLayer.initialize(7, 4, rng)
    path = tmp_path / "model.json"
    save_model(path, [("head", dense), ("lstm", lstm)], {"units": 4})
    layers, meta = load_model(path)
    assert meta == {"units": 4}
    np.testing.assert_array_equal(layers["head"].weights, dense.weights)
    assert layers["head"].activation == "elu"
    np.testing.assert_array_equal(layers["lstm"].W_g, lstm.W_g)
