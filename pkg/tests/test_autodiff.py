import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from gradcheck import finite_difference_grads, max_grad_error, random_graph
from mbdl.autodiff import (ExprGraph, OptimizerState, apply_activation,
                           cross_entropy, load_checkpoint, loss, mse,
                           optimizer_step, save_checkpoint, softmax,
                           weighted_l2_per_layer)
from mbdl.autodiff.layers import dense_param_count
from mbdl.errors import NonFiniteValue, ShapeMismatch


# ---------------------------------------------------------------------------
# activations


def test_activation_values():
    assert np.allclose(apply_activation("relu", [-1.0, 2.0]), [0.0, 2.0])
    assert apply_activation("sigmoid", 0.0) == 0.5
    assert np.allclose(apply_activation("softsign", [2.0, 0.0]), [2 / 3, 0.0])
    assert np.isclose(apply_activation("softplus", 0.0), np.log(2.0))
    assert np.allclose(
        apply_activation("soft_threshold", [3.0, -0.5, 0.2], b=1.0),
        [2.0, 0.0, 0.0])
    assert apply_activation("exp", 0.0) == 1.0
    assert np.isclose(apply_activation("tanh_interval", 0.0, lo=-2.0, hi=4.0), 1.0)


def test_activation_errors():
    with pytest.raises(ValueError):
        apply_activation("nope", 1.0)
    with pytest.raises(ValueError):
        apply_activation("soft_threshold", 1.0, b=-0.5)
    with pytest.raises(ValueError):
        apply_activation("tanh_interval", 0.0, lo=1.0, hi=1.0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, array_shapes(max_dims=2, max_side=5),
              elements=st.floats(-50, 50)),
       st.floats(0, 10))
def test_soft_threshold_shrinks(x, b):
    y = apply_activation("soft_threshold", x, b=b)
    assert np.all(np.abs(y) <= np.abs(x) + 1e-12)
    assert np.all((y == 0) | (np.sign(y) == np.sign(x)))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(1, 6).map(lambda n: (n,)),
              elements=st.floats(-30, 30)))
def test_sigmoid_softsign_ranges(x):
    s = apply_activation("sigmoid", x)
    assert np.all((s > 0) & (s < 1))
    ss = apply_activation("softsign", x)
    assert np.all((ss > -1) & (ss < 1))


# ---------------------------------------------------------------------------
# softmax


def test_softmax_uniform_and_sum():
    assert np.allclose(softmax(np.zeros(4)), np.full(4, 0.25))
    p = softmax(np.array([1000.0, 1000.0, -1000.0]))  # stable under shift
    assert np.all(np.isfinite(p))
    assert np.isclose(p.sum(), 1.0)
    cols = softmax(np.array([[1.0, 5.0], [2.0, 5.0]]), axis=0)
    assert np.allclose(cols.sum(axis=0), 1.0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(2, 8).map(lambda n: (n,)),
              elements=st.floats(-700, 700)))
def test_softmax_is_distribution(x):
    p = softmax(x)
    assert np.isclose(p.sum(), 1.0)
    assert np.all(p >= 0)


# ---------------------------------------------------------------------------
# losses


def test_losses():
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert np.isclose(mse(np.zeros((2, 4)), np.ones((2, 4))), 2.0)
    # perfect prediction is clamped away from log(0)
    assert cross_entropy(np.array([1.0, 0.0]), np.array([1.0, 0.0])) < 1e-11
    assert np.isclose(cross_entropy(np.array([0.5, 0.5]), 0), np.log(2.0))
    w = weighted_l2_per_layer(
        [np.array([1.0]), np.array([1.0])], np.array([0.0]),
        weights=[np.log(1.0), np.log(2.0)])
    assert np.isclose(w, np.log(2.0))
    assert loss("mse", [1.0], [0.0]) == 1.0


def test_cross_entropy_rejects_bad_probs():
    with pytest.raises(ValueError):
        cross_entropy(np.array([1.2, -0.2]), np.array([1.0, 0.0]))


# ---------------------------------------------------------------------------
# graph forward semantics


def test_graph_eval_matches_numpy():
    g = ExprGraph()
    x = g.input("x", (3,))
    W = g.parameter("W", np.arange(6.0).reshape(2, 3))
    b = g.parameter("b", np.array([1.0, -1.0]))
    y = g.relu(g.add(g.matmul(W, x), b))
    xv = np.array([1.0, 0.5, -2.0])
    out = g.eval({"x": xv}, root=y)
    assert np.allclose(out, np.maximum(np.arange(6.0).reshape(2, 3) @ xv
                                       + np.array([1.0, -1.0]), 0.0))


def test_graph_shape_errors_name_nodes():
    g = ExprGraph()
    a = g.input("a", (2, 3))
    c = g.constant(np.ones((4, 2)), name="c4")
    with pytest.raises(ShapeMismatch, match="c4"):
        g.add(a, c)
    with pytest.raises(ShapeMismatch, match="matmul"):
        g.matmul(a, a)


def test_graph_eval_errors():
    g = ExprGraph()
    x = g.input("x", (2,))
    y = g.exp(x, name="blowup")
    with pytest.raises(ValueError, match="missing binding"):
        g.eval({})
    with pytest.raises(ShapeMismatch, match="bound shape"):
        g.eval({"x": np.ones(3)})
    with pytest.raises(NonFiniteValue, match="blowup"):
        g.eval({"x": np.array([1000.0, 0.0])})
    g2 = ExprGraph()
    g2.sum(g2.constant(np.array([1.0])))
    with pytest.raises(RuntimeError, match="before eval"):
        g2.backward()


def test_backward_requires_scalar_root():
    g = ExprGraph()
    x = g.input("x", (2,))
    y = g.relu(x)
    g.eval({"x": np.ones(2)}, root=y)
    with pytest.raises(ValueError, match="scalar root"):
        g.backward(root=y)


def test_fanout_gradient_accumulates():
    g = ExprGraph()
    t = g.parameter("t", np.array(3.0))
    y = g.sum(g.add(t, t))
    g.eval({}, root=y)
    grads = g.backward(root=y)
    assert grads["t"] == pytest.approx(2.0)


def test_quadratic_gradient_value():
    # root = MSE(theta * x, 0) with theta=1, x=2: d/dtheta (2 theta)^2 = 8
    g = ExprGraph()
    theta = g.parameter("theta", np.array(1.0))
    x = g.constant(np.array(2.0))
    root = g.mse(g.mul(theta, x), g.constant(np.array(0.0)))
    g.eval({}, root=root)
    grads = g.backward(root=root)
    assert grads["theta"] == pytest.approx(8.0)


def test_unreachable_parameter_gets_zero_grad():
    g = ExprGraph()
    used = g.parameter("used", np.array([1.0, 2.0]))
    unused = g.parameter("unused", np.ones((2, 2)))
    root = g.sum(g.square(used))
    g.eval({}, root=root)
    grads = g.backward(root=root)
    assert np.allclose(grads["used"], [2.0, 4.0])
    assert grads["unused"].shape == (2, 2)
    assert np.all(grads["unused"] == 0.0)


# ---------------------------------------------------------------------------
# gradients vs finite differences (oracle)


def test_gradcheck_kinked_ops_away_from_kinks():
    g = ExprGraph()
    x = g.parameter("x", np.array([0.7, -1.3, 2.1]))
    b = g.parameter("b", np.array(0.4))
    root = g.sum(g.add(g.relu(x), g.soft_threshold(x, b)))
    g.eval({}, root=root)
    analytic = g.backward(root=root)
    numeric = finite_difference_grads(g, {}, root=root)
    assert max_grad_error(analytic, numeric) < 1e-7


def test_gradcheck_structured_ops():
    g = ExprGraph()
    k = g.parameter("k", np.array([[0.5, -0.2], [0.1, 0.8]]))
    H = g.toeplitz_from_kernels(k, 4)
    s = g.parameter("s", np.linspace(-1, 1, 8))
    target = g.constant(np.cos(np.arange(4.0)))
    root = g.mse(g.matmul(H, s), target)
    g.eval({}, root=root)
    analytic = g.backward(root=root)
    numeric = finite_difference_grads(g, {}, root=root)
    assert max_grad_error(analytic, numeric) < 1e-7


def test_gradcheck_shift_and_concat():
    g = ExprGraph()
    a = g.parameter("a", np.arange(12.0).reshape(2, 6) / 7.0)
    shifted = g.shift_cols(a, 1, period=3)
    back = g.shift_cols(a, -1, period=3)
    both = g.concat_rows([shifted, back])
    root = g.sum(g.square(g.sub(both, g.constant(np.ones((4, 6))))))
    g.eval({}, root=root)
    analytic = g.backward(root=root)
    numeric = finite_difference_grads(g, {}, root=root)
    assert max_grad_error(analytic, numeric) < 1e-7


def test_gradcheck_softmax_cross_entropy():
    g = ExprGraph()
    W = g.parameter("W", np.array([[0.3, -0.4], [1.2, 0.1], [-0.7, 0.9]]))
    x = g.input("x", (2, 5))
    probs = g.softmax(g.matmul(W, x))
    onehot = np.zeros((3, 5))
    onehot[np.arange(5) % 3, np.arange(5)] = 1.0
    root = g.cross_entropy(probs, g.constant(onehot))
    bindings = {"x": np.linspace(-1, 1, 10).reshape(2, 5)}
    g.eval(bindings, root=root)
    analytic = g.backward(root=root)
    numeric = finite_difference_grads(g, bindings, root=root)
    assert max_grad_error(analytic, numeric) < 1e-7


def test_gradcheck_random_graphs_small_sample():
    for seed in range(10):
        g, bindings = random_graph(seed)
        g.eval(bindings)
        analytic = g.backward()
        numeric = finite_difference_grads(g, bindings)
        assert max_grad_error(analytic, numeric) < 1e-5, f"graph seed {seed}"


def test_random_graph_respects_budget():
    for seed in range(20):
        g, _ = random_graph(seed)
        n_params = sum(int(np.prod(p.shape)) for p in g.get_params().values())
        assert n_params <= 64


# ---------------------------------------------------------------------------
# optimizers


def test_sgd_exact_update():
    params = {"w": np.array([1.0, 2.0])}
    grads = {"w": np.array([0.5, -1.0])}
    state = OptimizerState(kind="sgd", lr=0.1)
    optimizer_step(state, params, grads)
    assert np.allclose(params["w"], [0.95, 2.1])


def test_adam_converges_on_quadratic():
    theta = {"t": np.array(1.0)}
    state = OptimizerState(kind="adam", lr=0.1)
    for _ in range(200):
        optimizer_step(state, theta, {"t": 2.0 * theta["t"]})
    assert abs(float(theta["t"])) < 1e-3


def test_adam_is_deterministic():
    def run():
        theta = {"t": np.array([1.0, -2.0])}
        state = OptimizerState(kind="adam", lr=0.05)
        for i in range(50):
            g = 2.0 * theta["t"] + np.sin(i)
            optimizer_step(state, theta, {"t": g})
        return theta["t"].copy()

    assert np.array_equal(run(), run())


def test_optimizer_rejects_nonfinite_grads():
    state = OptimizerState(kind="sgd", lr=0.1)
    with pytest.raises(NonFiniteValue, match="w"):
        optimizer_step(state, {"w": np.array(1.0)}, {"w": np.array(np.nan)})


def test_optimizer_rejects_unknown_kind():
    with pytest.raises(ValueError):
        OptimizerState(kind="rmsprop")


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_roundtrip(tmp_path):
    params = {
        "layer/W": np.arange(12.0).reshape(3, 4),
        "layer/b": np.array([-1.0, 2.5, 3.125]),
        "scalar": np.array(7.0),
    }
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params)
    loaded = load_checkpoint(path)
    assert set(loaded) == set(params)
    for name in params:
        assert np.array_equal(loaded[name], params[name])
        assert loaded[name].shape == params[name].shape


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTME" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    params = {"w": np.ones(4)}
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(path)


def test_dense_param_count():
    # input 4 -> 16 -> 2: (16*4 + 16) + (2*16 + 2)
    assert dense_param_count([4, 16, 2]) == 80 + 34
