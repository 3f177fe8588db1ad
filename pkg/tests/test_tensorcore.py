import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from videoqa import tensorcore as tc
from videoqa.errors import (
    ContractError,
    DimensionError,
    LoadError,
    NumericError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from videoqa.rng import SplitMix64

from oracles import gradcheck, naive_conv1d_temporal, naive_conv2d


def _rand(rng, *shape):
    return rng.standard_normal(shape).astype(np.float32)


# ---------------------------------------------------------------- conv2d

def test_conv2d_ones_valid():
    out = tc.conv2d(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)), np.zeros(1))
    assert out.shape == (1, 1, 1, 1)
    assert out.data[0, 0, 0, 0] == 9.0


def test_conv2d_ones_padded():
    out = tc.conv2d(np.ones((1, 1, 4, 4)), np.ones((1, 1, 3, 3)), np.zeros(1), stride=1, pad=1)
    assert out.shape == (1, 1, 4, 4)
    assert out.data[0, 0, 0, 0] == 4.0
    assert out.data[0, 0, 0, 3] == 4.0
    assert np.all(out.data[0, 0, 1:3, 1:3] == 9.0)


def test_conv2d_matches_oracle_fixed():
    rng = np.random.default_rng(0)
    x, k, b = _rand(rng, 2, 3, 8, 8), _rand(rng, 4, 3, 3, 3), _rand(rng, 4)
    out = tc.conv2d(x, k, b).data
    np.testing.assert_allclose(out, naive_conv2d(x, k, b, 1, 0), atol=1e-5)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(1, 2), c=st.integers(1, 3), m=st.integers(1, 3),
    h=st.integers(3, 7), w=st.integers(3, 7), d=st.sampled_from([1, 3]),
    stride=st.integers(1, 2), pad=st.integers(0, 1), seed=st.integers(0, 2**16),
)
def test_conv2d_oracle_property(n, c, m, h, w, d, stride, pad, seed):
    rng = np.random.default_rng(seed)
    x, k, b = _rand(rng, n, c, h, w), _rand(rng, m, c, d, d), _rand(rng, m)
    out = tc.conv2d(x, k, b, stride=stride, pad=pad).data
    np.testing.assert_allclose(out, naive_conv2d(x, k, b, stride, pad), atol=1e-5)


def test_conv2d_shape_errors():
    with pytest.raises(DimensionError):
        tc.conv2d(np.ones((1, 2, 4, 4)), np.ones((1, 3, 3, 3)), np.zeros(1))
    with pytest.raises(DimensionError):
        tc.conv2d(np.ones((1, 1, 2, 2)), np.ones((1, 1, 3, 3)), np.zeros(1))


def test_conv2d_non_finite_is_numeric_error():
    x = np.ones((1, 1, 3, 3))
    x[0, 0, 1, 1] = np.inf
    with pytest.raises(NumericError):
        tc.conv2d(x, np.ones((1, 1, 3, 3)), np.zeros(1))


# ---------------------------------------------------------------- conv1d

def test_conv1d_sum():
    x = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 3, 1)
    out = tc.conv1d_temporal(x, np.ones((1, 1, 3)), np.zeros(1))
    assert out.data.ravel().tolist() == [6.0]


def test_conv1d_identity_tap():
    rng = np.random.default_rng(1)
    x = _rand(rng, 2, 1, 5, 3)
    k = np.array([0.0, 1.0, 0.0]).reshape(1, 1, 3)
    out = tc.conv1d_temporal(x, k, np.zeros(1), pad=1)
    np.testing.assert_array_equal(out.data, x)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(1, 2), c=st.integers(1, 3), m=st.integers(1, 3),
    f=st.integers(3, 8), l=st.integers(1, 5), t=st.sampled_from([1, 3]),
    stride=st.integers(1, 2), pad=st.integers(0, 1), seed=st.integers(0, 2**16),
)
def test_conv1d_oracle_property(n, c, m, f, l, t, stride, pad, seed):
    rng = np.random.default_rng(seed)
    x, k, b = _rand(rng, n, c, f, l), _rand(rng, m, c, t), _rand(rng, m)
    out = tc.conv1d_temporal(x, k, b, stride=stride, pad=pad).data
    np.testing.assert_allclose(out, naive_conv1d_temporal(x, k, b, stride, pad), atol=1e-5)


def test_conv1d_random_fixed():
    rng = np.random.default_rng(2)
    x, k, b = _rand(rng, 2, 2, 6, 4), _rand(rng, 3, 2, 3), _rand(rng, 3)
    np.testing.assert_allclose(tc.conv1d_temporal(x, k, b).data,
                               naive_conv1d_temporal(x, k, b, 1, 0), atol=1e-5)


# ---------------------------------------------------------------- pointwise and heads

def test_relu_examples():
    assert tc.relu(np.array([-2.0, 0.0, 3.0])).data.tolist() == [0.0, 0.0, 3.0]


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
def test_relu_idempotent(values):
    once = tc.relu(np.array(values))
    np.testing.assert_array_equal(tc.relu(once).data, once.data)


def test_softmax_symmetric():
    np.testing.assert_allclose(tc.softmax(np.zeros((1, 2))).data, [[0.5, 0.5]])


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8), st.integers(1, 4))
def test_softmax_rows_sum_to_one(values, rows):
    x = np.tile(np.array(values), (rows, 1))
    p = tc.softmax(x).data.astype(np.float64)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)


def test_cross_entropy_perfect_prediction():
    probs = np.eye(3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        loss = tc.cross_entropy(probs, [0, 1, 2])
    assert loss.item() <= 1e-6


def test_cross_entropy_label_out_of_range():
    with pytest.raises(IndexError):
        tc.cross_entropy(np.full((1, 3), 1 / 3), [3])


def test_cross_entropy_clamp_warns():
    with pytest.warns(RuntimeWarning):
        loss = tc.cross_entropy(np.array([[1.0, 0.0]]), [1])
    assert loss.item() == pytest.approx(-np.log(1e-12), rel=1e-5)


def test_linear_values():
    x = np.array([[1.0, 2.0]])
    w = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    assert tc.linear(x, w, np.array([0.5, 0.5, 0.5])).data.tolist() == [[1.5, 2.5, 3.5]]


# ---------------------------------------------------------------- backward

def test_backward_linear_gradient_is_input():
    x = np.array([1.0, -2.0, 3.0], dtype=np.float32)
    w = tc.Parameter(np.array([0.3, 0.1, -0.4]), "w")
    with tc.ComputeGraph() as g:
        loss = (w * x).sum()
    tc.zero_grads([w])
    tc.backward(loss, g)
    np.testing.assert_array_equal(w.grad, x)


def test_backward_twice_doubles():
    rng = np.random.default_rng(3)
    w = tc.Parameter(_rand(rng, 4, 3), "w")
    x = _rand(rng, 2, 4)
    with tc.ComputeGraph() as g:
        loss = tc.relu(x @ w).sum()
    tc.zero_grads([w])
    tc.backward(loss, g)
    once = w.grad.copy()
    tc.backward(loss, g)
    np.testing.assert_array_equal(w.grad, 2 * once)


def test_backward_non_scalar_rejected():
    w = tc.Parameter(np.ones(3), "w")
    with tc.ComputeGraph() as g:
        out = w * 2.0
    with pytest.raises(ContractError):
        tc.backward(out, g)


def test_no_graph_records_nothing():
    w = tc.Parameter(np.ones(3), "w")
    out = w * 2.0
    assert not out.requires_grad


_R = np.random.default_rng(11)
_W = _R.standard_normal((5, 3))
_W_CONCAT = _R.standard_normal((7, 3))
_W_STACK = _R.standard_normal((5, 2, 3))
_W_CONV2 = _R.standard_normal((2, 3, 3, 3))
_W_CONV1 = _R.standard_normal((1, 3, 5, 4))
_W_ROI = _R.standard_normal((2, 2, 2, 2, 2))

GRAD_CASES = {
    "add": (lambda a, b: ((a + b) * _W).sum(), [_R.standard_normal((5, 3)), _R.standard_normal((1, 3))]),
    "sub": (lambda a, b: ((a - b) * _W).sum(), [_R.standard_normal((5, 3)), _R.standard_normal(3)]),
    "mul": (lambda a, b: (a * b * _W).sum(), [_R.standard_normal((5, 3)), _R.standard_normal((5, 1))]),
    "div": (lambda a, b: (a / b).sum(), [_R.standard_normal((5, 3)), _R.uniform(1, 2, (5, 3))]),
    "matmul": (lambda a, b: ((a @ b) * _W).sum(), [_R.standard_normal((5, 4)), _R.standard_normal((4, 3))]),
    "sum_axis": (lambda a: (a.sum(axis=1) * _W[:, 0]).sum(), [_R.standard_normal((5, 3))]),
    "mean": (lambda a: (a.mean(axis=0) * _W[0]).sum(), [_R.standard_normal((5, 3))]),
    "reshape_transpose": (lambda a: (a.reshape(3, 5).transpose(1, 0) * _W).sum(), [_R.standard_normal((5, 3))]),
    "concat": (lambda a, b: (tc.concat([a, b], axis=0) * _W_CONCAT).sum(),
               [_R.standard_normal((5, 3)), _R.standard_normal((2, 3))]),
    "stack": (lambda a, b: (tc.stack([a, b], axis=1) * _W_STACK).sum(),
              [_R.standard_normal((5, 3)), _R.standard_normal((5, 3))]),
    "relu": (lambda a: (tc.relu(a) * _W).sum(), [_R.standard_normal((5, 3))]),
    "clamp": (lambda a: (tc.clamp(a, -0.5, 0.5) * _W).sum(), [_R.standard_normal((5, 3))]),
    "prod": (lambda a: (tc.prod(a, axis=-1) * _W[:, 0]).sum(), [_R.uniform(-1, 1, (5, 3))]),
    "linear": (lambda x, w, b: (tc.linear(x, w, b) * _W).sum(),
               [_R.standard_normal((5, 4)), _R.standard_normal((4, 3)), _R.standard_normal(3)]),
    "softmax": (lambda a: (tc.softmax(a) * _W).sum(), [_R.standard_normal((5, 3))]),
    "cross_entropy": (lambda a: tc.cross_entropy(tc.softmax(a), [0, 1, 2, 1, 0]), [_R.standard_normal((5, 3))]),
    "conv2d": (lambda x, k, b: (tc.conv2d(x, k, b, stride=2, pad=1) * _W_CONV2).sum(),
               [_R.standard_normal((2, 2, 5, 5)), _R.standard_normal((3, 2, 3, 3)), _R.standard_normal(3)]),
    "conv1d_temporal": (lambda x, k, b: (tc.conv1d_temporal(x, k, b, pad=1) * _W_CONV1).sum(),
                        [_R.standard_normal((1, 2, 5, 4)), _R.standard_normal((3, 2, 3)), _R.standard_normal(3)]),
    "roi_max_pool": (lambda x: (tc.roi_max_pool(x, [[(0, 0, 4, 4), None], [(1, 1, 3, 5), (2, 0, 6, 6)]], k=2)
                                * _W_ROI).sum(),
                     [_R.standard_normal((2, 2, 6, 6))]),
}


@pytest.mark.parametrize("name", sorted(GRAD_CASES))
def test_gradcheck_per_op(name):
    build, arrays = GRAD_CASES[name]
    assert gradcheck(build, arrays, n_coords=40) < 1e-2


# ---------------------------------------------------------------- sgd

def test_sgd_single_step():
    p = tc.Parameter(np.array([1.0]), "v")
    p.grad[:] = 0.5
    tc.sgd_step([p], 0.1)
    assert p.data[0] == pytest.approx(0.95, abs=1e-7)


def test_sgd_zero_lr_bit_exact():
    rng = np.random.default_rng(4)
    p = tc.Parameter(_rand(rng, 10), "v")
    before = p.data.copy()
    p.grad[:] = _rand(rng, 10)
    tc.sgd_step([p], 0.0)
    assert p.data.tobytes() == before.tobytes()


def test_sgd_quadratic_converges():
    v = tc.Parameter(np.array([0.0]), "v")
    for _ in range(50):
        with tc.ComputeGraph() as g:
            diff = v - 3.0
            loss = (diff * diff).sum()
        tc.zero_grads([v])
        tc.backward(loss, g)
        tc.sgd_step([v], 0.1)
    # closed form: v_k = 3 (1 - 0.8^k)
    assert abs(v.data[0] - 3.0) < 1e-3
    assert v.data[0] == pytest.approx(3 * (1 - 0.8 ** 50), abs=1e-5)


def test_sgd_non_finite_grad_names_parameter():
    p = tc.Parameter(np.ones(2), "kernel.7")
    p.grad[0] = np.nan
    with pytest.raises(NumericError, match="kernel.7"):
        tc.sgd_step([p], 0.1)


# ---------------------------------------------------------------- determinism and io

def test_glorot_deterministic_and_bounded():
    a = tc.glorot_uniform((4, 3, 3, 3), 27, 36, SplitMix64(5))
    b = tc.glorot_uniform((4, 3, 3, 3), 27, 36, SplitMix64(5))
    assert a.tobytes() == b.tobytes()
    assert np.abs(a).max() <= np.sqrt(6 / 63)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    params = [tc.Parameter(_rand(rng, 2, 3), "a.weight"), tc.Parameter(_rand(rng, 3), "a.bias")]
    path = tmp_path / "m.r21w"
    tc.save_checkpoint(path, params)
    raw = path.read_bytes()
    assert raw[:4] == b"R21W"
    loaded = tc.load_checkpoint(path)
    assert list(loaded) == ["a.weight", "a.bias"]
    for p in params:
        assert loaded[p.name].tobytes() == p.data.tobytes()


def test_checkpoint_errors(tmp_path):
    params = [tc.Parameter(np.ones((2, 2)), "w")]
    path = tmp_path / "m.r21w"
    tc.save_checkpoint(path, params)
    raw = path.read_bytes()
    (tmp_path / "t.r21w").write_bytes(raw[:-3])
    with pytest.raises(TruncatedPayloadError):
        tc.load_checkpoint(tmp_path / "t.r21w")
    (tmp_path / "v.r21w").write_bytes(raw[:4] + (2).to_bytes(4, "little") + raw[8:])
    with pytest.raises(VersionMismatchError):
        tc.load_checkpoint(tmp_path / "v.r21w")
    (tmp_path / "x.r21w").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(LoadError):
        tc.load_checkpoint(tmp_path / "x.r21w")
