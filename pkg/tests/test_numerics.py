import numpy as np
import pytest
import scipy.sparse as sp

from degalign import numerics as nm
from degalign.numerics import Parameter, SparsePattern, Tensor

from conftest import assert_grad_close, fd_grads


def _param(rng, *shape):
    # keep magnitudes away from the leaky_relu kink at 0
    data = rng.uniform(0.1, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return Parameter(data)


def _check_op(rng, build_loss, shapes, tol=1e-4):
    params = [_param(rng, *s) for s in shapes]
    loss = build_loss(*params)
    nm.backward(loss)

    def scalar_fn(*arrays):
        consts = [Tensor(a) for a in arrays]
        return float(build_loss(*consts).data)

    numeric = fd_grads(scalar_fn, [p.data.copy() for p in params])
    for p, num in zip(params, numeric):
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        assert_grad_close(analytic, num, tol)


# ---------------------------------------------------------------------------
# forward values
# ---------------------------------------------------------------------------


def test_matmul_identity():
    a = np.arange(9, dtype=float).reshape(3, 3)
    out = nm.matmul(Tensor(np.eye(3)), Tensor(a))
    np.testing.assert_array_equal(out.data, a)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
        nm.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 2))))


def test_mean_rows_value():
    out = nm.mean_rows(Tensor([[1.0, 3.0], [3.0, 5.0]]))
    np.testing.assert_array_equal(out.data, [2.0, 4.0])


def test_cosine_orthogonal_is_zero():
    out = nm.cosine_rows(Tensor([1.0, 0.0]), Tensor([0.0, 1.0]))
    assert out.data == 0.0


def test_cosine_zero_vector_guard():
    out = nm.cosine_rows(Tensor([0.0, 0.0]), Tensor([1.0, 1.0]))
    assert out.data == 0.0


def test_neighbor_softmax_values():
    scores = Tensor([0.0, 0.0, 1.0, 1.0, 1.0])
    segments = np.array([0, 0, 1, 1, 1])
    out = nm.neighbor_softmax(scores, segments)
    np.testing.assert_allclose(out.data, [0.5, 0.5, 1 / 3, 1 / 3, 1 / 3])


def test_neighbor_softmax_rejects_unsorted_segments():
    with pytest.raises(ValueError, match="nondecreasing"):
        nm.neighbor_softmax(Tensor([1.0, 2.0]), np.array([1, 0]))


def test_sum_sq_gradient_is_twice_vector():
    v = Parameter([3.0, -4.0])
    loss = nm.sum_sq(v)
    assert loss.data == 25.0
    nm.backward(loss)
    np.testing.assert_array_equal(v.grad, [6.0, -8.0])


def test_constant_loss_leaves_gradients_zero():
    w = Parameter(np.ones((2, 2)))
    loss = nm.sum_all(Tensor(np.ones(3)))
    nm.backward(loss)
    assert w.grad is None


def test_backward_twice_raises():
    w = Parameter(np.ones(2))
    loss = nm.sum_sq(w)
    nm.backward(loss)
    with pytest.raises(RuntimeError, match="twice"):
        nm.backward(loss)


def test_backward_requires_scalar():
    w = Parameter(np.ones(3))
    with pytest.raises(ValueError, match="scalar"):
        nm.backward(nm.mul(w, 2.0))


# ---------------------------------------------------------------------------
# gradient checks against central finite differences
# ---------------------------------------------------------------------------


def test_grad_add_broadcast(rng):
    _check_op(rng, lambda a, b: nm.sum_sq(nm.add(a, b)), [(4, 3), (3,)])


def test_grad_sub(rng):
    _check_op(rng, lambda a, b: nm.sum_sq(nm.sub(a, b)), [(4, 3), (4, 3)])


def test_grad_mul_broadcast(rng):
    _check_op(rng, lambda a, b: nm.sum_all(nm.mul(a, b)), [(4, 3), (4, 1)])


def test_grad_div(rng):
    _check_op(rng, lambda a, b: nm.sum_all(nm.div(a, b)), [(3, 3), (3, 3)])


def test_grad_matmul_2d(rng):
    _check_op(rng, lambda a, b: nm.sum_sq(nm.matmul(a, b)), [(4, 5), (5, 3)])


def test_grad_matmul_matvec(rng):
    _check_op(rng, lambda a, b: nm.sum_sq(nm.matmul(a, b)), [(4, 5), (5,)])


def test_grad_matmul_vecmat(rng):
    _check_op(rng, lambda a, b: nm.sum_sq(nm.matmul(a, b)), [(5,), (5, 3)])


def test_grad_concat_axis0(rng):
    _check_op(rng, lambda a, b: nm.sum_sq(nm.concat([a, b], axis=0)), [(2, 3), (4, 3)])


def test_grad_concat_axis1(rng):
    _check_op(rng, lambda a, b: nm.sum_sq(nm.concat([a, b], axis=1)), [(3, 2), (3, 4)])


def test_grad_mean_rows(rng):
    _check_op(rng, lambda a: nm.sum_sq(nm.mean_rows(a)), [(5, 4)])


def test_grad_leaky_relu(rng):
    _check_op(rng, lambda a: nm.sum_sq(nm.leaky_relu(a, 0.2)), [(4, 4)])


def test_grad_tanh(rng):
    _check_op(rng, lambda a: nm.sum_sq(nm.tanh(a)), [(4, 4)])


def test_grad_exp(rng):
    _check_op(rng, lambda a: nm.sum_all(nm.exp(a)), [(3, 3)])


def test_grad_gather_rows_with_duplicates(rng):
    idx = np.array([0, 2, 2, 1])
    _check_op(rng, lambda a: nm.sum_sq(nm.gather_rows(a, idx)), [(3, 4)])


def test_grad_cosine_rows(rng):
    _check_op(rng, lambda a, b: nm.sum_all(nm.cosine_rows(a, b)), [(5, 4), (5, 4)])


def test_grad_cosine_vectors(rng):
    _check_op(rng, lambda a, b: nm.cosine_rows(a, b), [(6,), (6,)])


def test_grad_neighbor_softmax(rng):
    segments = np.array([0, 0, 0, 1, 1, 2, 2, 2])
    weights = rng.normal(size=8)

    def loss(scores):
        return nm.sum_all(nm.mul(nm.neighbor_softmax(scores, segments), weights))

    _check_op(rng, loss, [(8,)])


def test_grad_sparse_matmul(rng):
    s = sp.csr_matrix(np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]))
    _check_op(rng, lambda v: nm.sum_sq(nm.sparse_matmul(s, v)), [(3, 4)])


def test_grad_weighted_spmm(rng):
    # 2 rows, 3 columns of values, pattern rows {0: [0,2], 1: [1]}
    pattern = SparsePattern(np.array([0, 2, 3]), np.array([0, 2, 1]), shape=(2, 3))
    _check_op(
        rng,
        lambda vals, v: nm.sum_sq(nm.weighted_spmm(vals, pattern, v)),
        [(3,), (3, 4)],
    )


def test_grad_composition_mlp(rng):
    idx = np.array([0, 1, 1, 2])

    def loss(x, w1, b, w2):
        hidden = nm.tanh(nm.add(nm.matmul(x, w1), b))
        out = nm.matmul(hidden, w2)
        return nm.sum_sq(nm.cosine_rows(nm.gather_rows(out, idx), nm.gather_rows(x, idx)))

    _check_op(rng, loss, [(3, 4), (4, 6), (6,), (6, 4)])


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


def test_adam_zero_gradient_keeps_state():
    p = Parameter(np.array([1.5, -2.0]))
    nm.adam_step([p], lr=0.1)
    np.testing.assert_array_equal(p.data, [1.5, -2.0])


def test_adam_first_step_magnitude_is_lr():
    p = Parameter(np.array([0.0]))
    p.grad = np.array([1.0])
    nm.adam_step([p], lr=0.01)
    assert p.data[0] == pytest.approx(-0.01, rel=1e-6)
    assert p.grad is None


def test_adam_rejects_non_finite_gradient():
    p = Parameter(np.array([0.0]))
    p.grad = np.array([np.nan])
    before = p.data.copy()
    with pytest.raises(FloatingPointError):
        nm.adam_step([p], lr=0.1)
    np.testing.assert_array_equal(p.data, before)


def _reference_adam(w0, grad_fn, steps, lr, betas=(0.9, 0.999), eps=1e-8):
    """Independent adaptive-moment loop used as the optimization oracle."""
    w = float(w0)
    m = v = 0.0
    b1, b2 = betas
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return w


def test_adam_quadratic_bowl_converges():
    expected = _reference_adam(1.0, lambda w: 2.0 * w, steps=200, lr=0.1)
    assert abs(expected) < 1e-3  # the oracle itself reaches the bowl floor

    p = Parameter(np.array([1.0]))
    for _ in range(200):
        loss = nm.sum_sq(p)
        nm.backward(loss)
        nm.adam_step([p], lr=0.1)
    assert abs(p.data[0]) < 1e-3
    assert p.data[0] == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# checkpoints and determinism
# ---------------------------------------------------------------------------


def test_checkpoint_roundtrip_bit_exact(tmp_path, rng):
    named = {
        "layer.weight": rng.normal(size=(7, 3)),
        "layer.bias": rng.normal(size=3),
        "scalar": np.array(np.pi),
    }
    path = tmp_path / "ckpt.npz"
    nm.save_arrays(path, named)
    loaded = nm.load_arrays(path)
    assert set(loaded) == set(named)
    for key, arr in named.items():
        assert loaded[key].dtype == arr.dtype
        np.testing.assert_array_equal(loaded[key], arr)


def test_forward_is_deterministic(rng):
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(4, 4))

    def compute():
        return nm.sum_sq(nm.tanh(nm.matmul(Tensor(x), Tensor(w)))).item()

    assert compute() == compute()
