import numpy as np
import pytest

from degalign import Graph


def fd_grads(fn, arrays, h=1e-5):
    """Central finite differences of a scalar function of numpy arrays.

    Independent of the autodiff engine: perturbs one entry at a time and
    re-evaluates fn, which must return a plain float.
    """
    grads = []
    for base in arrays:
        grad = np.zeros_like(base, dtype=np.float64)
        flat_x = base.ravel()
        flat_g = grad.ravel()
        for i in range(flat_x.size):
            orig = flat_x[i]
            flat_x[i] = orig + h
            f_plus = fn(*arrays)
            flat_x[i] = orig - h
            f_minus = fn(*arrays)
            flat_x[i] = orig
            flat_g[i] = (f_plus - f_minus) / (2.0 * h)
        grads.append(grad)
    return grads


def relative_grad_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))


def assert_grad_close(analytic, numeric, tol=1e-4):
    err = relative_grad_error(analytic, numeric)
    assert err < tol, f"gradient mismatch: max relative error {err:.3e}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def path_graph(n):
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves):
    return Graph(leaves + 1, [(0, i + 1) for i in range(leaves)])


def triangle_graph():
    return Graph(3, [(0, 1), (0, 2), (1, 2)])
