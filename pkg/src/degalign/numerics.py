"""Dense float64 tensors with reverse-mode differentiation.

A deliberately small engine: enough arithmetic to express mean/attention
neighborhood aggregation, the mapping MLPs and the training losses, plus an
adaptive-moment optimizer and a named-array checkpoint format. Values are
kept in 64-bit floats so that repeated runs with the same seed produce
bit-identical traces.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

DTYPE = np.float64

# Cosine similarity is defined as 0 when either vector norm falls below this.
NORM_EPS = 1e-12

__all__ = [
    "Tensor",
    "Parameter",
    "as_tensor",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "concat",
    "mean_rows",
    "leaky_relu",
    "tanh",
    "exp",
    "gather_rows",
    "sum_all",
    "sum_sq",
    "cosine_rows",
    "neighbor_softmax",
    "sparse_matmul",
    "weighted_spmm",
    "SparsePattern",
    "backward",
    "adam_step",
    "save_arrays",
    "load_arrays",
]


class Tensor:
    """A dense array plus the bookkeeping for reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; the free functions hold the actual implementations.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A trainable tensor carrying its optimizer moment buffers."""

    __slots__ = ("m", "v", "steps")

    def __init__(self, data):
        super().__init__(data, requires_grad=True)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.steps = 0


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=DTYPE)
        if t.grad.shape != t.data.shape:
            t.grad = np.broadcast_to(t.grad, t.data.shape).copy()
    else:
        t.grad += g


def _make(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward_fn(g):
        _accumulate(a, -g)

    return _make(-a.data, (a,), backward_fn)


# ---------------------------------------------------------------------------
# linear algebra and shape ops
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product; supports (m,k)@(k,n), (m,k)@(k,) and (k,)@(k,n)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 2 and b.ndim == 2:
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
        out_data = a.data @ b.data

        def backward_fn(g):
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)

    elif a.ndim == 2 and b.ndim == 1:
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
        out_data = a.data @ b.data

        def backward_fn(g):
            _accumulate(a, np.outer(g, b.data))
            _accumulate(b, a.data.T @ g)

    elif a.ndim == 1 and b.ndim == 2:
        if a.shape[0] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
        out_data = a.data @ b.data

        def backward_fn(g):
            _accumulate(a, b.data @ g)
            _accumulate(b, np.outer(a.data, g))

    else:
        raise ValueError(f"matmul expects 1-D or 2-D operands, got {a.shape} @ {b.shape}")
    return _make(out_data, (a, b), backward_fn)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(sl)])

    return _make(out_data, tuple(ts), backward_fn)


def mean_rows(a) -> Tensor:
    """Mean over axis 0: the average of the row vectors of a matrix."""
    a = as_tensor(a)
    if a.ndim != 2:
        raise ValueError(f"mean_rows expects a matrix, got shape {a.shape}")
    n = a.shape[0]
    out_data = a.data.mean(axis=0)

    def backward_fn(g):
        _accumulate(a, np.broadcast_to(g / n, a.data.shape).copy())

    return _make(out_data, (a,), backward_fn)


def gather_rows(a, index) -> Tensor:
    """Select rows by integer index; duplicate indices accumulate on backward."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    out_data = a.data[index]

    def backward_fn(g):
        if not a.requires_grad:
            return
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        if g.ndim == 2 and index.size > 512:
            # scatter-add via one-hot transpose matmul; much faster than add.at
            b = index.shape[0]
            onehot = sp.csr_matrix(
                (np.ones(b, dtype=DTYPE), index.astype(np.int32),
                 np.arange(b + 1, dtype=np.int32)),
                shape=(b, a.data.shape[0]),
            )
            a.grad += onehot.T @ g
        else:
            np.add.at(a.grad, index, g)

    return _make(out_data, (a,), backward_fn)


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    out_data = np.where(pos, a.data, slope * a.data)

    def backward_fn(g):
        _accumulate(a, g * np.where(pos, 1.0, slope))

    return _make(out_data, (a,), backward_fn)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def backward_fn(g):
        _accumulate(a, g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward_fn)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def backward_fn(g):
        _accumulate(a, g * out_data)

    return _make(out_data, (a,), backward_fn)


# ---------------------------------------------------------------------------
# reductions and similarities
# ---------------------------------------------------------------------------


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum()

    def backward_fn(g):
        _accumulate(a, np.full_like(a.data, float(g)))

    return _make(out_data, (a,), backward_fn)


def sum_sq(a) -> Tensor:
    """Sum of squared entries (the squared Frobenius / Euclidean norm)."""
    a = as_tensor(a)
    out_data = np.sum(a.data * a.data)

    def backward_fn(g):
        _accumulate(a, 2.0 * float(g) * a.data)

    return _make(out_data, (a,), backward_fn)


def cosine_rows(u, v) -> Tensor:
    """Row-wise cosine similarity.

    For two (n, d) matrices returns an (n,) vector; for two (d,) vectors a
    scalar. Rows whose norm is below NORM_EPS get similarity 0 and pass no
    gradient, so zero vectors (e.g. empty neighborhoods) are safe.
    """
    u, v = as_tensor(u), as_tensor(v)
    if u.shape != v.shape:
        raise ValueError(f"cosine_rows shape mismatch: {u.shape} vs {v.shape}")
    scalar = u.ndim == 1
    ud = u.data[None, :] if scalar else u.data
    vd = v.data[None, :] if scalar else v.data

    nu = np.sqrt(np.sum(ud * ud, axis=1))
    nv = np.sqrt(np.sum(vd * vd, axis=1))
    valid = (nu >= NORM_EPS) & (nv >= NORM_EPS)
    denom = np.where(valid, nu * nv, 1.0)
    dot = np.sum(ud * vd, axis=1)
    sim = np.where(valid, dot / denom, 0.0)
    out_data = sim[0] if scalar else sim

    def backward_fn(g):
        gs = np.where(valid, np.atleast_1d(g), 0.0)
        # d cos / du = v / (|u||v|) - cos * u / |u|^2, zero on guarded rows
        nusq = np.where(valid, nu * nu, 1.0)
        nvsq = np.where(valid, nv * nv, 1.0)
        gu = gs[:, None] * (vd / denom[:, None] - (sim / nusq)[:, None] * ud)
        gv = gs[:, None] * (ud / denom[:, None] - (sim / nvsq)[:, None] * vd)
        if scalar:
            _accumulate(u, gu[0])
            _accumulate(v, gv[0])
        else:
            _accumulate(u, gu)
            _accumulate(v, gv)

    return _make(out_data, (u, v), backward_fn)


# ---------------------------------------------------------------------------
# segment (per-neighborhood) ops
# ---------------------------------------------------------------------------


def _segment_starts(segments: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start offsets and lengths of runs of equal segment ids (ids sorted)."""
    if segments.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    change = np.flatnonzero(np.diff(segments)) + 1
    starts = np.concatenate(([0], change))
    counts = np.diff(np.concatenate((starts, [segments.size])))
    return starts, counts


def neighbor_softmax(scores, segments) -> Tensor:
    """Softmax within each contiguous group of equal segment ids.

    `segments` must be nondecreasing (scores grouped by the aggregating
    node). The row max is subtracted before exponentiation for stability.
    """
    scores = as_tensor(scores)
    segments = np.asarray(segments, dtype=np.int64)
    if scores.ndim != 1 or scores.shape[0] != segments.shape[0]:
        raise ValueError(
            f"neighbor_softmax expects matching 1-D inputs, got {scores.shape} and {segments.shape}"
        )
    if segments.size and np.any(np.diff(segments) < 0):
        raise ValueError("segment ids must be nondecreasing")
    starts, counts = _segment_starts(segments)
    seg_max = np.maximum.reduceat(scores.data, starts) if scores.data.size else np.zeros(0)
    e = np.exp(scores.data - np.repeat(seg_max, counts))
    denom = np.add.reduceat(e, starts) if e.size else np.zeros(0)
    w = e / np.repeat(denom, counts)

    def backward_fn(g):
        seg_dot = np.add.reduceat(w * g, starts) if g.size else np.zeros(0)
        _accumulate(scores, w * (g - np.repeat(seg_dot, counts)))

    return _make(w, (scores,), backward_fn)


class SparsePattern:
    """Fixed sparsity structure (CSR) for message aggregation.

    Rows are aggregation targets, columns index the stacked value matrix.
    `rows` repeats each row id once per stored entry, aligned with `cols`.
    """

    __slots__ = ("indptr", "cols", "rows", "shape")

    def __init__(self, indptr: np.ndarray, cols: np.ndarray, shape: tuple[int, int]):
        self.indptr = np.asarray(indptr, dtype=np.int32)
        self.cols = np.asarray(cols, dtype=np.int32)
        self.shape = shape
        counts = np.diff(self.indptr)
        self.rows = np.repeat(np.arange(shape[0], dtype=np.int64), counts)

    @property
    def nnz(self) -> int:
        return int(self.cols.shape[0])

    def constant_matrix(self) -> sp.csr_matrix:
        data = np.ones(self.nnz, dtype=DTYPE)
        return sp.csr_matrix((data, self.cols, self.indptr), shape=self.shape)


def sparse_matmul(s: sp.spmatrix, v) -> Tensor:
    """Product of a constant sparse matrix with a dense tensor."""
    v = as_tensor(v)
    if s.shape[1] != v.shape[0]:
        raise ValueError(f"sparse_matmul shape mismatch: {s.shape} @ {v.shape}")
    out_data = s @ v.data

    def backward_fn(g):
        _accumulate(v, s.T @ g)

    return _make(out_data, (v,), backward_fn)


_CHUNK = 1 << 16


def weighted_spmm(values, pattern: SparsePattern, v) -> Tensor:
    """Sparse-times-dense where the sparse entries are differentiable.

    Computes out[i] = sum over stored entries e of row i of
    values[e] * v[pattern.cols[e]]. Gradients flow into both `values`
    and `v`.
    """
    values, v = as_tensor(values), as_tensor(v)
    if values.shape != (pattern.nnz,):
        raise ValueError(f"values shape {values.shape} != nnz {(pattern.nnz,)}")
    if pattern.shape[1] != v.shape[0]:
        raise ValueError(f"weighted_spmm shape mismatch: {pattern.shape} @ {v.shape}")
    s = sp.csr_matrix((values.data, pattern.cols, pattern.indptr), shape=pattern.shape)
    out_data = s @ v.data

    def backward_fn(g):
        _accumulate(v, s.T @ g)
        if values.requires_grad:
            gv = np.empty(pattern.nnz, dtype=DTYPE)
            # chunked to avoid materializing an (nnz, d) gather
            for lo in range(0, pattern.nnz, _CHUNK):
                hi = min(lo + _CHUNK, pattern.nnz)
                gv[lo:hi] = np.einsum(
                    "ij,ij->i", g[pattern.rows[lo:hi]], v.data[pattern.cols[lo:hi]]
                )
            _accumulate(values, gv)

    return _make(out_data, (values, v), backward_fn)


# ---------------------------------------------------------------------------
# backward pass and optimizer
# ---------------------------------------------------------------------------


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate gradients of every tensor reachable from a scalar loss."""
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise RuntimeError("backward called twice on the same graph; rerun the forward pass")
    loss._consumed = True
    if not loss.requires_grad:
        return
    loss.grad = np.ones_like(loss.data)
    for node in reversed(_topo_order(loss)):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)


def adam_step(
    params,
    lr: float = 1e-3,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One adaptive-moment update over all parameters; zeroes gradients.

    Raises before touching any state if a populated gradient is non-finite.
    A missing gradient counts as zero (the parameter still decays through
    its moment buffers).
    """
    params = list(params)
    for p in params:
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise FloatingPointError("non-finite gradient; step aborted")
    b1, b2 = betas
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        p.steps += 1
        p.m = b1 * p.m + (1.0 - b1) * g
        p.v = b2 * p.v + (1.0 - b2) * (g * g)
        m_hat = p.m / (1.0 - b1**p.steps)
        v_hat = p.v / (1.0 - b2**p.steps)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.grad = None


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_arrays(path, named: dict[str, np.ndarray]) -> None:
    """Write named float64 arrays; round-trips bit-exactly via load_arrays."""
    np.savez(path, **named)


def load_arrays(path) -> dict[str, np.ndarray]:
    with np.load(path, allow_pickle=False) as z:
        return {name: z[name] for name in z.files}
