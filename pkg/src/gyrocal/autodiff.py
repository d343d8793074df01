"""Reverse-mode differentiation over float64 numpy arrays.

A :class:`Var` wraps an array and remembers how it was produced; calling
:func:`backward` on a scalar-valued Var walks the recorded graph once in
reverse topological order and accumulates adjoints into every reachable
leaf. Plain ndarrays passed to the ops are treated as constants and get
no adjoint, which keeps data tensors out of the bookkeeping.

The op set is exactly what the segment loss needs (affine maps,
PReLU/LeakyReLU, valid 1-D convolution, Hamilton product, quaternion
normalization, the hemisphere-aligned quaternion distance) plus a few
generic array ops for composing test losses. All arithmetic stays in
64-bit; gradients match central finite differences to the tolerances
checked in the test suite.
"""

from __future__ import annotations

import numpy as np

# Hamilton product structure tensor: (a (x) b)_i = H[i,j,k] a_j b_k
_H = np.zeros((4, 4, 4))
_H[0, 0, 0] = 1.0
_H[0, 1, 1] = -1.0
_H[0, 2, 2] = -1.0
_H[0, 3, 3] = -1.0
_H[1, 0, 1] = 1.0
_H[1, 1, 0] = 1.0
_H[1, 2, 3] = 1.0
_H[1, 3, 2] = -1.0
_H[2, 0, 2] = 1.0
_H[2, 1, 3] = -1.0
_H[2, 2, 0] = 1.0
_H[2, 3, 1] = 1.0
_H[3, 0, 3] = 1.0
_H[3, 1, 2] = 1.0
_H[3, 2, 1] = -1.0
_H[3, 3, 0] = 1.0


class Var:
    """Graph node: primal value plus the recorded reverse step."""

    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    # convenience operators used by tests and small compositions
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _val(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _acc(x, g):
    if not isinstance(x, Var):
        return
    if x.grad is None:
        x.grad = np.zeros_like(x.value)
    x.grad += g


def _acc_at(x, index, g):
    if not isinstance(x, Var):
        return
    if x.grad is None:
        x.grad = np.zeros_like(x.value)
    x.grad[index] += g


def _parents(*args):
    return tuple(a for a in args if isinstance(a, Var))


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b):
    av, bv = _val(a), _val(b)
    out = Var(av + bv, _parents(a, b))

    def bwd(g):
        if isinstance(a, Var):
            _acc(a, _unbroadcast(g, av.shape))
        if isinstance(b, Var):
            _acc(b, _unbroadcast(g, bv.shape))

    out._backward = bwd
    return out


def sub(a, b):
    av, bv = _val(a), _val(b)
    out = Var(av - bv, _parents(a, b))

    def bwd(g):
        if isinstance(a, Var):
            _acc(a, _unbroadcast(g, av.shape))
        if isinstance(b, Var):
            _acc(b, -_unbroadcast(g, bv.shape))

    out._backward = bwd
    return out


def mul(a, b):
    av, bv = _val(a), _val(b)
    out = Var(av * bv, _parents(a, b))

    def bwd(g):
        if isinstance(a, Var):
            _acc(a, _unbroadcast(g * bv, av.shape))
        if isinstance(b, Var):
            _acc(b, _unbroadcast(g * av, bv.shape))

    out._backward = bwd
    return out


def div(a, b):
    av, bv = _val(a), _val(b)
    out = Var(av / bv, _parents(a, b))

    def bwd(g):
        if isinstance(a, Var):
            _acc(a, _unbroadcast(g / bv, av.shape))
        if isinstance(b, Var):
            _acc(b, _unbroadcast(-g * av / (bv * bv), bv.shape))

    out._backward = bwd
    return out


def scale(a, c: float):
    out = Var(_val(a) * c, _parents(a))

    def bwd(g):
        _acc(a, g * c)

    out._backward = bwd
    return out


def sqrt(a):
    av = _val(a)
    root = np.sqrt(av)
    out = Var(root, _parents(a))

    def bwd(g):
        _acc(a, g * (0.5 / root))

    out._backward = bwd
    return out


def sum_all(a):
    av = _val(a)
    out = Var(av.sum(), _parents(a))

    def bwd(g):
        _acc(a, np.broadcast_to(g, av.shape))

    out._backward = bwd
    return out


def take(a, index):
    """Basic-indexing view; adjoints scatter-add back into the parent."""
    out = Var(_val(a)[index], _parents(a))

    def bwd(g):
        _acc_at(a, index, g)

    out._backward = bwd
    return out


def reshape(a, shape):
    av = _val(a)
    out = Var(av.reshape(shape), _parents(a))

    def bwd(g):
        _acc(a, g.reshape(av.shape))

    out._backward = bwd
    return out


def transpose(a, axes):
    inverse = tuple(np.argsort(axes))
    out = Var(_val(a).transpose(axes), _parents(a))

    def bwd(g):
        _acc(a, g.transpose(inverse))

    out._backward = bwd
    return out


def affine(x, matrix, bias):
    """y = x @ matrix.T + bias over the last axis; x may be constant data."""
    xv, mv, bv = _val(x), _val(matrix), _val(bias)
    out = Var(xv @ mv.T + bv, _parents(x, matrix, bias))

    def bwd(g):
        if isinstance(x, Var):
            _acc(x, g @ mv)
        if isinstance(matrix, Var):
            g2 = g.reshape(-1, g.shape[-1])
            x2 = xv.reshape(-1, xv.shape[-1])
            _acc(matrix, g2.T @ x2)
        if isinstance(bias, Var):
            _acc(bias, g.reshape(-1, g.shape[-1]).sum(axis=0))

    out._backward = bwd
    return out


def prelu(x, slopes):
    """PReLU with one trained slope per channel on the last axis."""
    xv, sv = _val(x), _val(slopes)
    neg = xv < 0.0
    out = Var(np.where(neg, sv * xv, xv), _parents(x, slopes))

    def bwd(g):
        if isinstance(x, Var):
            _acc(x, np.where(neg, sv * g, g))
        if isinstance(slopes, Var):
            contrib = np.where(neg, g * xv, 0.0)
            _acc(slopes, contrib.reshape(-1, xv.shape[-1]).sum(axis=0))

    out._backward = bwd
    return out


def leaky_relu(x, slope: float):
    xv = _val(x)
    neg = xv < 0.0
    out = Var(np.where(neg, slope * xv, xv), _parents(x))

    def bwd(g):
        _acc(x, np.where(neg, slope * g, g))

    out._backward = bwd
    return out


def conv1d_valid(x, w, b):
    """Valid 1-D convolution: x (batch, cin, L), w (cout, cin, k), b (cout,)."""
    xv, wv, bv = _val(x), _val(w), _val(b)
    k = wv.shape[2]
    windows = np.lib.stride_tricks.sliding_window_view(xv, k, axis=2)
    out = Var(
        np.einsum("bilk,oik->bol", windows, wv) + bv[None, :, None], _parents(x, w, b)
    )

    def bwd(g):
        if isinstance(w, Var):
            _acc(w, np.einsum("bol,bilk->oik", g, windows))
        if isinstance(b, Var):
            _acc(b, g.sum(axis=(0, 2)))
        if isinstance(x, Var):
            gp = np.pad(g, ((0, 0), (0, 0), (k - 1, k - 1)))
            gwin = np.lib.stride_tricks.sliding_window_view(gp, k, axis=2)
            _acc(x, np.einsum("botr,oir->bit", gwin, wv[:, :, ::-1]))

    out._backward = bwd
    return out


def qmul(a, b):
    """Batched Hamilton product on (..., 4) arrays."""
    av, bv = _val(a), _val(b)
    out = Var(np.einsum("ijk,...j,...k->...i", _H, av, bv), _parents(a, b))

    def bwd(g):
        if isinstance(a, Var):
            _acc(a, np.einsum("ijk,...i,...k->...j", _H, g, bv))
        if isinstance(b, Var):
            _acc(b, np.einsum("ijk,...i,...j->...k", _H, g, av))

    out._backward = bwd
    return out


def qnormalize(a):
    """Normalize (..., 4) quaternions; the quotient rule flows gradients
    through the renormalization, matching the deployed forward pass."""
    av = _val(a)
    norm = np.sqrt((av * av).sum(axis=-1, keepdims=True))
    if np.any(norm < 1e-12):
        raise ValueError("cannot differentiate through normalization at zero norm")
    y = av / norm
    out = Var(y, _parents(a))

    def bwd(g):
        _acc(a, (g - y * (g * y).sum(axis=-1, keepdims=True)) / norm)

    out._backward = bwd
    return out


def rate_quat(omega, dt):
    """[1, omega*dt/2] update quaternions from (..., 3) rates; dt is data."""
    ov = _val(omega)
    half = 0.5 * np.asarray(dt, dtype=np.float64)[..., None]
    value = np.empty(ov.shape[:-1] + (4,))
    value[..., 0] = 1.0
    value[..., 1:] = ov * half
    out = Var(value, _parents(omega))

    def bwd(g):
        _acc(omega, g[..., 1:] * half)

    out._backward = bwd
    return out


def quat_diff_aligned(q, target):
    """Hemisphere-aligned Euclidean quaternion distance, per batch row.

    ``target`` is reference data (no gradient). The alignment sign is a
    function of the primal values and is locally constant, so it acts as
    a fixed factor in the reverse pass. At an exact zero the distance is
    not differentiable; the minimum-norm subgradient (zero) is used.
    """
    qv, tv = _val(q), _val(target)
    sign = np.where((qv * tv).sum(axis=-1) >= 0.0, 1.0, -1.0)[..., None]
    d = qv - sign * tv
    dist = np.sqrt((d * d).sum(axis=-1))
    out = Var(dist, _parents(q))

    def bwd(g):
        denom = np.where(dist > 0.0, dist, 1.0)[..., None]
        _acc(q, g[..., None] * d / denom)

    out._backward = bwd
    return out


def _toposort(root: Var):
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(root: Var) -> None:
    """Accumulate adjoints of ``root`` (summed if non-scalar) into leaves."""
    order = _toposort(root)
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


def gradients(fn, arrays):
    """Reverse-mode gradients of ``fn`` with respect to ``arrays``.

    ``fn`` receives one Var per input array and must return a scalar
    Var built from the ops in this module. Returns (value, grads).
    """
    leaves = [Var(a) for a in arrays]
    out = fn(*leaves)
    if out.value.ndim != 0:
        raise ValueError("loss must be scalar")
    backward(out)
    grads = [
        leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves
    ]
    return float(out.value), grads


def finite_difference(fn, arrays, h: float = 1e-4):
    """Central-difference gradients of a plain scalar function.

    Independent of the reverse pass: only primal evaluations of ``fn``
    at shifted inputs. Used as the oracle the tape is checked against.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    grads = [np.zeros_like(a) for a in arrays]
    for a, g in zip(arrays, grads):
        flat_a, flat_g = a.ravel(), g.ravel()
        for i in range(flat_a.size):
            keep = flat_a[i]
            flat_a[i] = keep + h
            hi = fn(*arrays)
            flat_a[i] = keep - h
            lo = fn(*arrays)
            flat_a[i] = keep
            flat_g[i] = (hi - lo) / (2.0 * h)
    return grads
