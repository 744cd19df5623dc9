"""Minimal reverse-mode automatic differentiation on numpy arrays.

A Var wraps a dense array and remembers how it was produced; backward()
walks the graph in reverse topological order and accumulates gradients
into every Var that requires them.  Parameters are float32 during
training; gradient-check code builds the same graphs in float64.
Reductions always accumulate in float64 regardless of storage dtype.
"""

from __future__ import annotations

import math

import numpy as np

from microdrive import betadist as _bd

# Transient im2col buffers are capped at roughly this many bytes; larger
# batches are processed in chunks and the column matrix is rebuilt during
# backward instead of being stored on the tape.
_CONV_CHUNK_BYTES = 32 * 1024 * 1024

# When enabled every op validates that its output is finite.  Slow; meant
# for tests and debugging.
CHECK_FINITE = False


class Var:
    """Node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None
        if CHECK_FINITE and not np.all(np.isfinite(self.data)):
            raise FloatingPointError("non-finite values produced by an op")

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Var":
        return Var(self.data)

    def __repr__(self):
        return f"Var(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    # Operator sugar; constants are wrapped on the fly.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return mul(self, _wrap(-1.0))


def _wrap(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=np.float64))


def parameter(data, name: str | None = None) -> Var:
    return Var(np.asarray(data), requires_grad=True)


def _accum(var: Var, g: np.ndarray):
    g = np.asarray(g)
    if g.dtype != var.data.dtype:
        g = g.astype(var.data.dtype)
    if var.grad is None:
        var.grad = g.copy() if g.base is not None or g is var.data else g
    else:
        var.grad = var.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss: Var):
    """Accumulate d(loss)/d(param) into .grad of every reachable parameter."""
    if loss.data.size != 1:
        raise ValueError(f"backward expects a scalar, got shape {loss.data.shape}")
    # Iterative topological order (graphs can be deep).
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params):
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Var, b: Var) -> Var:
    out_data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.data.shape))

    return Var(out_data, _parents=(a, b), _backward=bw)


def sub(a: Var, b: Var) -> Var:
    out_data = a.data - b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g, b.data.shape))

    return Var(out_data, _parents=(a, b), _backward=bw)


def mul(a: Var, b: Var) -> Var:
    out_data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return Var(out_data, _parents=(a, b), _backward=bw)


def square(a: Var) -> Var:
    def bw(g):
        _accum(a, g * (2.0 * a.data))

    return Var(a.data * a.data, _parents=(a,), _backward=bw)


def abs_(a: Var) -> Var:
    """|x| with sign subgradient (0 at the kink)."""

    def bw(g):
        _accum(a, g * np.sign(a.data))

    return Var(np.abs(a.data), _parents=(a,), _backward=bw)


def exp(a: Var) -> Var:
    out_data = np.exp(a.data)

    def bw(g):
        _accum(a, g * out_data)

    return Var(out_data, _parents=(a,), _backward=bw)


def log(a: Var) -> Var:
    if np.any(a.data <= 0.0):
        raise FloatingPointError("log requires strictly positive input")
    out_data = np.log(a.data)

    def bw(g):
        _accum(a, g / a.data)

    return Var(out_data, _parents=(a,), _backward=bw)


def relu(a: Var) -> Var:
    mask = a.data > 0.0

    def bw(g):
        _accum(a, g * mask)

    return Var(a.data * mask, _parents=(a,), _backward=bw)


def softplus(a: Var) -> Var:
    """ln(1 + e^x), computed stably for large |x|."""
    x = a.data
    out_data = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    sig = 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))

    def bw(g):
        _accum(a, g * sig)

    return Var(out_data.astype(x.dtype), _parents=(a,), _backward=bw)


def tanh(a: Var) -> Var:
    out_data = np.tanh(a.data)

    def bw(g):
        _accum(a, g * (1.0 - out_data * out_data))

    return Var(out_data, _parents=(a,), _backward=bw)


def clip(a: Var, lo: float, hi: float) -> Var:
    """Clamp; gradient is passed through only inside the open interval."""
    mask = (a.data > lo) & (a.data < hi)

    def bw(g):
        _accum(a, g * mask)

    return Var(np.clip(a.data, lo, hi), _parents=(a,), _backward=bw)


def minimum(a: Var, b: Var) -> Var:
    take_a = a.data <= b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * take_a, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * (~take_a), b.data.shape))

    return Var(np.minimum(a.data, b.data), _parents=(a, b), _backward=bw)


def lgamma(a: Var) -> Var:
    """ln Gamma elementwise; d/dx is the digamma function."""
    out_data = np.asarray(_bd.log_gamma(a.data.astype(np.float64)))

    def bw(g):
        _accum(a, g * np.asarray(_bd.digamma(a.data.astype(np.float64))))

    return Var(out_data.astype(a.data.dtype).reshape(a.data.shape), _parents=(a,), _backward=bw)


def digamma(a: Var) -> Var:
    """psi elementwise; d/dx is the trigamma function."""
    out_data = np.asarray(_bd.digamma(a.data.astype(np.float64)))

    def bw(g):
        _accum(a, g * np.asarray(_bd.trigamma(a.data.astype(np.float64))))

    return Var(out_data.astype(a.data.dtype).reshape(a.data.shape), _parents=(a,), _backward=bw)


# ---------------------------------------------------------------------------
# shape ops


def reshape(a: Var, shape) -> Var:
    orig = a.data.shape

    def bw(g):
        _accum(a, g.reshape(orig))

    return Var(a.data.reshape(shape), _parents=(a,), _backward=bw)


def flatten(a: Var) -> Var:
    """(B, ...) -> (B, n)."""
    return reshape(a, (a.data.shape[0], -1))


def concat(vars_, axis: int = 1) -> Var:
    vars_ = list(vars_)
    out_data = np.concatenate([v.data for v in vars_], axis=axis)
    sizes = [v.data.shape[axis] for v in vars_]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for v, lo, hi in zip(vars_, offsets[:-1], offsets[1:]):
            if v.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                _accum(v, g[tuple(sl)])

    return Var(out_data, _parents=tuple(vars_), _backward=bw)


def slice_cols(a: Var, lo: int, hi: int) -> Var:
    """Column slice of a 2-D batch tensor."""

    def bw(g):
        full = np.zeros_like(a.data)
        full[:, lo:hi] = g
        _accum(a, full)

    return Var(a.data[:, lo:hi], _parents=(a,), _backward=bw)


def sum_(a: Var, axis=None) -> Var:
    out_data = a.data.sum(axis=axis, dtype=np.float64)

    def bw(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape))

    return Var(np.asarray(out_data), _parents=(a,), _backward=bw)


def mean_(a: Var, axis=None) -> Var:
    n = a.data.size if axis is None else a.data.shape[axis]
    out_data = a.data.mean(axis=axis, dtype=np.float64)

    def bw(g):
        if axis is None:
            _accum(a, np.broadcast_to(g / n, a.data.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g / n, axis), a.data.shape))

    return Var(np.asarray(out_data), _parents=(a,), _backward=bw)


def matmul(a: Var, b: Var) -> Var:
    out_data = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return Var(out_data, _parents=(a, b), _backward=bw)


def dropout(a: Var, rate: float, rng: np.random.Generator | None) -> Var:
    """Inverted dropout; identity when rng is None (evaluation mode)."""
    if rng is None or rate <= 0.0:
        return a
    keep = 1.0 - rate
    mask = (rng.random(a.data.shape) < keep).astype(a.data.dtype) / keep

    def bw(g):
        _accum(a, g * mask)

    return Var(a.data * mask, _parents=(a,), _backward=bw)


# ---------------------------------------------------------------------------
# convolution: im2col + BLAS matmul, chunked over the batch


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """(B,C,H,W) -> (B*Ho*Wo, C*kh*kw) column matrix plus output dims."""
    b, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    hp, wp = x.shape[2], x.shape[3]
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    s0, s1, s2, s3 = x.strides
    win = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, kh, kw, ho, wo),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    cols = np.ascontiguousarray(win.transpose(0, 4, 5, 1, 2, 3)).reshape(b * ho * wo, c * kh * kw)
    return cols, ho, wo


def _col2im(cols: np.ndarray, x_shape, kh: int, kw: int, stride: int, pad: int, ho: int, wo: int):
    """Scatter-add the column gradient back into input layout."""
    b, c, h, w = x_shape
    hp, wp = h + 2 * pad, w + 2 * pad
    dx = np.zeros((b, c, hp, wp), dtype=cols.dtype)
    win = cols.reshape(b, ho, wo, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += win[:, :, i, j]
    if pad:
        dx = dx[:, :, pad:-pad, pad:-pad]
    return dx


def conv2d(x: Var, w: Var, b: Var, stride: int = 1, pad: int = 0) -> Var:
    """2-D convolution, NCHW layout, square stride/padding.

    The column matrix is rebuilt in backward rather than stored, and the
    batch is processed in bounded-size chunks, so peak memory stays flat
    as batch size grows.  The inner product is a single BLAS matmul.
    """
    bsz, cin, h, wd = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ValueError(f"conv2d channel mismatch: input {cin}, weight {cin_w}")
    wmat = w.data.reshape(cout, -1).T  # (C*kh*kw, Cout)

    pad_h = h + 2 * pad
    ho = (pad_h - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    row_bytes = cin * kh * kw * x.data.dtype.itemsize
    chunk = max(1, _CONV_CHUNK_BYTES // max(1, ho * wo * row_bytes))

    out_data = np.empty((bsz, cout, ho, wo), dtype=x.data.dtype)
    for lo in range(0, bsz, chunk):
        hi = min(lo + chunk, bsz)
        cols, _, _ = _im2col(x.data[lo:hi], kh, kw, stride, pad)
        prod = cols @ wmat
        out_data[lo:hi] = prod.reshape(hi - lo, ho, wo, cout).transpose(0, 3, 1, 2)
    out_data += b.data.reshape(1, cout, 1, 1)

    def bw(g):
        if b.requires_grad:
            _accum(b, g.sum(axis=(0, 2, 3), dtype=np.float64).astype(b.data.dtype))
        need_x = x.requires_grad
        need_w = w.requires_grad
        dw = np.zeros((cin * kh * kw, cout), dtype=np.float64) if need_w else None
        dx = np.empty_like(x.data) if need_x else None
        for lo in range(0, bsz, chunk):
            hi = min(lo + chunk, bsz)
            gflat = np.ascontiguousarray(g[lo:hi].transpose(0, 2, 3, 1)).reshape(-1, cout)
            if need_w:
                cols, _, _ = _im2col(x.data[lo:hi], kh, kw, stride, pad)
                dw += (cols.T @ gflat).astype(np.float64)
            if need_x:
                dcols = gflat @ wmat.T
                dx[lo:hi] = _col2im(
                    dcols, (hi - lo, cin, h, wd), kh, kw, stride, pad, ho, wo
                )
        if need_w:
            _accum(w, dw.T.reshape(w.data.shape).astype(w.data.dtype))
        if need_x:
            _accum(x, dx)

    return Var(out_data, _parents=(x, w, b), _backward=bw)


# ---------------------------------------------------------------------------
# finite-difference gradient checking


def grad_check(build_loss, params, h: float = 1e-5, rel_tol: float = 1e-4,
               max_probes: int = 24, rng: np.random.Generator | None = None):
    """Compare reverse-mode gradients against central finite differences.

    build_loss must rebuild the full forward graph from scratch on every
    call.  Parameters are expected to be float64 for the comparison to be
    meaningful.  Returns the worst relative error seen.
    """
    rng = rng or np.random.default_rng(0)
    zero_grads(params)
    backward(build_loss())
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        gflat = (p.grad if p.grad is not None else np.zeros_like(p.data)).reshape(-1)
        n = flat.size
        idxs = range(n) if n <= max_probes else rng.choice(n, size=max_probes, replace=False)
        for i in idxs:
            keep = flat[i]
            flat[i] = keep + h
            up = float(build_loss().data)
            flat[i] = keep - h
            dn = float(build_loss().data)
            flat[i] = keep
            fd = (up - dn) / (2.0 * h)
            ad = float(gflat[i])
            err = abs(ad - fd) / max(abs(ad), abs(fd), 1e-6)
            worst = max(worst, err)
            if err >= rel_tol:
                raise AssertionError(
                    f"gradient check failed: analytic {ad:.8g} vs numeric {fd:.8g} "
                    f"(rel err {err:.3g}, param shape {p.data.shape}, index {i})"
                )
    return worst
