"""Reverse-mode autodiff over dense numpy arrays.

Every op records a closure that pushes gradients to its parents; backward()
walks the graph in reverse topological order. float32 by default, float64
available for finite-difference work.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import ContractError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (pure inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _unbroadcast(target_shape, g):
    # sum out broadcasted axes so g matches the parent's shape
    while g.ndim > len(target_shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(target_shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64) else np.float32
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    # ------------------------------------------------------------- basics
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        # g may alias a buffer shared with other parents; copy on first use
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True) if g.dtype != self.data.dtype else g.copy()
        else:
            self.grad += g

    def _accumulate_owned(self, g):
        # caller hands over a freshly allocated array and never reuses it
        if self.grad is None:
            self.grad = g if g.dtype == self.data.dtype else g.astype(self.data.dtype)
        else:
            self.grad += g

    @staticmethod
    def _wrap(other, like):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=like.data.dtype))

    def _make(self, data, parents, backward):
        out = Tensor(data, dtype=data.dtype)
        if _GRAD_ENABLED and any(p.requires_grad or p._parents for p in parents):
            out._parents = parents
            out._backward = backward
        return out

    # ------------------------------------------------------------ backward
    def backward(self):
        if self.data.size != 1:
            raise ContractError("backward() requires a scalar loss node")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # free interior state once consumed
                node._backward = None
                node._parents = ()

    # ----------------------------------------------------------- arithmetic
    def __add__(self, other):
        other = self._wrap(other, self)
        out_data = self.data + other.data

        def backward(g):
            self._accumulate(_unbroadcast(self.data.shape, g))
            other._accumulate(_unbroadcast(other.data.shape, g))

        return self._make(out_data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            self._accumulate_owned(-g)

        return self._make(-self.data, (self,), backward)

    def __sub__(self, other):
        other = self._wrap(other, self)
        out_data = self.data - other.data

        def backward(g):
            self._accumulate(_unbroadcast(self.data.shape, g))
            other._accumulate(_unbroadcast(other.data.shape, -g))

        return self._make(out_data, (self, other), backward)

    def __rsub__(self, other):
        return self._wrap(other, self) - self

    def __mul__(self, other):
        other = self._wrap(other, self)
        out_data = self.data * other.data

        def backward(g):
            self._accumulate_owned(_unbroadcast(self.data.shape, g * other.data))
            other._accumulate_owned(_unbroadcast(other.data.shape, g * self.data))

        return self._make(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise ContractError("power exponent must be a plain scalar")
        out_data = self.data ** p

        def backward(g):
            self._accumulate_owned(g * p * self.data ** (p - 1))

        return self._make(out_data, (self,), backward)

    def __matmul__(self, other):
        other = self._wrap(other, self)
        if self.data.shape[-1] != other.data.shape[-2]:
            raise ShapeError(
                f"matmul inner dimensions differ: {self.data.shape} @ {other.data.shape}"
            )
        out_data = self.data @ other.data

        def backward(g):
            ga = g @ np.swapaxes(other.data, -1, -2)
            gb = np.swapaxes(self.data, -1, -2) @ g
            self._accumulate_owned(_unbroadcast(self.data.shape, ga))
            other._accumulate_owned(_unbroadcast(other.data.shape, gb))

        return self._make(out_data, (self, other), backward)

    # --------------------------------------------------------------- shape
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old_shape = self.data.shape
        out_data = self.data.reshape(shape)

        def backward(g):
            self._accumulate(g.reshape(old_shape))

        return self._make(out_data, (self,), backward)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        out_data = self.data.transpose(axes)

        def backward(g):
            self._accumulate(g.transpose(inv))

        return self._make(out_data, (self,), backward)

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        in_shape = self.data.shape

        def backward(g):
            if axis is None:
                self._accumulate_owned(np.broadcast_to(g, in_shape).copy())
                return
            if not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate_owned(np.broadcast_to(g, in_shape).copy())

        return self._make(out_data, (self,), backward)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


# ------------------------------------------------------------------ fused ops


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather table[ids]; backward scatter-adds into the table."""
    ids = np.asarray(ids)
    out_data = table.data[ids]

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[-1]))
        table._accumulate_owned(gt)

    return table._make(out_data, (table,), backward)


def gelu(x: Tensor) -> Tensor:
    # tanh approximation, matches the usual transformer formulation
    # (plain-float constants keep float32 inputs from promoting under NEP 50)
    d = x.data
    c = float(np.sqrt(2.0 / np.pi))
    t = np.tanh(c * (d + 0.044715 * (d * d * d)))
    out_data = 0.5 * d * (1.0 + t)

    def backward(g):
        sech2 = 1.0 - t * t
        dinner = c * (1.0 + 0.134145 * (d * d))
        gx = 0.5 * (1.0 + t) + 0.5 * d * sech2 * dinner
        x._accumulate_owned(g * gx)

    return x._make(out_data, (x,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along `axis` (max subtraction)."""
    m = x.data.max(axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        x._accumulate_owned(s * (g - dot))

    return x._make(s.astype(x.data.dtype), (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Layer normalization over the last axis with learned gain/bias."""
    d = x.data
    mu = d.mean(axis=-1, keepdims=True)
    xc = d - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = (xhat * gain.data + bias.data).astype(d.dtype)
    n = d.shape[-1]

    def backward(g):
        bias._accumulate(_unbroadcast(bias.data.shape, g))
        gain._accumulate_owned(_unbroadcast(gain.data.shape, g * xhat))
        gx = g * gain.data
        # d xhat/dx composed with mean/var terms
        gxc = inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        x._accumulate_owned(gxc.astype(d.dtype))

    return x._make(out_data, (x, gain, bias), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate == 0."""
    if rate <= 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate {rate} outside [0, 1)")
    keep = (rng.random(x.data.shape) >= rate).astype(x.data.dtype)
    scale = 1.0 / (1.0 - rate)
    out_data = x.data * keep * scale

    def backward(g):
        x._accumulate_owned(g * keep * scale)

    return x._make(out_data.astype(x.data.dtype), (x,), backward)


def masked_cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of `targets` at positions where mask is True.

    logits: [..., V]; targets: integer ids broadcastable to logits[..., 0];
    mask: boolean, same shape as targets. Mean (not sum) over masked
    positions, so the loss scale does not depend on the mask ratio.
    """
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != targets.shape or mask.shape != logits.data.shape[:-1]:
        raise ShapeError(
            f"mask/targets shape {mask.shape}/{targets.shape} does not match logits {logits.data.shape[:-1]}"
        )
    n_masked = int(mask.sum())
    if n_masked == 0:
        raise ContractError("masked_cross_entropy requires a nonempty mask")

    rows = logits.data[mask]                      # [M, V]
    tgt = targets[mask]                           # [M]
    m = rows.max(axis=-1, keepdims=True)
    z = rows - m
    lse = np.log(np.exp(z).sum(axis=-1))          # [M]
    logp = z[np.arange(n_masked), tgt] - lse
    out_data = np.asarray(-logp.mean(), dtype=logits.data.dtype)

    def backward(g):
        p = np.exp(z - lse[:, None])              # softmax rows
        p[np.arange(n_masked), tgt] -= 1.0
        gl = np.zeros_like(logits.data)
        gl[mask] = p * (g / n_masked)
        logits._accumulate_owned(gl)

    return logits._make(out_data, (logits,), backward)


def matmul(a, b):
    """Plain matrix product of two 2-D arrays or Tensors."""
    ta = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=np.float32))
    tb = b if isinstance(b, Tensor) else Tensor(np.asarray(b, dtype=ta.data.dtype))
    if ta.ndim != 2 or tb.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {ta.shape} and {tb.shape}")
    return ta @ tb
