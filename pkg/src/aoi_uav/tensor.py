"""Dense float64 tensors with reverse-mode autodiff and an Adam optimizer.

A ``Tape`` records operations executed while it is active; ``Tape.backward``
replays the records in reverse to accumulate gradients into every tensor
created with ``requires_grad=True``.  With no tape active the same ops run as
plain numpy computations, so rollout inference and gradient replay share one
code path.  Tensors and tapes are confined to a single thread; gradient-free
evaluation is safe from any number of threads.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

Array = np.ndarray

_TAPE_STACK: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def item(self) -> float:
        return self.data.item()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; all arithmetic routes through the module-level ops so
    # that tape recording stays in one place.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)


class Tape:
    """Ordered record of differentiable operations.

    Execution order is already topological, so the backward pass is a single
    reverse sweep that visits each record exactly once.
    """

    def __init__(self):
        self.records: list[tuple[Tensor, Callable[[Array], None]]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(tensor) into every requires_grad tensor.

        ``loss`` must be a scalar produced under this tape.  Gradients add
        onto whatever is already in ``.grad``; callers zero between steps.
        """
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        loss.accumulate_grad(np.ones_like(loss.data))
        for out, backward_fn in reversed(self.records):
            if out.grad is not None:
                backward_fn(out.grad)


def _active_tape() -> "Tape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out: Tensor, inputs: Sequence[Tensor], backward_fn: Callable[[Array], None]) -> Tensor:
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.records.append((out, backward_fn))
    return out


def _unbroadcast(g: Array, shape: tuple) -> Array:
    """Reduce a gradient back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# Forward ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _record(out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.data.shape))

    return _record(out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _record(out, (a, b), backward)


def matmul(a, b) -> Tensor:
    """Matrix product covering the (m,n)@(n,), (m,n)@(n,k), (n,)@(n,k) and
    (n,)@(n,) cases the networks need."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data @ b.data)

    def backward(g: Array) -> None:
        ad, bd = a.data, b.data
        if a.requires_grad:
            if ad.ndim == 2 and bd.ndim == 1:
                ga = np.outer(g, bd)
            elif ad.ndim == 1 and bd.ndim == 2:
                ga = bd @ g
            elif ad.ndim == 1 and bd.ndim == 1:
                ga = g * bd
            else:
                ga = g @ bd.T
            a.accumulate_grad(ga)
        if b.requires_grad:
            if ad.ndim == 2 and bd.ndim == 1:
                gb = ad.T @ g
            elif ad.ndim == 1 and bd.ndim == 2:
                gb = np.outer(ad, g)
            elif ad.ndim == 1 and bd.ndim == 1:
                gb = g * ad
            else:
                gb = ad.T @ g
            b.accumulate_grad(gb)

    return _record(out, (a, b), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g: Array) -> None:
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t.accumulate_grad(g[tuple(idx)])

    return _record(out, tuple(tensors), backward)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack scalars or equal-shape tensors along a new leading axis."""
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.stack([t.data for t in tensors]))

    def backward(g: Array) -> None:
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t.accumulate_grad(g[i])

    return _record(out, tuple(tensors), backward)


def take(a: Tensor, key) -> Tensor:
    """Slice/index a tensor; supports basic and advanced numpy indexing."""
    a = _as_tensor(a)
    out = Tensor(a.data[key])

    def backward(g: Array) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.data)
            np.add.at(full, key, g)
            a.accumulate_grad(full)

    return _record(out, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    # Split by sign to avoid overflow in exp.
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                        np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(out_data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(g * out_data * (1.0 - out_data))

    return _record(out, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out_data = np.tanh(a.data)
    out = Tensor(out_data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(g * (1.0 - out_data * out_data))

    return _record(out, (a,), backward)


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0))

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(g * (a.data > 0.0))

    return _record(out, (a,), backward)


def exp(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out_data = np.exp(a.data)
    out = Tensor(out_data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(g * out_data)

    return _record(out, (a,), backward)


def log(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0.0):
        raise ValueError("log requires strictly positive inputs")
    out = Tensor(np.log(a.data))

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(g / a.data)

    return _record(out, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(out_data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            a.accumulate_grad(out_data * (g - inner))

    return _record(out, (a,), backward)


def sum_(a: Tensor, axis=None) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.sum(axis=axis))

    def backward(g: Array) -> None:
        if a.requires_grad:
            if axis is None:
                a.accumulate_grad(np.broadcast_to(g, a.data.shape).copy())
            else:
                a.accumulate_grad(np.broadcast_to(
                    np.expand_dims(g, axis), a.data.shape).copy())

    return _record(out, (a,), backward)


def mean(a: Tensor, axis=None) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.mean(axis=axis))
    count = a.data.size if axis is None else a.data.shape[axis]

    def backward(g: Array) -> None:
        if a.requires_grad:
            if axis is None:
                a.accumulate_grad(np.broadcast_to(g / count, a.data.shape).copy())
            else:
                a.accumulate_grad(np.broadcast_to(
                    np.expand_dims(g / count, axis), a.data.shape).copy())

    return _record(out, (a,), backward)


def clip_by_value(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only where the input was inside [lo, hi]."""
    a = _as_tensor(a)
    out = Tensor(np.clip(a.data, lo, hi))
    inside = (a.data >= lo) & (a.data <= hi)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(g * inside)

    return _record(out, (a,), backward)


def transpose(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.T)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(g.T)

    return _record(out, (a,), backward)


def minimum(a, b) -> Tensor:
    """Elementwise min; gradient routes to the smaller input (ties to first)."""
    a, b = _as_tensor(a), _as_tensor(b)
    pick_a = a.data <= b.data
    out = Tensor(np.where(pick_a, a.data, b.data))

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * pick_a, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * ~pick_a, b.data.shape))

    return _record(out, (a, b), backward)


# ---------------------------------------------------------------------------
# Parameter initialization and optimizer
# ---------------------------------------------------------------------------

def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def global_norm(grads: Iterable[Array]) -> float:
    return math.sqrt(sum(float((g * g).sum()) for g in grads))


class Adam:
    """Adaptive-moment optimizer with bias correction and global-norm clipping."""

    def __init__(self, params: dict[str, Tensor], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 clip_norm: float = 0.5):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data))
                 for k, p in self.params.items()}
        if self.clip_norm > 0.0:
            norm = global_norm(grads.values())
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
                grads = {k: g * scale for k, g in grads.items()}
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
