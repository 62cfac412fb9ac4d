"""Small reverse-mode differentiation engine over numpy arrays.

Only the operations the SANP network needs are provided. Every operation
records its parents and a closure that maps the upstream gradient to
gradients of the inputs; :func:`backward` walks the recorded graph once in
reverse topological order.

Batched inputs are supported through leading dimensions: ``matmul`` accepts
``(..., m, k) @ (k, n)`` and ``(b, m, k) @ (b, k, n)``; everything else is
elementwise or acts on the last axis. There is no general broadcasting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "NumericError",
    "DomainError",
    "matmul",
    "transpose",
    "add",
    "sub",
    "mul",
    "scale",
    "add_scalar",
    "add_bias",
    "relu",
    "softplus",
    "softmax_rows",
    "affine",
    "reshape",
    "column",
    "sum_all",
    "mean_all",
    "gaussian_nll",
    "backward",
    "topological_order",
    "AdamState",
    "adam_init",
    "adam_step",
    "clip_grad_norm",
    "numerical_grad",
    "grad_check",
]

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class NumericError(ValueError):
    """Input contains NaN where a finite value is required."""


class DomainError(ValueError):
    """Input lies outside the mathematical domain of an operation."""


class Tensor:
    """Dense real array that can take part in reverse-mode differentiation.

    Args:
        data: array-like values. The dtype is kept when it is already a
            floating type, otherwise converted to float32.
        requires_grad: accumulate a gradient for this tensor in
            :func:`backward`.
        name: optional label, used for parameters.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Tuple[Tensor, ...], fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = fn
    return out


# ---------------------------------------------------------------- linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes.

    ``a`` may carry leading batch axes; ``b`` is either a 2-D matrix shared by
    the batch or has exactly the same leading axes as ``a``.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs matrices, got shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    if b.ndim > 2 and b.shape[:-2] != a.shape[:-2]:
        raise ShapeError(f"matmul batch dimensions disagree: {a.shape} @ {b.shape}")
    if a.ndim == 2 and b.ndim > 2:
        raise ShapeError(f"matmul cannot broadcast a matrix over a batch: {a.shape} @ {b.shape}")
    av, bv = a.data, b.data
    shared = bv.ndim == 2 and av.ndim > 2

    def fn(g):
        ga = gb = None
        if shared:
            g2 = g.reshape(-1, g.shape[-1])
            if a.requires_grad:
                ga = (g2 @ bv.T).reshape(av.shape)
            if b.requires_grad:
                gb = av.reshape(-1, av.shape[-1]).T @ g2
            return ga, gb
        if a.requires_grad:
            ga = g @ np.swapaxes(bv, -1, -2)
        if b.requires_grad:
            gb = np.swapaxes(av, -1, -2) @ g
        return ga, gb

    if shared:
        # one large GEMM instead of a loop over the batch
        out = (av.reshape(-1, av.shape[-1]) @ bv).reshape(av.shape[:-1] + (bv.shape[-1],))
        return _make(out, (a, b), fn)
    return _make(av @ bv, (a, b), fn)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    a = _as_tensor(a)

    def fn(g):
        return (np.swapaxes(g, -1, -2),)

    return _make(np.swapaxes(a.data, -1, -2), (a,), fn)


def affine(x: Tensor, W: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """``x @ W`` plus an optional bias added to every row."""
    out = matmul(x, W)
    if b is not None:
        out = add_bias(out, b)
    return out


# ---------------------------------------------------------------- elementwise


def _check_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} needs equal shapes, got {a.shape} and {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same("add", a, b)
    return _make(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same("sub", a, b)
    return _make(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same("mul", a, b)
    av, bv = a.data, b.data
    return _make(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a constant."""
    a = _as_tensor(a)
    c = a.dtype.type(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def add_scalar(a: Tensor, c: float) -> Tensor:
    a = _as_tensor(a)
    return _make(a.data + a.dtype.type(c), (a,), lambda g: (g,))


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a vector to every row (the last axis) of ``x``."""
    x, b = _as_tensor(x), _as_tensor(b)
    if b.ndim != 1 or b.shape[0] != x.shape[-1]:
        raise ShapeError(f"bias of shape {b.shape} does not match rows of {x.shape}")

    def fn(g):
        return g, g.reshape(-1, g.shape[-1]).sum(axis=0)

    return _make(x.data + b.data, (x, b), fn)


def relu(a: Tensor) -> Tensor:
    """Elementwise ``max(0, x)``; the subgradient at 0 is 0."""
    a = _as_tensor(a)
    out = np.maximum(a.data, a.dtype.type(0))
    return _make(out, (a,), lambda g: (g * (out > 0),))


def softplus(a: Tensor) -> Tensor:
    """Numerically stable ``log(1 + exp(x))``."""
    a = _as_tensor(a)
    x = a.data
    out = np.logaddexp(x.dtype.type(0), x)
    # d/dx softplus = sigmoid(x) = exp(x - softplus(x))
    sig = np.exp(x - out)
    return _make(out, (a,), lambda g: (g * sig,))


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax over the last axis, stabilised by subtracting the row maximum."""
    a = _as_tensor(a)
    if np.isnan(a.data).any():
        raise NumericError("softmax_rows received NaN input")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def fn(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _make(s, (a,), fn)


# ---------------------------------------------------------------- shape helpers


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def column(a: Tensor, j: int) -> Tensor:
    """Select index ``j`` of the last axis, dropping that axis."""
    a = _as_tensor(a)
    shape, dtype = a.shape, a.dtype

    def fn(g):
        full = np.zeros(shape, dtype=dtype)
        full[..., j] = g
        return (full,)

    return _make(a.data[..., j], (a,), fn)


def sum_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    shape, dtype = a.shape, a.dtype
    return _make(np.asarray(a.data.sum(), dtype=dtype), (a,), lambda g: (np.full(shape, g, dtype=dtype),))


def mean_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size
    return scale(sum_all(a), 1.0 / n)


# ---------------------------------------------------------------- likelihood


def gaussian_nll(y: Tensor, mu: Tensor, sigma: Tensor) -> Tensor:
    """Mean Gaussian negative log-density (natural log) over all points.

    ``mean(log sigma + 0.5 log(2 pi) + (y - mu)^2 / (2 sigma^2))``
    """
    y, mu, sigma = _as_tensor(y), _as_tensor(mu), _as_tensor(sigma)
    _check_same("gaussian_nll", y, mu)
    _check_same("gaussian_nll", y, sigma)
    sv = sigma.data
    if not np.all(sv > 0):
        raise DomainError("gaussian_nll requires strictly positive sigma")
    n = y.data.size
    dtype = mu.dtype
    resid = y.data - mu.data
    inv_var = 1.0 / (sv * sv)
    per_point = np.log(sv) + HALF_LOG_2PI + 0.5 * resid * resid * inv_var
    value = np.asarray(per_point.sum() / n, dtype=dtype)

    def fn(g):
        c = g / n
        g_mu = c * (-resid * inv_var)
        g_sigma = c * (1.0 / sv - resid * resid * inv_var / sv)
        g_y = -g_mu
        return g_y.astype(y.dtype), g_mu.astype(dtype), g_sigma.astype(sigma.dtype)

    return _make(value, (y, mu, sigma), fn)


# ---------------------------------------------------------------- backward


def topological_order(root: Tensor) -> List[Tensor]:
    """Nodes reachable from ``root`` that need gradients, inputs first."""
    order: List[Tensor] = []
    seen = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every leaf with requires_grad.

    Raises:
        ShapeError: ``loss`` is not a scalar.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# ---------------------------------------------------------------- optimiser


@dataclass
class AdamState:
    """Adam moments and hyperparameters."""

    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def copy(self) -> "AdamState":
        return AdamState(
            {k: a.copy() for k, a in self.m.items()},
            {k: a.copy() for k, a in self.v.items()},
            self.step,
            self.lr,
            self.beta1,
            self.beta2,
            self.eps,
        )


def adam_init(params: Mapping[str, np.ndarray], lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    m = {k: np.zeros_like(p) for k, p in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    return AdamState(m, v, 0, lr, beta1, beta2, eps)


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              state: AdamState) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    Inputs are left untouched; new parameter arrays and a new state are
    returned.
    """
    new = state.copy()
    new.step = state.step + 1
    t = new.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    out: Dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape or new.m[name].shape != p.shape:
            raise ShapeError(f"adam_step: parameter {name!r} has shape {p.shape}, gradient {g.shape}")
        m = b1 * new.m[name] + (1.0 - b1) * g
        v = b2 * new.v[name] + (1.0 - b2) * g * g
        new.m[name] = m.astype(p.dtype, copy=False)
        new.v[name] = v.astype(p.dtype, copy=False)
        m_hat = m / corr1
        v_hat = v / corr2
        out[name] = (p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype, copy=False)
    return out, new


def clip_grad_norm(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """Rescale ``grads`` in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    total = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        f = max_norm / (total + 1e-12)
        for k in grads:
            grads[k] = grads[k] * grads[k].dtype.type(f)
    return total


# ---------------------------------------------------------------- gradient checking


def numerical_grad(f: Callable[[], Tensor], x: Tensor, step: float = 1e-4) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f()`` with respect to ``x``.

    ``x.data`` is perturbed in place and restored.
    """
    flat = x.data.reshape(-1)
    out = np.zeros(flat.shape, dtype=np.float64)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f().item()
        flat[i] = orig - step
        fm = f().item()
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * step)
    return out.reshape(x.shape)


def grad_check(f: Callable[[], Tensor], inputs: Iterable[Tensor], step: float = 1e-4) -> float:
    """Largest relative error between reverse-mode and finite-difference gradients.

    The relative error of each entry is ``|a - n| / max(1, |a|, |n|)`` so that
    tiny gradients are compared absolutely. Use float64 inputs.
    """
    inputs = list(inputs)
    for t in inputs:
        t.zero_grad()
    backward(f())
    worst = 0.0
    for t in inputs:
        analytic = np.zeros(t.shape) if t.grad is None else t.grad.astype(np.float64)
        numeric = numerical_grad(f, t, step)
        denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    return worst
