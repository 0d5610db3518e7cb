"""Dense tensors with reverse-mode automatic differentiation.

Float32 is the training dtype; float64 doubles as a verification mode for
gradient checking. Every operation is a pure function of its inputs and uses
a fixed reduction order (matrix products delegate to the platform GEMM, which
is deterministic for a fixed build and thread count), so two runs from the
same RngState produce bitwise-identical results on the same machine.

The tape is implicit: each operation returns a Tensor that remembers its
parents and a closure that scatters the incoming gradient back to them.
backward() topologically sorts that graph and runs the closures in reverse.
"""

from __future__ import annotations

import hashlib
import math

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    InputError,
    NonFiniteError,
    ParameterError,
    StateError,
)

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))
_MASK64 = (1 << 64) - 1

# tanh-approximate gelu: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3)))
GELU_SCALE = math.sqrt(2.0 / math.pi)
GELU_CUBIC = 0.044715


@dataclass
class RngState:
    """Counter-based random state: (seed, counter) determines every draw.

    Streams are backed by the Philox bit generator keyed on the pair, so a
    state restored from a checkpoint replays exactly the draws the original
    run would have made. ``draw`` hands out one generator per counter value;
    ``child`` derives an independent stream from a string tag so that
    unrelated consumers (init, per-stage data, splits) never share a stream.
    """

    seed: int
    counter: int = 0

    def generator(self) -> np.random.Generator:
        """Generator keyed on the current (seed, counter); does not advance."""
        key = ((self.seed & _MASK64) << 64) | (self.counter & _MASK64)
        return np.random.Generator(np.random.Philox(key=key))

    def draw(self) -> np.random.Generator:
        """Generator for the current counter; advances the counter by one."""
        gen = self.generator()
        self.counter += 1
        return gen

    def child(self, tag) -> "RngState":
        """Independent stream hashed from (seed, counter, tag)."""
        digest = hashlib.sha256(f"{self.seed}:{self.counter}:{tag}".encode()).digest()
        return RngState(int.from_bytes(digest[:8], "little"))


class Tensor:
    """Dense row-major array, optionally recording operations for backward().

    ``data`` is always float32 or float64 and C-contiguous. Gradients live in
    ``grad`` with the same dtype and shape. Tensors created inside operations
    carry ``_parents``/``_grad_fn``; leaves have neither.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is None:
            dtype = arr.dtype if arr.dtype in _FLOAT_DTYPES else np.float32
        if np.dtype(dtype) not in _FLOAT_DTYPES:
            raise ParameterError(f"tensor dtype must be float32 or float64, got {dtype}")
        self.data = np.ascontiguousarray(arr, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        flags = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flags})"


class Parameter:
    """Trainable tensor bundled with its gradient buffer and Adam moments.

    The gradient buffer is aliased as ``value.grad`` so backward() accumulates
    straight into it; ``zero_grad`` clears it in place between steps.
    """

    __slots__ = ("name", "value", "gradient", "first_moment", "second_moment")

    def __init__(self, value, name: str = ""):
        val = value if isinstance(value, Tensor) else Tensor(value)
        val.requires_grad = True
        self.name = name
        self.value = val
        self.gradient = Tensor(np.zeros_like(val.data))
        val.grad = self.gradient.data
        self.first_moment = Tensor(np.zeros_like(val.data))
        self.second_moment = Tensor(np.zeros_like(val.data))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.gradient.data[...] = 0

    def reset_moments(self) -> None:
        self.first_moment.data[...] = 0
        self.second_moment.data[...] = 0

    def __repr__(self) -> str:
        return f"Parameter({self.name or '<unnamed>'}, shape={self.shape})"


def _node(data: np.ndarray, parents: tuple[Tensor, ...], grad_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    # Match the companion dtype so python scalars never promote to float64.
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b) -> Tensor:
    """Elementwise sum with numpy broadcasting."""
    a = a if isinstance(a, Tensor) else _as_tensor(a, b)
    b = _as_tensor(b, a)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast {a.shape} + {b.shape}") from exc

    def grad_fn(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _node(data, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    """Elementwise product with numpy broadcasting; b may be a python scalar."""
    a = a if isinstance(a, Tensor) else _as_tensor(a, b)
    b = _as_tensor(b, a)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast {a.shape} * {b.shape}") from exc

    def grad_fn(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _node(data, (a, b), grad_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"inner extents differ: {a.shape} x {b.shape}")
    try:
        data = a.data @ b.data
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast batch axes: {a.shape} x {b.shape}") from exc

    def grad_fn(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _node(data, (a, b), grad_fn)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    """Permute axes; the gradient applies the inverse permutation."""
    if sorted(axes) != list(range(x.data.ndim)):
        raise DimensionError(f"axes {axes} is not a permutation for rank {x.data.ndim}")
    inverse = tuple(int(i) for i in np.argsort(axes))

    def grad_fn(g):
        _accumulate(x, np.ascontiguousarray(np.transpose(g, inverse)))

    return _node(np.transpose(x.data, axes), (x,), grad_fn)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Row-major reshape; total element count must be preserved."""
    try:
        data = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {x.shape} to {shape}") from exc

    def grad_fn(g):
        _accumulate(x, g.reshape(x.shape))

    return _node(data, (x,), grad_fn)


def embedding(weight: Tensor, ids) -> Tensor:
    """Row gather: out[..., :] = weight[ids[...], :].

    ids is an integer array, not a Tensor; gradients scatter-add into the
    table so repeated ids accumulate.
    """
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise InputError(f"embedding ids must be integers, got dtype {ids.dtype}")
    if weight.data.ndim != 2:
        raise DimensionError(f"embedding table must be rank 2, got {weight.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise IndexError(
            f"id out of range: [{ids.min()}, {ids.max()}] vs table of {weight.shape[0]} rows"
        )

    def grad_fn(g):
        if not weight.requires_grad:
            return
        gw = np.zeros_like(weight.data)
        np.add.at(gw, ids.reshape(-1), g.reshape(-1, weight.shape[1]))
        _accumulate(weight, gw)

    return _node(weight.data[ids], (weight,), grad_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean, unit variance, then scale and shift."""
    if eps <= 0:
        raise ParameterError(f"layer_norm eps must be positive, got {eps}")
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(
            f"gain/bias must have shape ({d},), got {gain.shape} and {bias.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    data = xhat * gain.data + bias.data

    def grad_fn(g):
        _accumulate(gain, (g * xhat).reshape(-1, d).sum(axis=0))
        _accumulate(bias, g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            mean_gx = gx.mean(axis=-1, keepdims=True)
            mean_gx_xhat = (gx * xhat).mean(axis=-1, keepdims=True)
            _accumulate(x, inv_std * (gx - mean_gx - xhat * mean_gx_xhat))

    return _node(data, (x, gain, bias), grad_fn)


def softmax_rows(x: Tensor) -> Tensor:
    """Shift-stable softmax along the last axis."""
    if x.data.ndim < 1:
        raise DimensionError("softmax_rows needs rank >= 1")
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def grad_fn(g):
        _accumulate(x, s * (g - (g * s).sum(axis=-1, keepdims=True)))

    return _node(s, (x,), grad_fn)


def gelu(x: Tensor) -> Tensor:
    """Tanh-approximate gelu."""
    xd = x.data
    u = GELU_SCALE * (xd + GELU_CUBIC * xd * xd * xd)
    t = np.tanh(u)
    data = 0.5 * xd * (1.0 + t)

    def grad_fn(g):
        du = GELU_SCALE * (1.0 + 3.0 * GELU_CUBIC * xd * xd)
        _accumulate(x, g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du))

    return _node(data, (x,), grad_fn)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood of integer targets under row softmax.

    logits has shape (..., V) with one target id per leading position. The
    log-sum-exp is max-shifted, so arbitrarily large logits stay finite.
    """
    t = np.asarray(targets)
    if not np.issubdtype(t.dtype, np.integer):
        raise InputError(f"targets must be integers, got dtype {t.dtype}")
    if logits.data.ndim < 2:
        raise DimensionError(f"logits must be rank >= 2, got {logits.shape}")
    if t.shape != logits.shape[:-1]:
        raise DimensionError(
            f"need one target per logits row: targets {t.shape} vs logits {logits.shape}"
        )
    if t.size == 0:
        raise InputError("cross_entropy over zero rows")
    vocab = logits.shape[-1]
    if t.min() < 0 or t.max() >= vocab:
        raise IndexError(f"target id out of range: [{t.min()}, {t.max()}] vs {vocab} classes")

    flat = logits.data.reshape(-1, vocab)
    ids = t.reshape(-1)
    n = flat.shape[0]
    z = flat - flat.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    nll = lse - z[np.arange(n), ids]
    data = np.asarray(nll.mean(), dtype=logits.data.dtype)

    def grad_fn(g):
        if not logits.requires_grad:
            return
        probs = np.exp(z - lse[:, None])
        probs[np.arange(n), ids] -= 1.0
        probs *= g.reshape(()) / n
        _accumulate(logits, probs.reshape(logits.shape))

    return _node(data, (logits,), grad_fn)


def reduce_sum(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    data = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def grad_fn(g):
        _accumulate(x, np.broadcast_to(g, x.shape))

    return _node(data, (x,), grad_fn)


def backward(loss: Tensor) -> None:
    """Reverse-mode gradient pass from a scalar loss over the recorded tape.

    Gradients accumulate into ``.grad`` of every tensor with requires_grad;
    Parameter buffers alias those arrays, so they are filled as a side effect.
    """
    if loss.size != 1:
        raise ParameterError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._grad_fn is None and not loss._parents:
        raise StateError("backward called on a tensor with no recorded forward computation")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    if loss.grad is None:
        loss.grad = np.ones_like(loss.data)
    else:
        loss.grad += np.ones_like(loss.data)
    for node in reversed(order):
        if node._grad_fn is not None and node.grad is not None:
            node._grad_fn(node.grad)


@dataclass(frozen=True)
class AdamHyper:
    """Adam hyperparameters; weight decay is decoupled and off by default."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    weight_decay: float = 0.0


def adam_step(params: list[Parameter], grads, hyper: AdamHyper, t: int) -> None:
    """Bias-corrected adaptive-moment update, in place, in float32.

    t counts from 1 within a schedule. grads may be None to consume the
    parameters' own gradient buffers. Any non-finite gradient entry aborts
    with diagnostics before touching the moments.
    """
    if t < 1:
        raise ParameterError(f"adam step index counts from 1, got {t}")
    if grads is None:
        grads = [p.gradient for p in params]
    if len(grads) != len(params):
        raise DimensionError(f"{len(params)} parameters but {len(grads)} gradients")

    c1 = 1.0 - hyper.beta1**t
    c2 = 1.0 - hyper.beta2**t
    for p, g in zip(params, grads):
        garr = g.data if isinstance(g, Tensor) else np.asarray(g)
        if garr.shape != p.value.shape:
            raise DimensionError(
                f"gradient shape {garr.shape} does not match {p.name or 'parameter'} {p.value.shape}"
            )
        if not np.all(np.isfinite(garr)):
            bad = int(np.count_nonzero(~np.isfinite(garr)))
            raise NonFiniteError(
                f"non-finite gradient in {p.name or 'parameter'} at step {t}: "
                f"{bad}/{garr.size} entries"
            )
        m = p.first_moment.data
        v = p.second_moment.data
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * garr
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * (garr * garr)
        if hyper.weight_decay:
            p.value.data -= (hyper.lr * hyper.weight_decay) * p.value.data
        p.value.data -= hyper.lr * ((m / c1) / (np.sqrt(v / c2) + hyper.eps))


def finite_difference_check(op, point, h: float = 1e-5) -> float:
    """Max relative error between backward() and central differences.

    op maps a Tensor to a scalar Tensor. The check always runs in float64;
    relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-4),
    the floor guarding coordinates where both sides are near zero.
    """
    if h <= 0:
        raise ParameterError(f"step size must be positive, got {h}")
    base = np.asarray(point.data if isinstance(point, Tensor) else point, dtype=np.float64)
    x = Tensor(base.copy(), requires_grad=True, dtype=np.float64)
    out = op(x)
    if not isinstance(out, Tensor) or out.size != 1:
        raise ParameterError("op must return a scalar tensor")
    backward(out)
    analytic = x.grad.reshape(-1).copy()

    flat = base.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + h
        f_plus = op(Tensor(bumped.reshape(base.shape), dtype=np.float64)).item()
        bumped[i] = flat[i] - h
        f_minus = op(Tensor(bumped.reshape(base.shape), dtype=np.float64)).item()
        numeric[i] = (f_plus - f_minus) / (2.0 * h)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
    return float((np.abs(analytic - numeric) / denom).max())
