"""Dense float64 tensors with reverse-mode automatic differentiation.

Just enough of an autograd engine for the models in this package: matrix
products, a fixed menu of elementwise functions, concatenation, row
gather/scatter for graph aggregation, and a tape-based backward pass.
Every op validates that its output is finite; NaN or Inf anywhere is
treated as an error state, not a value.

Tensors are immutable once created by an op. Leaf tensors (constructed
directly with ``requires_grad=True``) accumulate gradients in ``.grad``
across backward calls until the caller resets them.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ContractError, DimensionError, DomainError, NumericError

# exp() clamps its argument to this range; the derivative is zero outside it
EXP_CLAMP = 30.0

_seq_counter = itertools.count()

_erf_vec = np.vectorize(math.erf, otypes=[np.float64])


class Tensor:
    """A dense float64 array participating in a reverse-mode gradient graph."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn", "_seq")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor contains non-finite values")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._grad_fn = None
        self._seq = next(_seq_counter)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def is_leaf(self) -> bool:
        return self._grad_fn is None

    def backward(self):
        backward(self)

    def sum(self):
        return sum_(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars and arrays are wrapped as constants
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

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data, parents, grad_fn) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(parents)
        out._grad_fn = grad_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _result(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        quotient = a.data / b.data
    return _result(
        quotient,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 1-D and 2-D operands.

    Supports (m,k)@(k,n), (k,)@(k,n), (m,k)@(k,), and (k,)@(k,). Gradients
    follow dA = dC B^T and dB = A^T dC, specialised per vector case.
    """
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise DimensionError(
            f"matmul supports 1-D/2-D operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul inner dimensions differ: {a.data.shape} @ {b.data.shape}"
        )

    ad, bd = a.data, b.data

    if a.ndim == 2 and b.ndim == 2:
        grad_fn = lambda g: (g @ bd.T, ad.T @ g)
    elif a.ndim == 1 and b.ndim == 2:
        grad_fn = lambda g: (bd @ g, np.outer(ad, g))
    elif a.ndim == 2 and b.ndim == 1:
        grad_fn = lambda g: (np.outer(g, bd), ad.T @ g)
    else:  # inner product
        grad_fn = lambda g: (g * bd, g * ad)

    return _result(ad @ bd, (a, b), grad_fn)


def concat(a: Tensor, b: Tensor, axis: int = 0) -> Tensor:
    """Concatenate two tensors along ``axis``; backward splits the gradient."""
    if a.ndim != b.ndim:
        raise DimensionError(f"concat rank mismatch: {a.data.shape} vs {b.data.shape}")
    for i, (da, db) in enumerate(zip(a.data.shape, b.data.shape)):
        if i != (axis % a.ndim) and da != db:
            raise DimensionError(
                f"concat shapes must agree off axis {axis}: {a.data.shape} vs {b.data.shape}"
            )
    split = a.data.shape[axis % a.ndim]

    def grad_fn(g):
        ga, gb = np.split(g, [split], axis=axis)
        return ga, gb

    return _result(np.concatenate([a.data, b.data], axis=axis), (a, b), grad_fn)


def sum_(a: Tensor, axis=None) -> Tensor:
    shape = a.data.shape

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _result(a.data.sum(axis=axis), (a,), grad_fn)


def mean(a: Tensor, axis=None) -> Tensor:
    shape = a.data.shape
    count = a.data.size if axis is None else shape[axis]

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g / count, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g / count, axis), shape).copy(),)

    return _result(a.data.mean(axis=axis), (a,), grad_fn)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


# ---------------------------------------------------------------------------
# elementwise nonlinearities


def _sigmoid_values(x: np.ndarray) -> np.ndarray:
    # two-branch form avoids overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid_values(a.data)
    return _result(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _result(t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)) via logaddexp, exact and overflow-safe."""
    s = _sigmoid_values(a.data)
    return _result(np.logaddexp(0.0, a.data), (a,), lambda g: (g * s,))


def exp(a: Tensor) -> Tensor:
    """exp with the argument clamped to +-EXP_CLAMP; derivative is zero
    where the clamp is active, consistent with the constant output there."""
    inside = np.abs(a.data) <= EXP_CLAMP
    e = np.exp(np.clip(a.data, -EXP_CLAMP, EXP_CLAMP))
    return _result(e, (a,), lambda g: (g * e * inside,))


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise DomainError(f"log requires strictly positive input, min={a.data.min()}")
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def log1p(a: Tensor) -> Tensor:
    if np.any(a.data <= -1):
        raise DomainError(f"log1p requires input > -1, min={a.data.min()}")
    return _result(np.log1p(a.data), (a,), lambda g: (g / (1.0 + a.data),))


def abs_(a: Tensor) -> Tensor:
    return _result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.data < 0):
        raise DomainError(f"sqrt requires non-negative input, min={a.data.min()}")
    r = np.sqrt(a.data)
    return _result(r, (a,), lambda g: (g / (2.0 * r),))


def erf(a: Tensor) -> Tensor:
    coeff = 2.0 / math.sqrt(math.pi)
    return _result(
        _erf_vec(a.data), (a,), lambda g: (g * coeff * np.exp(-a.data * a.data),)
    )


_ELEMENTWISE = {
    "add": (2, add),
    "mul": (2, mul),
    "sigmoid": (1, sigmoid),
    "tanh": (1, tanh),
    "relu": (1, relu),
    "softplus": (1, softplus),
    "exp": (1, exp),
    "log": (1, log),
}


def elementwise(kind: str, *inputs: Tensor) -> Tensor:
    """Dispatch an elementwise op by name.

    Binary kinds require operands of equal shape; use the underlying
    functions directly when broadcasting is intended.
    """
    if kind not in _ELEMENTWISE:
        raise ContractError(f"unknown elementwise kind {kind!r}")
    arity, fn = _ELEMENTWISE[kind]
    if len(inputs) != arity:
        raise ContractError(f"{kind} expects {arity} inputs, got {len(inputs)}")
    if arity == 2 and inputs[0].data.shape != inputs[1].data.shape:
        raise DimensionError(
            f"{kind} requires equal shapes: {inputs[0].data.shape} vs {inputs[1].data.shape}"
        )
    return fn(*inputs)


# ---------------------------------------------------------------------------
# row gather / scatter (graph aggregation primitives)


def gather_rows(a: Tensor, index) -> Tensor:
    """Select rows of a 2-D tensor; backward scatter-adds into the source."""
    if a.ndim != 2:
        raise DimensionError(f"gather_rows expects a 2-D tensor, got {a.data.shape}")
    idx = np.asarray(index, dtype=np.intp)

    def grad_fn(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _result(a.data[idx], (a,), grad_fn)


def scatter_sum(a: Tensor, take, put, num_rows: int, weights=None) -> Tensor:
    """Weighted segment sum: out[put[e]] += weights[e] * a[take[e]].

    ``take`` and ``put`` are equal-length integer arrays indexing rows of
    ``a`` and of the output. Weights are constants (not differentiated).
    """
    if a.ndim != 2:
        raise DimensionError(f"scatter_sum expects a 2-D tensor, got {a.data.shape}")
    take = np.asarray(take, dtype=np.intp)
    put = np.asarray(put, dtype=np.intp)
    if take.shape != put.shape:
        raise DimensionError(f"index lengths differ: {take.shape} vs {put.shape}")
    w = None if weights is None else np.asarray(weights, dtype=np.float64)

    rows = a.data[take]
    if w is not None:
        rows = rows * w[:, None]
    out = np.zeros((num_rows, a.data.shape[1]))
    np.add.at(out, put, rows)

    def grad_fn(g):
        pulled = g[put]
        if w is not None:
            pulled = pulled * w[:, None]
        ga = np.zeros_like(a.data)
        np.add.at(ga, take, pulled)
        return (ga,)

    return _result(out, (a,), grad_fn)


# ---------------------------------------------------------------------------
# backward pass


class GradientTape:
    """Execution-ordered record of the ops that lead to one output tensor.

    Tensors are numbered at creation, so sorting the reachable subgraph by
    that sequence number recovers execution order, which is a topological
    order (inputs are always created before the op that consumes them).
    """

    def __init__(self, entries):
        self.entries = entries

    @classmethod
    def record(cls, output: Tensor) -> "GradientTape":
        seen = set()
        nodes = []
        stack = [output]
        while stack:
            node = stack.pop()
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            nodes.append(node)
            stack.extend(node._parents)
        nodes.sort(key=lambda t: t._seq)
        return cls(nodes)


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every requires_grad leaf reachable from ``loss``.

    Gradients accumulate into leaves across calls; intermediate nodes use
    per-call buffers, so repeated backward passes through a shared forward
    subgraph do not contaminate each other.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    tape = GradientTape.record(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.entries):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._grad_fn is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(f, x: Tensor, eps: float = 1e-5) -> float:
    """Compare the analytic gradient of ``f`` at ``x`` to central differences.

    Returns the max over coordinates of
    |analytic - cd| / max(|analytic|, |cd|, 1e-8).
    ``f`` must map a Tensor to a scalar Tensor and be deterministic.
    """
    x0 = Tensor(np.array(x.data, copy=True), requires_grad=True)
    loss = f(x0)
    if loss.data.size != 1:
        raise ContractError("grad_check requires f to return a scalar")
    backward(loss)
    analytic = x0.grad if x0.grad is not None else np.zeros_like(x0.data)

    numeric = np.zeros_like(x0.data)
    flat = x0.data.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = float(f(x0).data)
        flat[i] = orig - eps
        f_minus = float(f(x0).data)
        flat[i] = orig
        num_flat[i] = (f_plus - f_minus) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check_params(f, params, eps: float = 1e-5) -> float:
    """Finite-difference check of a zero-argument loss against many leaves.

    ``f()`` recomputes the loss from the current ``.data`` of every tensor
    in ``params``; perturbations are applied in place and restored. Returns
    the worst relative error across all coordinates of all parameters.
    """
    zero_grads(params)
    loss = f()
    if loss.data.size != 1:
        raise ContractError("grad_check_params requires f to return a scalar")
    backward(loss)

    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        a_flat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(f().data)
            flat[i] = orig - eps
            f_minus = float(f().data)
            flat[i] = orig
            cd = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(a_flat[i]), abs(cd), 1e-8)
            worst = max(worst, abs(a_flat[i] - cd) / denom)
    return worst


# ---------------------------------------------------------------------------
# registry of differentiable ops, used by the gradient test suite and the CLI

def _check_unary(fn, sampler):
    def run(rng):
        x = Tensor(sampler(rng))
        return grad_check(lambda t: sum_(fn(t)), x)

    return run


def _check_binary(fn, sampler_a, sampler_b):
    def run(rng):
        b = Tensor(sampler_b(rng))
        x = Tensor(sampler_a(rng))
        return grad_check(lambda t: sum_(fn(t, b)), x)

    return run


def _std(shape):
    return lambda rng: rng.standard_normal(shape)


def _away_from(shape, gap=0.25):
    def sample(rng):
        x = rng.standard_normal(shape)
        return np.where(np.abs(x) < gap, gap + np.abs(x), x)

    return sample


def _positive(shape, lo=0.5, hi=2.0):
    return lambda rng: rng.uniform(lo, hi, shape)


def _check_matmul(shape_a, shape_b):
    def run(rng):
        b = Tensor(rng.standard_normal(shape_b))
        x = Tensor(rng.standard_normal(shape_a))
        return grad_check(lambda t: sum_(matmul(t, b)), x)

    return run


def _check_concat(rng):
    b = Tensor(rng.standard_normal((3, 2)))
    x = Tensor(rng.standard_normal((3, 4)))
    return grad_check(lambda t: sum_(concat(t, b, axis=1)), x)


def _check_gather(rng):
    idx = rng.integers(0, 4, size=6)
    x = Tensor(rng.standard_normal((4, 3)))
    return grad_check(lambda t: sum_(gather_rows(t, idx)), x)


def _check_scatter(rng):
    take = rng.integers(0, 5, size=8)
    put = rng.integers(0, 3, size=8)
    w = rng.uniform(0.2, 1.0, size=8)
    x = Tensor(rng.standard_normal((5, 3)))
    return grad_check(lambda t: sum_(scatter_sum(t, take, put, 3, weights=w)), x)


OP_CHECKS = {
    "add": _check_binary(add, _std((3, 4)), _std((3, 4))),
    "sub": _check_binary(sub, _std((3, 4)), _std((3, 4))),
    "mul": _check_binary(mul, _std((3, 4)), _std((3, 4))),
    "div": _check_binary(div, _std((3, 4)), _away_from((3, 4), 0.5)),
    "neg": _check_unary(neg, _std((4,))),
    "matmul_mm": _check_matmul((3, 4), (4, 2)),
    "matmul_vm": _check_matmul((4,), (4, 2)),
    "matmul_mv": _check_matmul((3, 4), (4,)),
    "matmul_vv": _check_matmul((4,), (4,)),
    "concat": _check_concat,
    "sum": _check_unary(lambda t: sum_(t, axis=0), _std((3, 4))),
    "mean": _check_unary(lambda t: mean(t, axis=1), _std((3, 4))),
    "reshape": _check_unary(lambda t: reshape(t, (2, 6)), _std((3, 4))),
    "sigmoid": _check_unary(sigmoid, _std((3, 4))),
    "tanh": _check_unary(tanh, _std((3, 4))),
    "relu": _check_unary(relu, _away_from((3, 4))),
    "softplus": _check_unary(softplus, _std((3, 4))),
    "exp": _check_unary(exp, lambda rng: rng.uniform(-3, 3, (3, 4))),
    "log": _check_unary(log, _positive((3, 4))),
    "log1p": _check_unary(log1p, _positive((3, 4), -0.5, 2.0)),
    "abs": _check_unary(abs_, _away_from((3, 4))),
    "sqrt": _check_unary(sqrt, _positive((3, 4))),
    "erf": _check_unary(erf, _std((3, 4))),
    "gather_rows": _check_gather,
    "scatter_sum": _check_scatter,
}


def gradient_check_suite(seed: int = 0, points: int = 3) -> dict:
    """Run grad_check on every registered op at ``points`` random draws.

    Returns {op name: worst relative error}.
    """
    results = {}
    for name, check in OP_CHECKS.items():
        worst = 0.0
        for k in range(points):
            rng = np.random.default_rng(seed * 1000 + k)
            worst = max(worst, check(rng))
        results[name] = worst
    return results
