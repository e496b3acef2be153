"""Dense float64 tensors with reverse-mode differentiation.

Every model quantity is a :class:`Tensor`.  Operations record their inputs and
a backward closure; :func:`backprop` walks the recorded graph in reverse
topological order.  The recorded graph is private to one forward evaluation,
so concurrent evaluations against a frozen :class:`ParamRegistry` are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """An operation was applied outside its mathematical domain."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple["Tensor", ...] = (), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, data={np.array2string(self.data, precision=4)})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # Operator sugar; all real work happens in the module-level functions.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64))


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: cannot combine shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0  # subgradient 0 at exactly 0
    return _result(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _result(out, (x,), lambda g: (g * (1.0 - out * out),))


def tensor_sum(x: Tensor) -> Tensor:
    shape = x.shape
    return _result(np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def clamp_min_zero(x: Tensor) -> Tensor:
    """Alias of :func:`relu` used for hinge terms."""
    return relu(x)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; 1-d operands act as row/column vectors as in numpy."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise DimensionError(f"matmul: expected 1-d or 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ for shapes {a.shape} and {b.shape}")
    out = a.data @ b.data

    def backward(g):
        ad, bd = a.data, b.data
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T, ad.T @ g
        if ad.ndim == 2:  # matrix @ vector
            return np.outer(g, bd), ad.T @ g
        if bd.ndim == 2:  # vector @ matrix
            return bd @ g, np.outer(ad, g)
        return g * bd, g * ad

    return _result(out, (a, b), backward)


def batched_matvec(w: Tensor, x: Tensor) -> Tensor:
    """``out[e] = w[e] @ x[e]`` for a stack of matrices ``w`` (E×m×k) and vectors ``x`` (E×k)."""
    if w.data.ndim != 3 or x.data.ndim != 2 or w.shape[0] != x.shape[0] or w.shape[2] != x.shape[1]:
        raise DimensionError(f"batched_matvec: incompatible shapes {w.shape} and {x.shape}")
    out = np.einsum("emk,ek->em", w.data, x.data)

    def backward(g):
        return np.einsum("em,ek->emk", g, x.data), np.einsum("emk,em->ek", w.data, g)

    return _result(out, (w, x), backward)


def transpose(x: Tensor) -> Tensor:
    return _result(x.data.T, (x,), lambda g: (g.T,))


# ---------------------------------------------------------------------------
# structural


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis (vectors, or row-aligned matrices)."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DomainError("concat: nothing to concatenate")
    try:
        out = np.concatenate([t.data for t in tensors], axis=-1)
    except ValueError:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from None
    bounds = np.cumsum([0] + [t.shape[-1] for t in tensors])

    def backward(g):
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return _result(out, tuple(tensors), backward)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DomainError("stack: nothing to stack")
    try:
        out = np.stack([t.data for t in tensors])
    except ValueError:
        raise DimensionError(f"stack: incompatible shapes {[t.shape for t in tensors]}") from None
    return _result(out, tuple(tensors), lambda g: tuple(g[i] for i in range(len(tensors))))


def take(x: Tensor, index) -> Tensor:
    """Gather along axis 0.  A scalar index drops the axis, a sequence keeps it."""
    idx = np.asarray(index, dtype=np.intp)
    out = x.data[idx]
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _result(out, (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = x.shape
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def mean_rows(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError(f"mean_rows: expected a matrix, got shape {x.shape}")
    n = x.shape[0]
    if n == 0:
        raise DomainError("mean_rows: empty row set")
    return _result(x.data.mean(axis=0), (x,), lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def max_pool_rows(x: Tensor) -> Tensor:
    """Column-wise max; gradient routes to the lowest-index maximal row."""
    if x.data.ndim != 2:
        raise DimensionError(f"max_pool_rows: expected a matrix, got shape {x.shape}")
    if x.shape[0] == 0:
        raise DomainError("max_pool_rows: empty row set")
    arg = x.data.argmax(axis=0)  # numpy returns the first maximum
    cols = np.arange(x.shape[1])
    out = x.data[arg, cols]

    def backward(g):
        full = np.zeros(x.shape)
        full[arg, cols] = g
        return (full,)

    return _result(out, (x,), backward)


# ---------------------------------------------------------------------------
# normalisations and similarities


def softmax(x: Tensor) -> Tensor:
    if x.data.ndim != 1:
        raise DimensionError(f"softmax: expected a vector, got shape {x.shape}")
    if x.shape[0] == 0:
        raise DomainError("softmax: empty input")
    z = np.exp(x.data - x.data.max())
    out = z / z.sum()

    def backward(g):
        return (out * (g - np.dot(g, out)),)

    return _result(out, (x,), backward)


def cosine(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or a.shape != b.shape:
        raise DimensionError(f"cosine: expected equal-length vectors, got {a.shape} and {b.shape}")
    na = float(np.linalg.norm(a.data))
    nb = float(np.linalg.norm(b.data))
    if na == 0.0 or nb == 0.0:
        raise DomainError("cosine: zero vector")
    dot = float(a.data @ b.data)
    value = dot / (na * nb)

    def backward(g):
        ga = g * (b.data / (na * nb) - value * a.data / (na * na))
        gb = g * (a.data / (na * nb) - value * b.data / (nb * nb))
        return ga, gb

    return _result(np.asarray(value), (a, b), backward)


def dropout(x: Tensor, p: float, train: bool, rng: np.random.Generator | None) -> Tensor:
    if not 0.0 <= p < 1.0:
        raise DomainError(f"dropout: probability must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    if rng is None:
        raise DomainError("dropout: train mode needs a random generator")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return _result(x.data * keep, (x,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# parameters and gradients


class ParamRegistry:
    """Ordered name → trainable tensor map."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._entries:
            raise KeyError(f"parameter {name!r} already registered")
        t = Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)
        self._entries[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def names(self) -> list[str]:
        return list(self._entries)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._entries.items()}

    def load(self, arrays: dict[str, np.ndarray]) -> None:
        for k, t in self._entries.items():
            new = np.asarray(arrays[k], dtype=np.float64)
            if new.shape != t.shape:
                raise DimensionError(f"parameter {k!r}: stored shape {new.shape} != {t.shape}")
            t.data = new.copy()


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backprop(loss: Tensor, params: ParamRegistry) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of a scalar ``loss`` for every registered parameter.

    Parameters the loss does not depend on receive zero gradients.
    """
    if loss.size != 1:
        raise DomainError(f"backprop: loss must be a scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    if loss.requires_grad:
        for node in reversed(_topological(loss)):
            g = grads.pop(id(node), None) if node._backward is not None else grads.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = np.asarray(pg, dtype=np.float64)
    out = {}
    for name, t in params.items():
        g = grads.get(id(t))
        out[name] = np.zeros_like(t.data) if g is None else np.asarray(g).reshape(t.shape)
    return out


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol

    def failures(self) -> list[str]:
        return [k for k, v in self.per_param.items() if v > self.tol]


def relative_error(analytic, numeric, floor: float = 1e-6) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps near-zero entries from dominating."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def finite_diff_check(f: Callable[[ParamRegistry], Tensor | float], params: ParamRegistry,
                      h: float = 1e-5, tol: float = 1e-4, floor: float = 1e-6,
                      names: Sequence[str] | None = None) -> GradCheckReport:
    """Compare :func:`backprop` against central differences for every parameter entry."""
    if not h > 0:
        raise DomainError(f"finite_diff_check: step must be positive, got {h}")

    def value() -> float:
        out = f(params)
        return float(out.data) if isinstance(out, Tensor) else float(out)

    loss = f(params)
    if not isinstance(loss, Tensor):
        raise DomainError("finite_diff_check: f must return a Tensor")
    analytic = backprop(loss, params)
    report = GradCheckReport(max_rel_error=0.0, tol=tol)
    for name in names if names is not None else params.names():
        t = params[name]
        flat = t.data.reshape(-1)
        numeric = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = value()
            flat[i] = orig - h
            down = value()
            flat[i] = orig
            numeric[i] = (up - down) / (2 * h)
        err = float(relative_error(analytic[name].reshape(-1), numeric, floor).max(initial=0.0))
        report.per_param[name] = err
        report.max_rel_error = max(report.max_rel_error, err)
    return report
