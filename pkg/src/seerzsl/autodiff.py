"""Reverse-mode automatic differentiation over dense float64 tensors.

The engine is define-by-run: every operation eagerly computes its value and
records its parents together with a VJP closure. Because the VJP closures are
themselves written in terms of recorded operations, calling :func:`gradients`
produces tensors that live on the same tape, so gradients can be
differentiated again (needed for penalties on gradient norms).

Supported broadcasting is deliberately narrow: scalars, bias rows ``(C,)`` /
``(1, C)`` against ``(n, C)``, and column vectors ``(n, 1)`` against
``(n, C)``. Anything else is a shape error.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "AutodiffError",
    "ShapeError",
    "NonFiniteError",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "transpose",
    "exp",
    "log",
    "sqrt",
    "square",
    "relu",
    "sigmoid",
    "tanh",
    "tsum",
    "tmean",
    "concat",
    "narrow",
    "softmax",
    "softmax_cross_entropy",
    "l2_norm_rows",
    "gradients",
    "backward",
    "grad_norm",
]

_node_ids = itertools.count()

# Guard against NaN/Inf escaping a forward evaluation. The cheap pass sums the
# array (NaN and +-Inf both poison a float64 sum); values large enough to
# overflow a finite sum are treated as divergence too.
CHECK_FINITE = True


class AutodiffError(Exception):
    pass


class ShapeError(AutodiffError):
    pass


class NonFiniteError(AutodiffError):
    """Raised when an operation produces NaN or Inf, with node provenance."""

    def __init__(self, op: str, node_id: int):
        super().__init__(f"non-finite value produced by op '{op}' (node {node_id})")
        self.op = op
        self.node_id = node_id


class Tensor:
    """Immutable dense float64 array plus its position in the recorded graph.

    Leaf tensors (parameters, inputs, constants) have no parents. Non-leaf
    tensors carry a VJP closure mapping the output gradient to per-parent
    gradients, expressed with recorded ops so that second-order
    differentiation works.
    """

    __slots__ = ("data", "op", "node_id", "_parents", "_vjp")

    def __init__(self, data, op: str = "leaf", _parents: tuple = (), _vjp=None,
                 copy: bool = True):
        if isinstance(data, Tensor):
            raise TypeError("Tensor(data) expects an array-like, not a Tensor")
        arr = np.asarray(data, dtype=np.float64)
        if op == "leaf" and copy:
            arr = np.array(arr, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        self.data = arr
        self.op = op
        self.node_id = next(_node_ids)
        self._parents = _parents
        self._vjp = _vjp
        if CHECK_FINITE:
            s = float(arr.sum())
            if s != s or s in (np.inf, -np.inf):
                raise NonFiniteError(op, self.node_id)

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return np.array(self.data, copy=True)

    def is_leaf(self) -> bool:
        return not self._parents

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.shape}, node={self.node_id})"

    # -- operator sugar ------------------------------------------------------

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

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _broadcast_ok(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    if a == b:
        return True
    if a == () or b == ():
        return True
    if len(a) == 2 and len(b) == 2:
        if a[0] == b[0] and (a[1] == 1 or b[1] == 1):
            return True
        if a[1] == b[1] and (a[0] == 1 or b[0] == 1):
            return True
        return False
    # bias row: (C,) against (n, C)
    if len(a) == 2 and b == (a[1],):
        return True
    if len(b) == 2 and a == (b[1],):
        return True
    return False


def _unbroadcast(grad: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Sum a broadcast gradient back down to ``shape`` (a recorded op)."""
    if grad.shape == shape:
        return grad
    if shape == ():
        return tsum(grad)
    if len(shape) == 1:
        return tsum(grad, axis=0)
    if shape[0] == 1:
        return tsum(grad, axis=0, keepdims=True)
    return tsum(grad, axis=1, keepdims=True)


def _binary(op: str, a, b, fwd, vjp_builder) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    if not _broadcast_ok(a.shape, b.shape):
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")
    out = fwd(a.data, b.data)
    return Tensor(out, op=op, _parents=(a, b), _vjp=vjp_builder(a, b))


# -- arithmetic ---------------------------------------------------------------


def add(a, b) -> Tensor:
    def vjp(a, b):
        return lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))

    return _binary("add", a, b, lambda x, y: x + y, vjp)


def sub(a, b) -> Tensor:
    def vjp(a, b):
        return lambda g: (_unbroadcast(g, a.shape), _unbroadcast(neg(g), b.shape))

    return _binary("sub", a, b, lambda x, y: x - y, vjp)


def mul(a, b) -> Tensor:
    def vjp(a, b):
        return lambda g: (
            _unbroadcast(mul(g, b), a.shape),
            _unbroadcast(mul(g, a), b.shape),
        )

    return _binary("multiply", a, b, lambda x, y: x * y, vjp)


def div(a, b) -> Tensor:
    def vjp(a, b):
        def inner(g):
            ga = _unbroadcast(div(g, b), a.shape)
            gb = _unbroadcast(neg(div(mul(g, a), mul(b, b))), b.shape)
            return ga, gb

        return inner

    return _binary("divide", a, b, lambda x, y: x / y, vjp)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return Tensor(-a.data, op="negate", _parents=(a,), _vjp=lambda g: (neg(g),))


def matmul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = a.data @ b.data
    vjp = lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g))
    return Tensor(out, op="matmul", _parents=(a, b), _vjp=vjp)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")
    return Tensor(a.data.T, op="transpose", _parents=(a,), _vjp=lambda g: (transpose(g),))


# -- elementwise --------------------------------------------------------------


def exp(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        data = np.exp(a.data)
    out = Tensor(data, op="exp", _parents=(a,))
    out._vjp = lambda g: (mul(g, out),)
    return out


def log(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)
    return Tensor(data, op="log", _parents=(a,), _vjp=lambda g: (div(g, a),))


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(invalid="ignore"):
        data = np.sqrt(a.data)
    out = Tensor(data, op="sqrt", _parents=(a,))
    out._vjp = lambda g: (div(g, mul(2.0, out)),)
    return out


def square(a) -> Tensor:
    a = _as_tensor(a)
    vjp = lambda g: (mul(g, mul(2.0, a)),)
    return Tensor(a.data * a.data, op="square", _parents=(a,), _vjp=vjp)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = Tensor((a.data > 0).astype(np.float64))
    vjp = lambda g: (mul(g, mask),)
    return Tensor(np.maximum(a.data, 0.0), op="relu", _parents=(a,), _vjp=vjp)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    # 1/(1+e^-x) computed branch-wise to avoid overflow at large |x|
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(out_data, op="sigmoid", _parents=(a,))
    out._vjp = lambda g: (mul(g, mul(out, sub(1.0, out))),)
    return out


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.tanh(a.data), op="tanh", _parents=(a,))
    out._vjp = lambda g: (mul(g, sub(1.0, square(out))),)
    return out


# -- reductions and shape ops --------------------------------------------------


def _broadcast_back(g: Tensor, shape: tuple[int, ...], axis, keepdims: bool) -> Tensor:
    """Expand a reduced gradient back to ``shape`` (a recorded op)."""
    data = g.data
    if axis is None:
        out = np.broadcast_to(data, shape)
    else:
        if not keepdims:
            data = np.expand_dims(data, axis)
        out = np.broadcast_to(data, shape)
    vjp = lambda gg: (tsum(gg, axis=axis, keepdims=keepdims) if axis is not None else tsum(gg),)
    return Tensor(np.array(out), op="broadcast", _parents=(g,), _vjp=vjp)


def tsum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    vjp = lambda g: (_broadcast_back(g, a.shape, axis, keepdims),)
    return Tensor(out, op="sum", _parents=(a,), _vjp=vjp)


def tmean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def concat(parts: Sequence, axis: int = 1) -> Tensor:
    tensors = [_as_tensor(p) for p in parts]
    if not tensors:
        raise ShapeError("concat of zero tensors")
    if axis not in (0, 1):
        raise ShapeError("concat supports axis 0 or 1")
    first = tensors[0]
    if any(t.ndim != first.ndim for t in tensors) or axis >= first.ndim:
        raise ShapeError(f"concat: rank mismatch on axis {axis}")
    other = 1 - axis
    if first.ndim == 2 and any(t.shape[other] != first.shape[other] for t in tensors):
        raise ShapeError("concat: extents differ on the non-concatenated axis")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    extents = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + extents)

    def vjp(g):
        return tuple(
            narrow(g, axis, int(offsets[i]), int(offsets[i + 1])) for i in range(len(tensors))
        )

    return Tensor(out, op="concat", _parents=tuple(tensors), _vjp=vjp)


def narrow(a, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis."""
    a = _as_tensor(a)
    if axis >= a.ndim or not (0 <= start < stop <= a.shape[axis]):
        raise ShapeError(f"slice [{start}:{stop}] on axis {axis} of shape {a.shape}")
    sl = tuple(slice(start, stop) if d == axis else slice(None) for d in range(a.ndim))
    out = a.data[sl]

    def vjp(g):
        return (_pad_slice(g, a.shape, axis, start),)

    return Tensor(np.array(out), op="slice", _parents=(a,), _vjp=vjp)


def _pad_slice(g: Tensor, shape: tuple[int, ...], axis: int, start: int) -> Tensor:
    full = np.zeros(shape, dtype=np.float64)
    sl = tuple(
        slice(start, start + g.shape[axis]) if d == axis else slice(None) for d in range(len(shape))
    )
    full[sl] = g.data
    vjp = lambda gg: (narrow(gg, axis, start, start + g.shape[axis]),)
    return Tensor(full, op="pad-slice", _parents=(g,), _vjp=vjp)


# -- composites ----------------------------------------------------------------


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax; rows sum to one."""
    logits = _as_tensor(logits)
    if logits.ndim != 2:
        raise ShapeError(f"softmax expects a matrix, got shape {logits.shape}")
    shift = Tensor(logits.data.max(axis=1, keepdims=True))  # constant, gradient-free
    z = exp(sub(logits, shift))
    return div(z, tsum(z, axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, onehot) -> Tensor:
    """Mean cross-entropy of row-wise softmax against one-hot targets."""
    logits = _as_tensor(logits)
    targets = _as_tensor(onehot)
    if logits.shape != targets.shape:
        raise ShapeError(
            f"softmax-cross-entropy: logits {logits.shape} vs targets {targets.shape}"
        )
    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    z = sub(logits, shift)
    lse = log(tsum(exp(z), axis=1))  # (n,)
    picked = tsum(mul(z, targets), axis=1)  # (n,)
    return tmean(sub(lse, picked))


def l2_norm_rows(a: Tensor) -> Tensor:
    """Euclidean norm of every row of a matrix."""
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"l2-norm-rows expects a matrix, got shape {a.shape}")
    # The 1e-24 keeps the backward finite at an exactly-zero row; it is far
    # below one ulp of any norm of interest.
    return sqrt(add(tsum(square(a), axis=1), 1e-24))


# -- reverse sweep ---------------------------------------------------------------


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in reversed(node._parents):
            if id(parent) not in seen:
                stack.append((parent, False))
    return order  # parents precede children


def gradients(root: Tensor, wrt: Sequence[Tensor], allow_unused: bool = False) -> list[Tensor]:
    """d(root)/d(w) for each w in wrt, as recorded tensors.

    The returned tensors are part of the tape, so any scalar built from them
    can be differentiated again.
    """
    if root.size != 1:
        raise ShapeError(f"gradient root must be a single value, got shape {root.shape}")
    order = _topo_order(root)
    wrt_ids = {id(w) for w in wrt}
    needed: set[int] = set()
    for node in order:
        if id(node) in wrt_ids or any(id(p) in needed for p in node._parents):
            needed.add(id(node))

    grads: dict[int, Tensor] = {id(root): Tensor(np.ones(root.shape))}
    result: dict[int, Tensor] = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if id(node) in wrt_ids:
            # fully accumulated here: reverse topological order guarantees
            # every consumer has already contributed
            result[id(node)] = g
        if node._vjp is None:
            continue
        parent_grads = node._vjp(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or id(parent) not in needed:
                continue
            held = grads.get(id(parent))
            grads[id(parent)] = pg if held is None else add(held, pg)

    out: list[Tensor] = []
    for w in wrt:
        g = result.get(id(w))
        if g is None:
            if not allow_unused:
                raise AutodiffError(
                    f"requested tensor (node {w.node_id}) is not an ancestor of the root"
                )
            g = Tensor(np.zeros(w.shape))
        out.append(g)
    return out


def backward(root: Tensor) -> dict[Tensor, Tensor]:
    """Gradient of a scalar root with respect to every leaf in its graph."""
    leaves = [node for node in _topo_order(root) if node.is_leaf()]
    grads = gradients(root, leaves, allow_unused=True)
    return dict(zip(leaves, grads))


def grad_norm(root: Tensor, wrt: Tensor) -> Tensor:
    """Euclidean norm of d(root)/d(wrt) as a differentiable tensor."""
    g = gradients(root, [wrt])[0]
    return sqrt(add(tsum(square(g)), 1e-24))
