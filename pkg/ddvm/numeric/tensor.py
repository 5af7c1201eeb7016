"""
Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray. Primitive operations executed while a DiffGraph
is active (and gradients are enabled) are appended to that graph as nodes;
DiffGraph.backward walks the nodes once, newest first, which is a reverse
topological order because a node can only consume tensors that already
exist. Outside a graph every operation is a plain numpy computation, which
is how stop-gradient and inference passes are expressed.
"""

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ddvm.errors import ShapeError

ArrayLike = Union["Tensor", np.ndarray, float, int]

_DTYPES = {"float64": np.float64, "float32": np.float32}
_default_dtype = np.float64

_local = threading.local()


def set_default_dtype(name: str) -> None:
    """Switch tensor precision ('float64' reference path, 'float32' optional)."""
    global _default_dtype
    if name not in _DTYPES:
        raise ValueError(f"Unsupported dtype '{name}', expected one of {sorted(_DTYPES)}")
    _default_dtype = _DTYPES[name]


def get_default_dtype():
    return _default_dtype


def _graph_stack() -> List["DiffGraph"]:
    stack = getattr(_local, "graphs", None)
    if stack is None:
        stack = []
        _local.graphs = stack
    return stack


def current_graph() -> Optional["DiffGraph"]:
    stack = _graph_stack()
    if not stack or getattr(_local, "no_grad", 0) > 0:
        return None
    return stack[-1]


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording; tensors produced inside are constants."""
    _local.no_grad = getattr(_local, "no_grad", 0) + 1
    try:
        yield
    finally:
        _local.no_grad -= 1


class Tensor:
    """An ndarray plus the bookkeeping needed for reverse-mode gradients."""

    __slots__ = ("data", "grad", "requires_grad", "name", "__weakref__")
    __array_priority__ = 100.0
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=_default_dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = requires_grad
        out.name = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # arithmetic
    def __add__(self, other): return binary("add", self, other)
    def __radd__(self, other): return binary("add", other, self)
    def __sub__(self, other): return binary("sub", self, other)
    def __rsub__(self, other): return binary("sub", other, self)
    def __mul__(self, other): return binary("mul", self, other)
    def __rmul__(self, other): return binary("mul", other, self)
    def __truediv__(self, other): return binary("div", self, other)
    def __rtruediv__(self, other): return binary("div", other, self)
    def __neg__(self): return neg(self)
    def __pow__(self, exponent: float): return power(self, exponent)
    def __matmul__(self, other): return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False): return reduce_sum(self, axis, keepdims)
    def mean(self, axis=None, keepdims: bool = False): return reduce_mean(self, axis, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 else shape)
    def transpose(self, axes: Sequence[int]): return transpose(self, axes)


def as_tensor(value: ArrayLike) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def stop_gradient(value: ArrayLike) -> Tensor:
    """A constant copy of value; no gradient flows back through it."""
    return Tensor(as_tensor(value).data)


@dataclass
class Node:
    """One recorded primitive: how to recompute it and how to pull gradients back."""

    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    forward: Callable[..., np.ndarray]
    backward: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class DiffGraph:
    """
    Tape of primitive operations for one differentiation pass.

    Use as a context manager; a graph is single-writer and must not be
    shared between threads.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self._produced: Dict[int, Tensor] = {}
        self._leaves: Dict[int, Tensor] = {}

    def __enter__(self) -> "DiffGraph":
        _graph_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _graph_stack()
        if stack and stack[-1] is self:
            stack.pop()

    @property
    def leaves(self) -> List[Tensor]:
        return list(self._leaves.values())

    def record(self, node: Node) -> None:
        for tensor in node.inputs:
            if tensor.requires_grad and id(tensor) not in self._produced:
                self._leaves[id(tensor)] = tensor
        self._produced[id(node.output)] = node.output
        self.nodes.append(node)

    def backward(self, output: Tensor, seed: Optional[np.ndarray] = None) -> None:
        """Accumulate d(output)/d(leaf) into every leaf's .grad."""
        if not output.requires_grad:
            return
        grads: Dict[int, np.ndarray] = {
            id(output): np.ones_like(output.data) if seed is None else np.asarray(seed, dtype=output.data.dtype)
        }
        for node in reversed(self.nodes):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, grad in zip(node.inputs, node.backward(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                grads[key] = grads[key] + grad if key in grads else grad
        for key, tensor in self._leaves.items():
            grad = grads.get(key)
            if grad is None:
                continue
            tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad

    def replay(self) -> bool:
        """Recompute every node from its recorded inputs; True when bit-identical."""
        for node in self.nodes:
            again = np.asarray(node.forward(*[t.data for t in node.inputs]))
            if again.shape != node.output.data.shape or not np.array_equal(again, node.output.data):
                return False
        return True


def _apply(op: str, inputs: Sequence[Tensor], forward: Callable[..., np.ndarray],
           backward: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]) -> Tensor:
    data = np.asarray(forward(*[t.data for t in inputs]))
    graph = current_graph()
    requires = graph is not None and any(t.requires_grad for t in inputs)
    out = Tensor._wrap(data, requires)
    if requires:
        graph.record(Node(op, tuple(inputs), out, forward, backward))
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


_BINARY_FORWARD = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
}


def binary(op_kind: str, a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise binary op with numpy broadcasting."""
    if op_kind not in _BINARY_FORWARD:
        raise ValueError(f"Unknown elementwise op '{op_kind}'")
    ta, tb = as_tensor(a), as_tensor(b)
    try:
        out_shape = np.broadcast_shapes(ta.shape, tb.shape)
    except ValueError:
        raise ShapeError(f"Cannot broadcast operands of '{op_kind}'", ta.shape, tb.shape) from None
    fn = _BINARY_FORWARD[op_kind]
    sa, sb = ta.shape, tb.shape

    def backward(g):
        if op_kind == "add":
            ga, gb = g, g
        elif op_kind == "sub":
            ga, gb = g, -g
        elif op_kind == "mul":
            ga, gb = g * tb.data, g * ta.data
        else:
            ga = g / tb.data
            gb = -g * ta.data / (tb.data * tb.data)
        return _unbroadcast(np.broadcast_to(ga, out_shape), sa), _unbroadcast(np.broadcast_to(gb, out_shape), sb)

    return _apply(op_kind, (ta, tb), fn, backward)


def elementwise(op_kind: str, a: ArrayLike, b: ArrayLike) -> Tensor:
    """
    Elementwise op whose result keeps a's shape.

    b must equal a's shape, be a scalar, or broadcast into a's shape.
    """
    ta, tb = as_tensor(a), as_tensor(b)
    try:
        out_shape = np.broadcast_shapes(ta.shape, tb.shape)
    except ValueError:
        raise ShapeError(f"Shape mismatch in '{op_kind}'", ta.shape, tb.shape) from None
    if out_shape != ta.shape:
        raise ShapeError(f"Shape mismatch in '{op_kind}'", ta.shape, tb.shape)
    return binary(op_kind, ta, tb)


def _unary(op: str, x: ArrayLike, fn: Callable[[np.ndarray], np.ndarray],
           derivative: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Tensor:
    tx = as_tensor(x)
    holder: Dict[str, np.ndarray] = {}

    def forward(a):
        out = fn(a)
        holder["out"] = out
        return out

    def backward(g):
        return (g * derivative(tx.data, holder["out"]),)

    return _apply(op, (tx,), forward, backward)


def neg(x: ArrayLike) -> Tensor:
    return _unary("neg", x, np.negative, lambda a, out: -np.ones_like(a))


def absolute(x: ArrayLike) -> Tensor:
    """|x| with subgradient 0 at x = 0."""
    return _unary("abs", x, np.abs, lambda a, out: np.sign(a))


def abs_smooth(x: ArrayLike, delta: float = 0.1) -> Tensor:
    """Smooth |x|: sqrt(x^2 + delta^2) - delta."""
    return _unary("abs_smooth", x,
                  lambda a: np.sqrt(a * a + delta * delta) - delta,
                  lambda a, out: a / (out + delta))


def square(x: ArrayLike) -> Tensor:
    return _unary("square", x, np.square, lambda a, out: 2.0 * a)


def sqrt(x: ArrayLike) -> Tensor:
    return _unary("sqrt", x, np.sqrt, lambda a, out: 0.5 / out)


def exp(x: ArrayLike) -> Tensor:
    return _unary("exp", x, np.exp, lambda a, out: out)


def log(x: ArrayLike) -> Tensor:
    return _unary("log", x, np.log, lambda a, out: 1.0 / a)


def power(x: ArrayLike, exponent: float) -> Tensor:
    p = float(exponent)
    return _unary("pow", x, lambda a: np.power(a, p), lambda a, out: p * np.power(a, p - 1.0))


def _sigmoid(a: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def silu(x: ArrayLike) -> Tensor:
    """x * sigmoid(x)."""
    def derivative(a, out):
        s = _sigmoid(a)
        return s * (1.0 + a * (1.0 - s))
    return _unary("silu", x, lambda a: a * _sigmoid(a), derivative)


def reduce_sum(x: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    tx = as_tensor(x)
    shape = tx.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _apply("sum", (tx,), lambda a: np.sum(a, axis=axis, keepdims=keepdims), backward)


def reduce_mean(x: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    tx = as_tensor(x)
    shape = tx.shape
    if axis is None:
        count = tx.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([shape[a] for a in axes]))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape) / count,)

    return _apply("mean", (tx,), lambda a: np.mean(a, axis=axis, keepdims=keepdims), backward)


def reshape(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    tx = as_tensor(x)
    original = tx.shape
    target = tuple(shape)
    return _apply("reshape", (tx,), lambda a: a.reshape(target), lambda g: (g.reshape(original),))


def transpose(x: ArrayLike, axes: Sequence[int]) -> Tensor:
    tx = as_tensor(x)
    order = tuple(axes)
    inverse = tuple(np.argsort(order))
    return _apply("transpose", (tx,), lambda a: np.transpose(a, order), lambda g: (np.transpose(g, inverse),))


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    parts = tuple(as_tensor(t) for t in tensors)
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def forward(*arrays):
        return np.concatenate(arrays, axis=axis)

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _apply("concat", parts, forward, backward)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    if ta.ndim < 2 or tb.ndim < 2 or ta.shape[-1] != tb.shape[-2]:
        raise ShapeError("matmul operands do not align", ta.shape, tb.shape)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(tb.data, -1, -2))
        gb = np.matmul(np.swapaxes(ta.data, -1, -2), g)
        return _unbroadcast(ga, ta.shape), _unbroadcast(gb, tb.shape)

    return _apply("matmul", (ta, tb), np.matmul, backward)


def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    tx = as_tensor(x)
    holder: Dict[str, np.ndarray] = {}

    def forward(a):
        shifted = np.exp(a - np.max(a, axis=axis, keepdims=True))
        out = shifted / np.sum(shifted, axis=axis, keepdims=True)
        holder["out"] = out
        return out

    def backward(g):
        s = holder["out"]
        return (s * (g - np.sum(g * s, axis=axis, keepdims=True)),)

    return _apply("softmax", (tx,), forward, backward)


def upsample_nearest(x: ArrayLike, factor: int = 2) -> Tensor:
    """Nearest-neighbour upsampling of an NHWC tensor."""
    tx = as_tensor(x)
    if tx.ndim != 4:
        raise ShapeError("upsample_nearest expects NHWC input", tx.shape)
    b, h, w, c = tx.shape

    def forward(a):
        return np.repeat(np.repeat(a, factor, axis=1), factor, axis=2)

    def backward(g):
        return (g.reshape(b, h, factor, w, factor, c).sum(axis=(2, 4)),)

    return _apply("upsample_nearest", (tx,), forward, backward)


def masked_select_mean(x: ArrayLike, weights: np.ndarray, count: float) -> Tensor:
    """sum(x * weights) / count with constant weights."""
    return reduce_sum(binary("mul", x, Tensor(weights))) / float(count)
