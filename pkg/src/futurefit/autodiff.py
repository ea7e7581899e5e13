"""Small numpy autodiff engine with a forward-mode channel on top.

``Tensor`` records a define-by-run computation graph and supports reverse-mode
differentiation: every operation allocates a fresh node holding the result,
its parents, and a closure that routes the incoming cotangent to those
parents. ``backward()`` walks the graph once in reverse topological order and
accumulates gradients, so values reused by several consumers receive the sum
of their downstream contributions.

``DualTensor`` pairs a primal ``Tensor`` with a tangent ``Tensor`` carrying a
directional derivative (here: with respect to the scalar time input). The
tangent channel is itself built out of ``Tensor`` operations, so any loss that
consumes the tangent, such as a Taylor-extrapolated prediction or a gradient
penalty, remains differentiable with respect to the parameters by ordinary
``backward()``. A tangent of ``None`` means an identically-zero derivative
and is propagated without allocating arrays.

Everything is float64. Non-finite results raise immediately rather than
poisoning a training run silently.
"""

from __future__ import annotations

import contextlib

import numpy as np


class DiffError(Exception):
    """Base class for autodiff failures."""


class ShapeError(DiffError):
    """Operands with incompatible shapes for the requested operation."""


class NumericError(DiffError):
    """An operation produced NaN or Inf."""

    def __init__(self, op: str, detail: str = ""):
        self.op = op
        msg = f"non-finite values produced by op '{op}'"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UsageError(DiffError):
    """The API was called in an unsupported order or with a foreign node."""


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(op)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A node in the reverse-mode graph: float64 data plus backward plumbing.

    Leaf tensors created with ``requires_grad=True`` own a persistent
    gradient buffer that accumulates across ``backward()`` calls until
    ``zero_grad`` clears it. Interior nodes hold transient gradients that
    exist only while a backward pass runs through them.
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, op: str = "leaf"):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.op = op
        self._parents = tuple(_parents)
        self._backward = _backward
        # Leaves get an eager buffer so optimizers can rely on it existing.
        self.grad = np.zeros_like(self.data) if (self.requires_grad and not _parents) else None

    # ------------------------------------------------------------------ infra

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)
        elif self.requires_grad and not self._parents:
            self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``.

        Only defined for scalar nodes (the usual loss case). Each node is
        visited exactly once; fan-out is handled by summing contributions as
        they arrive, before the node's own closure fires.
        """
        if self.data.size != 1:
            raise UsageError(f"backward() requires a scalar node, got shape {self.data.shape}")
        if not self.requires_grad:
            raise UsageError("backward() on a node that does not require grad")

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        if self.grad is None:
            self.grad = np.ones_like(self.data)
        else:
            self.grad = self.grad + np.ones_like(self.data)
            self.grad = np.asarray(self.grad, dtype=np.float64).reshape(self.data.shape)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        # Interior grads are scratch space; drop them so reuse of a subgraph
        # in a later backward starts clean.
        for node in topo:
            if node._parents:
                node.grad = None

    # ------------------------------------------------------------------- ops

    def __add__(self, other) -> "Tensor":
        other = _ensure(other)
        out = _node(self.data + other.data, (self, other), "add")
        if out.requires_grad:
            def bwd(g):
                if self.requires_grad:
                    _acc(self, _unbroadcast(g, self.data.shape))
                if other.requires_grad:
                    _acc(other, _unbroadcast(g, other.data.shape))
            out._backward = bwd
        return out

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        out = _node(-self.data, (self,), "neg")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, -g)
        return out

    def __sub__(self, other) -> "Tensor":
        return self + (-_ensure(other))

    def __rsub__(self, other) -> "Tensor":
        return _ensure(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = _ensure(other)
        out = _node(self.data * other.data, (self, other), "mul")
        if out.requires_grad:
            def bwd(g):
                if self.requires_grad:
                    _acc(self, _unbroadcast(g * other.data, self.data.shape))
                if other.requires_grad:
                    _acc(other, _unbroadcast(g * self.data, other.data.shape))
            out._backward = bwd
        return out

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = _ensure(other)
        out = _node(self.data / other.data, (self, other), "div")
        if out.requires_grad:
            def bwd(g):
                if self.requires_grad:
                    _acc(self, _unbroadcast(g / other.data, self.data.shape))
                if other.requires_grad:
                    _acc(other, _unbroadcast(-g * self.data / (other.data ** 2), other.data.shape))
            out._backward = bwd
        return out

    def __rtruediv__(self, other) -> "Tensor":
        return _ensure(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise UsageError("only constant exponents are supported")
        e = float(exponent)
        out = _node(self.data ** e, (self,), "pow")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, g * e * self.data ** (e - 1.0))
        return out

    def __matmul__(self, other) -> "Tensor":
        other = _ensure(other)
        if self.data.ndim < 1 or other.data.ndim < 1:
            raise ShapeError("matmul requires at least 1-d operands")
        try:
            data = self.data @ other.data
        except ValueError as exc:
            raise ShapeError(f"matmul shapes {self.data.shape} and {other.data.shape}: {exc}") from None
        out = _node(data, (self, other), "matmul")
        if out.requires_grad:
            def bwd(g):
                a, b = self.data, other.data
                if self.requires_grad:
                    if b.ndim == 1:
                        ga = np.multiply.outer(g, b) if g.ndim else g * b
                    elif a.ndim == 1:
                        ga = g @ b.swapaxes(-1, -2)
                        ga = _unbroadcast(ga, a.shape)
                    else:
                        ga = _unbroadcast(g @ b.swapaxes(-1, -2), a.shape)
                    _acc(self, ga.reshape(a.shape))
                if other.requires_grad:
                    if a.ndim == 1:
                        gb = np.multiply.outer(a, g) if g.ndim else a * g
                    elif b.ndim == 1:
                        gb = (a.reshape(-1, a.shape[-1]).T @ g.reshape(-1)).reshape(b.shape)
                    else:
                        gb = _unbroadcast(a.swapaxes(-1, -2) @ g, b.shape)
                    _acc(other, gb.reshape(b.shape))
            out._backward = bwd
        return out

    def exp(self) -> "Tensor":
        out = _node(np.exp(self.data), (self,), "exp")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, g * out.data)
        return out

    def log(self) -> "Tensor":
        out = _node(np.log(self.data), (self,), "log")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, g / self.data)
        return out

    def sin(self) -> "Tensor":
        out = _node(np.sin(self.data), (self,), "sin")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, g * np.cos(self.data))
        return out

    def cos(self) -> "Tensor":
        out = _node(np.cos(self.data), (self,), "cos")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, -g * np.sin(self.data))
        return out

    def tanh(self) -> "Tensor":
        out = _node(np.tanh(self.data), (self,), "tanh")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, g * (1.0 - out.data ** 2))
        return out

    def relu(self) -> "Tensor":
        # Subgradient convention: the identity branch applies exactly at 0.
        mask = self.data >= 0.0
        out = _node(np.where(mask, self.data, 0.0), (self,), "relu")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, g * mask)
        return out

    def abs(self) -> "Tensor":
        sign = np.where(self.data >= 0.0, 1.0, -1.0)
        out = _node(self.data * sign, (self,), "abs")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, g * sign)
        return out

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = _node(self.data.sum(axis=axis, keepdims=keepdims), (self,), "sum")
        if out.requires_grad:
            def bwd(g):
                gg = g
                if axis is not None and not keepdims:
                    gg = np.expand_dims(gg, axis)
                _acc(self, np.broadcast_to(gg, self.data.shape).copy())
            out._backward = bwd
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(n)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _node(self.data.reshape(shape), (self,), "reshape")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, g.reshape(self.data.shape))
        return out

    def transpose(self, axes=None) -> "Tensor":
        out = _node(self.data.transpose(axes), (self,), "transpose")
        if out.requires_grad:
            inv = None if axes is None else np.argsort(axes)
            out._backward = lambda g: _acc(self, g.transpose(inv))
        return out

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def broadcast_to(self, shape) -> "Tensor":
        out = _node(np.broadcast_to(self.data, shape).copy(), (self,), "broadcast")
        if out.requires_grad:
            out._backward = lambda g: _acc(self, _unbroadcast(g, self.data.shape))
        return out

    def __getitem__(self, idx) -> "Tensor":
        out = _node(self.data[idx], (self,), "slice")
        if out.requires_grad:
            def bwd(g):
                full = np.zeros_like(self.data)
                np.add.at(full, idx, g)
                _acc(self, full)
            out._backward = bwd
        return out


def _ensure(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _node(data: np.ndarray, parents: tuple, op: str) -> Tensor:
    _check_finite(data, op)
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=parents if req else (), op=op)


def _acc(node: Tensor, grad) -> None:
    # In-place accumulation keeps 0-d buffers as ndarrays; `a + b` on two
    # 0-d arrays would decay to an immutable numpy scalar.
    if node.grad is None:
        node.grad = np.array(grad, dtype=np.float64).reshape(node.data.shape)
    else:
        node.grad += grad


def grad_wrt(loss: Tensor, leaf: Tensor) -> np.ndarray:
    """Run backward from ``loss`` and return a copy of ``leaf``'s gradient.

    Raises ``UsageError`` when ``leaf`` does not participate in the graph
    under ``loss``, which otherwise would silently yield zeros.
    """
    stack = [loss]
    seen: set[int] = set()
    found = False
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node is leaf:
            found = True
            break
        stack.extend(p for p in node._parents if p.requires_grad)
    if not found:
        raise UsageError("the requested leaf is not part of this computation graph")
    leaf.zero_grad()
    loss.backward()
    return np.array(leaf.grad, dtype=np.float64)


def constant(value) -> Tensor:
    return Tensor(value)


def parameter(value) -> Tensor:
    return Tensor(value, requires_grad=True)


def concat(tensors: list, axis: int = 0) -> Tensor:
    tensors = [_ensure(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = _node(data, tuple(tensors), "concat")
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def bwd(g):
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    sl = [slice(None)] * g.ndim
                    sl[axis] = slice(lo, hi)
                    _acc(t, g[tuple(sl)])
        out._backward = bwd
    return out


def select(cond: np.ndarray, a, b) -> Tensor:
    """Elementwise ``cond ? a : b`` with a constant boolean condition."""
    a, b = _ensure(a), _ensure(b)
    cond = np.asarray(cond, dtype=bool)
    out = _node(np.where(cond, a.data, b.data), (a, b), "select")
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                _acc(a, _unbroadcast(np.where(cond, g, 0.0), a.data.shape))
            if b.requires_grad:
                _acc(b, _unbroadcast(np.where(cond, 0.0, g), b.data.shape))
        out._backward = bwd
    return out


def gather_rows(t: Tensor, idx: np.ndarray) -> Tensor:
    """Pick ``t[i, idx[i]]`` for each row i of a 2-d tensor."""
    idx = np.asarray(idx, dtype=np.intp)
    if t.data.ndim != 2 or idx.ndim != 1 or idx.shape[0] != t.data.shape[0]:
        raise ShapeError(f"gather_rows: tensor {t.data.shape} vs index {idx.shape}")
    rows = np.arange(t.data.shape[0])
    out = _node(t.data[rows, idx], (t,), "gather_rows")
    if out.requires_grad:
        def bwd(g):
            full = np.zeros_like(t.data)
            np.add.at(full, (rows, idx), g)
            _acc(t, full)
        out._backward = bwd
    return out


def logsumexp(t: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable log-sum-exp along ``axis`` (keeps the dim)."""
    shift = np.max(t.data, axis=axis, keepdims=True)
    shifted = t - Tensor(shift)
    return shifted.exp().sum(axis=axis, keepdims=True).log() + Tensor(shift)


class DualTensor:
    """Primal value plus directional derivative, both as ``Tensor`` nodes.

    ``tangent is None`` encodes an exactly-zero derivative. Because tangents
    are ordinary graph nodes, reverse mode through any function of a tangent
    yields the mixed second derivatives needed by the training objectives.
    """

    __slots__ = ("primal", "tangent")

    def __init__(self, primal: Tensor, tangent=None):
        self.primal = _ensure(primal)
        if tangent is not None:
            tangent = _ensure(tangent)
            if tangent.data.shape != self.primal.data.shape:
                raise ShapeError(
                    f"tangent shape {tangent.data.shape} != primal shape {self.primal.data.shape}"
                )
        self.tangent = tangent

    @property
    def shape(self) -> tuple:
        return self.primal.data.shape

    def tangent_or_zero(self) -> Tensor:
        return self.tangent if self.tangent is not None else Tensor(np.zeros_like(self.primal.data))

    def __add__(self, other) -> "DualTensor":
        other = _dual(other)
        p = self.primal + other.primal
        if self.tangent is None and other.tangent is None:
            return DualTensor(p)
        if self.tangent is None:
            t = other.tangent.broadcast_to(p.shape) if other.tangent.shape != p.shape else other.tangent
        elif other.tangent is None:
            t = self.tangent.broadcast_to(p.shape) if self.tangent.shape != p.shape else self.tangent
        else:
            t = self.tangent + other.tangent
        return DualTensor(p, t)

    __radd__ = __add__

    def __neg__(self) -> "DualTensor":
        return DualTensor(-self.primal, None if self.tangent is None else -self.tangent)

    def __sub__(self, other) -> "DualTensor":
        return self + (-_dual(other))

    def __rsub__(self, other) -> "DualTensor":
        return _dual(other) + (-self)

    def __mul__(self, other) -> "DualTensor":
        other = _dual(other)
        p = self.primal * other.primal
        terms = []
        if self.tangent is not None:
            terms.append(self.tangent * other.primal)
        if other.tangent is not None:
            terms.append(self.primal * other.tangent)
        if not terms:
            return DualTensor(p)
        t = terms[0] if len(terms) == 1 else terms[0] + terms[1]
        t = t.broadcast_to(p.shape) if t.shape != p.shape else t
        return DualTensor(p, t)

    __rmul__ = __mul__

    def __matmul__(self, other) -> "DualTensor":
        other = _dual(other)
        p = self.primal @ other.primal
        terms = []
        if self.tangent is not None:
            terms.append(self.tangent @ other.primal)
        if other.tangent is not None:
            terms.append(self.primal @ other.tangent)
        if not terms:
            return DualTensor(p)
        return DualTensor(p, terms[0] if len(terms) == 1 else terms[0] + terms[1])

    def sin(self) -> "DualTensor":
        p = self.primal.sin()
        if self.tangent is None:
            return DualTensor(p)
        return DualTensor(p, self.primal.cos() * self.tangent)

    def tanh(self) -> "DualTensor":
        p = self.primal.tanh()
        if self.tangent is None:
            return DualTensor(p)
        return DualTensor(p, (1.0 - p * p) * self.tangent)

    def relu(self) -> "DualTensor":
        mask = self.primal.data >= 0.0
        p = self.primal.relu()
        if self.tangent is None:
            return DualTensor(p)
        return DualTensor(p, select(mask, self.tangent, Tensor(0.0)))

    def sum(self, axis=None, keepdims: bool = False) -> "DualTensor":
        p = self.primal.sum(axis=axis, keepdims=keepdims)
        if self.tangent is None:
            return DualTensor(p)
        return DualTensor(p, self.tangent.sum(axis=axis, keepdims=keepdims))

    def mean(self, axis=None, keepdims: bool = False) -> "DualTensor":
        p = self.primal.mean(axis=axis, keepdims=keepdims)
        if self.tangent is None:
            return DualTensor(p)
        return DualTensor(p, self.tangent.mean(axis=axis, keepdims=keepdims))

    def transpose(self, axes=None) -> "DualTensor":
        p = self.primal.transpose(axes)
        return DualTensor(p, None if self.tangent is None else self.tangent.transpose(axes))

    def reshape(self, *shape) -> "DualTensor":
        p = self.primal.reshape(*shape)
        return DualTensor(p, None if self.tangent is None else self.tangent.reshape(*shape))

    def broadcast_to(self, shape) -> "DualTensor":
        p = self.primal.broadcast_to(shape)
        return DualTensor(p, None if self.tangent is None else self.tangent.broadcast_to(shape))

    def __getitem__(self, idx) -> "DualTensor":
        p = self.primal[idx]
        return DualTensor(p, None if self.tangent is None else self.tangent[idx])


def _dual(value) -> DualTensor:
    if isinstance(value, DualTensor):
        return value
    return DualTensor(_ensure(value))


def dual_concat(duals: list, axis: int = 0) -> DualTensor:
    duals = [_dual(d) for d in duals]
    p = concat([d.primal for d in duals], axis=axis)
    if all(d.tangent is None for d in duals):
        return DualTensor(p)
    t = concat([d.tangent_or_zero() for d in duals], axis=axis)
    return DualTensor(p, t)


def dual_select(cond: np.ndarray, a: DualTensor, b: DualTensor) -> DualTensor:
    a, b = _dual(a), _dual(b)
    p = select(cond, a.primal, b.primal)
    if a.tangent is None and b.tangent is None:
        return DualTensor(p)
    t = select(cond, a.tangent_or_zero(), b.tangent_or_zero())
    return DualTensor(p, t)


class ParamStore:
    """Named collection of trainable leaf tensors.

    Guarantees one persistent gradient buffer per parameter, supports
    freezing (for the inner maximization, which must not touch the model),
    and round-trips its state bit-exactly.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise UsageError(f"duplicate parameter name {name!r}")
        t = Tensor(value, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list:
        return list(self._params)

    def tensors(self) -> list:
        return list(self._params.values())

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def param_count(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def state_dict(self) -> dict:
        return {k: t.data.copy() for k, t in self._params.items()}

    def load_state_dict(self, state: dict) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise UsageError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, t in self._params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ShapeError(f"parameter {k!r}: shape {arr.shape} != {t.data.shape}")
            t.data = arr.copy()

    @contextlib.contextmanager
    def frozen(self):
        """Temporarily exclude all parameters from gradient tracking."""
        for t in self._params.values():
            t.requires_grad = False
        try:
            yield self
        finally:
            for t in self._params.values():
                t.requires_grad = True


class SGD:
    """Plain gradient descent: p <- p - lr * p.grad."""

    def __init__(self, params: ParamStore, lr: float):
        self.params = params
        self.lr = float(lr)

    def step(self) -> None:
        for t in self.params.tensors():
            t.data -= self.lr * t.grad

    def zero_grad(self) -> None:
        self.params.zero_grad()


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params: ParamStore, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = float(lr)
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self._v = {k: np.zeros_like(v.data) for k, v in params.items()}

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            m = self._m[k]
            v = self._v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        self.params.zero_grad()

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m": {k: v.copy() for k, v in self._m.items()},
            "v": {k: v.copy() for k, v in self._v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        for k in self._m:
            self._m[k] = state["m"][k].copy()
            self._v[k] = state["v"][k].copy()
