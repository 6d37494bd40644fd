"""Dense double-precision linear algebra with a reverse-mode gradient tape.

Everything above this module is expressed in a small set of matrix
primitives.  Each primitive exists in two forms: a plain eager function
over ``numpy`` arrays (``matmul``, ``softmax_row``, ``tanh``, ``sigmoid``)
and a recorded form on :class:`Node` objects bound to a :class:`Tape`.
Recording order is a topological order of the computation, so the
backward pass simply walks the recorded list in reverse.

Matrices are row-major ``float64`` arrays and are treated as immutable
once produced.  A tape is single-threaded: record and backward must
happen on one logical thread.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DeterminismError, DomainError, ShapeError

# Floor applied to every log argument; shared with the loss functions so
# cross entropy and product-mass losses stay finite when a predicted
# probability underflows.
LOG_EPS = 1e-12


# ---------------------------------------------------------------------------
# Eager primitives
# ---------------------------------------------------------------------------

def as_matrix(x) -> np.ndarray:
    """Coerce to a 2-D float64 array (vectors become single rows)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix or vector, got ndim={a.ndim}")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def softmax_row(v: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for overflow stability.

    Accepts a vector (returns a vector) or a matrix (normalizes each row).
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("softmax_row of an empty input")
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr.reshape(1, -1)
    shifted = arr - arr.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return out[0] if squeeze else out


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, split by sign so neither branch overflows."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    e = np.exp(arr[~pos])
    out[~pos] = e / (1.0 + e)
    return out


# ---------------------------------------------------------------------------
# Recorded computation
# ---------------------------------------------------------------------------

class Node:
    """A matrix-valued intermediate of one recorded computation.

    ``value`` is the forward result, ``grad`` the adjoint (lazily
    allocated; ``None`` means exactly zero, i.e. the node is unreachable
    from the loss).
    """

    __slots__ = ("value", "grad", "tape", "_backward")

    def __init__(self, value: np.ndarray, tape: "Tape"):
        self.value = value
        self.grad: np.ndarray | None = None
        self.tape = tape
        self._backward = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def gradient(self) -> np.ndarray:
        """Adjoint as a dense array; zero when unreachable from the loss."""
        return self.grad if self.grad is not None else np.zeros_like(self.value)

    # -- operators -----------------------------------------------------

    def __add__(self, other: "Node") -> "Node":
        a, b = self.value, other.value
        if a.shape == b.shape:
            out = self.tape._node(a + b)

            def bwd(g, x=self, y=other):
                _acc(x, g)
                _acc(y, g)
        elif b.shape == (1, a.shape[1]):
            # row broadcast: every row of a gets b added
            out = self.tape._node(a + b)

            def bwd(g, x=self, y=other):
                _acc(x, g)
                _acc(y, g.sum(axis=0, keepdims=True))
        else:
            raise ShapeError(f"add shape mismatch: {a.shape} + {b.shape}")
        return self.tape._record(out, bwd)

    def __sub__(self, other: "Node") -> "Node":
        a, b = self.value, other.value
        if a.shape != b.shape:
            raise ShapeError(f"sub shape mismatch: {a.shape} - {b.shape}")
        out = self.tape._node(a - b)

        def bwd(g, x=self, y=other):
            _acc(x, g)
            _acc(y, -g)

        return self.tape._record(out, bwd)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            k = float(other)
            out = self.tape._node(self.value * k)

            def bwd(g, x=self, k=k):
                _acc(x, g * k)

            return self.tape._record(out, bwd)
        a, b = self.value, other.value
        if a.shape != b.shape:
            raise ShapeError(f"mul shape mismatch: {a.shape} * {b.shape}")
        out = self.tape._node(a * b)

        def bwd(g, x=self, y=other):
            _acc(x, g * y.value)
            _acc(y, g * x.value)

        return self.tape._record(out, bwd)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self) -> "Node":
        return self.__mul__(-1.0)

    def __matmul__(self, other: "Node") -> "Node":
        a, b = self.value, other.value
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
        out = self.tape._node(a @ b)

        def bwd(g, x=self, y=other):
            _acc(x, g @ y.value.T)
            _acc(y, x.value.T @ g)

        return self.tape._record(out, bwd)

    # -- elementwise ----------------------------------------------------

    def tanh(self) -> "Node":
        y = np.tanh(self.value)
        out = self.tape._node(y)

        def bwd(g, x=self, y=y):
            _acc(x, g * (1.0 - y * y))

        return self.tape._record(out, bwd)

    def sigmoid(self) -> "Node":
        y = sigmoid(self.value)
        out = self.tape._node(y)

        def bwd(g, x=self, y=y):
            _acc(x, g * (y * (1.0 - y)))

        return self.tape._record(out, bwd)

    def log(self) -> "Node":
        """Natural log with the argument clamped to at least ``LOG_EPS``."""
        v = self.value
        clamped = np.maximum(v, LOG_EPS)
        out = self.tape._node(np.log(clamped))

        def bwd(g, x=self, v=v, clamped=clamped):
            # below the clamp the output is constant in the input
            _acc(x, np.where(v > LOG_EPS, g / clamped, 0.0))

        return self.tape._record(out, bwd)

    def softmax_row(self) -> "Node":
        y = softmax_row(self.value)
        out = self.tape._node(y)

        def bwd(g, x=self, y=y):
            inner = (g * y).sum(axis=1, keepdims=True)
            _acc(x, y * (g - inner))

        return self.tape._record(out, bwd)

    # -- structure ------------------------------------------------------

    def transpose(self) -> "Node":
        out = self.tape._node(self.value.T.copy())

        def bwd(g, x=self):
            _acc(x, g.T)

        return self.tape._record(out, bwd)

    def sum(self) -> "Node":
        """Sum of all entries as a 1x1 node."""
        out = self.tape._node(np.array([[self.value.sum()]]))

        def bwd(g, x=self):
            _acc(x, np.full_like(x.value, g[0, 0]))

        return self.tape._record(out, bwd)

    def pick(self, i: int, j: int) -> "Node":
        """Single entry as a 1x1 node."""
        out = self.tape._node(self.value[i:i + 1, j:j + 1].copy())

        def bwd(g, x=self, i=i, j=j):
            if x.grad is None:
                x.grad = np.zeros_like(x.value)
            x.grad[i, j] += g[0, 0]

        return self.tape._record(out, bwd)

    def row(self, i: int) -> "Node":
        """Row ``i`` as a 1xd node (embedding-style lookup)."""
        out = self.tape._node(self.value[i:i + 1, :].copy())

        def bwd(g, x=self, i=i):
            if x.grad is None:
                x.grad = np.zeros_like(x.value)
            x.grad[i:i + 1, :] += g

        return self.tape._record(out, bwd)


def concat_rows(nodes: list[Node]) -> Node:
    """Stack 1xd (or kxd) nodes vertically."""
    tape = nodes[0].tape
    out = tape._node(np.vstack([n.value for n in nodes]))
    offsets = np.cumsum([0] + [n.value.shape[0] for n in nodes])

    def bwd(g, nodes=tuple(nodes), offsets=offsets):
        for n, lo, hi in zip(nodes, offsets[:-1], offsets[1:]):
            _acc(n, g[lo:hi, :])

    return tape._record(out, bwd)


def concat_cols(nodes: list[Node]) -> Node:
    """Concatenate nodes horizontally."""
    tape = nodes[0].tape
    out = tape._node(np.hstack([n.value for n in nodes]))
    offsets = np.cumsum([0] + [n.value.shape[1] for n in nodes])

    def bwd(g, nodes=tuple(nodes), offsets=offsets):
        for n, lo, hi in zip(nodes, offsets[:-1], offsets[1:]):
            _acc(n, g[:, lo:hi])

    return tape._record(out, bwd)


def _acc(node: Node, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.array(g, dtype=np.float64)
    else:
        node.grad += g


class Tape:
    """Ordered record of primitive operations for one forward pass.

    With ``recording=False`` the same graph-building code runs eagerly:
    values are computed but no backward closures are kept, which is what
    decoding uses.
    """

    def __init__(self, recording: bool = True):
        self.recording = recording
        self._ops: list[Node] = []

    def _node(self, value: np.ndarray) -> Node:
        return Node(np.asarray(value, dtype=np.float64), self)

    def _record(self, out: Node, backward) -> Node:
        if self.recording:
            out._backward = backward
            self._ops.append(out)
        return out

    def leaf(self, value) -> Node:
        """Wrap an array as an input node (parameter or constant)."""
        return self._node(as_matrix(value))

    def backward(self, loss: Node) -> None:
        """Propagate adjoints from a scalar loss through every recorded op,
        visiting nodes in exact reverse recording order."""
        if not self.recording:
            raise DomainError("backward on a non-recording tape")
        if loss.value.shape != (1, 1):
            raise ShapeError(f"loss must be 1x1, got {loss.value.shape}")
        loss.grad = np.ones((1, 1))
        for node in reversed(self._ops):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)


# ---------------------------------------------------------------------------
# Finite-difference checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    """Per-tensor relative errors of tape gradients vs central differences."""

    max_rel_error: float
    worst: tuple[str, int]
    per_tensor: dict[str, float]
    checked: int
    tolerance: float
    failures: list[tuple[str, int, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def grad_check(
    loss_fn,
    params: dict[str, np.ndarray],
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    samples_per_tensor: int | None = None,
    seed: int = 0,
    value_fn=None,
) -> GradCheckReport:
    """Compare tape gradients of ``loss_fn`` against central differences.

    ``loss_fn(params) -> (loss, grads)`` must be deterministic; ``value_fn``
    may supply a cheaper loss-only evaluation for the difference quotients
    (defaults to calling ``loss_fn`` and dropping the gradients).  Every
    scalar parameter is checked unless ``samples_per_tensor`` caps the count,
    in which case a seeded random subsample per tensor is used.  Relative
    error is ``|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)``.
    """
    if not (0.0 < epsilon <= 1e-2):
        raise DomainError(f"epsilon must be in (0, 1e-2], got {epsilon}")
    if value_fn is None:
        value_fn = lambda p: loss_fn(p)[0]  # noqa: E731

    work = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    v1 = value_fn(work)
    v2 = value_fn(work)
    if v1 != v2:
        raise DeterminismError(
            f"loss is not deterministic: {v1!r} != {v2!r} at the same point"
        )

    _, grads = loss_fn(work)
    rng = np.random.default_rng(seed)
    per_tensor: dict[str, float] = {}
    failures: list[tuple[str, int, float]] = []
    worst = ("", -1)
    max_rel = 0.0
    checked = 0

    for name in sorted(work):
        tensor = work[name]
        flat = tensor.reshape(-1)
        gflat = np.asarray(grads[name], dtype=np.float64).reshape(-1)
        size = flat.size
        if samples_per_tensor is not None and samples_per_tensor < size:
            idxs = rng.choice(size, size=samples_per_tensor, replace=False)
        else:
            idxs = np.arange(size)
        tensor_max = 0.0
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + epsilon
            up = value_fn(work)
            flat[i] = orig - epsilon
            down = value_fn(work)
            flat[i] = orig
            numeric = (up - down) / (2.0 * epsilon)
            analytic = gflat[i]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            checked += 1
            if rel > tensor_max:
                tensor_max = rel
            if rel > max_rel:
                max_rel = rel
                worst = (name, int(i))
            if rel > tolerance:
                failures.append((name, int(i), rel))
        per_tensor[name] = tensor_max

    return GradCheckReport(
        max_rel_error=max_rel,
        worst=worst,
        per_tensor=per_tensor,
        checked=checked,
        tolerance=tolerance,
        failures=failures,
    )
