"""Reverse-mode autodiff over dense 2-D float64 arrays.

Every value is a `Tensor` holding a (rows x cols) float64 array. Operations
(see `ops`) link result tensors back to their inputs with a vector-Jacobian
closure; `Graph` linearises the DAG reachable from a root in topological
order and runs the reverse sweep exactly once per node.

Tensors with requires_grad=False are treated as constants and are never
written to after construction, so they can be shared freely. A graph is
owned by a single execution context for the duration of forward+backward.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import NumericError, ShapeError

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (pure data production)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def ensure_finite(arr: np.ndarray, op: str) -> None:
    """NaN/Inf anywhere is a hard error, both in forward and backward passes."""
    if not np.isfinite(arr).all():
        raise NumericError(f"{op}: non-finite values in result")


class Tensor:
    """A 2-D float64 array plus optional gradient of identical shape."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_vjp", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError("tensor", arr.shape)
        ensure_finite(arr, "tensor")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self._parents: tuple = ()
        self._vjp = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def attach(self, op: str, parents, vjp) -> None:
        """Record provenance of a non-leaf tensor (called by ops only)."""
        self.op = op
        self._parents = tuple(parents)
        self._vjp = vjp

    def detach(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed: np.ndarray | None = None) -> None:
        Graph(self).backward(seed)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, op={self.op}, requires_grad={self.requires_grad})"


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS; inputs always precede their consumers."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
        else:
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
    return order


class Graph:
    """Topologically ordered view of the op DAG reachable from `root`."""

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes = _topo_order(root)

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Reverse sweep: visits each node exactly once, accumulating grads.

        `seed` defaults to ones for a 1x1 root; non-scalar roots require an
        explicit cotangent of matching shape.
        """
        root = self.root
        if seed is None:
            if root.data.size != 1:
                raise ShapeError("backward-seed", root.data.shape)
            seed = np.ones_like(root.data)
        seed = np.asarray(seed, dtype=np.float64)
        if seed.shape != root.data.shape:
            raise ShapeError("backward-seed", seed.shape, root.data.shape)

        adjoint: dict[int, np.ndarray] = {id(root): seed}
        for node in reversed(self.nodes):
            g = adjoint.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
                ensure_finite(node.grad, f"backward:{node.op}")
            if node._vjp is None:
                continue
            parent_grads = node._vjp(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None:
                    continue
                ensure_finite(pg, f"backward:{node.op}")
                key = id(parent)
                if key in adjoint:
                    adjoint[key] = adjoint[key] + pg
                else:
                    adjoint[key] = pg


def needs_graph(*tensors: Tensor) -> bool:
    """True when any input participates in gradient tracking right now."""
    return _GRAD_ENABLED and any(t.requires_grad for t in tensors)
