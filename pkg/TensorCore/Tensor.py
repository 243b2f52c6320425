from __future__ import annotations

from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from util.FAConfException import ShapeException, DomainException

GradFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]
ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


class Tensor:
    """
    Dense row-major float64 array with optional reverse-mode gradient tracking.

    Every forward op returns a new Tensor that remembers its parents and a
    gradient function. `backward()` on a scalar result walks the graph in
    reverse topological order and accumulates `grad` on every reachable
    tensor that requires it.

    Attributes:
        data (np.ndarray): The values, always float64.
        requires_grad (bool): Whether gradients are tracked through this tensor.
        grad (np.ndarray | None): Accumulated gradient, same shape as `data`.
    """
    __array_priority__ = 100.0

    def __init__(self, data: ArrayLike, requires_grad: bool = False) -> None:
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad: bool = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple[Tensor, ...] = ()
        self._grad_fn: Optional[GradFn] = None
        self.op: str = "leaf"

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], grad_fn: GradFn, op: str) -> "Tensor":
        """
        Wraps the result of a forward op without copying it.

        Raises:
            DomainException: If the op produced NaN or Inf.
        """
        out = cls.__new__(cls)
        out.data = data if data.dtype == np.float64 else data.astype(np.float64)
        if not np.all(np.isfinite(out.data)):
            raise DomainException(f"'{op}' produced non-finite values")
        out.requires_grad = any(p.requires_grad for p in parents)
        out.grad = None
        out.op = op
        if out.requires_grad:
            out._parents = tuple(parents)
            out._grad_fn = grad_fn
        else:
            out._parents = ()
            out._grad_fn = None
        return out

    # ------------------------------------------------------------------ #
    # properties
    # ------------------------------------------------------------------ #
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Same values, cut from the graph."""
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.requires_grad = False
        out.grad = None
        out._parents = ()
        out._grad_fn = None
        out.op = "detach"
        return out

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------ #
    # backward pass
    # ------------------------------------------------------------------ #
    def _topological_order(self) -> list:
        """Parents before children, restricted to nodes that track gradients."""
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        """
        Accumulates d(self)/d(t) into `t.grad` for every reachable tensor t with requires_grad.
        Calling it again without zeroing adds to the existing gradients.

        Raises:
            ShapeException: If this tensor is not a scalar.
        """
        if self.data.size != 1:
            raise ShapeException("backward() needs a scalar loss", self.shape)
        if not self.requires_grad:
            return

        pending = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            node.grad = np.array(g, dtype=np.float64) if node.grad is None else node.grad + g
            if node._grad_fn is None:
                continue
            for parent, parent_grad in zip(node._parents, node._grad_fn(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad

    # ------------------------------------------------------------------ #
    # operators (implemented in TensorOps)
    # ------------------------------------------------------------------ #
    def __add__(self, other: ArrayLike) -> "Tensor":
        from TensorCore.TensorOps import add
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        from TensorCore.TensorOps import add
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        from TensorCore.TensorOps import sub
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        from TensorCore.TensorOps import sub
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        from TensorCore.TensorOps import mul
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        from TensorCore.TensorOps import mul
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        from TensorCore.TensorOps import div
        return div(self, other)

    def __neg__(self) -> "Tensor":
        from TensorCore.TensorOps import mul
        return mul(self, -1.0)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        from TensorCore.TensorOps import matmul
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        from TensorCore.TensorOps import getitem
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        from TensorCore.TensorOps import reduce_sum
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        from TensorCore.TensorOps import reduce_mean
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        from TensorCore.TensorOps import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        from TensorCore.TensorOps import transpose
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes if axes else None)
