from typing import Callable, Sequence

import numpy as np

from TensorCore.Tensor import Tensor
from util.FAConfException import ShapeException, ConfigException

# Denominator floor: gradients smaller than this are compared on an absolute scale.
RELATIVE_FLOOR = 1e-4


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = RELATIVE_FLOOR) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), floor)


def grad_check_tensors(loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor], eps: float = 1e-5) -> float:
    """
    Compares backward() gradients of `loss_fn()` w.r.t. `tensors` against central
    finite differences, perturbing each tensor's data in place.

    Args:
        loss_fn: Builds the scalar loss from the current tensor values.
        tensors: Leaves with requires_grad set.
        eps: Finite-difference step in [1e-7, 1e-3].

    Returns:
        float: Worst elementwise relative error over all tensors.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ConfigException(f"grad_check eps must lie in [1e-7, 1e-3], got {eps}")
    for t in tensors:
        t.zero_grad()
    loss = loss_fn()
    if loss.size != 1:
        raise ShapeException("grad_check needs a scalar-valued function", loss.shape)
    loss.backward()

    worst = 0.0
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = np.zeros_like(t.data)
        for i in range(t.data.size):
            original = t.data.flat[i]
            t.data.flat[i] = original + eps
            plus = loss_fn().item()
            t.data.flat[i] = original - eps
            minus = loss_fn().item()
            t.data.flat[i] = original
            numeric.flat[i] = (plus - minus) / (2.0 * eps)
        if t.data.size:
            worst = max(worst, float(np.max(relative_error(analytic, numeric))))
    return worst


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Worst relative error of d f(x) / dx, analytic vs central differences."""
    probe = Tensor(x.data, requires_grad=True)
    return grad_check_tensors(lambda: f(probe), [probe], eps)
