"""Forward operations with their gradient rules.

Every op takes Tensors (or array-likes, promoted to constant Tensors), computes
its result on the float64 numpy data and hands `Tensor.from_op` a closure that
maps the upstream gradient to one gradient per parent.
Ops accept optional leading batch axes wherever the model feeds them batches.
"""
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from TensorCore.RngState import RngState
from TensorCore.Tensor import Tensor, ArrayLike
from util.FAConfException import ShapeException, DomainException, ConfigException

Axis = Optional[Union[int, Tuple[int, ...]]]


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sums a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(a % ndim for a in axes)


# ============================================================================
# Elementwise binary
# ============================================================================
def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), grad_fn, "add")


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), grad_fn, "sub")


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        grad_a = unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        grad_b = unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return grad_a, grad_b

    return Tensor.from_op(a.data * b.data, (a, b), grad_fn, "mul")


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        grad_a = unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        grad_b = unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None
        return grad_a, grad_b

    return Tensor.from_op(a.data / b.data, (a, b), grad_fn, "div")


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """
    Matrix product over the last two axes, leading axes broadcast.

    Raises:
        ShapeException: If either operand has fewer than two axes or the inner dimensions differ.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeException("matmul inner dimensions do not agree", a.shape, b.shape)

    def grad_fn(g):
        grad_a = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
        grad_b = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
        return grad_a, grad_b

    return Tensor.from_op(np.matmul(a.data, b.data), (a, b), grad_fn, "matmul")


# ============================================================================
# Reductions and movement
# ============================================================================
def reduce_sum(x: ArrayLike, axis: Axis = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)

    return Tensor.from_op(np.sum(x.data, axis=axes, keepdims=keepdims), (x,), grad_fn, "sum")


def reduce_mean(x: ArrayLike, axis: Axis = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    if count == 0:
        raise ShapeException("mean over an empty axis", x.shape)
    return mul(reduce_sum(x, axis=axes, keepdims=keepdims), 1.0 / count)


def reshape(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeException(f"cannot reshape to {tuple(shape)}", x.shape) from e

    def grad_fn(g):
        return (g.reshape(x.shape),)

    return Tensor.from_op(data, (x,), grad_fn, "reshape")


def transpose(x: ArrayLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(a % x.ndim for a in axes)
    inverse = tuple(np.argsort(axes))

    def grad_fn(g):
        return (np.transpose(g, inverse),)

    return Tensor.from_op(np.transpose(x.data, axes), (x,), grad_fn, "transpose")


def swap_last(x: ArrayLike) -> Tensor:
    """Transposes the last two axes."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeException("swap_last needs at least two axes", x.shape)
    return transpose(x, tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2))


def ensure_batch(x: ArrayLike, core_ndim: int) -> Tuple[Tensor, bool]:
    """
    Adds a leading batch axis to an unbatched input.

    Returns:
        (Tensor, bool): The batched tensor and whether an axis was added.

    Raises:
        ShapeException: If x has neither `core_ndim` nor `core_ndim + 1` axes.
    """
    x = as_tensor(x)
    if x.ndim == core_ndim:
        return reshape(x, (1,) + x.shape), True
    if x.ndim == core_ndim + 1:
        return x, False
    raise ShapeException(f"expected {core_ndim} axes or a batch of them", x.shape)


def drop_batch(x: Tensor, added: bool) -> Tensor:
    return reshape(x, x.shape[1:]) if added else x


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    """
    Joins tensors along `axis`.

    Raises:
        ShapeException: If the other axes differ.
    """
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeException("concat of an empty list")
    axis = axis % tensors[0].ndim
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeException("concat operands disagree off the join axis", *[t.shape for t in tensors]) from e
    boundaries = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad_fn(g):
        return tuple(np.split(g, boundaries, axis=axis))

    return Tensor.from_op(data, tensors, grad_fn, "concat")


def getitem(x: ArrayLike, index) -> Tensor:
    x = as_tensor(x)

    def grad_fn(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, index, g)
        return (grad,)

    return Tensor.from_op(np.array(x.data[index], dtype=np.float64), (x,), grad_fn, "getitem")


def mean_pool_time(x: ArrayLike) -> Tensor:
    """
    Per-channel temporal mean, [..., C, T] -> [..., C].

    Raises:
        ShapeException: If the time axis is empty.
    """
    x = as_tensor(x)
    if x.ndim < 1 or x.shape[-1] == 0:
        raise ShapeException("mean_pool_time needs a non-empty time axis", x.shape)
    return reduce_mean(x, axis=-1)


def avg_pool_time(x: ArrayLike, size: int) -> Tensor:
    """
    Non-overlapping average pooling along the last axis.

    Raises:
        ShapeException: If the time axis is not a multiple of `size`.
    """
    x = as_tensor(x)
    if size < 1 or x.shape[-1] % size != 0:
        raise ShapeException(f"time axis not divisible by pool size {size}", x.shape)
    pooled = reshape(x, x.shape[:-1] + (x.shape[-1] // size, size))
    return reduce_mean(pooled, axis=-1)


# ============================================================================
# Nonlinearities
# ============================================================================
def exp(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)

    def grad_fn(g):
        return (g * out,)

    return Tensor.from_op(out, (x,), grad_fn, "exp")


def log(x: ArrayLike) -> Tensor:
    """
    Raises:
        DomainException: If any input is not strictly positive.
    """
    x = as_tensor(x)
    if np.any(x.data <= 0.0):
        raise DomainException("log of a non-positive value")

    def grad_fn(g):
        return (g / x.data,)

    return Tensor.from_op(np.log(x.data), (x,), grad_fn, "log")


def relu(x: ArrayLike) -> Tensor:
    x = as_tensor(x)

    def grad_fn(g):
        return (g * (x.data > 0.0),)

    return Tensor.from_op(np.maximum(x.data, 0.0), (x,), grad_fn, "relu")


def sigmoid(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = special.expit(x.data)

    def grad_fn(g):
        return (g * out * (1.0 - out),)

    return Tensor.from_op(out, (x,), grad_fn, "sigmoid")


def elu(x: ArrayLike, alpha: float = 1.0) -> Tensor:
    x = as_tensor(x)
    negative = x.data <= 0.0
    out = np.where(negative, alpha * np.expm1(np.minimum(x.data, 0.0)), x.data)

    def grad_fn(g):
        return (g * np.where(negative, out + alpha, 1.0),)

    return Tensor.from_op(out, (x,), grad_fn, "elu")


_UNARY = {
    "relu": relu,
    "sigmoid": sigmoid,
    "elu": elu,
    "log": log,
}


def unary(x: ArrayLike, kind: str) -> Tensor:
    """
    Elementwise relu | sigmoid | elu | log.

    Raises:
        ConfigException: For an unknown kind.
        DomainException: For log of non-positive input.
    """
    try:
        fn = _UNARY[kind]
    except KeyError:
        raise ConfigException(f"unknown unary kind '{kind}', expected one of {sorted(_UNARY)}")
    return fn(x)


def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along `axis`."""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeException(f"softmax axis {axis} out of range", x.shape)
    out = special.softmax(x.data, axis=axis)

    def grad_fn(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (x,), grad_fn, "softmax")


def log_softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeException(f"log_softmax axis {axis} out of range", x.shape)
    out = special.log_softmax(x.data, axis=axis)

    def grad_fn(g):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return Tensor.from_op(out, (x,), grad_fn, "log_softmax")


# ============================================================================
# Stochastic
# ============================================================================
def dropout(x: ArrayLike, p: float, rng: Optional[RngState], training: bool) -> Tensor:
    """
    Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
    Identity when not training or p == 0.

    Raises:
        ConfigException: If p is outside [0, 1).
    """
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ConfigException(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigException("dropout in training mode needs an RngState")
    mask = (rng.uniform(x.shape) >= p) / (1.0 - p)

    def grad_fn(g):
        return (g * mask,)

    return Tensor.from_op(x.data * mask, (x,), grad_fn, "dropout")


# ============================================================================
# Convolution
# ============================================================================
def _conv_padding(padding: Union[str, int], kernel: int) -> Tuple[int, int]:
    if padding == "valid":
        return 0, 0
    if padding == "same":
        left = (kernel - 1) // 2
        return left, kernel - 1 - left
    if isinstance(padding, int) and padding >= 0:
        return padding, padding
    raise ConfigException(f"padding must be 'same', 'valid' or a non-negative int, got {padding!r}")


def conv1d(x: ArrayLike, weight: ArrayLike, bias: Optional[ArrayLike] = None,
           padding: Union[str, int] = "valid", stride: int = 1, groups: int = 1) -> Tensor:
    """
    1D cross-correlation (no kernel flip), zero padding.

    Args:
        x: [C_in, T] or [B, C_in, T].
        weight: [C_out, C_in / groups, K].
        bias: [C_out] or None.
        padding: 'same', 'valid' or a symmetric pad width.
        stride: Output step.
        groups: Channel groups; groups == C_in gives a depthwise convolution.

    Returns:
        Tensor: [C_out, T'] or [B, C_out, T'] with T' = floor((T + pad - K) / stride) + 1.

    Raises:
        ConfigException: If groups does not divide the channel counts or stride < 1.
        ShapeException: If the kernel is longer than the padded input or shapes disagree.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    bias = as_tensor(bias) if bias is not None else None
    if x.ndim == 2:
        out = conv1d(reshape(x, (1,) + x.shape), weight, bias, padding, stride, groups)
        return reshape(out, out.shape[1:])
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeException("conv1d expects input [B, C_in, T] and weight [C_out, C_in/groups, K]",
                             x.shape, weight.shape)

    batch, c_in, t_in = x.shape
    c_out, c_group, kernel = weight.shape
    if stride < 1:
        raise ConfigException(f"conv1d stride must be positive, got {stride}")
    if groups < 1 or c_in % groups != 0 or c_out % groups != 0:
        raise ConfigException(f"conv1d groups={groups} must divide C_in={c_in} and C_out={c_out}")
    if c_group * groups != c_in:
        raise ShapeException("conv1d weight channel axis does not match C_in / groups", x.shape, weight.shape)
    if bias is not None and bias.shape != (c_out,):
        raise ShapeException("conv1d bias must be [C_out]", bias.shape, weight.shape)

    pad_left, pad_right = _conv_padding(padding, kernel)
    padded_len = t_in + pad_left + pad_right
    if kernel > padded_len:
        raise ShapeException(f"conv1d kernel {kernel} longer than padded input {padded_len}", x.shape, weight.shape)
    t_out = (padded_len - kernel) // stride + 1
    out_group = c_out // groups

    padded = np.pad(x.data, ((0, 0), (0, 0), (pad_left, pad_right)))
    windows = sliding_window_view(padded, kernel, axis=2)[:, :, ::stride, :][:, :, :t_out, :]
    # im2col: [B, G, T', C_group * K]
    cols = (windows.reshape(batch, groups, c_group, t_out, kernel)
            .transpose(0, 1, 3, 2, 4)
            .reshape(batch, groups, t_out, c_group * kernel))
    w_mat = weight.data.reshape(groups, out_group, c_group * kernel)
    out = np.matmul(cols, np.swapaxes(w_mat, 1, 2))
    out = out.transpose(0, 1, 3, 2).reshape(batch, c_out, t_out)
    if bias is not None:
        out = out + bias.data[None, :, None]

    def grad_fn(g):
        g_cols = g.reshape(batch, groups, out_group, t_out).transpose(0, 1, 3, 2)
        grad_x = grad_w = grad_b = None
        if weight.requires_grad:
            lhs = cols.transpose(1, 3, 0, 2).reshape(groups, c_group * kernel, batch * t_out)
            rhs = g_cols.transpose(1, 0, 2, 3).reshape(groups, batch * t_out, out_group)
            grad_w = np.swapaxes(lhs @ rhs, 1, 2).reshape(weight.shape)
        if x.requires_grad:
            grad_windows = (np.matmul(g_cols, w_mat)
                            .reshape(batch, groups, t_out, c_group, kernel)
                            .transpose(0, 1, 3, 2, 4)
                            .reshape(batch, c_in, t_out, kernel))
            grad_padded = np.zeros((batch, c_in, padded_len))
            last = stride * (t_out - 1) + 1
            for k in range(kernel):
                grad_padded[:, :, k:k + last:stride] += grad_windows[:, :, :, k]
            grad_x = grad_padded[:, :, pad_left:pad_left + t_in]
        if bias is not None and bias.requires_grad:
            grad_b = g.sum(axis=(0, 2))
        return (grad_x, grad_w) + ((grad_b,) if bias is not None else ())

    parents: List[Tensor] = [x, weight] + ([bias] if bias is not None else [])
    return Tensor.from_op(out, parents, grad_fn, "conv1d")
