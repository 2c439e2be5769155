"""Numpy kernels behind the taped primitives.

Forward kernels accept optional leading batch axes ([..., C, H, W]) so the
same code serves the taped per-sample forward and batched inference.
Backward kernels are per-sample only.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from engine.exceptions import DimensionError, ParameterError


# ---------------------------------------------------------------------------
# conv2d (stride 1, zero padding)
# ---------------------------------------------------------------------------

def _pad_spatial(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    pad = [(0, 0)] * (x.ndim - 2) + [(padding, padding), (padding, padding)]
    return np.pad(x, pad)


def check_conv_shapes(x_shape: Tuple[int, ...], kernel_shape: Tuple[int, ...],
                      bias_shape: Tuple[int, ...], padding: int) -> None:
    if padding < 0:
        raise ParameterError(f"padding must be non-negative, got {padding}")
    if len(x_shape) < 3:
        raise DimensionError(f"conv2d input must be [C,H,W], got {x_shape}", axis="input")
    if len(kernel_shape) != 4:
        raise DimensionError(f"conv2d kernel must be [C_out,C_in,kH,kW], got {kernel_shape}",
                             axis="kernel")
    c_out, c_in, kh, kw = kernel_shape
    if x_shape[-3] != c_in:
        raise DimensionError(f"input has {x_shape[-3]} channels, kernel expects {c_in}",
                             axis="C_in")
    if bias_shape != (c_out,):
        raise DimensionError(f"bias shape {bias_shape} does not match C_out={c_out}",
                             axis="C_out")
    if kh > x_shape[-2] + 2 * padding:
        raise DimensionError(f"kernel height {kh} exceeds padded input height", axis="H")
    if kw > x_shape[-1] + 2 * padding:
        raise DimensionError(f"kernel width {kw} exceeds padded input width", axis="W")


def conv2d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
                   padding: int) -> np.ndarray:
    """Cross-correlation of [..., C_in, H, W] with [C_out, C_in, kH, kW]."""
    check_conv_shapes(x.shape, kernel.shape, bias.shape, padding)
    kh, kw = kernel.shape[2:]
    windows = sliding_window_view(_pad_spatial(x, padding), (kh, kw), axis=(-2, -1))
    out = np.einsum("...chwij,ocij->...ohw", windows, kernel)
    return out + bias[:, None, None]


def conv2d_backward(x: np.ndarray, kernel: np.ndarray, padding: int,
                    upstream: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients w.r.t. (input, kernel, bias) for a single [C_in, H, W] sample."""
    kh, kw = kernel.shape[2:]
    xp = _pad_spatial(x, padding)
    windows = sliding_window_view(xp, (kh, kw), axis=(-2, -1))
    grad_kernel = np.einsum("ohw,chwij->ocij", upstream, windows)
    grad_bias = upstream.sum(axis=(1, 2))

    out_h, out_w = upstream.shape[1:]
    grad_xp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            grad_xp[:, i:i + out_h, j:j + out_w] += np.einsum(
                "ohw,oc->chw", upstream, kernel[:, :, i, j])
    if padding:
        grad_xp = grad_xp[:, padding:-padding, padding:-padding]
    return grad_xp, grad_kernel, grad_bias


# ---------------------------------------------------------------------------
# maxpool2d (floor semantics, first-max tie break)
# ---------------------------------------------------------------------------

def maxpool2d_forward(x: np.ndarray, k: int, stride: int) -> Tuple[np.ndarray, np.ndarray]:
    """Return (pooled, argmax) where argmax is the row-major index inside each window."""
    if k < 1 or stride < 1:
        raise ParameterError(f"maxpool needs k >= 1 and stride >= 1, got k={k}, stride={stride}")
    if k > x.shape[-2] or k > x.shape[-1]:
        raise ParameterError(f"pool window {k} larger than input {x.shape[-2:]}")
    windows = sliding_window_view(x, (k, k), axis=(-2, -1))[..., ::stride, ::stride, :, :]
    flat = windows.reshape(windows.shape[:-2] + (k * k,))
    # np.argmax returns the first occurrence, which is the row-major tie rule.
    argmax = np.argmax(flat, axis=-1)
    pooled = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
    return pooled, argmax


def maxpool2d_backward(input_shape: Tuple[int, ...], argmax: np.ndarray, k: int,
                       stride: int, upstream: np.ndarray) -> np.ndarray:
    grad = np.zeros(input_shape)
    channels, out_h, out_w = argmax.shape
    c_idx, i_idx, j_idx = np.meshgrid(np.arange(channels), np.arange(out_h),
                                      np.arange(out_w), indexing="ij")
    rows = i_idx * stride + argmax // k
    cols = j_idx * stride + argmax % k
    # Overlapping windows (stride < k) may route to the same cell.
    np.add.at(grad, (c_idx, rows, cols), upstream)
    return grad


# ---------------------------------------------------------------------------
# relu / dense / softmax
# ---------------------------------------------------------------------------

def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    return upstream * (x > 0)


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"dense weight {weight.shape} incompatible with input {x.shape}",
                             axis="d")
    if bias.shape != (weight.shape[0],):
        raise DimensionError(f"dense bias {bias.shape} does not match out={weight.shape[0]}",
                             axis="out")
    return x @ weight.T + bias


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max subtraction."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
