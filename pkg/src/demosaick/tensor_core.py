"""Low-level image-tensor kernels with hand-written adjoints.

Images are numpy arrays of shape (H, W, C), float64 by default. Every
forward op here is a pure function; the matching ``*_backward`` function
implements the exact adjoint (reverse-mode gradient) given the gradient of
the loss w.r.t. the op's output and the cached forward inputs.

Convolutions use the correlation convention (no kernel flip) and reflexive
padding so the spatial size is always preserved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor/filter shapes are inconsistent."""


class DimensionError(ValueError):
    """Raised when a padding or size precondition is violated."""


def check_image(x: np.ndarray) -> np.ndarray:
    if x.ndim != 3:
        raise ShapeError(f"expected (H, W, C) array, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class FilterBank:
    """A bank of convolution filters.

    weights has shape (out_channels, in_channels, kh, kw); bias has length
    out_channels for the forward direction and length in_channels when the
    bank is used by conv_transpose2d.
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ShapeError(f"filter weights must be 4-D, got {self.weights.shape}")
        kh, kw = self.weights.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"kernel dims must be odd, got {kh}x{kw}")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]


# ---------------------------------------------------------------------------
# reflexive padding


def _reflect_index(n: int, pad: int) -> np.ndarray:
    """Index map for mirror padding that does not repeat the edge sample."""
    idx = np.arange(-pad, n + pad)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def _pad_reflect(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    rows = _reflect_index(x.shape[0], pad)
    cols = _reflect_index(x.shape[1], pad)
    return x[rows][:, cols]


def _pad_reflect_adjoint(gp: np.ndarray, n_h: int, n_w: int, pad: int) -> np.ndarray:
    """Adjoint of ``_pad_reflect``: fold padded-border gradients back inside."""
    if pad == 0:
        return gp.copy()
    rows = _reflect_index(n_h, pad)
    cols = _reflect_index(n_w, pad)
    tmp = np.zeros((n_h,) + gp.shape[1:], dtype=gp.dtype)
    np.add.at(tmp, rows, gp)
    out = np.zeros((n_h, n_w) + gp.shape[2:], dtype=gp.dtype)
    np.add.at(out, (slice(None), cols), tmp)
    return out


def reflexive_pad(x: np.ndarray, pad: int) -> np.ndarray:
    """Mirror-pad by ``pad`` pixels on every side (edge pixel not repeated)."""
    check_image(x)
    if pad < 0:
        raise ValueError("pad must be non-negative")
    for n in x.shape[:2]:
        # size-1 axes degenerate to replication; larger axes must be able
        # to mirror without wrapping
        if n > 1 and pad >= n:
            raise DimensionError(
                f"pad {pad} too large for {x.shape[0]}x{x.shape[1]} image"
            )
    return _pad_reflect(x, pad)


def reflexive_pad_backward(grad_out: np.ndarray, input_shape: tuple, pad: int) -> np.ndarray:
    return _pad_reflect_adjoint(grad_out, input_shape[0], input_shape[1], pad)


# ---------------------------------------------------------------------------
# convolution


def _patch_view(xp: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Sliding (kh, kw) patch view of a padded (Hp, Wp, C) array.

    Returns shape (H, W, kh, kw, C) without copying.
    """
    H = xp.shape[0] - kh + 1
    W = xp.shape[1] - kw + 1
    s0, s1, s2 = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, (H, W, kh, kw, xp.shape[2]), (s0, s1, s0, s1, s2), writeable=False
    )


def conv2d(x: np.ndarray, filters: FilterBank) -> np.ndarray:
    """Same-size correlation with implicit reflexive padding, plus bias."""
    check_image(x)
    w = filters.weights
    if x.shape[2] != filters.in_channels:
        raise ShapeError(
            f"input has {x.shape[2]} channels, filters expect {filters.in_channels}"
        )
    kh, kw = w.shape[2:]
    xp = _pad_reflect(x, (kh - 1) // 2)
    patches = _patch_view(xp, kh, kw)
    y = np.einsum("hwijc,ocij->hwo", patches, w, optimize=True)
    return y + filters.bias


def conv2d_backward(grad_out: np.ndarray, x: np.ndarray, filters: FilterBank):
    """Gradients of conv2d w.r.t. (input, weights, bias)."""
    w = filters.weights
    kh, kw = w.shape[2:]
    if grad_out.shape != (x.shape[0], x.shape[1], w.shape[0]):
        raise ShapeError("grad_out shape does not match conv2d output")
    pad = (kh - 1) // 2
    xp = _pad_reflect(x, pad)
    patches = _patch_view(xp, kh, kw)
    gw = np.einsum("hwijc,hwo->ocij", patches, grad_out, optimize=True)
    gb = grad_out.sum(axis=(0, 1))
    gx = _conv_input_grad(grad_out, w)
    gx = _pad_reflect_adjoint(gx, x.shape[0], x.shape[1], pad)
    return gx, gw, gb


def _conv_input_grad(gy: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Adjoint of the pure (padded) correlation: maps (H, W, out) back to
    the padded input grid (H + kh - 1, W + kw - 1, in)."""
    kh, kw = w.shape[2:]
    gz = np.zeros(
        (gy.shape[0] + 2 * (kh - 1), gy.shape[1] + 2 * (kw - 1), w.shape[0]),
        dtype=gy.dtype,
    )
    gz[kh - 1 : kh - 1 + gy.shape[0], kw - 1 : kw - 1 + gy.shape[1]] = gy
    patches = _patch_view(gz, kh, kw)
    wflip = w[:, :, ::-1, ::-1]
    return np.einsum("hwijo,ocij->hwc", patches, wflip, optimize=True)


def conv_transpose2d(x: np.ndarray, filters: FilterBank) -> np.ndarray:
    """Adjoint of the reflexive-pad-then-correlate map, plus a bias of
    length in_channels. Spatial size is preserved; channels go from
    out_channels to in_channels."""
    check_image(x)
    w = filters.weights
    if x.shape[2] != filters.out_channels:
        raise ShapeError(
            f"input has {x.shape[2]} channels, transposed filters expect "
            f"{filters.out_channels}"
        )
    if filters.bias.shape != (filters.in_channels,):
        raise ShapeError("conv_transpose2d bias must have length in_channels")
    kh, kw = w.shape[2:]
    pad = (kh - 1) // 2
    gx = _conv_input_grad(x, w)
    y = _pad_reflect_adjoint(gx, x.shape[0], x.shape[1], pad)
    return y + filters.bias


def conv_transpose2d_backward(grad_out: np.ndarray, x: np.ndarray, filters: FilterBank):
    """Gradients of conv_transpose2d w.r.t. (input, weights, bias).

    Because the forward is the adjoint of conv2d, the input gradient is a
    plain (bias-free) conv2d and the weight gradient reuses the conv2d
    weight-gradient kernel with the roles of input and output swapped.
    """
    w = filters.weights
    if grad_out.shape != (x.shape[0], x.shape[1], filters.in_channels):
        raise ShapeError("grad_out shape does not match conv_transpose2d output")
    kh, kw = w.shape[2:]
    pad = (kh - 1) // 2
    gp = _pad_reflect(grad_out, pad)
    patches = _patch_view(gp, kh, kw)
    gx = np.einsum("hwijc,ocij->hwo", patches, w, optimize=True)
    gw = np.einsum("hwijc,hwo->ocij", patches, x, optimize=True)
    gb = grad_out.sum(axis=(0, 1))
    return gx, gw, gb


# ---------------------------------------------------------------------------
# pointwise ops


def prelu(x: np.ndarray, slopes: np.ndarray) -> np.ndarray:
    """max(0, x) + slopes[c] * min(0, x), per channel."""
    check_image(x)
    slopes = np.asarray(slopes)
    if slopes.shape != (x.shape[2],):
        raise ShapeError(
            f"slopes length {slopes.shape} does not match {x.shape[2]} channels"
        )
    return np.maximum(x, 0.0) + slopes * np.minimum(x, 0.0)


def prelu_backward(grad_out: np.ndarray, x: np.ndarray, slopes: np.ndarray):
    """Gradients of prelu w.r.t. (input, slopes)."""
    if grad_out.shape != x.shape:
        raise ShapeError("grad_out shape does not match prelu input")
    gx = np.where(x > 0, grad_out, slopes * grad_out)
    gk = (np.minimum(x, 0.0) * grad_out).sum(axis=(0, 1))
    return gx, gk


def clip(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if lo >= hi:
        raise ValueError(f"clip bounds require lo < hi, got [{lo}, {hi}]")
    return np.clip(x, lo, hi)


def clip_backward(grad_out: np.ndarray, x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Pass-through strictly inside (lo, hi); zero at and beyond the bounds."""
    if grad_out.shape != x.shape:
        raise ShapeError("grad_out shape does not match clip input")
    inside = (x > lo) & (x < hi)
    return np.where(inside, grad_out, 0.0)
