"""Pure-numpy kernel backend: im2col + BLAS matmul convolutions.

Same contract as the compiled backend (_kernels_cy): 3x3 stride-1
same-padding convolutions and 2x2 stride-2 max pooling, forward and
backward, dtype-preserving for float32/float64. The 3x3 patch matrix is
materialized once per call so both GEMMs (forward, weight gradient) run on
contiguous operands.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "numpy"


def _im2col_matrix(x: np.ndarray) -> np.ndarray:
    """Contiguous (B*H*W, C*9) patch matrix of the 1-padded input."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    # (B, C, H, W, 3, 3) view -> (B, H, W, C, 3, 3) -> one copy into 2-D.
    cols = sliding_window_view(xp, (3, 3), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5)
    return cols.reshape(b * h * w, c * 9)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    bs, c, h, wd = x.shape
    o = w.shape[0]
    cols = _im2col_matrix(x)
    y = cols @ w.reshape(o, c * 9).T + b
    return np.ascontiguousarray(y.reshape(bs, h, wd, o).transpose(0, 3, 1, 2))


def conv2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    bs, c, h, wd = x.shape
    o = w.shape[0]
    db = dy.sum(axis=(0, 2, 3))
    dy_mat = np.ascontiguousarray(dy.transpose(0, 2, 3, 1)).reshape(bs * h * wd, o)
    cols = _im2col_matrix(x)
    dw = (dy_mat.T @ cols).reshape(o, c, 3, 3)
    # dx: route dy through the kernel taps, accumulating the 9 shifted views.
    dcols = (dy_mat @ w.reshape(o, c * 9)).reshape(bs, h, wd, c, 3, 3)
    dxp = np.zeros((bs, c, h + 2, wd + 2), dtype=x.dtype)
    for p in range(3):
        for q in range(3):
            dxp[:, :, p : p + h, q : q + wd] += dcols[:, :, :, :, p, q].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dxp[:, :, 1 : h + 1, 1 : wd + 1]), dw, db


def maxpool2x2_forward(x: np.ndarray):
    """Returns (pooled, switches); switches hold the row-major in-window
    argmax index 0..3, first maximum winning."""
    h2, w2 = x.shape[2] // 2, x.shape[3] // 2
    he, we = 2 * h2, 2 * w2
    quads = np.stack(
        (
            x[:, :, 0:he:2, 0:we:2],
            x[:, :, 0:he:2, 1:we:2],
            x[:, :, 1:he:2, 0:we:2],
            x[:, :, 1:he:2, 1:we:2],
        ),
        axis=-1,
    )
    switches = np.argmax(quads, axis=-1).astype(np.uint8)
    pooled = np.take_along_axis(quads, switches[..., None], axis=-1)[..., 0]
    return pooled, switches


def maxpool2x2_backward(switches: np.ndarray, dy: np.ndarray, in_h: int, in_w: int):
    b, c, h2, w2 = dy.shape
    quads = np.zeros((b, c, h2, w2, 4), dtype=dy.dtype)
    np.put_along_axis(quads, switches[..., None].astype(np.intp), dy[..., None], axis=-1)
    dx = np.zeros((b, c, in_h, in_w), dtype=dy.dtype)
    he, we = 2 * h2, 2 * w2
    dx[:, :, 0:he:2, 0:we:2] = quads[..., 0]
    dx[:, :, 0:he:2, 1:we:2] = quads[..., 1]
    dx[:, :, 1:he:2, 0:we:2] = quads[..., 2]
    dx[:, :, 1:he:2, 1:we:2] = quads[..., 3]
    return dx
