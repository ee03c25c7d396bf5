"""Pure-numpy implementations of the hot kernels.

Shared contracts (both backends implement exactly these):

conv2d_forward(xp, w, b, out_h, out_w)
    xp:  (N, Ci, out_h + kh - 1, out_w + kw - 1) input, already zero-padded
         for "same" output at stride 1 (odd kernels).
    w:   (Co, Ci, kh, kw) cross-correlation weights, b: (Co,).
    Returns (N, Co, out_h, out_w), same dtype as xp.

conv2d_backward(xp, w, dout)
    Gradients of sum(dout * conv2d_forward(xp, w, b)) w.r.t. the unpadded
    input, w and b.  Returns (dx, dw, db) with dx of shape
    (N, Ci, out_h, out_w).

polygon_mask_kernel(pts, x0, y0, h, w)
    pts: (V, 2) int64 closed-or-open vertex list in (x, y) order.
    Returns an (h, w) bool mask over pixel centers (x0 + j, y0 + i):
    True where the point is strictly inside by the even-odd rule or
    exactly on an edge.  All tests are exact integer arithmetic.
"""

import numpy as np


def conv2d_forward(xp, w, b, out_h, out_w):
    n = xp.shape[0]
    co, ci, kh, kw = w.shape
    out = np.empty((n, co, out_h, out_w), dtype=xp.dtype)
    out[:] = b[None, :, None, None]
    for ky in range(kh):
        for kx in range(kw):
            xs = xp[:, :, ky:ky + out_h, kx:kx + out_w]
            # (co,ci) x (n,ci,h,w) -> (co,n,h,w)
            contrib = np.tensordot(w[:, :, ky, kx], xs, axes=([1], [1]))
            out += contrib.transpose(1, 0, 2, 3)
    return out


def conv2d_backward(xp, w, dout):
    n, co, out_h, out_w = dout.shape
    ci, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    ph, pw = kh // 2, kw // 2

    db = dout.sum(axis=(0, 2, 3))
    dw = np.empty_like(w)
    dxp = np.zeros_like(xp)
    for ky in range(kh):
        for kx in range(kw):
            xs = xp[:, :, ky:ky + out_h, kx:kx + out_w]
            dw[:, :, ky, kx] = np.tensordot(dout, xs, axes=([0, 2, 3], [0, 2, 3]))
            # (ci,co) x (n,co,h,w) -> (ci,n,h,w)
            contrib = np.tensordot(w[:, :, ky, kx].T, dout, axes=([1], [1]))
            dxp[:, :, ky:ky + out_h, kx:kx + out_w] += contrib.transpose(1, 0, 2, 3)
    dx = dxp[:, :, ph:ph + out_h, pw:pw + out_w]
    return np.ascontiguousarray(dx), dw, db


def polygon_mask_kernel(pts, x0, y0, h, w):
    xs = pts[:, 0].astype(np.int64)
    ys = pts[:, 1].astype(np.int64)
    nv = len(xs)

    gx = x0 + np.arange(w, dtype=np.int64)[None, :]   # (1, w)
    gy = y0 + np.arange(h, dtype=np.int64)[:, None]   # (h, 1)

    parity = np.zeros((h, w), dtype=bool)
    on_edge = np.zeros((h, w), dtype=bool)
    for i in range(nv):
        j = (i + 1) % nv
        x1, y1, x2, y2 = xs[i], ys[i], xs[j], ys[j]
        dy = y2 - y1
        dx = x2 - x1
        if dy != 0:
            crosses = (y1 > gy) != (y2 > gy)          # (h, 1)
            lhs = (gx - x1) * dy                      # (1, w)
            rhs = (gy - y1) * dx                      # (h, 1)
            flip = (lhs < rhs) if dy > 0 else (lhs > rhs)
            parity ^= crosses & flip
        cross = dx * (gy - y1) - dy * (gx - x1)
        in_box = (
            (gx >= min(x1, x2)) & (gx <= max(x1, x2))
            & (gy >= min(y1, y2)) & (gy <= max(y1, y2))
        )
        on_edge |= (cross == 0) & in_box
    return parity | on_edge
