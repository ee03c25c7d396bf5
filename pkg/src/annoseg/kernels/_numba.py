"""Numba @njit implementations of the hot kernels.

Same contracts as kernels._numpy (see that module's docstring).  The row
loops are prange-parallel; every output element is still accumulated in
a fixed order, so results do not depend on the thread count.  The input
gradient reuses the forward kernel on the flipped, channel-transposed
weights; the weight gradient needs fastmath so its reduction can SIMD.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def _conv2d_forward(xp, w, b, out):
    n, co, out_h, out_w = out.shape
    ci, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    for img in range(n):
        for oy in prange(co * out_h):
            c = oy // out_h
            y = oy % out_h
            row = out[img, c, y]
            for x in range(out_w):
                row[x] = b[c]
            for ic in range(ci):
                for ky in range(kh):
                    xrow = xp[img, ic, y + ky]
                    for kx in range(kw):
                        wv = w[c, ic, ky, kx]
                        for x in range(out_w):
                            row[x] += wv * xrow[x + kx]


@njit(parallel=True, fastmath=True, cache=True)
def _conv2d_backward_dw(xp, dout, dw):
    n, co, out_h, out_w = dout.shape
    ci, kh, kw = dw.shape[1], dw.shape[2], dw.shape[3]
    for c in prange(co):
        for ic in range(ci):
            for ky in range(kh):
                for kx in range(kw):
                    acc = 0.0
                    for img in range(n):
                        for y in range(out_h):
                            grow = dout[img, c, y]
                            xrow = xp[img, ic, y + ky]
                            for x in range(out_w):
                                acc += grow[x] * xrow[x + kx]
                    dw[c, ic, ky, kx] = acc


def conv2d_forward(xp, w, b, out_h, out_w):
    out = np.empty((xp.shape[0], w.shape[0], out_h, out_w), dtype=xp.dtype)
    _conv2d_forward(xp, w, b, out)
    return out


def conv2d_backward(xp, w, dout):
    n, co, out_h, out_w = dout.shape
    ci, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    ph, pw = kh // 2, kw // 2

    db = dout.sum(axis=(0, 2, 3))

    dw = np.empty_like(w)
    _conv2d_backward_dw(xp, dout, dw)

    # dx = conv(dout, w flipped and in/out channels swapped), zero bias
    dout_p = np.zeros((n, co, out_h + kh - 1, out_w + kw - 1), dtype=dout.dtype)
    dout_p[:, :, ph:ph + out_h, pw:pw + out_w] = dout
    w_t = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    dx = np.empty((n, ci, out_h, out_w), dtype=xp.dtype)
    _conv2d_forward(dout_p, w_t, np.zeros(ci, dtype=w.dtype), dx)
    return dx, dw, db


@njit(cache=True)
def _polygon_mask(xs, ys, x0, y0, mask):
    h, w = mask.shape
    nv = len(xs)
    for i in range(h):
        py = y0 + i
        for j in range(w):
            px = x0 + j
            parity = False
            on_edge = False
            for e in range(nv):
                f = e + 1
                if f == nv:
                    f = 0
                x1, y1, x2, y2 = xs[e], ys[e], xs[f], ys[f]
                dy = y2 - y1
                dx = x2 - x1
                if dy != 0 and ((y1 > py) != (y2 > py)):
                    lhs = (px - x1) * dy
                    rhs = (py - y1) * dx
                    if (lhs < rhs) if dy > 0 else (lhs > rhs):
                        parity = not parity
                cross = dx * (py - y1) - dy * (px - x1)
                if cross == 0:
                    xlo = min(x1, x2)
                    xhi = max(x1, x2)
                    ylo = min(y1, y2)
                    yhi = max(y1, y2)
                    if xlo <= px <= xhi and ylo <= py <= yhi:
                        on_edge = True
                        break
            mask[i, j] = parity or on_edge


def polygon_mask_kernel(pts, x0, y0, h, w):
    xs = np.ascontiguousarray(pts[:, 0], dtype=np.int64)
    ys = np.ascontiguousarray(pts[:, 1], dtype=np.int64)
    mask = np.empty((h, w), dtype=np.bool_)
    _polygon_mask(xs, ys, int(x0), int(y0), mask)
    return mask
