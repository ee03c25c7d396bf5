"""Differentiable tensor operations for the segmentation network.

Tensors are numpy arrays of shape (N, C, H, W).  Every forward here has
an exact analytic backward; the test suite checks each one against
central finite differences.  Convolution dispatches to the selected
kernel backend; everything else is plain vectorized numpy.
"""

import numpy as np

from . import kernels
from .page_gt import LABEL_AMBIGUOUS


def _validate_tensor(x, name="tensor"):
    if not isinstance(x, np.ndarray) or x.ndim != 4:
        raise ValueError(f"{name} must be a 4-d (N, C, H, W) array")


def _pad_same(x, kh, kw):
    ph, pw = kh // 2, kw // 2
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


def conv2d_forward(x, w, b):
    """Same-padded stride-1 cross-correlation: x (N,Ci,H,W) * w (Co,Ci,kh,kw) + b."""
    _validate_tensor(x, "conv input")
    co, ci, kh, kw = w.shape
    if x.shape[1] != ci:
        raise ValueError(f"conv input has {x.shape[1]} channels, kernel expects {ci}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("conv kernels must have odd spatial dims for same padding")
    if b.shape != (co,):
        raise ValueError(f"bias must have shape ({co},), got {b.shape}")
    xp = _pad_same(x, kh, kw)
    return kernels.conv2d_forward(xp, w, b, x.shape[2], x.shape[3])


def conv2d_backward(x, w, dout):
    """Gradients of conv2d_forward w.r.t. input, kernel and bias."""
    _validate_tensor(dout, "conv grad")
    if dout.shape[2:] != x.shape[2:] or dout.shape[1] != w.shape[0]:
        raise ValueError("conv grad shape does not match forward output")
    xp = _pad_same(x, w.shape[2], w.shape[3])
    return kernels.conv2d_backward(xp, w, dout)


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(dout, x):
    return dout * (x > 0.0)


def maxpool2d_forward(x):
    """2x2 max pool, stride 2.  Returns (pooled, argmax indices).

    Ties go to the first maximal element in row-major window order.
    Requires even H and W.
    """
    _validate_tensor(x, "pool input")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool needs even spatial dims, got {h}x{w}")
    windows = (
        x.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )
    idx = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool2d_backward(dout, idx, in_shape):
    """Route each pooled gradient back to its window's argmax position."""
    n, c, h, w = in_shape
    dwin = np.zeros((n, c, h // 2, w // 2, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    return (
        dwin.reshape(n, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h, w)
    )


_matrix_cache = {}


def _bilinear_matrix(n_in, n_out, dtype):
    """Dense (n_out, n_in) interpolation matrix, half-pixel-center convention."""
    key = (n_in, n_out, np.dtype(dtype).str)
    mat = _matrix_cache.get(key)
    if mat is None:
        s = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        s = np.clip(s, 0.0, n_in - 1.0)
        i0 = np.floor(s).astype(np.intp)
        f = s - i0
        i1 = np.minimum(i0 + 1, n_in - 1)
        mat = np.zeros((n_out, n_in), dtype=np.float64)
        rows = np.arange(n_out)
        np.add.at(mat, (rows, i0), 1.0 - f)
        np.add.at(mat, (rows, i1), f)
        mat = np.ascontiguousarray(mat.astype(dtype))
        _matrix_cache[key] = mat
    return mat


def bilinear_upsample_forward(x, factor: int):
    """Fixed (non-learned) bilinear upsampling by an integer factor.

    Linear in x, so the backward is exactly the transposed map.  Uses
    the same half-pixel-center convention as imaging.resize_bilinear.
    """
    _validate_tensor(x, "upsample input")
    if factor < 1:
        raise ValueError(f"upsample factor must be >= 1, got {factor}")
    n, c, h, w = x.shape
    a = _bilinear_matrix(h, h * factor, x.dtype)
    bm = _bilinear_matrix(w, w * factor, x.dtype)
    flat = x.reshape(n * c, h, w)
    out = np.matmul(np.matmul(a, flat), bm.T)
    return out.reshape(n, c, h * factor, w * factor)


def bilinear_upsample_backward(dout, factor: int):
    """Transpose of bilinear_upsample_forward."""
    _validate_tensor(dout, "upsample grad")
    n, c, oh, ow = dout.shape
    h, w = oh // factor, ow // factor
    a = _bilinear_matrix(h, oh, dout.dtype)
    bm = _bilinear_matrix(w, ow, dout.dtype)
    flat = dout.reshape(n * c, oh, ow)
    dx = np.matmul(np.matmul(a.T, flat), bm)
    return dx.reshape(n, c, h, w)


def softmax(logits):
    """Channel-axis softmax of an (N, C, H, W) tensor, numerically stable."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_ce_masked(logits, labels):
    """Mean cross-entropy over non-ambiguous pixels, with its logit gradient.

    ``labels`` is (N, H, W) with class ids and LABEL_AMBIGUOUS where a
    pixel must not contribute; those pixels get zero loss and zero
    gradient.  An all-ambiguous batch yields loss 0 and gradient 0.
    """
    _validate_tensor(logits, "logits")
    if labels.shape != (logits.shape[0],) + logits.shape[2:]:
        raise ValueError(
            f"labels shape {labels.shape} does not match logits {logits.shape}"
        )
    valid = labels != LABEL_AMBIGUOUS
    n_valid = int(valid.sum())
    if n_valid == 0:
        return 0.0, np.zeros_like(logits)

    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    cls = np.where(valid, labels, 0).astype(np.intp)
    picked = np.take_along_axis(shifted, cls[:, None], axis=1)[:, 0]
    loss = float((logsumexp - picked)[valid].sum() / n_valid)

    n_cl = logits.shape[1]
    onehot = np.arange(n_cl).reshape(1, n_cl, 1, 1) == cls[:, None]
    dlogits = softmax(logits) - onehot
    dlogits *= valid[:, None].astype(logits.dtype) / n_valid
    return loss, dlogits


def sgd_momentum_step(params, grads, velocity, lr: float, momentum: float):
    """In-place SGD with classical momentum: v = mu*v + g; p -= lr*v.

    ``params``, ``grads`` and ``velocity`` are dicts keyed by parameter
    name.  Returns ``params`` for convenience.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    for name, p in params.items():
        v = velocity[name]
        v *= momentum
        v += grads[name]
        p -= lr * v
    return params
