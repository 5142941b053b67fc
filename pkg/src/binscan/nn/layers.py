"""Layer primitives on NHWC numpy arrays.

Forward functions return ``(output, cache)``; backward functions take the
upstream gradient and that cache. Unbatched inputs (H, W, C) are accepted
and returned unbatched.
"""
from __future__ import annotations

import numpy as np

from ..errors import BadLabel, OddDimension, ShapeMismatch


def _batched(x: np.ndarray, rank: int) -> tuple[np.ndarray, bool]:
    if x.ndim == rank - 1:
        return x[np.newaxis], True
    if x.ndim != rank:
        raise ShapeMismatch(f"expected rank {rank - 1} or {rank} input, got shape {x.shape}")
    return x, False


def _im2col3x3(x: np.ndarray) -> np.ndarray:
    """(N, H, W, C) -> (N*H*W, 9*C) patches of the zero-padded input, ordered (dy, dx, c)."""
    n, h, w, c = x.shape
    xp = np.zeros((n, h + 2, w + 2, c), dtype=x.dtype)
    xp[:, 1:-1, 1:-1, :] = x
    cols = np.empty((n, h, w, 3, 3, c), dtype=x.dtype)
    for dy in range(3):
        for dx in range(3):
            cols[:, :, :, dy, dx, :] = xp[:, dy:dy + h, dx:dx + w, :]
    return cols.reshape(n * h * w, 9 * c)


def conv2d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray):
    """3x3 convolution, stride 1, same padding.

    out[y, x, o] = bias[o] + sum over (dy, dx, c) of
    in[y+dy-1, x+dx-1, c] * weights[dy, dx, c, o], zero outside the image.
    """
    x, squeeze = _batched(x, 4)
    if weights.ndim != 4 or weights.shape[:2] != (3, 3):
        raise ShapeMismatch(f"kernel must be (3, 3, Cin, Cout), got {weights.shape}")
    cin, cout = weights.shape[2:]
    if x.shape[3] != cin:
        raise ShapeMismatch(f"input has {x.shape[3]} channels, kernel expects {cin}")
    if bias.shape != (cout,):
        raise ShapeMismatch(f"bias must have shape ({cout},), got {bias.shape}")
    n, h, w, _ = x.shape
    cols = _im2col3x3(x)
    out = cols @ weights.reshape(9 * cin, cout)
    out += bias
    out = out.reshape(n, h, w, cout)
    cache = (x.shape, cols, weights, squeeze)
    return (out[0] if squeeze else out), cache


def conv2d_backward(grad_out: np.ndarray, cache, need_input_grad: bool = True):
    """Returns (grad_input, grad_weights, grad_bias); grad_input is None when not needed."""
    in_shape, cols, weights, squeeze = cache
    n, h, w, cin = in_shape
    cout = weights.shape[3]
    g = grad_out[np.newaxis] if squeeze else grad_out
    if g.shape != (n, h, w, cout):
        raise ShapeMismatch(f"grad_out shape {grad_out.shape} does not match forward output")
    g2 = g.reshape(n * h * w, cout)
    grad_w = (cols.T @ g2).reshape(weights.shape)
    grad_b = g2.sum(axis=0)
    grad_in = None
    if need_input_grad:
        dcols = (g2 @ weights.reshape(9 * cin, cout).T).reshape(n, h, w, 3, 3, cin)
        dxp = np.zeros((n, h + 2, w + 2, cin), dtype=g.dtype)
        for dy in range(3):
            for dx in range(3):
                dxp[:, dy:dy + h, dx:dx + w, :] += dcols[:, :, :, dy, dx, :]
        grad_in = dxp[:, 1:-1, 1:-1, :]
        if squeeze:
            grad_in = grad_in[0]
    return grad_in, grad_w, grad_b


def maxpool_forward(x: np.ndarray):
    """2x2 max pooling with stride 2; ties go to the first cell in row-major order."""
    x, squeeze = _batched(x, 4)
    n, h, w, c = x.shape
    if h % 2 or w % 2:
        raise OddDimension(f"pooling needs even spatial dims, got {h}x{w}")
    out = np.maximum(x[:, 0::2, 0::2], x[:, 0::2, 1::2])
    np.maximum(out, x[:, 1::2, 0::2], out=out)
    np.maximum(out, x[:, 1::2, 1::2], out=out)
    cache = (x, out, squeeze)
    return (out[0] if squeeze else out), cache


# window cells in row-major order, which is also the tie-break order
_POOL_CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))


def maxpool_backward(grad_out: np.ndarray, cache) -> np.ndarray:
    x, out, squeeze = cache
    g = grad_out[np.newaxis] if squeeze else grad_out
    if g.shape != out.shape:
        raise ShapeMismatch(f"grad_out shape {grad_out.shape} does not match pooled output")
    grad_in = np.zeros_like(x, dtype=g.dtype)
    unclaimed = np.ones(out.shape, dtype=bool)
    for a, b in _POOL_CELLS:
        hit = x[:, a::2, b::2] == out
        hit &= unclaimed
        unclaimed &= ~hit
        np.multiply(g, hit, out=grad_in[:, a::2, b::2])
    return grad_in[0] if squeeze else grad_in


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray):
    """out = x @ weights + bias for x of shape (N,) or (B, N)."""
    x, squeeze = _batched(x, 2)
    if weights.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise ShapeMismatch(f"cannot apply {weights.shape} weights to input {x.shape}")
    if bias.shape != (weights.shape[1],):
        raise ShapeMismatch(f"bias must have shape ({weights.shape[1]},), got {bias.shape}")
    out = x @ weights
    out += bias
    return (out[0] if squeeze else out), (x, weights, squeeze)


def dense_backward(grad_out: np.ndarray, cache, need_input_grad: bool = True):
    x, weights, squeeze = cache
    g = grad_out[np.newaxis] if squeeze else grad_out
    if g.shape != (x.shape[0], weights.shape[1]):
        raise ShapeMismatch(f"grad_out shape {grad_out.shape} does not match dense output")
    grad_w = x.T @ g
    grad_b = g.sum(axis=0)
    grad_in = None
    if need_input_grad:
        grad_in = g @ weights.T
        if squeeze:
            grad_in = grad_in[0]
    return grad_in, grad_w, grad_b


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(grad_out: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return grad_out * mask


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, labels):
    """Softmax cross-entropy.

    For a single logit vector and integer label returns (loss, probs, grad)
    with grad = probs - onehot. For a batch (B, C) with B labels the loss
    and gradient are averaged over the batch.
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    lg = logits[np.newaxis] if single else logits
    lab = np.atleast_1d(np.asarray(labels))
    c = lg.shape[1]
    if c < 2:
        raise ShapeMismatch("need at least two classes")
    if lab.shape != (lg.shape[0],):
        raise ShapeMismatch(f"{lab.shape[0]} labels for {lg.shape[0]} rows")
    if np.any(lab < 0) or np.any(lab >= c):
        raise BadLabel(f"labels must lie in [0, {c}), got {lab.tolist()}")
    z = lg - lg.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(lg.shape[0])
    losses = logsum - z[rows, lab]
    probs = np.exp(z - logsum[:, None])
    grad = probs.copy()
    grad[rows, lab] -= 1.0
    if single:
        return float(losses[0]), probs[0], grad[0]
    b = lg.shape[0]
    return float(losses.mean()), probs, grad / b
