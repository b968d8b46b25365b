"""Pure-numpy masked attention kernels (reference backend).

Forbidden key columns get exactly zero weight: their scores are set to -inf
before the row softmax, so exp() yields literal zeros and the value rows of
masked positions cannot perturb the output even at the bit level.
"""

from __future__ import annotations

import numpy as np


def attention_forward(q, k, v, mask, scale, drop_mask=None, drop_scale=1.0):
    """Masked softmax attention over (B, H, S, Dh) head tensors.

    Returns (out, p) with p the post-softmax weights before dropout; p is
    needed again on the backward pass.
    """
    scores = np.matmul(q, k.swapaxes(-1, -2)) * scale
    scores = np.where(mask, scores, -np.inf)
    m = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - m)
    p = e / e.sum(axis=-1, keepdims=True)
    pd = p if drop_mask is None else p * (drop_mask * drop_scale)
    out = np.matmul(pd, v)
    return out, p


def attention_backward(q, k, v, p, d_out, mask, scale, drop_mask=None, drop_scale=1.0):
    """Gradients w.r.t. q, k, v given cached softmax weights p."""
    if drop_mask is None:
        pd = p
        dp = np.matmul(d_out, v.swapaxes(-1, -2))
    else:
        keep = drop_mask * drop_scale
        pd = p * keep
        dp = np.matmul(d_out, v.swapaxes(-1, -2)) * keep
    dv = np.matmul(pd.swapaxes(-1, -2), d_out)
    ds = p * (dp - (dp * p).sum(axis=-1, keepdims=True))
    dq = np.matmul(ds, k) * scale
    dk = np.matmul(ds.swapaxes(-1, -2), q) * scale
    return dq, dk, dv
