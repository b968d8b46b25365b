"""Attention masks for the fused global/local attention.

The global branch sees the address top-down: position i may attend only to
positions <= i, matching how allocation of a nybble never depends on later
nybbles. The local branch partitions the sequence into fixed blocks of
`window` positions with full bidirectional attention inside each block; the
per-layer window grows 2, 2, 4, 4, ... up to the sequence length.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidWindow


def global_mask(seq_len: int) -> np.ndarray:
    """Lower-triangular inclusive boolean mask: row i permits columns <= i."""
    if seq_len < 1:
        raise ValueError(f"seq_len must be >= 1, got {seq_len}")
    return np.tril(np.ones((seq_len, seq_len), dtype=bool))


def local_mask(seq_len: int, window: int) -> np.ndarray:
    """Block-diagonal boolean mask: i and j see each other iff same block."""
    if seq_len < 1:
        raise ValueError(f"seq_len must be >= 1, got {seq_len}")
    if window < 1 or seq_len % window != 0:
        raise InvalidWindow(f"window {window} must divide seq_len {seq_len}")
    blocks = np.arange(seq_len) // window
    return blocks[:, None] == blocks[None, :]


def default_window_schedule(n_layers: int, seq_len: int) -> tuple[int, ...]:
    """Window doubling every two layers from 2, capped at seq_len."""
    return tuple(min(2 << (layer // 2), seq_len) for layer in range(n_layers))
