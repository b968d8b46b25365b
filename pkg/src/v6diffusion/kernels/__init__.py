"""Attention kernel backend selection.

The compiled Cython kernels are used when the extension built; otherwise the
pure-numpy implementation takes over transparently. Both share one contract
(see `pure`). Selection can be forced with the environment variable
``V6DIFFUSION_KERNELS=python|cython`` or at runtime via `set_backend`, which
the backend-equivalence tests and the benchmark rely on.
"""

from __future__ import annotations

import os

import numpy as np

from . import pure

try:
    from . import _attn_cy
except ImportError:
    _attn_cy = None

_env = os.environ.get("V6DIFFUSION_KERNELS", "").strip().lower()
if _env == "python":
    _backend = "python"
elif _env == "cython":
    if _attn_cy is None:
        raise ImportError("V6DIFFUSION_KERNELS=cython but the extension is not built")
    _backend = "cython"
else:
    _backend = "cython" if _attn_cy is not None else "python"


def backend_name() -> str:
    return _backend


def available_backends() -> tuple[str, ...]:
    return ("python", "cython") if _attn_cy is not None else ("python",)


def set_backend(name: str) -> None:
    global _backend
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    _backend = name


def _as_c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def attention_forward(q, k, v, mask, scale, drop_mask=None, drop_scale=1.0):
    if _backend == "python":
        return pure.attention_forward(q, k, v, mask, scale, drop_mask, drop_scale)
    return _attn_cy.attention_forward(
        _as_c(q), _as_c(k), _as_c(v), _mask_u8(mask), float(scale),
        None if drop_mask is None else _as_c(drop_mask), float(drop_scale))


def attention_backward(q, k, v, p, d_out, mask, scale, drop_mask=None, drop_scale=1.0):
    if _backend == "python":
        return pure.attention_backward(q, k, v, p, d_out, mask, scale, drop_mask, drop_scale)
    return _attn_cy.attention_backward(
        _as_c(q), _as_c(k), _as_c(v), _as_c(p), _as_c(d_out), _mask_u8(mask),
        float(scale), None if drop_mask is None else _as_c(drop_mask), float(drop_scale))


def _mask_u8(mask):
    m = np.ascontiguousarray(mask)
    return m.view(np.uint8) if m.dtype == np.bool_ else m.astype(np.uint8)
