# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled masked attention kernels.

Same contract as kernels.pure, fused into single C loops per head: scores,
masked softmax and the value product happen without intermediate (B,H,S,S)
temporaries beyond the returned weight tensor. Forbidden key columns are
skipped outright, never touched.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp


def attention_forward(double[:, :, :, ::1] q, double[:, :, :, ::1] k,
                      double[:, :, :, ::1] v, cnp.uint8_t[:, ::1] mask,
                      double scale, object drop_mask=None,
                      double drop_scale=1.0):
    cdef Py_ssize_t B = q.shape[0], H = q.shape[1], S = q.shape[2], Dh = q.shape[3]
    out_arr = np.zeros((B, H, S, Dh), dtype=np.float64)
    p_arr = np.zeros((B, H, S, S), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef double[:, :, :, ::1] p = p_arr
    cdef double[:, :, :, ::1] dm
    cdef bint has_drop = drop_mask is not None
    if has_drop:
        dm = drop_mask
    row_arr = np.empty(S, dtype=np.float64)
    cdef double[::1] row = row_arr
    cdef Py_ssize_t b, h, i, j, d
    cdef double s, mx, den, w

    for b in range(B):
        for h in range(H):
            for i in range(S):
                mx = -INFINITY
                for j in range(S):
                    if mask[i, j]:
                        s = 0.0
                        for d in range(Dh):
                            s += q[b, h, i, d] * k[b, h, j, d]
                        s *= scale
                        row[j] = s
                        if s > mx:
                            mx = s
                den = 0.0
                for j in range(S):
                    if mask[i, j]:
                        row[j] = exp(row[j] - mx)
                        den += row[j]
                for j in range(S):
                    if mask[i, j]:
                        w = row[j] / den
                        p[b, h, i, j] = w
                        if has_drop:
                            w *= dm[b, h, i, j] * drop_scale
                        if w != 0.0:
                            for d in range(Dh):
                                out[b, h, i, d] += w * v[b, h, j, d]
    return out_arr, p_arr


def attention_backward(double[:, :, :, ::1] q, double[:, :, :, ::1] k,
                       double[:, :, :, ::1] v, double[:, :, :, ::1] p,
                       double[:, :, :, ::1] d_out, cnp.uint8_t[:, ::1] mask,
                       double scale, object drop_mask=None,
                       double drop_scale=1.0):
    cdef Py_ssize_t B = q.shape[0], H = q.shape[1], S = q.shape[2], Dh = q.shape[3]
    dq_arr = np.zeros((B, H, S, Dh), dtype=np.float64)
    dk_arr = np.zeros((B, H, S, Dh), dtype=np.float64)
    dv_arr = np.zeros((B, H, S, Dh), dtype=np.float64)
    cdef double[:, :, :, ::1] dq = dq_arr
    cdef double[:, :, :, ::1] dk = dk_arr
    cdef double[:, :, :, ::1] dv = dv_arr
    cdef double[:, :, :, ::1] dm
    cdef bint has_drop = drop_mask is not None
    if has_drop:
        dm = drop_mask
    dp_arr = np.empty(S, dtype=np.float64)
    cdef double[::1] dp = dp_arr
    cdef Py_ssize_t b, h, i, j, d
    cdef double acc, keep, pd, ds

    for b in range(B):
        for h in range(H):
            for i in range(S):
                acc = 0.0
                for j in range(S):
                    if mask[i, j]:
                        dp[j] = 0.0
                        for d in range(Dh):
                            dp[j] += d_out[b, h, i, d] * v[b, h, j, d]
                        if has_drop:
                            keep = dm[b, h, i, j] * drop_scale
                            dp[j] *= keep
                            pd = p[b, h, i, j] * keep
                        else:
                            pd = p[b, h, i, j]
                        for d in range(Dh):
                            dv[b, h, j, d] += pd * d_out[b, h, i, d]
                        acc += dp[j] * p[b, h, i, j]
                for j in range(S):
                    if mask[i, j]:
                        ds = p[b, h, i, j] * (dp[j] - acc) * scale
                        for d in range(Dh):
                            dq[b, h, i, d] += ds * k[b, h, j, d]
                            dk[b, h, j, d] += ds * q[b, h, i, d]
    return dq_arr, dk_arr, dv_arr
