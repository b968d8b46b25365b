"""The denoising network.

A pre-norm Transformer encoder over the 32 nybble positions whose attention
is the fused global/local kind: each layer runs one multi-head attention
under the top-down (lower-triangular) mask and one under the block-window
mask of that layer's window size, concatenates the two per-position outputs
and projects back to model width. Input is the noised latent plus a learned
position table and a sinusoidal timestep vector; output is the predicted
noise, same shape as the latent.

Forward and backward passes are written out by hand in numpy (float64) so
gradients can be checked against finite differences; the masked-attention
inner loops dispatch to the compiled kernels when built.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeMismatch
from .masks import default_window_schedule, global_mask, local_mask

CHECKPOINT_VERSION = 1

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715


@dataclass(frozen=True)
class ModelConfig:
    d_embed: int = 64
    d_ff: int = 512
    n_layers: int = 10
    n_heads_global: int = 2
    n_heads_local: int = 2
    seq_len: int = 32
    vocab: int = 16
    dropout: float = 0.1
    window_schedule: tuple = ()

    def __post_init__(self):
        if not self.window_schedule:
            object.__setattr__(self, "window_schedule",
                               default_window_schedule(self.n_layers, self.seq_len))
        else:
            object.__setattr__(self, "window_schedule", tuple(self.window_schedule))
        if len(self.window_schedule) != self.n_layers:
            raise ValueError("window_schedule length must equal n_layers")
        for w in self.window_schedule:
            if w < 1 or self.seq_len % w != 0:
                raise ValueError(f"window {w} must divide seq_len {self.seq_len}")
        if self.d_embed % self.n_heads_global or self.d_embed % self.n_heads_local:
            raise ValueError("d_embed must be divisible by both head counts")
        if self.d_embed % 2:
            raise ValueError("d_embed must be even (sinusoidal timestep halves)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return {
            "d_embed": self.d_embed, "d_ff": self.d_ff, "n_layers": self.n_layers,
            "n_heads_global": self.n_heads_global, "n_heads_local": self.n_heads_local,
            "seq_len": self.seq_len, "vocab": self.vocab, "dropout": self.dropout,
            "window_schedule": list(self.window_schedule),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["window_schedule"] = tuple(d.get("window_schedule") or ())
        return cls(**d)


def parameter_count(cfg: ModelConfig) -> int:
    """Closed-form parameter total; tests pin it against the actual arrays."""
    D, F, L = cfg.d_embed, cfg.d_ff, cfg.n_layers
    per_layer = 10 * D * D + 2 * D * F + 14 * D + F
    return cfg.vocab * D + cfg.seq_len * D + L * per_layer + D * D + D


def timestep_embedding(t, d_embed: int) -> np.ndarray:
    """Sinusoidal step encoding: first half sines, second half cosines."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = d_embed // 2
    denom = max(half - 1, 1)
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float64) / denom)
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


# ---------------------------------------------------------------------------
# primitive ops, forward + backward

def _linear_fwd(x, w, b):
    return x @ w + b, (x, w)


def _linear_bwd(dy, cache):
    x, w = cache
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dw = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = (dy2 @ w.T).reshape(x.shape)
    return dx, dw, db


def _ln_fwd(x, g, b, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xh = xc * inv
    return xh * g + b, (xh, inv, g)


def _ln_bwd(dy, cache):
    xh, inv, g = cache
    axes = tuple(range(dy.ndim - 1))
    dg = (dy * xh).sum(axis=axes)
    db = dy.sum(axis=axes)
    dxh = dy * g
    dx = inv * (dxh - dxh.mean(axis=-1, keepdims=True)
                - xh * (dxh * xh).mean(axis=-1, keepdims=True))
    return dx, dg, db


def _gelu_fwd(u):
    # tanh form of gelu; smooth everywhere, which the gradient check needs
    inner = u * u
    inner *= u
    inner *= _GELU_A
    inner += u
    inner *= _GELU_C
    th = np.tanh(inner)
    y = th + 1.0
    y *= u
    y *= 0.5
    return y, (u, th)


def _gelu_bwd(dy, cache):
    u, th = cache
    u2 = u * u
    d_inner = u2
    d_inner *= 3.0 * _GELU_A
    d_inner += 1.0
    d_inner *= _GELU_C
    # g' = 0.5 (1 + th) + 0.5 u (1 - th^2) d_inner
    sech2 = th * th
    np.subtract(1.0, sech2, out=sech2)
    sech2 *= d_inner
    sech2 *= u
    sech2 += th
    sech2 += 1.0
    sech2 *= 0.5
    sech2 *= dy
    return sech2


def _split_heads(x, n_heads):
    b, s, d = x.shape
    return np.ascontiguousarray(x.reshape(b, s, n_heads, d // n_heads).transpose(0, 2, 1, 3))


def _merge_heads(x):
    b, h, s, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, s, h * dh)


def _attend(q, k, v, mask, n_heads, drop_mask, drop_scale):
    """Head split, masked attention, head merge. Returns output and cache."""
    dh = q.shape[-1] // n_heads
    scale = 1.0 / np.sqrt(dh)
    qh, kh, vh = (_split_heads(a, n_heads) for a in (q, k, v))
    out_h, p = kernels.attention_forward(qh, kh, vh, mask, scale, drop_mask, drop_scale)
    return _merge_heads(out_h), (qh, kh, vh, p, mask, scale, drop_mask, drop_scale)


def _attend_bwd(d_merged, cache):
    qh, kh, vh, p, mask, scale, drop_mask, drop_scale = cache
    n_heads = qh.shape[1]
    d_out_h = _split_heads(d_merged, n_heads)
    dqh, dkh, dvh = kernels.attention_backward(qh, kh, vh, p, d_out_h, mask,
                                               scale, drop_mask, drop_scale)
    return _merge_heads(dqh), _merge_heads(dkh), _merge_heads(dvh)


class DenoiserModel:
    """Parameters plus the forward/backward machinery."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        s = config.seq_len
        self._gmask = global_mask(s)
        self._lmasks = [local_mask(s, w) for w in config.window_schedule]

    # -- construction -------------------------------------------------------

    @classmethod
    def initialize(cls, config: ModelConfig, rng: np.random.Generator) -> "DenoiserModel":
        D, F = config.d_embed, config.d_ff

        def u(shape, fan_in):
            return rng.uniform(-1.0, 1.0, size=shape) / np.sqrt(fan_in)

        p: dict[str, np.ndarray] = {
            "tok_emb": u((config.vocab, D), 1.0),
            "pos_emb": u((config.seq_len, D), D),
        }
        for layer in range(config.n_layers):
            base = f"layers.{layer}"
            p[f"{base}.ln1.g"] = np.ones(D)
            p[f"{base}.ln1.b"] = np.zeros(D)
            for br in ("global", "local"):
                for name in ("wq", "wk", "wv", "wo"):
                    p[f"{base}.{br}.{name}"] = u((D, D), D)
                for name in ("bq", "bk", "bv", "bo"):
                    p[f"{base}.{br}.{name}"] = np.zeros(D)
            p[f"{base}.fuse.w"] = u((2 * D, D), 2 * D)
            p[f"{base}.fuse.b"] = np.zeros(D)
            p[f"{base}.ln2.g"] = np.ones(D)
            p[f"{base}.ln2.b"] = np.zeros(D)
            p[f"{base}.ff.w1"] = u((D, F), D)
            p[f"{base}.ff.b1"] = np.zeros(F)
            p[f"{base}.ff.w2"] = u((F, D), F)
            p[f"{base}.ff.b2"] = np.zeros(D)
        p["head.w"] = u((D, D), D)
        p["head.b"] = np.zeros(D)
        return cls(config, p)

    @property
    def n_parameters(self) -> int:
        return sum(a.size for a in self.params.values())

    def global_attention_mask(self) -> np.ndarray:
        return self._gmask

    def local_attention_mask(self, layer: int) -> np.ndarray:
        return self._lmasks[layer]

    # -- embedding ----------------------------------------------------------

    def token_latents(self, tokens: np.ndarray) -> np.ndarray:
        """x_0: raw token-embedding rows, no position/timestep added."""
        return self.params["tok_emb"][np.asarray(tokens, dtype=np.int64)]

    def embed_input(self, x, t) -> np.ndarray:
        """Latent (or token ids) plus position table plus timestep vector."""
        x = np.asarray(x)
        if np.issubdtype(x.dtype, np.integer):
            x = self.token_latents(x)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        b, s, d = x.shape
        if s != self.config.seq_len or d != self.config.d_embed:
            raise ShapeMismatch(f"latent shape {x.shape[1:]} does not match "
                                f"({self.config.seq_len}, {self.config.d_embed})")
        temb = timestep_embedding(t, d)
        if temb.shape[0] not in (1, b):
            raise ShapeMismatch(f"{temb.shape[0]} timesteps for batch of {b}")
        h = x + self.params["pos_emb"][None, :, :] + temb[:, None, :]
        return h[0] if squeeze else h

    # -- attention layer (exposed for mask/causality tests) ------------------

    _QKV = ("global.wq", "global.wk", "global.wv", "local.wq", "local.wk", "local.wv")
    _QKV_B = ("global.bq", "global.bk", "global.bv", "local.bq", "local.bk", "local.bv")

    def glf_msa_layer(self, x, layer: int, *, global_mask_override=None,
                      local_mask_override=None, drop_masks=None,
                      want_cache=False, want_branches=False):
        """Dual masked attention, concat, fuse back to model width.

        The six Q/K/V projections of both branches run as one wide matmul;
        the parameters stay separate named tensors.
        """
        cfg = self.config
        p = self.params
        d = cfg.d_embed
        base = f"layers.{layer}"
        gmask = self._gmask if global_mask_override is None else global_mask_override
        lmask = self._lmasks[layer] if local_mask_override is None else local_mask_override
        dm_g, dm_l, dscale = (None, None, 1.0)
        if drop_masks is not None:
            dm_g, dm_l, dscale = drop_masks

        w_in = np.concatenate([p[f"{base}.{n}"] for n in self._QKV], axis=1)
        b_in = np.concatenate([p[f"{base}.{n}"] for n in self._QKV_B])
        qkv, in_cache = _linear_fwd(x, w_in, b_in)
        gq, gk, gv, lq, lk, lv = (qkv[..., i * d:(i + 1) * d] for i in range(6))

        m_g, g_cache = _attend(gq, gk, gv, gmask, cfg.n_heads_global, dm_g, dscale)
        m_l, l_cache = _attend(lq, lk, lv, lmask, cfg.n_heads_local, dm_l, dscale)
        o_g, co_g = _linear_fwd(m_g, p[f"{base}.global.wo"], p[f"{base}.global.bo"])
        o_l, co_l = _linear_fwd(m_l, p[f"{base}.local.wo"], p[f"{base}.local.bo"])
        cat = np.concatenate([o_g, o_l], axis=-1)
        fused, fuse_cache = _linear_fwd(cat, p[f"{base}.fuse.w"], p[f"{base}.fuse.b"])
        if want_branches:
            return fused, o_g, o_l
        if want_cache:
            return fused, (in_cache, g_cache, l_cache, co_g, co_l, fuse_cache)
        return fused

    def _glf_bwd(self, d_fused, cache, layer: int):
        in_cache, g_cache, l_cache, co_g, co_l, fuse_cache = cache
        d = self.config.d_embed
        base = f"layers.{layer}"
        d_cat, dwf, dbf = _linear_bwd(d_fused, fuse_cache)
        d_mg, dwo_g, dbo_g = _linear_bwd(np.ascontiguousarray(d_cat[..., :d]), co_g)
        d_ml, dwo_l, dbo_l = _linear_bwd(np.ascontiguousarray(d_cat[..., d:]), co_l)
        d_gq, d_gk, d_gv = _attend_bwd(d_mg, g_cache)
        d_lq, d_lk, d_lv = _attend_bwd(d_ml, l_cache)
        d_qkv = np.concatenate([d_gq, d_gk, d_gv, d_lq, d_lk, d_lv], axis=-1)
        dx, dw_in, db_in = _linear_bwd(d_qkv, in_cache)
        grads = {f"{base}.fuse.w": dwf, f"{base}.fuse.b": dbf,
                 f"{base}.global.wo": dwo_g, f"{base}.global.bo": dbo_g,
                 f"{base}.local.wo": dwo_l, f"{base}.local.bo": dbo_l}
        for i, n in enumerate(self._QKV):
            grads[f"{base}.{n}"] = np.ascontiguousarray(dw_in[:, i * d:(i + 1) * d])
        for i, n in enumerate(self._QKV_B):
            grads[f"{base}.{n}"] = db_in[i * d:(i + 1) * d].copy()
        return dx, grads

    # -- full forward / backward --------------------------------------------

    def predict_noise(self, x_t, t, train=False, rng=None, want_cache=False):
        """Full denoiser pass: predicted noise, same shape as the latent."""
        cfg = self.config
        p = self.params
        x_t = np.asarray(x_t, dtype=np.float64)
        squeeze = x_t.ndim == 2
        if squeeze:
            x_t = x_t[None]
        rate = cfg.dropout if train else 0.0
        if rate > 0.0 and rng is None:
            raise ValueError("training-mode forward with dropout needs an rng")
        keep = 1.0 - rate

        h = self.embed_input(x_t, t)
        caches = []
        for layer in range(cfg.n_layers):
            base = f"layers.{layer}"
            a, c_ln1 = _ln_fwd(h, p[f"{base}.ln1.g"], p[f"{base}.ln1.b"])
            drop_masks = None
            dm_ff = None
            if rate > 0.0:
                b, s = a.shape[0], cfg.seq_len
                dm_g = (rng.random((b, cfg.n_heads_global, s, s)) < keep).astype(np.float64)
                dm_l = (rng.random((b, cfg.n_heads_local, s, s)) < keep).astype(np.float64)
                dm_ff = (rng.random((b, s, cfg.d_ff)) < keep).astype(np.float64)
                drop_masks = (dm_g, dm_l, 1.0 / keep)
            attn, c_glf = self.glf_msa_layer(a, layer, drop_masks=drop_masks, want_cache=True)
            h1 = h + attn
            bn, c_ln2 = _ln_fwd(h1, p[f"{base}.ln2.g"], p[f"{base}.ln2.b"])
            u, c_ff1 = _linear_fwd(bn, p[f"{base}.ff.w1"], p[f"{base}.ff.b1"])
            gact, c_gelu = _gelu_fwd(u)
            gd = gact if dm_ff is None else gact * (dm_ff / keep)
            ff, c_ff2 = _linear_fwd(gd, p[f"{base}.ff.w2"], p[f"{base}.ff.b2"])
            h = h1 + ff
            caches.append((c_ln1, c_glf, c_ln2, c_ff1, c_gelu, dm_ff, keep, c_ff2))
        eps, c_head = _linear_fwd(h, p["head.w"], p["head.b"])

        if want_cache:
            return (eps[0] if squeeze else eps), (caches, c_head, squeeze)
        return eps[0] if squeeze else eps

    def backward(self, d_eps, cache):
        """Backprop through predict_noise.

        Returns (grads, d_x_t): parameter gradients (including the position
        table; the token table is the trainer's concern since x_t is an
        input here) and the gradient w.r.t. the latent input.
        """
        caches, c_head, squeeze = cache
        d_eps = np.asarray(d_eps, dtype=np.float64)
        if squeeze:
            d_eps = d_eps[None]
        grads: dict[str, np.ndarray] = {}

        d_h, grads["head.w"], grads["head.b"] = _linear_bwd(d_eps, c_head)

        for layer in reversed(range(self.config.n_layers)):
            base = f"layers.{layer}"
            c_ln1, c_glf, c_ln2, c_ff1, c_gelu, dm_ff, keep, c_ff2 = caches[layer]
            d_gd, grads[f"{base}.ff.w2"], grads[f"{base}.ff.b2"] = _linear_bwd(d_h, c_ff2)
            d_gact = d_gd if dm_ff is None else d_gd * (dm_ff / keep)
            d_u = _gelu_bwd(d_gact, c_gelu)
            d_bn, grads[f"{base}.ff.w1"], grads[f"{base}.ff.b1"] = _linear_bwd(d_u, c_ff1)
            d_ln2, grads[f"{base}.ln2.g"], grads[f"{base}.ln2.b"] = _ln_bwd(d_bn, c_ln2)
            d_h1 = d_h + d_ln2
            d_a, glf_grads = self._glf_bwd(d_h1, c_glf, layer)
            grads.update(glf_grads)
            d_ln1, grads[f"{base}.ln1.g"], grads[f"{base}.ln1.b"] = _ln_bwd(d_a, c_ln1)
            d_h = d_h1 + d_ln1

        grads["pos_emb"] = d_h.sum(axis=0)
        d_x_t = d_h[0] if squeeze else d_h
        return grads, d_x_t

    # -- decoding ------------------------------------------------------------

    def decode_tokens(self, x0_hat: np.ndarray, chunk: int = 1024) -> np.ndarray:
        """Nearest-embedding tokens; exact ties resolve to the lower token id."""
        x = np.asarray(x0_hat, dtype=np.float64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        emb = self.params["tok_emb"]
        out = np.empty(x.shape[:2], dtype=np.uint8)
        for i in range(0, x.shape[0], chunk):
            diff = x[i:i + chunk, :, None, :] - emb[None, None, :, :]
            d2 = np.einsum("bsvd,bsvd->bsv", diff, diff)
            out[i:i + chunk] = d2.argmin(axis=-1).astype(np.uint8)
        return out[0] if squeeze else out

    # -- checkpoints ----------------------------------------------------------

    def save(self, path, meta: dict | None = None) -> None:
        arrays = {f"param::{k}": v for k, v in self.params.items()}
        arrays["config_json"] = np.frombuffer(
            json.dumps(self.config.to_dict()).encode(), dtype=np.uint8)
        arrays["meta_json"] = np.frombuffer(
            json.dumps(meta or {}).encode(), dtype=np.uint8)
        arrays["format_version"] = np.array([CHECKPOINT_VERSION], dtype=np.int64)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> tuple["DenoiserModel", dict]:
        with np.load(path) as z:
            version = int(z["format_version"][0])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            config = ModelConfig.from_dict(json.loads(z["config_json"].tobytes().decode()))
            meta = json.loads(z["meta_json"].tobytes().decode())
            params = {k[len("param::"):]: z[k] for k in z.files if k.startswith("param::")}
        return cls(config, params), meta
