"""Deterministic skip-step generation.

Sampling starts from pure Gaussian latents and walks a descending timestep
ladder (stride-spaced from T down to 0). Each iteration predicts the noise,
estimates x_0 from it, and jumps directly to the next ladder step:

    x0_hat   = (x_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t)
    x_{prev} = sqrt(abar_prev) * x0_hat + sqrt(1 - abar_prev) * eps_hat

with abar_0 defined as 1 so the final jump lands exactly on x0_hat. No noise
is injected between steps, so a fixed seed reproduces the candidate set
bit-for-bit; batches use independent seed streams keyed by batch index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .addresses import Ipv6Address, from_nybbles
from .errors import InvalidStride
from .model import DenoiserModel
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class SamplerConfig:
    count: int
    stride: int = 5
    rng_seed: int = 0
    batch_size: int = 512

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.stride < 1:
            raise InvalidStride(f"stride must be >= 1, got {self.stride}")


@dataclass
class CandidateSet:
    addresses: list[Ipv6Address]
    provenance: dict

    def deduplicated(self) -> list[Ipv6Address]:
        seen: set[int] = set()
        out = []
        for a in self.addresses:
            if a.bits not in seen:
                seen.add(a.bits)
                out.append(a)
        return out


def rescale_timesteps(T: int, stride: int) -> list[int]:
    """Descending ladder T, T-stride, ..., ending at 0.

    A stride that does not divide T gets an explicit final partial step.
    """
    if stride < 1:
        raise InvalidStride(f"stride must be >= 1, got {stride}")
    steps = list(range(T, 0, -stride))
    steps.append(0)
    return steps


def estimate_x0(x_t: np.ndarray, eps_hat: np.ndarray, t: int,
                schedule: NoiseSchedule) -> np.ndarray:
    """Invert the closed-form noising at step t given predicted noise."""
    ab = schedule.alpha_bar_at(t)
    return (x_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def ddim_step(x_t: np.ndarray, t_k: int, t_prev: int, model: DenoiserModel,
              schedule: NoiseSchedule) -> np.ndarray:
    """One deterministic jump from ladder step t_k down to t_prev."""
    if not t_prev < t_k:
        raise ValueError(f"t_prev {t_prev} must be below t_k {t_k}")
    eps_hat = model.predict_noise(x_t, t_k)
    x0_hat = estimate_x0(x_t, eps_hat, t_k, schedule)
    ab_prev = schedule.alpha_bar_at(t_prev)
    return np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps_hat


def sample_latents(model: DenoiserModel, schedule: NoiseSchedule, n: int,
                   rng: np.random.Generator, stride: int) -> np.ndarray:
    """Run the DDIM ladder for n fresh Gaussian latents; returns final x_0."""
    cfg = model.config
    x = rng.standard_normal((n, cfg.seq_len, cfg.d_embed))
    ladder = rescale_timesteps(schedule.T, stride)
    for k in range(len(ladder) - 1):
        x = ddim_step(x, ladder[k], ladder[k + 1], model, schedule)
    return x


def generate(model: DenoiserModel, schedule: NoiseSchedule,
             cfg: SamplerConfig, progress=None) -> CandidateSet:
    """Generate cfg.count addresses in independent deterministic batches."""
    addresses: list[Ipv6Address] = []
    n_batches = (cfg.count + cfg.batch_size - 1) // cfg.batch_size
    for b in range(n_batches):
        n = min(cfg.batch_size, cfg.count - b * cfg.batch_size)
        rng = np.random.default_rng([cfg.rng_seed, b])
        x0 = sample_latents(model, schedule, n, rng, cfg.stride)
        tokens = model.decode_tokens(x0)
        for row in tokens:
            addresses.append(from_nybbles(row.tolist()))
        if progress is not None:
            progress(b + 1, n_batches)
    provenance = {"seed": cfg.rng_seed, "stride": cfg.stride, "count": cfg.count,
                  "batch_size": cfg.batch_size, "T": schedule.T}
    return CandidateSet(addresses, provenance)
