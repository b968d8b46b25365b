"""Linear noise schedule and the forward (noising) process.

The schedule holds beta_t for t = 1..T plus the derived alpha_t = 1 - beta_t
and their running product alpha_bar_t. Noising supports both the one-step
chain form

    x_t = sqrt(1 - beta_t) * x_{t-1} + sqrt(beta_t) * eps

and the closed form over t steps obtained by reparameterization

    x_t = sqrt(alpha_bar_t) * x_0 + sqrt(1 - alpha_bar_t) * eps

together with the Gaussian posterior of x_{t-1} given (x_t, x_0) used by the
KL training term. All schedule math is double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSchedule, StepOutOfRange

DEFAULT_T = 2000
DEFAULT_BETA_1 = 1e-6
DEFAULT_BETA_T = 0.01


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta: np.ndarray        # (T,) beta_1..beta_T
    alpha: np.ndarray       # (T,) 1 - beta_t
    alpha_bar: np.ndarray   # (T,) prod_{i<=t} alpha_i

    def _check_step(self, t, minimum: int = 1):
        t = np.asarray(t)
        if np.any(t < minimum) or np.any(t > self.T):
            raise StepOutOfRange(f"step {t} outside [{minimum}, {self.T}]")

    def beta_at(self, t):
        self._check_step(t)
        return self.beta[np.asarray(t) - 1]

    def alpha_bar_at(self, t):
        """alpha_bar_t with the generation-time convention alpha_bar_0 = 1."""
        self._check_step(t, minimum=0)
        t = np.asarray(t)
        padded = np.concatenate(([1.0], self.alpha_bar))
        return padded[t]


def linear_schedule(T: int = DEFAULT_T, beta1: float = DEFAULT_BETA_1,
                    betaT: float = DEFAULT_BETA_T) -> NoiseSchedule:
    """Evenly spaced betas from beta1 to betaT inclusive."""
    if T < 2:
        raise InvalidSchedule(f"need at least 2 steps, got T={T}")
    if not 0.0 < beta1 < betaT < 1.0:
        raise InvalidSchedule(f"need 0 < beta1 < betaT < 1, got ({beta1}, {betaT})")
    beta = beta1 + (betaT - beta1) * np.arange(T, dtype=np.float64) / (T - 1)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def forward_chain_step(x_prev: np.ndarray, t: int, noise: np.ndarray,
                       schedule: NoiseSchedule) -> np.ndarray:
    """One noising step: sqrt(1-beta_t)*x_{t-1} + sqrt(beta_t)*noise."""
    beta_t = schedule.beta_at(t)
    return np.sqrt(1.0 - beta_t) * x_prev + np.sqrt(beta_t) * noise


def forward_sample(x0: np.ndarray, t, noise: np.ndarray,
                   schedule: NoiseSchedule) -> np.ndarray:
    """Single-shot noising to step t via the closed form.

    `t` may be a scalar or a per-example vector; vector steps broadcast the
    schedule coefficients over the leading batch axis.
    """
    schedule._check_step(t)
    ab = schedule.alpha_bar[np.asarray(t) - 1]
    if np.ndim(ab) > 0:
        ab = ab.reshape((-1,) + (1,) * (x0.ndim - 1))
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise


def posterior_q(x0: np.ndarray, xt: np.ndarray, t: int,
                schedule: NoiseSchedule) -> tuple[np.ndarray, float]:
    """Mean and variance of the Gaussian posterior q(x_{t-1} | x_t, x_0).

    mean = (sqrt(alpha_bar_{t-1}) beta_t / (1 - alpha_bar_t)) x_0
         + (sqrt(alpha_t) (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)) x_t
    var  = beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
    """
    schedule._check_step(t, minimum=2)
    beta_t = schedule.beta[t - 1]
    alpha_t = schedule.alpha[t - 1]
    ab_t = schedule.alpha_bar[t - 1]
    ab_prev = schedule.alpha_bar[t - 2]
    coef0 = np.sqrt(ab_prev) * beta_t / (1.0 - ab_t)
    coeft = np.sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t)
    variance = beta_t * (1.0 - ab_prev) / (1.0 - ab_t)
    return coef0 * x0 + coeft * xt, float(variance)
