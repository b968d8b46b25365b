"""Training loop for the denoiser.

Per step: embed a token batch to x_0, draw per-example timesteps and noise,
noise to x_t in closed form, and minimize

    total = mean((eps - eps_hat)^2) + lambda * mean((x0_hat - x_0)^2)

where x0_hat is the usual noise-space estimate of x_0 from eps_hat. The
first term trains noise prediction; the second anchors the continuous
latents back to the (jointly trained) token embeddings. Gradients are
hand-propagated through every path, including x_0's appearance in x_t and
in the anchoring target, and are validated against finite differences in
the test suite.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLoss
from .model import DenoiserModel, ModelConfig
from .schedule import NoiseSchedule, linear_schedule

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 512
    learning_rate: float = 1e-3
    steps: int = 2000
    rng_seed: int = 0
    rounding_loss_weight: float = 1.0
    T: int = 2000
    beta1: float = 1e-6
    betaT: float = 0.01
    grad_clip: float | None = None
    checkpoint_every: int = 0   # 0 = final checkpoint only
    log_every: int = 50

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def make_schedule(self) -> NoiseSchedule:
        return linear_schedule(self.T, self.beta1, self.betaT)

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size, "learning_rate": self.learning_rate,
            "steps": self.steps, "rng_seed": self.rng_seed,
            "rounding_loss_weight": self.rounding_loss_weight,
            "T": self.T, "beta1": self.beta1, "betaT": self.betaT,
            "grad_clip": self.grad_clip, "checkpoint_every": self.checkpoint_every,
            "log_every": self.log_every,
        }


@dataclass(frozen=True)
class LossBreakdown:
    noise_mse: float
    rounding_loss: float
    total: float


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float):
        self.lr = lr
        self.step = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.step += 1
        bc1 = 1.0 - ADAM_BETA1 ** self.step
        bc2 = 1.0 - ADAM_BETA2 ** self.step
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            params[k] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def compute_loss_and_grads(model: DenoiserModel, tokens: np.ndarray, t: np.ndarray,
                           eps: np.ndarray, schedule: NoiseSchedule,
                           rounding_weight: float, train: bool = False,
                           rng: np.random.Generator | None = None,
                           want_grads: bool = True):
    """Loss(es) and, optionally, gradients for one fixed draw of (t, eps).

    Keeping the randomness an explicit argument makes this a deterministic
    function of the parameters, which is what the finite-difference check
    differentiates.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    x0 = model.token_latents(tokens)
    ab = schedule.alpha_bar[t - 1].reshape(-1, 1, 1)
    s = np.sqrt(ab)
    c = np.sqrt(1.0 - ab)
    x_t = s * x0 + c * eps

    if want_grads:
        eps_hat, cache = model.predict_noise(x_t, t, train=train, rng=rng, want_cache=True)
    else:
        eps_hat = model.predict_noise(x_t, t, train=train, rng=rng)
    x0_hat = (x_t - c * eps_hat) / s

    n_el = eps.size
    noise_mse = float(np.mean((eps - eps_hat) ** 2))
    rounding = float(np.mean((x0_hat - x0) ** 2))
    total = noise_mse + rounding_weight * rounding
    losses = LossBreakdown(noise_mse, rounding, total)
    if not want_grads:
        return losses, None

    # d total / d eps_hat collects the direct mse path and the path through x0_hat
    g_round = (2.0 * rounding_weight / n_el) * (x0_hat - x0)
    d_eps_hat = (2.0 / n_el) * (eps_hat - eps) + g_round * (-c / s)
    grads, d_x_t_net = model.backward(d_eps_hat, cache)
    d_x_t = d_x_t_net + g_round / s          # x0_hat depends on x_t directly too
    d_x0 = s * d_x_t - g_round               # via x_t, and as the anchoring target
    g_tok = np.zeros_like(model.params["tok_emb"])
    np.add.at(g_tok, tokens.reshape(-1), d_x0.reshape(-1, x0.shape[-1]))
    grads["tok_emb"] = g_tok
    return losses, grads


def training_step(model: DenoiserModel, tokens: np.ndarray, schedule: NoiseSchedule,
                  rng: np.random.Generator, optimizer: Adam,
                  rounding_weight: float = 1.0,
                  grad_clip: float | None = None) -> LossBreakdown:
    """One optimizer update on a token batch; raises NonFiniteLoss on blow-up."""
    batch = tokens.shape[0]
    shape = (batch, model.config.seq_len, model.config.d_embed)
    t = rng.integers(1, schedule.T + 1, size=batch)
    eps = rng.standard_normal(shape)
    losses, grads = compute_loss_and_grads(model, tokens, t, eps, schedule,
                                           rounding_weight, train=True, rng=rng)
    if not np.isfinite(losses.total):
        raise NonFiniteLoss(f"loss diverged at optimizer step {optimizer.step + 1}: "
                            f"noise_mse={losses.noise_mse} rounding={losses.rounding_loss}")
    if grad_clip is not None:
        norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        if norm > grad_clip:
            factor = grad_clip / norm
            for g in grads.values():
                g *= factor
    optimizer.update(model.params, grads)
    return losses


@dataclass
class TrainResult:
    model: DenoiserModel
    history: list[LossBreakdown] = field(default_factory=list)
    checkpoints: list[str] = field(default_factory=list)


def train(model_cfg: ModelConfig, train_cfg: TrainConfig, tokens: np.ndarray,
          checkpoint_path=None, log_stream=None, progress=False) -> TrainResult:
    """Train from scratch on a (n, seq_len) token matrix.

    Fully deterministic for a given config: one rng seeded from
    `train_cfg.rng_seed` drives initialization, batch choice, timesteps,
    noise and dropout in a fixed order.
    """
    if tokens.ndim != 2 or tokens.shape[1] != model_cfg.seq_len:
        raise ValueError(f"token matrix must be (n, {model_cfg.seq_len})")
    if tokens.shape[0] == 0:
        raise ValueError("empty training corpus")
    rng = np.random.default_rng(train_cfg.rng_seed)
    model = DenoiserModel.initialize(model_cfg, rng)
    optimizer = Adam(model.params, train_cfg.learning_rate)
    schedule = train_cfg.make_schedule()
    result = TrainResult(model)
    n = tokens.shape[0]
    started = time.monotonic()

    for step in range(1, train_cfg.steps + 1):
        idx = rng.integers(0, n, size=train_cfg.batch_size)
        losses = training_step(model, tokens[idx], schedule, rng, optimizer,
                               train_cfg.rounding_loss_weight, train_cfg.grad_clip)
        result.history.append(losses)
        if log_stream is not None and (step % train_cfg.log_every == 0 or step == 1
                                       or step == train_cfg.steps):
            log_stream.write(f"{step} {losses.noise_mse:.6f} "
                             f"{losses.rounding_loss:.6f} {losses.total:.6f}\n")
        if progress and (step % max(train_cfg.log_every, 1) == 0 or step == train_cfg.steps):
            elapsed = time.monotonic() - started
            print(f"[train] step {step}/{train_cfg.steps} total={losses.total:.4f} "
                  f"({elapsed:.1f}s)", file=sys.stderr)
        if (checkpoint_path is not None and train_cfg.checkpoint_every
                and step % train_cfg.checkpoint_every == 0 and step != train_cfg.steps):
            path = f"{checkpoint_path}.step{step}"
            model.save(path, meta={"step": step, "train_config": train_cfg.to_dict()})
            result.checkpoints.append(path)

    if checkpoint_path is not None:
        model.save(checkpoint_path, meta={"step": train_cfg.steps,
                                          "train_config": train_cfg.to_dict()})
        result.checkpoints.append(str(checkpoint_path))
    return result
