"""Diffusion-based IPv6 target generation.

Learn the structure of active IPv6 addresses from a seed set with an
embedding-space diffusion model, generate candidate addresses with a
deterministic skip-step sampler, strip alias regions, and score candidate
quality offline against a synthetic ground-truth universe.
"""

__version__ = "0.1.0"

from .addresses import Ipv6Address, Prefix, format_address, parse_address
from .model import DenoiserModel, ModelConfig
from .schedule import NoiseSchedule, linear_schedule
from .training import TrainConfig
from .sampling import SamplerConfig

__all__ = [
    "Ipv6Address", "Prefix", "format_address", "parse_address",
    "DenoiserModel", "ModelConfig", "NoiseSchedule", "linear_schedule",
    "TrainConfig", "SamplerConfig", "__version__",
]
