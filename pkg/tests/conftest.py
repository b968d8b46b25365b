import numpy as np
import pytest

from v6diffusion.model import DenoiserModel, ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_config(**overrides) -> ModelConfig:
    kw = dict(d_embed=8, d_ff=16, n_layers=2, seq_len=8, dropout=0.0)
    kw.update(overrides)
    return ModelConfig(**kw)


@pytest.fixture
def tiny_model(rng):
    return DenoiserModel.initialize(tiny_config(), rng)
