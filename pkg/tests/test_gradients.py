"""Full-model gradient verification against central finite differences.

The analytic gradients come from the hand-written backward pass; the
numerical side perturbs every parameter coordinate of a tiny double
precision model. Agreement gate: |fd - analytic| within 1e-4 relative
(with a small absolute floor where both are effectively zero, since the
finite-difference signal drowns in rounding there).
"""

import numpy as np
import pytest

from v6diffusion.kernels import available_backends, set_backend, backend_name
from v6diffusion.model import DenoiserModel
from v6diffusion.schedule import linear_schedule
from v6diffusion.training import compute_loss_and_grads

from conftest import tiny_config

RTOL = 1e-4
ATOL = 1e-9


def _loss(model, tokens, t, eps, schedule):
    losses, _ = compute_loss_and_grads(model, tokens, t, eps, schedule, 1.0,
                                       want_grads=False)
    return losses.total


def run_gradcheck(seed, backend=None):
    if backend is not None:
        set_backend(backend)
    rng = np.random.default_rng(seed)
    model = DenoiserModel.initialize(tiny_config(), rng)
    schedule = linear_schedule(40, 1e-4, 0.02)
    tokens = rng.integers(0, 16, size=(2, 8))
    t = rng.integers(1, 41, size=2)
    eps = rng.standard_normal((2, 8, 8))

    _, grads = compute_loss_and_grads(model, tokens, t, eps, schedule, 1.0)
    worst = (0.0, "")
    for name, param in model.params.items():
        g = grads[name]
        flat = param.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for i in range(flat.size):
            h = 1e-5 * max(1.0, abs(flat[i]))
            orig = flat[i]
            flat[i] = orig + h
            lp = _loss(model, tokens, t, eps, schedule)
            flat[i] = orig - h
            lm = _loss(model, tokens, t, eps, schedule)
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            diff = abs(fd - gflat[i])
            bound = RTOL * max(abs(fd), abs(gflat[i])) + ATOL
            if diff - bound > worst[0]:
                worst = (diff - bound, f"{name}[{i}] fd={fd:.3e} an={gflat[i]:.3e}")
            assert diff <= bound, (f"{name}[{i}]: fd={fd:.6e} analytic={gflat[i]:.6e} "
                                   f"diff={diff:.2e} bound={bound:.2e}")
    return worst


@pytest.mark.parametrize("seed", [11, 22, 33])
def test_full_model_gradients_match_finite_differences(seed):
    run_gradcheck(seed)


@pytest.mark.skipif(len(available_backends()) < 2,
                    reason="compiled backend not built")
def test_gradcheck_passes_on_both_backends():
    previous = backend_name()
    try:
        for backend in available_backends():
            run_gradcheck(44, backend=backend)
    finally:
        set_backend(previous)


def test_gradients_cover_every_parameter(rng):
    """Every parameter (embeddings included) receives a gradient entry."""
    model = DenoiserModel.initialize(tiny_config(), rng)
    schedule = linear_schedule(40, 1e-4, 0.02)
    tokens = rng.integers(0, 16, size=(3, 8))
    t = rng.integers(1, 41, size=3)
    eps = rng.standard_normal((3, 8, 8))
    _, grads = compute_loss_and_grads(model, tokens, t, eps, schedule, 0.7)
    assert set(grads) == set(model.params)
    for name, g in grads.items():
        assert g.shape == model.params[name].shape, name
