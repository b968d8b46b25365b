#!/usr/bin/env python3
"""Benchmark the compiled attention kernels against the numpy fallback.

Times the fused masked-attention forward and backward at the shapes the
pipeline actually runs (desk training, desk sampling, full-size training),
plus one full train step and one full sampling forward per backend.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from v6diffusion import kernels
from v6diffusion.masks import global_mask, local_mask
from v6diffusion.model import DenoiserModel, ModelConfig
from v6diffusion.schedule import linear_schedule
from v6diffusion.training import Adam, training_step

SHAPES = [
    # name, batch, heads, seq, head_dim
    ("desk train", 64, 2, 32, 16),
    ("desk sample", 512, 2, 32, 16),
    ("full train", 512, 2, 32, 32),
]


def time_call(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_attention(repeat):
    rng = np.random.default_rng(0)
    print(f"{'case':<22}{'mask':<8}{'python':>12}{'cython':>12}{'speedup':>9}")
    for name, b, h, s, dh in SHAPES:
        q, k, v = (rng.standard_normal((b, h, s, dh)) for _ in range(3))
        d_out = rng.standard_normal((b, h, s, dh))
        for mask_name, mask in (("global", global_mask(s)), ("local8", local_mask(s, 8))):
            scale = 1.0 / np.sqrt(dh)
            results = {}
            for backend in kernels.available_backends():
                kernels.set_backend(backend)
                fwd = time_call(lambda: kernels.attention_forward(q, k, v, mask, scale),
                                repeat)
                _, p = kernels.attention_forward(q, k, v, mask, scale)
                bwd = time_call(lambda: kernels.attention_backward(
                    q, k, v, p, d_out, mask, scale), repeat)
                results[backend] = fwd + bwd
            if "cython" in results:
                ratio = results["python"] / results["cython"]
                print(f"{name:<22}{mask_name:<8}{results['python']*1e3:>10.2f}ms"
                      f"{results['cython']*1e3:>10.2f}ms{ratio:>8.2f}x")
            else:
                print(f"{name:<22}{mask_name:<8}{results['python']*1e3:>10.2f}ms"
                      f"{'-':>12}{'-':>9}")


def bench_pipeline(repeat):
    rng = np.random.default_rng(0)
    cfg = ModelConfig(d_embed=32, d_ff=128, n_layers=4)
    schedule = linear_schedule(200, 1e-5, 0.1)
    tokens = rng.integers(0, 16, size=(64, 32)).astype(np.uint8)
    x = rng.standard_normal((512, 32, 32))
    print(f"\n{'stage':<22}{'python':>12}{'cython':>12}{'speedup':>9}")
    rows = {}
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        model = DenoiserModel.initialize(cfg, np.random.default_rng(1))
        opt = Adam(model.params, 1e-3)
        step_rng = np.random.default_rng(2)
        rows.setdefault("train step (B=64)", {})[backend] = time_call(
            lambda: training_step(model, tokens, schedule, step_rng, opt), repeat)
        rows.setdefault("denoise fwd (B=512)", {})[backend] = time_call(
            lambda: model.predict_noise(x, 100), repeat)
    for stage, r in rows.items():
        if "cython" in r:
            print(f"{stage:<22}{r['python']*1e3:>10.1f}ms{r['cython']*1e3:>10.1f}ms"
                  f"{r['python']/r['cython']:>8.2f}x")
        else:
            print(f"{stage:<22}{r['python']*1e3:>10.1f}ms{'-':>12}{'-':>9}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    print(f"backends available: {', '.join(kernels.available_backends())}")
    bench_attention(args.repeat)
    bench_pipeline(args.repeat)


if __name__ == "__main__":
    main()
