#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the numpy fallback.

Times the three production conv layers (forward and backward), the pool
kernels, and a full training step of the default architecture.

    python3 benchmarks/bench_kernels.py [--batch 32] [--reps 10]

Single-threaded numbers are the relevant ones for training throughput:
fold jobs run in parallel worker processes, one core each.
"""

import argparse
import os
import time

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np

from sknakit.nn import (
    ArchSpec,
    adam_step,
    backward,
    forward,
    init_adam,
    init_model,
    weighted_cross_entropy,
)
from sknakit.nn import kernels

CONV_LAYERS = [  # (C_in, H, W, C_out) of the default architecture
    (1, 51, 199, 8),
    (8, 25, 99, 16),
    (16, 12, 49, 32),
]


def best_of(fn, reps):
    fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_backend(name, batch, reps):
    bk = kernels.get_backend(name)
    rng = np.random.default_rng(0)
    rows = []
    for c_in, h, w, c_out in CONV_LAYERS:
        x = rng.normal(size=(batch, c_in, h, w)).astype(np.float32)
        wt = rng.normal(size=(c_out, c_in, 3, 3)).astype(np.float32)
        b = np.zeros(c_out, dtype=np.float32)
        dy = rng.normal(size=(batch, c_out, h, w)).astype(np.float32)
        t_fwd = best_of(lambda: bk.conv2d_forward(x, wt, b), reps)
        t_bwd = best_of(lambda: bk.conv2d_backward(x, wt, dy), reps)
        flops = 2.0 * batch * c_out * h * w * c_in * 9
        rows.append(
            (f"conv {c_in:>2}->{c_out:<2} {h}x{w}", t_fwd, flops / t_fwd / 1e9, t_bwd)
        )
        y = bk.conv2d_forward(x, wt, b)
        pooled, switches = bk.maxpool2x2_forward(y)
        t_pf = best_of(lambda: bk.maxpool2x2_forward(y), reps)
        t_pb = best_of(lambda: bk.maxpool2x2_backward(switches, pooled, h, w), reps)
        rows.append((f"pool      {h}x{w}", t_pf, 0.0, t_pb))
    return rows


def bench_train_step(name, batch, reps):
    kernels.set_backend(name)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(batch, 1, 51, 199)).astype(np.float32)
    y = rng.integers(0, 3, batch)
    params = init_model(ArchSpec(), seed=0)
    state = init_adam(params)
    drng = np.random.default_rng(1)
    weights = np.ones(3)

    def step():
        logits, cache = forward(params, x, train=True, dropout_rng=drng)
        _, dlogits = weighted_cross_entropy(logits, y, weights)
        adam_step(params, backward(params, cache, dlogits), state)

    return best_of(step, reps)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--reps", type=int, default=10)
    args = ap.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (batch={args.batch}, best of {args.reps})\n")

    results = {name: bench_backend(name, args.batch, args.reps) for name in backends}
    ref = backends[0]
    header = f"{'kernel':<22}" + "".join(f"{name + ' fwd/bwd (ms)':>26}" for name in backends)
    print(header)
    for i, (label, *_rest) in enumerate(results[ref]):
        line = f"{label:<22}"
        for name in backends:
            _, t_fwd, gfs, t_bwd = results[name][i]
            line += f"{t_fwd * 1e3:>12.2f} /{t_bwd * 1e3:>10.2f}"
        print(line)

    print()
    original = kernels.backend_name()
    try:
        steps = {name: bench_train_step(name, args.batch, args.reps) for name in backends}
    finally:
        kernels.set_backend(original)
    for name, t in steps.items():
        print(f"full train step [{name:>6}]: {t * 1e3:8.1f} ms")
    if len(steps) == 2:
        a, b = steps.get("numpy"), steps.get("cython")
        if a and b:
            print(f"\ncompiled speedup over numpy fallback: {a / b:.2f}x")


if __name__ == "__main__":
    main()
