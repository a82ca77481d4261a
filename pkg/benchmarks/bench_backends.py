#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the individual hot kernels at training-sized shapes plus one full
training step (forward + backward + optimizer) under each backend.  Force a
backend for the whole process with PAKAN_KERNELS=numpy|compiled; this script
instead swaps the kernel module in place so both are measured in one run.

Usage: python benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import time

import numpy as np

import pakan.splines as splines
import pakan.tensorgraph as tg
from pakan import _kernels_np
from pakan.network import NetworkConfig, build_network, l1_loss
from pakan.optim import AdamState, adam_step
from pakan.tensorgraph import Tensor, backward

try:
    from pakan import _kernels
except ImportError:
    _kernels = None


def timeit(fn, repeat):
    fn()  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def kernel_cases():
    rng = np.random.default_rng(0)
    v = np.tanh(rng.normal(size=(32, 32, 4096)))
    w2 = rng.uniform(0.1, 0.9, (32, 8, 4096))
    w1 = rng.uniform(0.1, 0.9, (32, 32, 8))
    gs = rng.normal(size=(32, 32, 4096))
    xp = rng.normal(size=(32, 16, 66, 66))
    k3 = rng.normal(size=(16, 16, 3, 3))
    g = rng.normal(size=(32, 16, 64, 64))
    u = rng.uniform(-1, 1, 32 * 32 * 4096)
    return {
        "basis_stack [4.2M]": lambda m: m.basis_stack(u, 0, 5),
        "mix2d_fwd [32,32,4096]": lambda m: m.mix2d_fwd(v, w2, 0, 5),
        "mix2d_bwd": lambda m: m.mix2d_bwd(v, w2, gs, 0, 5),
        "mix1d_fwd": lambda m: m.mix1d_fwd(v, w1, 0, 5),
        "mix1d_bwd": lambda m: m.mix1d_bwd(v, w1, gs, 0, 5),
        "conv2d_fwd [32,16,64,64]x3x3": lambda m: m.conv2d_fwd(xp, k3, 64, 64),
        "conv2d_bwd_k": lambda m: m.conv2d_bwd_k(xp, g, 3, 3),
        "conv2d_bwd_x": lambda m: m.conv2d_bwd_x(k3, g, 66, 66),
    }


def train_step_case():
    rng = np.random.default_rng(1)
    net = build_network(NetworkConfig(seed=0))
    state = AdamState.for_params(net.params)
    ms = Tensor(rng.uniform(0, 1, (32, 4, 16, 16)))
    pan = Tensor(rng.uniform(0, 1, (32, 1, 64, 64)))
    gt = Tensor(rng.uniform(0, 1, (32, 4, 64, 64)))

    def step():
        loss = l1_loss(net.forward(ms, pan), gt)
        backward(loss)
        adam_step(net.params, state, 4e-4)

    return step


def swap_backend(module):
    tg.kernels = module
    splines.kernels = module


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = [("numpy", _kernels_np)]
    if _kernels is not None:
        backends.insert(0, ("compiled", _kernels))
    else:
        print("compiled extension not available; timing the fallback only")

    cases = kernel_cases()
    print(f"{'kernel':34s}" + "".join(f"{name:>12s}" for name, _ in backends)
          + f"{'speedup':>10s}")
    for label, fn in cases.items():
        times = [timeit(lambda m=mod: fn(m), args.repeat)
                 for _, mod in backends]
        ratio = times[-1] / times[0] if len(times) == 2 else float("nan")
        cells = "".join(f"{t * 1e3:10.1f}ms" for t in times)
        print(f"{label:34s}{cells}{ratio:9.1f}x")

    print()
    times = []
    for name, mod in backends:
        swap_backend(mod)
        times.append(timeit(train_step_case(), max(2, args.repeat // 2)))
    swap_backend(backends[0][1])
    cells = "".join(f"{t:11.2f}s" for t in times)
    ratio = times[-1] / times[0] if len(times) == 2 else float("nan")
    print(f"{'train step (batch 32, 64x64)':34s}{cells}{ratio:9.1f}x")


if __name__ == "__main__":
    main()
