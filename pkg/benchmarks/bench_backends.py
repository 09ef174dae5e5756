#!/usr/bin/env python3
"""Compare the compiled kernels against the numpy fallback.

Times one training step (forward + backward + Adam) and pure inference for
the two stock network sizes, plus a short end-to-end training run.  Run
after building the extension:

    python benchmarks/bench_backends.py
"""

from __future__ import annotations

import time

import numpy as np

from probclean import backends
from probclean.network import DcaeArchitecture, init_params
from probclean.noise import NoiseConfig, corrupt
from probclean.synth import CONTINUOUS, ChainSpec, generate_ground_truth

BATCH = 32
STEP_REPEAT = 50


def step_time(backend, params, x, targets, slices, l2) -> float:
    grads = params.new_gradients()
    t0 = time.perf_counter()
    for _ in range(STEP_REPEAT):
        q, trace = backend.forward(params.tensors, slices, x, True)
        backend.backward(params.tensors, slices, trace, targets, None, l2, grads.views)
        params.adam_t = backend.adam_step(
            params.flat, grads.flat, params.adam_m, params.adam_v, params.adam_t,
            1e-3, 0.9, 0.999, 1e-8, params._scratch,
        )
    return (time.perf_counter() - t0) / STEP_REPEAT


def inference_time(backend, params, x, slices) -> float:
    t0 = time.perf_counter()
    for _ in range(STEP_REPEAT):
        backend.forward(params.tensors, slices, x, False)
    return (time.perf_counter() - t0) / STEP_REPEAT


def bench_case(n: int, k: int, kind: str):
    spec = ChainSpec(n_attributes=n, sampling_density=k, n_records=BATCH * 8, seed=0, kind=kind)
    gt = generate_ground_truth(spec)
    noisy, _ = corrupt(gt, NoiseConfig(sigma_pdb=0.02 * 100 / k, missing_prob=0.0, seed=1))
    arch = DcaeArchitecture(gt.schema)
    x = np.ascontiguousarray(noisy.matrix[:BATCH])
    slices = gt.schema.slices

    print(f"\nN={n}, K={k} (D={arch.width}, {sum(t.size for t in init_params(arch, 0).tensors)} parameters)")
    rows = []
    for name in backends.available_backends():
        backend = backends.get_backend(name)
        params = init_params(arch, 0)
        ts = step_time(backend, params, x, x, slices, arch.l2_activity)
        ti = inference_time(backend, params, x, slices)
        rows.append((name, ts, ti))
        print(f"  {name:10s} train step {ts * 1e3:8.3f} ms   inference {ti * 1e3:8.3f} ms")
    if len(rows) == 2:
        print(f"  speedup: train {rows[0][1] / rows[1][1]:.2f}x, inference {rows[0][2] / rows[1][2]:.2f}x"
              if rows[1][1] < rows[0][1]
              else f"  speedup: train {rows[1][1] / rows[0][1]:.2f}x slower in compiled (unexpected)")


def main():
    print(f"backends available: {backends.available_backends()}")
    bench_case(3, 4, "categorical")
    bench_case(3, 100, CONTINUOUS)
    bench_case(10, 20, "categorical")


if __name__ == "__main__":
    main()
