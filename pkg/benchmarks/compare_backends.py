#!/usr/bin/env python3
"""Time the compiled kernels against the pure-numpy fallback.

Runs the same forward ensemble (identical seeds, identical results) under
both backends and reports wall times.  The first numba call pays JIT
compilation; a warmup run keeps that out of the timings.

    python benchmarks/compare_backends.py --trajectories 200000
"""

import argparse
import math
import time

import numpy as np

from wignermc import backend
from wignermc.forward import forward_ensemble
from wignermc.model import (FieldConfig, GaussianPacket, PhaseSpacePoint,
                            PhysicalConstants)
from wignermc.stencil import Discretization, build_stencil
from wignermc.trajectory import IntegratorSettings


def run_once(n_traj: int, final_time: float, steps: int, seed: int):
    consts = PhysicalConstants()
    fields = FieldConfig(b0=0.4, b1=1.0, ex=0.3, ey=-0.2)
    stencil = build_stencil(Discretization(0.5, 0.5), fields, consts)
    f0 = GaussianPacket(center=PhaseSpacePoint(0.7, -0.3, 0.2, 0.1),
                        sigma_p=0.35, sigma_x=0.45)
    settings = IntegratorSettings(step_count_per_unit_time=steps)
    t0 = time.perf_counter()
    states, carried, counts, _ = forward_ensemble(
        f0, fields, consts, stencil, final_time, n_traj, seed,
        settings=settings)
    elapsed = time.perf_counter() - t0
    digest = (float(np.sum(carried)), int(np.sum(counts)),
              float(np.sum(states)))
    return elapsed, digest


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trajectories", type=int, default=100_000)
    parser.add_argument("--final-time", type=float, default=0.5)
    parser.add_argument("--steps", type=int, default=128,
                        help="integrator steps per unit time")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    results = {}
    for name in ("numba", "numpy"):
        with backend.use(name):
            run_once(min(args.trajectories, 1000), args.final_time,
                     args.steps, args.seed)  # warmup / JIT
            times = []
            digest = None
            for _ in range(args.repeats):
                elapsed, digest = run_once(args.trajectories,
                                           args.final_time, args.steps,
                                           args.seed)
                times.append(elapsed)
            results[name] = (min(times), digest)
            print(f"{name:6s}  best of {args.repeats}: {min(times):8.3f} s  "
                  f"({args.trajectories / min(times):,.0f} traj/s)")

    d_nb, d_np = results["numba"][1], results["numpy"][1]
    # weights and event counts are bit-identical across backends; states
    # pass through log1p, where the vectorised path is allowed one ulp
    if d_nb[:2] != d_np[:2] or not math.isclose(d_nb[2], d_np[2],
                                                rel_tol=1e-12):
        print("MISMATCH: backends disagree on the result digest")
        return 1
    speedup = results["numpy"][0] / results["numba"][0]
    print(f"results agree (weights exact, states to roundoff); "
          f"numba speedup {speedup:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
