"""Time the hot kernels on every available backend.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--points 2000000] [--trials 20000]

Prints one row per (kernel, backend) pair plus the speedup of each backend
over the slowest one. The compiled flavor is warmed up before timing so
JIT compilation does not pollute the numbers.
"""

import argparse
import time

import numpy as np

from covertuav import channel, kernels, scenario, trajectory
from covertuav.beamform import slot_env
from covertuav.rng import make_rng


def _canonical_args(points):
    cfg = scenario.bundled_scenario()
    plan = trajectory.initial_plan(cfg)
    gains = channel.gains_for_positions(cfg, plan.comm_positions)
    env = slot_env(cfg, gains, 0)
    q_grid = np.linspace(0.0, env.q_c_feasible, points)
    return q_grid, (env.c_ba, env.c_ca, env.c_cw, env.g_bw, env.q_b_max,
                    env.sigma_a2, env.sigma_w2, env.gamma_t, env.gamma_c,
                    env.neg_ln_eta, env.kappa, env.r_t, env.r_c)


def _time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=2_000_000,
                        help="rate-curve grid size")
    parser.add_argument("--trials", type=int, default=20_000,
                        help="radiometer trials (each 200 draws)")
    args = parser.parse_args()

    q_grid, coeffs = _canonical_args(args.points)
    draws = make_rng(0).standard_normal((args.trials, 200))
    backends = kernels.available_backends()
    print(f"backends available: {', '.join(backends)}")
    print(f"rate curve: {args.points:,} points   "
          f"radiometer: {args.trials:,} trials x 200 draws")
    print()
    print(f"{'kernel':<22} {'backend':<8} {'best of 5':>12}")

    results = {}
    for name in backends:
        previous = kernels.set_backend(name)
        try:
            # warm-up pass triggers compilation on the jitted flavor
            kernels.slot_rate_curve(q_grid[:16], *coeffs)
            kernels.radiometer_statistic(draws[:16], 1.0)
            t_rate = _time(lambda: kernels.slot_rate_curve(q_grid, *coeffs))
            t_radio = _time(
                lambda: kernels.radiometer_statistic(draws, 1.0))
        finally:
            kernels.set_backend(previous)
        results[name] = (t_rate, t_radio)
        print(f"{'slot_rate_curve':<22} {name:<8} {t_rate * 1e3:>10.2f} ms")
        print(f"{'radiometer_statistic':<22} {name:<8} "
              f"{t_radio * 1e3:>10.2f} ms")

    if len(results) > 1:
        print()
        for idx, kernel in enumerate(("slot_rate_curve",
                                      "radiometer_statistic")):
            slowest = max(v[idx] for v in results.values())
            for name, v in sorted(results.items()):
                print(f"{kernel:<22} {name:<8} speedup vs slowest: "
                      f"{slowest / v[idx]:.1f}x")

    # the flavors must agree before any timing comparison means anything
    ref = None
    for name in backends:
        previous = kernels.set_backend(name)
        try:
            vals = kernels.slot_rate_curve(q_grid[:10_000], *coeffs)
        finally:
            kernels.set_backend(previous)
        if ref is None:
            ref = vals
        else:
            finite = np.isfinite(ref) & np.isfinite(vals)
            assert np.array_equal(np.isfinite(ref), np.isfinite(vals))
            assert np.allclose(ref[finite], vals[finite], rtol=1e-12)
    print("\nbackend agreement check: ok")


if __name__ == "__main__":
    main()
