#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure-Python batch kernels.

Times the two hot kernels (Monte Carlo trial errors, CRLB bounds) on the
benchmark-protocol workload (8 anchors, 100 m cube) and prints a table.
Run from the repo root: ``python benchmarks/bench_backends.py``.
"""

import time

import numpy as np

from uowloc.backend import available_backends, get_kernels


def make_workload(n_trials=2000, n_anchors=8, seed=123):
    rng = np.random.default_rng(seed)
    sources = rng.uniform(0.0, 100.0, (n_trials, 3))
    anchors = rng.uniform(0.0, 100.0, (n_trials, n_anchors, 3))
    drifted = anchors + rng.normal(0.0, 1.5, (n_trials, n_anchors, 3))
    zdraws = rng.standard_normal((n_trials, n_anchors, 3))
    sigma_meas = np.array([2.0, np.radians(2.0), np.radians(2.0)])
    sigma_drift = np.array([1.5, 1.5, 1.5])
    return sources, anchors, drifted, zdraws, sigma_meas, sigma_drift


def time_call(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    n_trials = 2000
    src, anc, drift, z, sm, sd = make_workload(n_trials)
    rows = []
    for name in available_backends():
        kern = get_kernels(name)
        t_trial = time_call(kern.trial_errors, src, anc, drift, z, sm, sd)
        t_bounds = time_call(
            kern.bounds, src, anc, sm, sd, True, 0.0, 0.056, False, True, True
        )
        rows.append((name, t_trial, t_bounds))

    print(f"workload: {n_trials} trials x 8 anchors (best of 5)")
    print(f"{'backend':<10} {'trial_errors':>14} {'bounds':>14} {'trials/s':>12}")
    for name, t_trial, t_bounds in rows:
        print(f"{name:<10} {t_trial * 1e3:>11.2f} ms {t_bounds * 1e3:>11.2f} ms "
              f"{n_trials / t_trial:>12.0f}")
    if len(rows) == 2:
        print(f"speedup (compiled vs python): trial_errors {rows[1][1] / rows[0][1]:.1f}x, "
              f"bounds {rows[1][2] / rows[0][2]:.1f}x")


if __name__ == "__main__":
    main()
