"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from latticenoise import kernels


def workloads(rng):
    q, r, k = 125, 100, 41
    theta = rng.uniform(-np.pi, np.pi, (3, q))
    delta = np.array([np.pi / 2, np.pi, np.pi / 2])
    deltas = delta * (1 + 0.05 * rng.standard_normal((r, 3)))
    offsets = 0.08 * rng.standard_normal((r, 3))
    rho = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    u = kernels.pure.stack_pauli(*theta, delta, np.zeros(3))
    coeffs = rng.standard_normal((4, k))
    qs = 2 * np.pi * np.arange(q) / q
    n = np.arange(1, 21)
    basis = np.hstack([np.ones((q, 1)), np.cos(np.outer(qs, n)), np.sin(np.outer(qs, n))])
    return {
        "stack_pauli (Q=125)": lambda m: m.stack_pauli(*theta, delta, offsets[0]),
        "average_conjugation (Q=125)": lambda m: m.average_conjugation(u, rho),
        "monte_carlo_outputs (R=100, Q=125)": lambda m: m.monte_carlo_outputs(
            theta, deltas, offsets, rho),
        "unit_norm_jacobian (Q=125, N=20)": lambda m: m.unit_norm_jacobian(coeffs, basis),
    }


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if kernels.compiled is None:
        print("compiled extension not available; build with pip install -e .")
    print(f"{'kernel':40s} {'numpy':>12s} {'cython':>12s} {'speedup':>8s}")
    for name, call in workloads(np.random.default_rng(0)).items():
        t_py = best_time(lambda: call(kernels.pure), args.repeat)
        if kernels.compiled is None:
            print(f"{name:40s} {t_py * 1e6:10.1f}us {'-':>12s} {'-':>8s}")
            continue
        t_c = best_time(lambda: call(kernels.compiled), args.repeat)
        print(f"{name:40s} {t_py * 1e6:10.1f}us {t_c * 1e6:10.1f}us {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
