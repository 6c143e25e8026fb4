"""Time the numba kernels against the pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--symbols N] [--repeat R]

Each kernel is first called once per backend (numba compiles on first use),
then timed as the best of ``R`` runs. Outputs of both backends are checked
for agreement before timing is reported.
"""
import argparse
import time

import numpy as np

from ftncpr.cpr import BpsParams, bps_indices, calibrate_levels, polybinary_transform
from ftncpr.dsp import combined_isi_taps
from ftncpr.equalize import CmaParams, MlseParams, cma_equalize, mlse_equalize
from ftncpr.link import DualPolSignal


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--symbols", type=int, default=2**14)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    n = args.symbols
    r = np.random.default_rng(0)
    qpsk = r.choice([-1.0, 1.0], n) + 1j * r.choice([-1.0, 1.0], n)
    h = combined_isi_taps(0.5, 0.1, 3).coefficients
    rx = np.convolve(qpsk, h)[3 : 3 + n] + 0.3 * (r.normal(size=n) + 1j * r.normal(size=n))
    grid = calibrate_levels(polybinary_transform(rx))
    y = r.choice([-1.0, 1.0], 2 * n) + 1j * r.choice([-1.0, 1.0], 2 * n)
    x2 = r.choice([-1.0, 1.0], 2 * n) + 1j * r.choice([-1.0, 1.0], 2 * n)
    mixed = DualPolSignal(0.9 * x2 + 0.3 * y, -0.3 * x2 + 0.9 * y)

    cases = {
        "bps (B=32, N=512)": lambda b: bps_indices(polybinary_transform(rx), grid, BpsParams(32, 512), b),
        "viterbi (64 states, tail 16)": lambda b: mlse_equalize(rx, MlseParams.for_channel(0.5, 0.1, 3, 16), b),
        "cma (3 taps, 3 passes)": lambda b: cma_equalize(mixed, CmaParams(), b).x,
    }
    print(f"{n} symbols, best of {args.repeat}")
    print(f"{'kernel':30s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        fn("numba")  # compile
        t_nb, out_nb = best_of(lambda: fn("numba"), args.repeat)
        t_np, out_np = best_of(lambda: fn("numpy"), 1)
        if not np.allclose(out_nb, out_np, rtol=1e-9, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:30s} {t_nb * 1e3:9.1f}ms {t_np * 1e3:9.1f}ms {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
