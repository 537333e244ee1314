"""Time the numba and numpy inversion-series back ends on the same workload.

    python benchmarks/bench_kernels.py [--rows 5000] [--repeat 5]

Prints the best wall time per back end and the largest difference between
their results.  The workload is a likelihood-sized batch of pdf inversions
plus a cdf batch, the two hot paths in estimation and haircut solving.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from haircut import SPX_6P, simulate_returns
from haircut import kernels
from haircut.transform import DEFAULT_CONFIG, TransformKind, _invert_batch, choose_abscissa


def _workload(rows: int):
    model = SPX_6P.to_model()
    t = 1.0 / 252.0
    x = simulate_returns(model, t, rows, seed=1)
    jobs = []
    for kind in (TransformKind.PDF, TransformKind.CDF):
        batch = _invert_batch(kind, model, t, x, DEFAULT_CONFIG, shift_C=2.0)
        sigmas, _ = choose_abscissa(kind, model, t, x, 2.0)
        jobs.append((kind.value, x, sigmas, 2.0, batch.ns, t, *model.kernel_arrays()))
    return jobs


def _best_time(fn, jobs, repeat: int) -> tuple[float, list[np.ndarray]]:
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = [fn(*job) for job in jobs]
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    jobs = _workload(args.rows)
    terms = sum(int(np.sum(job[4] + 1)) for job in jobs)
    print(f"workload: {len(jobs)} batches, {args.rows} rows each, {terms} series terms")

    t_np, out_np = _best_time(kernels.series_numpy, jobs, args.repeat)
    print(f"numpy : {t_np * 1e3:9.2f} ms")
    if kernels.series_numba is None:
        print("numba : unavailable (not installed or HAIRCUT_DISABLE_NUMBA set)")
        return
    kernels.series_numba(*jobs[0])  # compile outside the timing
    t_nb, out_nb = _best_time(kernels.series_numba, jobs, args.repeat)
    diff = max(float(np.max(np.abs(a - b))) for a, b in zip(out_np, out_nb))
    print(f"numba : {t_nb * 1e3:9.2f} ms   speed-up {t_np / t_nb:5.1f}x")
    print(f"max |numba - numpy| = {diff:.3e}")


if __name__ == "__main__":
    main()
