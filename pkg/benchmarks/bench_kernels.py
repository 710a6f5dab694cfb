"""Benchmark the JIT-compiled kernels against their plain-numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--lps N] [--points N]

The same comparison can be reproduced end to end by running any CLI command
with PWALYAP_DISABLE_NUMBA=1 in the environment, which selects the fallback
path globally.
"""

import argparse
import time

import numpy as np

from pwalyap import _kernels


def make_lp_batch(rng, count):
    batch = []
    for _ in range(count):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(n + 2, 14))
        G = rng.normal(size=(m, n))
        h = rng.uniform(0.5, 2.0, size=m)
        # standard form with free-variable split and slacks, rhs >= 0
        A = np.hstack([G, -G, np.eye(m)])
        c = np.concatenate([rng.normal(size=n), np.zeros(n + m)])
        c[n:2 * n] = -c[:n]
        batch.append((A, h, c))
    return batch


def bench(fn, batch, repeats):
    t0 = time.perf_counter()
    out = 0.0
    for _ in range(repeats):
        for A, b, c in batch:
            status, x, val, _ = fn(A, b, c, 2000, 1e-9)
            if status == _kernels.OPTIMAL:
                out += val
    return time.perf_counter() - t0, out


def bench_modes(fn, X, F, h, offsets, repeats):
    t0 = time.perf_counter()
    acc = 0
    for _ in range(repeats):
        acc += int(fn(X, F, h, offsets, 1e-8).sum())
    return time.perf_counter() - t0, acc


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lps", type=int, default=300)
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    batch = make_lp_batch(rng, args.lps)

    if not _kernels.NUMBA_ENABLED:
        print("numba disabled or unavailable; only the numpy path will run")
    else:
        # warm the JIT cache before timing
        A, b, c = batch[0]
        _kernels.simplex_standard(A, b, c, 2000, 1e-9)

    rows = []
    t_py, chk_py = bench(_kernels.simplex_standard_py, batch, args.repeats)
    rows.append(("simplex", "numpy", t_py, chk_py))
    if _kernels.NUMBA_ENABLED:
        t_nb, chk_nb = bench(_kernels.simplex_standard, batch, args.repeats)
        rows.append(("simplex", "numba", t_nb, chk_nb))
        assert abs(chk_nb - chk_py) < 1e-6 * (1 + abs(chk_py)), "paths disagree"

    X = rng.uniform(-0.3, 0.3, size=(args.points, 2))
    F = np.vstack([np.eye(2), -np.eye(2), np.eye(2), -np.eye(2)])
    h = np.array([0.1, 1.5, 0.2, 1.5, 0.2, 1.5, -0.1, 1.5])
    offsets = np.array([0, 4, 8], dtype=np.int64)
    if _kernels.NUMBA_ENABLED:
        _kernels.assign_modes(X[:10], F, h, offsets, 1e-8)
    t_py, chk_py = bench_modes(_kernels.assign_modes_py, X, F, h, offsets, args.repeats)
    rows.append(("assign_modes", "numpy", t_py, chk_py))
    if _kernels.NUMBA_ENABLED:
        t_nb, chk_nb = bench_modes(_kernels.assign_modes, X, F, h, offsets, args.repeats)
        rows.append(("assign_modes", "numba", t_nb, chk_nb))
        assert chk_nb == chk_py, "paths disagree"

    print(f"\n{args.lps} LPs and {args.points} mode lookups, x{args.repeats}:")
    print(f"{'kernel':<14}{'path':<8}{'seconds':>10}")
    base = {}
    for kernel, path, secs, _ in rows:
        base.setdefault(kernel, secs)
        speedup = base[kernel] / secs
        print(f"{kernel:<14}{path:<8}{secs:>10.3f}   ({speedup:4.1f}x vs numpy)")


if __name__ == "__main__":
    main()
