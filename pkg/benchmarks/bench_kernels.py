"""Time the two statevector kernel lanes against each other.

Runs the three kernel entry points (fixed 2x2, parameterized rotation,
Z-product readout) over a sweep of register sizes and reports the best
wall time per lane plus the numba speedup.  The workloads mirror what
training actually does: batched rotation walls, CNOT chains, one readout
per forward pass.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --qubits 8,12,14 --batch 128

The numba lane is prewarmed before timing so JIT compilation is excluded.
Lane selection for a real run stays with CPQC_BACKEND; this script imports
both lanes directly and ignores that variable.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from cpqc.backend import HAS_NUMBA, get_kernels

_H = 1.0 / math.sqrt(2.0)


def _random_state(batch: int, dim: int, rng) -> np.ndarray:
    state = rng.standard_normal((batch, dim)) + 1j * rng.standard_normal((batch, dim))
    return (state / np.linalg.norm(state, axis=1, keepdims=True)).astype(np.complex128)


def _workloads(n: int, batch: int, rng):
    dim = 1 << n
    angles = rng.uniform(-math.pi, math.pi, batch)

    def rotation_wall(k):
        state = base.copy()
        for q in range(n):
            k.apply_rot(state, dim, 1 << (n - 1 - q), 0, q % 3, angles)

    def cnot_chain(k):
        state = base.copy()
        for q in range(n - 1):
            tbit = 1 << (n - 1 - (q + 1))
            cmask = 1 << (n - 1 - q)
            k.apply_fixed(state, dim, tbit, cmask, 0j, 1 + 0j, 1 + 0j, 0j)

    def hadamard_wall(k):
        state = base.copy()
        for q in range(n):
            k.apply_fixed(state, dim, 1 << (n - 1 - q), 0, _H + 0j, _H + 0j, _H + 0j, -_H + 0j)

    def readout(k):
        k.expect_z(base, dim, dim - 1)

    base = _random_state(batch, dim, rng)
    return [
        ("rot wall", rotation_wall),
        ("cnot chain", cnot_chain),
        ("h wall", hadamard_wall),
        ("readout", readout),
    ]


def _best_time(fn, kernels, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(kernels)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--qubits", default="6,10,14", help="comma list of register sizes")
    parser.add_argument("--batch", type=int, default=64, help="statevector batch size")
    parser.add_argument("--repeats", type=int, default=5, help="best-of-N timing")
    args = parser.parse_args(argv)

    sizes = [int(s) for s in args.qubits.split(",")]
    lanes = [("numpy", get_kernels("numpy"))]
    if HAS_NUMBA:
        numba_lane = get_kernels("numba")
        numba_lane.prewarm()
        lanes.append(("numba", numba_lane))
    else:
        print("numba not importable; timing the numpy lane only")

    rng = np.random.default_rng(0)
    header = f"{'workload':<12} {'n':>3} {'batch':>6}"
    for name, _ in lanes:
        header += f" {name + ' ms':>10}"
    if len(lanes) == 2:
        header += f" {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        for label, fn in _workloads(n, args.batch, rng):
            times = [_best_time(fn, k, args.repeats) for _, k in lanes]
            row = f"{label:<12} {n:>3} {args.batch:>6}"
            for t in times:
                row += f" {t * 1e3:>10.3f}"
            if len(times) == 2:
                row += f" {times[0] / times[1]:>7.1f}x"
            print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
