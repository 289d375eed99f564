#!/usr/bin/env python3
"""Benchmark the compiled statevector kernels against the NumPy fallback.

Times full-circuit statevector runs and noisy sampling at growing qubit
counts, printing one table row per size with the speedup. Run from the repo
root after installing the package:

    python benchmarks/bench_kernels.py [--max-qubits 18] [--repeats 3]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from hqcstack.backend import _kernels_py
from hqcstack.backend import statevector as sv
from hqcstack.backend.devices import CalibrationSnapshot, DeviceSpec
from hqcstack.circuits import GateOp, QuantumCircuit
from hqcstack.transpile import Topology

try:
    from hqcstack.backend import _statevector as _kernels_cy
except ImportError:
    _kernels_cy = None


def random_native_circuit(rng: np.random.Generator, n: int, depth: int) -> QuantumCircuit:
    """Random circuit in the device-native gate set (rx, rz, cz) plus measures."""
    ops: list[GateOp] = []
    for _ in range(depth):
        r = rng.random()
        if r < 0.4 and n >= 2:
            a, b = rng.choice(n, size=2, replace=False)
            ops.append(GateOp("cz", (int(a), int(b))))
        else:
            name = "rx" if r < 0.7 else "rz"
            ops.append(
                GateOp(name, (int(rng.integers(n)),), (float(rng.uniform(-math.pi, math.pi)),))
            )
    ops.extend(GateOp("measure", (q,)) for q in range(n))
    return QuantumCircuit(n, tuple(ops))


def line_device(n: int) -> DeviceSpec:
    return DeviceSpec(
        device_id=f"bench-{n}q",
        topology=Topology(n, frozenset((i, i + 1) for i in range(n - 1))),
        calibration=CalibrationSnapshot(f1=0.997, f2=0.95, f_ro=0.95, t2_us=15.0),
    )


def time_with(impl, fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        sv.kernels = impl
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-qubits", type=int, default=18)
    parser.add_argument("--depth", type=int, default=60)
    parser.add_argument("--shots", type=int, default=2000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if _kernels_cy is None:
        print("compiled kernels not available; nothing to compare "
              "(build with `pip install -e . --no-build-isolation`)")
        return

    original = sv.kernels
    rng = np.random.default_rng(1234)
    print(f"{'qubits':>6} {'task':<14} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    try:
        for n in range(8, args.max_qubits + 1, 2):
            c = random_native_circuit(rng, n, args.depth)
            state_fn = lambda: sv.run_statevector(c, cap=args.max_qubits)
            t_np = time_with(_kernels_py, state_fn, args.repeats)
            t_cy = time_with(_kernels_cy, state_fn, args.repeats)
            print(
                f"{n:>6} {'statevector':<14} {t_np * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms "
                f"{t_np / t_cy:>7.1f}x"
            )

        # noisy sampling exercises trajectory re-simulation
        n = min(10, args.max_qubits)
        spec = line_device(n)
        c = random_native_circuit(rng, n, args.depth)
        # keep only edges the line couples; rewire cz ops onto neighbors
        ops = [
            GateOp("cz", (min(op.qubits), min(op.qubits) + 1))
            if op.name == "cz" and not spec.topology.has_edge(*op.qubits)
            else op
            for op in c.ops
            if not (op.name == "cz" and max(op.qubits) >= n)
        ]
        c = QuantumCircuit(n, tuple(ops))
        sample_fn = lambda: sv.sample_counts(c, args.shots, spec, seed=1, noisy=True)
        t_np = time_with(_kernels_py, sample_fn, args.repeats)
        t_cy = time_with(_kernels_cy, sample_fn, args.repeats)
        print(
            f"{n:>6} {'noisy sampling':<14} {t_np * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms "
            f"{t_np / t_cy:>7.1f}x"
        )
    finally:
        sv.kernels = original


if __name__ == "__main__":
    main()
