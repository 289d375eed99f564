"""Exact statevector execution and measurement sampling.

Simulation works on the circuit's *active* qubits (those touched by any op);
untouched wires stay |0> and factor out, so a small circuit routed onto a
large device does not pay for the device's full register. The configurable
cap bounds the active-qubit count.

Noisy sampling is Monte Carlo per shot: the error events for every shot are
drawn up front (vectorized), shots with no events are sampled straight from
the ideal distribution, and only shots with events re-simulate a trajectory.
With every error probability exactly zero the sampler short-circuits to the
noiseless path, making zero-noise runs bit-identical to noiseless ones at
equal seed.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..circuits import GateOp, QuantumCircuit, TWO_QUBIT_GATES, memory_estimate
from . import kernels
from .devices import DeviceSpec
from .noise import NoiseParams, noise_for_device

__all__ = [
    "DEFAULT_QUBIT_CAP",
    "SimulationError",
    "QubitCapExceededError",
    "UntranspiledCircuitError",
    "run_statevector",
    "simulate_ideal",
    "sample_counts",
    "check_transpiled",
]

DEFAULT_QUBIT_CAP = 20

# Shots processed per vectorized noise-event draw.
_SHOT_CHUNK = 65536

_SQRT2_INV = 1.0 / math.sqrt(2.0)
_FIXED_1Q = {
    "h": np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQRT2_INV,
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
_PAULIS = {
    1: _FIXED_1Q["x"],
    2: _FIXED_1Q["y"],
    3: _FIXED_1Q["z"],
}


class SimulationError(Exception):
    """Simulation preconditions violated."""


class QubitCapExceededError(SimulationError):
    """Too many active qubits for exact statevector simulation."""


class UntranspiledCircuitError(SimulationError):
    """Circuit contains non-native gates or gates on uncoupled pairs."""


def gate_matrix_1q(op: GateOp) -> np.ndarray:
    if op.name in _FIXED_1Q:
        return _FIXED_1Q[op.name]
    half = op.params[0] / 2.0
    c, s = math.cos(half), math.sin(half)
    if op.name == "rx":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if op.name == "ry":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if op.name == "rz":
        return np.array(
            [[complex(c, -s), 0], [0, complex(c, s)]], dtype=np.complex128
        )
    raise SimulationError(f"not a single-qubit gate: {op.name}")


def _apply_op(state: np.ndarray, op: GateOp, n: int) -> None:
    if op.name == "barrier":
        return
    if op.name == "cz":
        kernels.apply_cz(state, op.qubits[0], op.qubits[1], n)
    elif op.name == "cx":
        kernels.apply_cx(state, op.qubits[0], op.qubits[1], n)
    elif op.name == "swap":
        kernels.apply_swap(state, op.qubits[0], op.qubits[1], n)
    else:
        kernels.apply_1q(state, gate_matrix_1q(op), op.qubits[0], n)


def run_statevector(
    c: QuantumCircuit, cap: int = DEFAULT_QUBIT_CAP, check_norm: bool = False
) -> np.ndarray:
    """Final statevector over all c.n_qubits wires (measures ignored).

    check_norm asserts the norm stays within 1e-10 of 1 after every gate.
    """
    if c.n_qubits > cap:
        raise QubitCapExceededError(
            f"{c.n_qubits} qubits exceeds cap {cap}; exact statevector needs "
            f"{memory_estimate(c.n_qubits)} bytes"
        )
    state = np.zeros(1 << c.n_qubits, dtype=np.complex128)
    state[0] = 1.0
    for op in c.ops:
        if op.name == "measure":
            continue
        _apply_op(state, op, c.n_qubits)
        if check_norm:
            norm = float(np.linalg.norm(state))
            if abs(norm - 1.0) > 1e-10:
                raise SimulationError(f"norm drifted to {norm} after {op.name}")
    return state


def _compact(c: QuantumCircuit) -> tuple[int, list[GateOp], list[int], list[int]]:
    """Relabel the circuit onto its active qubits.

    Returns (active count, relabeled unitary ops, measured axes in compact
    space ascending, measured original qubits ascending).
    """
    active = sorted({q for op in c.ops for q in op.qubits})
    if not active:
        active = [0]
    remap = {q: i for i, q in enumerate(active)}
    ops = [
        GateOp(op.name, tuple(remap[q] for q in op.qubits), op.params)
        for op in c.ops
        if op.name not in ("measure", "barrier")
    ]
    measured = sorted(op.qubits[0] for op in c.ops if op.name == "measure")
    meas_axes = [remap[q] for q in measured]
    return len(active), ops, meas_axes, measured


def _measured_probs(state: np.ndarray, k: int, meas_axes: Sequence[int]) -> np.ndarray:
    p = np.abs(state) ** 2
    if len(meas_axes) == k:
        probs = p
    else:
        other = tuple(a for a in range(k) if a not in set(meas_axes))
        probs = p.reshape([2] * k).sum(axis=other).reshape(-1)
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if total <= 0.0:
        raise SimulationError("statevector collapsed to zero norm")
    return probs / total


def _prepare(c: QuantumCircuit, cap: int):
    k, ops, meas_axes, measured = _compact(c)
    if not measured:
        raise SimulationError("circuit measures no qubits")
    if k > cap:
        raise QubitCapExceededError(
            f"{k} active qubits exceeds cap {cap}; exact statevector needs "
            f"{memory_estimate(k)} bytes"
        )
    state = np.zeros(1 << k, dtype=np.complex128)
    state[0] = 1.0
    for op in ops:
        _apply_op(state, op, k)
    return k, ops, meas_axes, measured, _measured_probs(state, k, meas_axes)


def simulate_ideal(c: QuantumCircuit, cap: int = DEFAULT_QUBIT_CAP) -> dict[str, float]:
    """Exact outcome distribution over the measured qubits (qubit 0 leftmost).

    Entries with probability <= 1e-15 are omitted. Probabilities sum to 1
    within 1e-10.
    """
    _, _, _, measured, probs = _prepare(c, cap)
    width = len(measured)
    return {
        format(i, f"0{width}b"): float(p)
        for i, p in enumerate(probs)
        if p > 1e-15
    }


def check_transpiled(c: QuantumCircuit, spec: DeviceSpec) -> None:
    """Raise UntranspiledCircuitError unless every gate is native and every
    two-qubit gate sits on a coupling edge."""
    if c.n_qubits > spec.topology.n_qubits:
        raise UntranspiledCircuitError(
            f"circuit has {c.n_qubits} qubits, device {spec.device_id} has "
            f"{spec.topology.n_qubits}"
        )
    for op in c.ops:
        if op.name in ("measure", "barrier"):
            continue
        if op.name not in spec.native_gates:
            raise UntranspiledCircuitError(
                f"gate {op.name} is not native to {spec.device_id}; transpile first"
            )
        if op.name in TWO_QUBIT_GATES and not spec.topology.has_edge(*op.qubits):
            raise UntranspiledCircuitError(
                f"{op.name} on uncoupled pair {op.qubits} of {spec.device_id}; transpile first"
            )


# ---------------------------------------------------------------------------
# Noise trajectory machinery
# ---------------------------------------------------------------------------

def _build_events(ops: list[GateOp], noise: NoiseParams) -> tuple[list[tuple], np.ndarray]:
    """Per-circuit error-event table: (op index, kind, qubits) with one
    insertion probability each. Order is circuit order; for one gate the
    Pauli event precedes the per-qubit dephase events."""
    events: list[tuple] = []
    probs: list[float] = []
    for i, op in enumerate(ops):
        two = len(op.qubits) == 2
        p_gate = noise.p2 if two else noise.p1
        if p_gate > 0.0:
            events.append((i, "pauli", op.qubits))
            probs.append(p_gate)
        p_deph = noise.dephase_2q if two else noise.dephase_1q
        if p_deph > 0.0:
            for q in op.qubits:
                events.append((i, "dephase", (q,)))
                probs.append(p_deph)
    return events, np.asarray(probs, dtype=np.float64)


def _apply_error(state: np.ndarray, kind: str, qubits: tuple[int, ...], k: int, rng) -> None:
    if kind == "dephase":
        kernels.apply_1q(state, _PAULIS[3], qubits[0], k)
    elif len(qubits) == 1:
        kernels.apply_1q(state, _PAULIS[int(rng.integers(1, 4))], qubits[0], k)
    else:
        code = int(rng.integers(1, 16))
        pa, pb = code // 4, code % 4
        if pa:
            kernels.apply_1q(state, _PAULIS[pa], qubits[0], k)
        if pb:
            kernels.apply_1q(state, _PAULIS[pb], qubits[1], k)


def _trajectory_outcome(
    k: int,
    ops: list[GateOp],
    occurred: np.ndarray,
    events: list[tuple],
    meas_axes: Sequence[int],
    rng,
) -> int:
    state = np.zeros(1 << k, dtype=np.complex128)
    state[0] = 1.0
    hit = [events[j] for j in np.nonzero(occurred)[0]]
    ptr = 0
    for i, op in enumerate(ops):
        _apply_op(state, op, k)
        while ptr < len(hit) and hit[ptr][0] == i:
            _, kind, qubits = hit[ptr]
            _apply_error(state, kind, qubits, k, rng)
            ptr += 1
    probs = _measured_probs(state, k, meas_axes)
    return int(rng.choice(len(probs), p=probs))


def sample_counts(
    c: QuantumCircuit,
    shots: int,
    spec: DeviceSpec,
    seed: int,
    noisy: bool = False,
    cap: int = DEFAULT_QUBIT_CAP,
) -> dict[str, int]:
    """Sample measurement counts for a device-ready circuit.

    Deterministic for a given seed. Counts always sum to ``shots``; bitstring
    order is measured-qubit ascending, qubit 0 leftmost.
    """
    if shots < 1:
        raise SimulationError(f"shots must be >= 1, got {shots}")
    check_transpiled(c, spec)
    k, ops, meas_axes, measured, probs = _prepare(c, cap)
    width = len(measured)
    rng = np.random.default_rng(seed)

    noise = noise_for_device(spec) if noisy else None
    if noise is not None and noise.is_zero:
        noise = None

    if noise is None:
        outcomes = rng.choice(len(probs), size=shots, p=probs)
    else:
        events, p_events = _build_events(ops, noise)
        # chunk size depends only on the circuit, so draws stay deterministic
        chunk_size = _SHOT_CHUNK
        if events:
            chunk_size = max(1024, min(_SHOT_CHUNK, (1 << 26) // len(events)))
        outcomes = np.empty(shots, dtype=np.int64)
        for start in range(0, shots, chunk_size):
            m = min(chunk_size, shots - start)
            if len(events) > 0:
                occur = rng.random((m, len(events))) < p_events
                dirty = occur.any(axis=1)
            else:
                occur = np.zeros((m, 0), dtype=bool)
                dirty = np.zeros(m, dtype=bool)
            n_clean = int(m - dirty.sum())
            chunk = np.empty(m, dtype=np.int64)
            if n_clean:
                chunk[~dirty] = rng.choice(len(probs), size=n_clean, p=probs)
            for row in np.nonzero(dirty)[0]:
                chunk[row] = _trajectory_outcome(k, ops, occur[row], events, meas_axes, rng)
            outcomes[start : start + m] = chunk
        if noise.p_readout > 0.0:
            flips = rng.random((shots, width)) < noise.p_readout
            bit_values = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
            outcomes ^= (flips * bit_values).sum(axis=1)

    counts_vec = np.bincount(outcomes, minlength=1 << width)
    return {
        format(i, f"0{width}b"): int(n) for i, n in enumerate(counts_vec) if n > 0
    }
