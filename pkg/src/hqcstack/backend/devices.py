"""Device specs, calibration snapshots, and the two built-in device presets.

`helmi-sim` is a 5-qubit star (center 0); `qal9000-sim` is a 25-qubit 5x5
nearest-neighbor grid. Both use the {rx, rz, cz} native set and share the
same calibration sampling ranges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from ..transpile import DEFAULT_NATIVE_GATES, NativeGateSet, Topology
from ..circuits import QuantumCircuit

__all__ = [
    "CalibrationSnapshot",
    "DeviceSpec",
    "UnknownDeviceError",
    "DEFAULT_GATE_DURATIONS_NS",
    "PRESET_DEVICE_IDS",
    "CALIBRATION_RANGES",
    "generate_calibration_snapshot",
    "device_preset",
    "circuit_wall_seconds",
    "batch_qpu_seconds",
]

DEFAULT_GATE_DURATIONS_NS: dict[str, float] = {
    "single_qubit": 40.0,
    "two_qubit": 120.0,
    "readout": 1500.0,
}

PRESET_DEVICE_IDS = ("helmi-sim", "qal9000-sim")

# Uniform sampling intervals for fresh calibration snapshots.
CALIBRATION_RANGES = {
    "f1": (0.995, 0.999),
    "f2": (0.94, 0.96),
    "f_ro": (0.94, 0.96),
    "t2_us": (10.0, 20.0),
}


class UnknownDeviceError(KeyError):
    """Device id not present in the registry being consulted."""


@dataclass(frozen=True)
class CalibrationSnapshot:
    """Point-in-time device quality: gate/readout fidelities and T2 dephasing."""

    f1: float
    f2: float
    f_ro: float
    t2_us: float
    taken_at: float = 0.0

    def __post_init__(self) -> None:
        for label in ("f1", "f2", "f_ro"):
            v = getattr(self, label)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{label} must be in (0, 1], got {v}")
        if not self.t2_us > 0:
            raise ValueError(f"t2_us must be positive, got {self.t2_us}")

    def to_obj(self) -> dict:
        return {
            "f1": self.f1,
            "f2": self.f2,
            "f_ro": self.f_ro,
            "t2_us": self.t2_us,
            "taken_at": self.taken_at,
        }


@dataclass(frozen=True, eq=False)
class DeviceSpec:
    """Everything the stack knows about one device: topology, native gates,
    latest calibration, and per-gate-class durations (ns)."""

    device_id: str
    topology: Topology
    native_gates: NativeGateSet = DEFAULT_NATIVE_GATES
    calibration: CalibrationSnapshot = field(
        default_factory=lambda: CalibrationSnapshot(0.997, 0.95, 0.95, 15.0)
    )
    gate_durations_ns: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_GATE_DURATIONS_NS)
    )

    def __post_init__(self) -> None:
        if not self.topology.is_connected():
            raise ValueError(f"device {self.device_id}: topology must be connected")
        for key in ("single_qubit", "two_qubit", "readout"):
            if key not in self.gate_durations_ns:
                raise ValueError(f"device {self.device_id}: missing duration for {key}")
            if self.gate_durations_ns[key] <= 0:
                raise ValueError(f"device {self.device_id}: duration {key} must be positive")

    @property
    def n_qubits(self) -> int:
        return self.topology.n_qubits

    def with_calibration(self, cal: CalibrationSnapshot) -> "DeviceSpec":
        return DeviceSpec(
            device_id=self.device_id,
            topology=self.topology,
            native_gates=self.native_gates,
            calibration=cal,
            gate_durations_ns=dict(self.gate_durations_ns),
        )

    def to_obj(self) -> dict:
        return {
            "device_id": self.device_id,
            "n_qubits": self.n_qubits,
            "edges": sorted(list(e) for e in self.topology.edges),
            "native_gates": sorted(self.native_gates.names),
            "calibration": self.calibration.to_obj(),
            "gate_durations_ns": dict(self.gate_durations_ns),
        }


def generate_calibration_snapshot(
    device_id: str,
    seed: int,
    taken_at: float = 0.0,
    known_devices: Iterable[str] = PRESET_DEVICE_IDS,
) -> CalibrationSnapshot:
    """Draw a fresh snapshot from the calibration ranges, seeded per call.

    f1 is sampled from [0.995, 0.999] and f2 from [0.94, 0.96], so f1 > f2
    always (disjoint intervals). Raises UnknownDeviceError for ids outside
    ``known_devices``.
    """
    if device_id not in set(known_devices):
        raise UnknownDeviceError(device_id)
    rng = np.random.default_rng(seed)
    values = {
        label: float(rng.uniform(lo, hi)) for label, (lo, hi) in CALIBRATION_RANGES.items()
    }
    return CalibrationSnapshot(taken_at=taken_at, **values)


def device_preset(device_id: str, seed: int = 0, taken_at: float = 0.0) -> DeviceSpec:
    """Build one of the two modeled devices with a seeded calibration."""
    if device_id == "helmi-sim":
        topo = Topology.star(5, center=0)
    elif device_id == "qal9000-sim":
        topo = Topology.grid(5, 5)
    else:
        raise UnknownDeviceError(device_id)
    cal = generate_calibration_snapshot(device_id, seed=seed, taken_at=taken_at)
    return DeviceSpec(device_id=device_id, topology=topo, calibration=cal)


def _op_duration_ns(spec: DeviceSpec, n_qubits: int) -> float:
    key = "single_qubit" if n_qubits == 1 else "two_qubit"
    return float(spec.gate_durations_ns[key])


def circuit_wall_seconds(c: QuantumCircuit, spec: DeviceSpec) -> float:
    """Wall duration of one shot: gate durations along the critical path,
    plus one readout window when the circuit measures anything. Barriers
    synchronize their qubits at zero cost."""
    acc = [0.0] * c.n_qubits
    measures = False
    for op in c.ops:
        if op.name == "measure":
            measures = True
            continue
        start = max(acc[q] for q in op.qubits)
        if op.name == "barrier":
            for q in op.qubits:
                acc[q] = start
            continue
        end = start + _op_duration_ns(spec, len(op.qubits))
        for q in op.qubits:
            acc[q] = end
    wall_ns = max(acc) if acc else 0.0
    if measures:
        wall_ns += float(spec.gate_durations_ns["readout"])
    return wall_ns * 1e-9


def batch_qpu_seconds(circuits: Iterable[QuantumCircuit], shots: int, spec: DeviceSpec) -> float:
    """Device seconds consumed by a batch: sum of per-circuit wall duration x shots."""
    return sum(circuit_wall_seconds(c, spec) for c in circuits) * shots
