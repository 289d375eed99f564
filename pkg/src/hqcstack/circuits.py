"""Quantum-circuit data model, wire format, device validation, and memory scaling.

Circuits are flat gate lists over a fixed 12-gate vocabulary. Measurement is
terminal only: one classical bit per measured qubit, qubit 0 rendered leftmost
in bitstrings. The wire format is JSON with normative, case-sensitive field
names (`name`, `n_qubits`, `ops`, `gate`, `qubits`, `params`; batches add
`circuits` and `shots`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .backend.devices import DeviceSpec

__all__ = [
    "GATE_ARITY",
    "GATE_NAMES",
    "ROTATION_GATES",
    "TWO_QUBIT_GATES",
    "SELF_INVERSE_GATES",
    "CircuitError",
    "WireFormatError",
    "UnknownGateError",
    "GateOp",
    "QuantumCircuit",
    "CircuitBatch",
    "Violation",
    "parse_circuit",
    "serialize_circuit",
    "parse_batch",
    "serialize_batch",
    "validate_circuit",
    "memory_estimate",
    "MEMORY_ESTIMATE_MAX_BYTES",
]

# gate name -> (qubit arity, param arity); barrier takes any number of qubits
GATE_ARITY: dict[str, tuple[int, int]] = {
    "h": (1, 0),
    "x": (1, 0),
    "y": (1, 0),
    "z": (1, 0),
    "rx": (1, 1),
    "ry": (1, 1),
    "rz": (1, 1),
    "cz": (2, 0),
    "cx": (2, 0),
    "swap": (2, 0),
    "barrier": (-1, 0),
    "measure": (1, 0),
}
GATE_NAMES = frozenset(GATE_ARITY)
ROTATION_GATES = frozenset({"rx", "ry", "rz"})
TWO_QUBIT_GATES = frozenset({"cz", "cx", "swap"})
SELF_INVERSE_GATES = frozenset({"h", "x", "y", "z", "cz", "cx", "swap"})

# Complex double: two 8-byte components per amplitude.
_BYTES_PER_AMPLITUDE = 16
# Saturation bound for memory_estimate ("representable range" pinned to int64).
MEMORY_ESTIMATE_MAX_BYTES = 2**63 - 1


class CircuitError(ValueError):
    """A circuit or gate op violates the data-model invariants."""


class WireFormatError(CircuitError):
    """A wire-format document is malformed or missing required fields."""


class UnknownGateError(CircuitError):
    """Gate name outside the fixed vocabulary."""


@dataclass(frozen=True)
class GateOp:
    """One gate application: name, ordered qubit indices, rotation params."""

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.name not in GATE_ARITY:
            raise UnknownGateError(f"unknown gate {self.name!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        n_qubits, n_params = GATE_ARITY[self.name]
        if n_qubits >= 0 and len(self.qubits) != n_qubits:
            raise CircuitError(
                f"{self.name} expects {n_qubits} qubit(s), got {len(self.qubits)}"
            )
        if not self.qubits:
            raise CircuitError(f"{self.name} op names no qubits")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"negative qubit index in {self.name} op: {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"duplicate qubit indices in {self.name} op: {self.qubits}")
        if len(self.params) != n_params:
            raise CircuitError(
                f"{self.name} expects {n_params} param(s), got {len(self.params)}"
            )


@dataclass(frozen=True)
class QuantumCircuit:
    """Ordered gate list on ``n_qubits`` wires.

    Invariants: all qubit indices in range, at most one measure per qubit,
    and nothing follows a measure on its qubit.
    """

    n_qubits: int
    ops: tuple[GateOp, ...] = ()
    name: str = "circuit"

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        if self.n_qubits < 1:
            raise CircuitError(f"n_qubits must be positive, got {self.n_qubits}")
        measured: set[int] = set()
        for op in self.ops:
            for q in op.qubits:
                if q >= self.n_qubits:
                    raise CircuitError(
                        f"qubit {q} out of range for {self.n_qubits}-qubit circuit"
                    )
                if q in measured:
                    raise CircuitError(f"op {op.name} on qubit {q} after its measure")
            if op.name == "measure":
                measured.add(op.qubits[0])

    @property
    def measured_qubits(self) -> tuple[int, ...]:
        """Qubits with a terminal measure, in ascending index order."""
        return tuple(sorted(op.qubits[0] for op in self.ops if op.name == "measure"))

    def gate_ops(self) -> tuple[GateOp, ...]:
        """Ops excluding measures and barriers (the unitary part)."""
        return tuple(op for op in self.ops if op.name not in ("measure", "barrier"))


@dataclass(frozen=True)
class CircuitBatch:
    """Non-empty list of circuits to run with a common per-circuit shot count."""

    circuits: tuple[QuantumCircuit, ...]
    shots: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "circuits", tuple(self.circuits))
        if not self.circuits:
            raise CircuitError("batch must contain at least one circuit")
        if self.shots < 1:
            raise CircuitError(f"shots must be >= 1, got {self.shots}")


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------

def _circuit_from_obj(obj: object) -> QuantumCircuit:
    if not isinstance(obj, dict):
        raise WireFormatError("circuit document must be a JSON object")
    try:
        n_qubits = obj["n_qubits"]
        raw_ops = obj["ops"]
    except KeyError as exc:
        raise WireFormatError(f"circuit document missing field {exc.args[0]!r}") from None
    name = obj.get("name", "circuit")
    if not isinstance(n_qubits, int) or isinstance(n_qubits, bool):
        raise WireFormatError("n_qubits must be an integer")
    if not isinstance(raw_ops, list):
        raise WireFormatError("ops must be an array")
    ops = []
    for i, raw in enumerate(raw_ops):
        if not isinstance(raw, dict) or "gate" not in raw or "qubits" not in raw:
            raise WireFormatError(f"op {i} must be an object with 'gate' and 'qubits'")
        ops.append(
            GateOp(
                name=raw["gate"],
                qubits=tuple(raw["qubits"]),
                params=tuple(raw.get("params", ())),
            )
        )
    return QuantumCircuit(n_qubits=n_qubits, ops=tuple(ops), name=str(name))


def _circuit_to_obj(c: QuantumCircuit) -> dict:
    return {
        "name": c.name,
        "n_qubits": c.n_qubits,
        "ops": [
            {"gate": op.name, "qubits": list(op.qubits), "params": list(op.params)}
            for op in c.ops
        ],
    }


def parse_circuit(document: str) -> QuantumCircuit:
    """Parse a wire-format circuit document.

    Raises WireFormatError for malformed documents, UnknownGateError /
    CircuitError for invalid gate content.
    """
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise WireFormatError(f"malformed circuit document: {exc}") from exc
    return _circuit_from_obj(obj)


def serialize_circuit(c: QuantumCircuit) -> str:
    """Render a circuit as its wire-format document.

    Floats use Python repr (17 significant digits), comfortably above the
    12-digit format contract. parse_circuit(serialize_circuit(c)) == c.
    """
    return json.dumps(_circuit_to_obj(c))


def parse_batch(document: str) -> CircuitBatch:
    """Parse a wire-format batch document ({circuits, shots})."""
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise WireFormatError(f"malformed batch document: {exc}") from exc
    return batch_from_obj(obj)


def batch_from_obj(obj: object) -> CircuitBatch:
    """Build a CircuitBatch from an already-decoded JSON object."""
    if not isinstance(obj, dict) or "circuits" not in obj or "shots" not in obj:
        raise WireFormatError("batch document must be an object with 'circuits' and 'shots'")
    shots = obj["shots"]
    if not isinstance(shots, int) or isinstance(shots, bool):
        raise WireFormatError("shots must be an integer")
    if not isinstance(obj["circuits"], list):
        raise WireFormatError("circuits must be an array")
    circuits = tuple(_circuit_from_obj(c) for c in obj["circuits"])
    return CircuitBatch(circuits=circuits, shots=shots)


def batch_to_obj(batch: CircuitBatch) -> dict:
    return {"circuits": [_circuit_to_obj(c) for c in batch.circuits], "shots": batch.shots}


def serialize_batch(batch: CircuitBatch) -> str:
    return json.dumps(batch_to_obj(batch))


# ---------------------------------------------------------------------------
# Device validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    """One validation finding. hard=True means the device cannot run it at all;
    informational findings (non-native gate, uncoupled pair) are fixable by the
    transpiler."""

    kind: str
    message: str
    hard: bool = False


def validate_circuit(c: QuantumCircuit, spec: "DeviceSpec") -> list[Violation]:
    """Check a circuit against a device spec. Violations are data, not errors.

    Kinds: ``qubit_count`` (hard), ``non_native`` (info), ``uncoupled`` (info).
    Pure: same inputs yield an identical report.
    """
    report: list[Violation] = []
    if c.n_qubits > spec.topology.n_qubits:
        report.append(
            Violation(
                kind="qubit_count",
                message=(
                    f"circuit uses {c.n_qubits} qubits but device "
                    f"{spec.device_id} has {spec.topology.n_qubits}"
                ),
                hard=True,
            )
        )
    native = spec.native_gates.names
    flagged_gates: set[str] = set()
    for op in c.ops:
        if op.name in ("measure", "barrier"):
            continue
        if op.name not in native and op.name not in flagged_gates:
            flagged_gates.add(op.name)
            report.append(
                Violation(kind="non_native", message=f"gate {op.name} not native")
            )
        if op.name in TWO_QUBIT_GATES and c.n_qubits <= spec.topology.n_qubits:
            a, b = op.qubits
            if not spec.topology.has_edge(a, b):
                report.append(
                    Violation(
                        kind="uncoupled",
                        message=f"{op.name} on uncoupled pair ({a}, {b})",
                    )
                )
    return report


def memory_estimate(n: int) -> int | float:
    """Bytes needed to hold an exact statevector of n qubits (2^n amplitudes,
    16 bytes each). Returns math.inf once the byte count exceeds int64 range.
    """
    if n < 1:
        raise ValueError(f"qubit count must be >= 1, got {n}")
    bytes_needed = (1 << n) * _BYTES_PER_AMPLITUDE
    if bytes_needed > MEMORY_ESTIMATE_MAX_BYTES:
        return math.inf
    return bytes_needed
