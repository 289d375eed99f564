"""Circuit rewriting for a target device: native-gate decomposition, greedy
SWAP routing onto the coupling graph, and peephole gate optimization.

All passes preserve the computed unitary up to a global phase; routing
additionally returns the final logical->physical permutation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .circuits import (
    GateOp,
    QuantumCircuit,
    ROTATION_GATES,
    SELF_INVERSE_GATES,
    TWO_QUBIT_GATES,
)

__all__ = [
    "Topology",
    "NativeGateSet",
    "TranspileError",
    "UnsupportedGateError",
    "DisconnectedTopologyError",
    "decompose_to_native",
    "route_to_topology",
    "optimize_gates",
    "transpile",
    "DEFAULT_NATIVE_GATES",
    "NEGLIGIBLE_ANGLE",
]

# Rotations with |wrapped angle| below this are dropped as identity.
NEGLIGIBLE_ANGLE = 1e-12


class TranspileError(Exception):
    """Base for transpilation failures."""


class UnsupportedGateError(TranspileError):
    """No known decomposition of a gate into the requested native set."""


class DisconnectedTopologyError(TranspileError):
    """Routing target graph is not connected."""


@dataclass(frozen=True)
class Topology:
    """Undirected coupling graph. Edges are stored normalized (low, high)."""

    n_qubits: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        norm = frozenset((min(a, b), max(a, b)) for a, b in self.edges)
        object.__setattr__(self, "edges", norm)
        for a, b in norm:
            if a == b or a < 0 or b >= self.n_qubits:
                raise ValueError(f"edge ({a}, {b}) invalid for {self.n_qubits} qubits")

    @staticmethod
    def star(n_qubits: int, center: int = 0) -> "Topology":
        """Star graph: every qubit coupled to the center."""
        edges = frozenset((center, i) for i in range(n_qubits) if i != center)
        return Topology(n_qubits=n_qubits, edges=edges)

    @staticmethod
    def grid(rows: int, cols: int) -> "Topology":
        """Planar grid with nearest-neighbor edges, row-major indexing."""
        edges = set()
        for r in range(rows):
            for c in range(cols):
                i = r * cols + c
                if c + 1 < cols:
                    edges.add((i, i + 1))
                if r + 1 < rows:
                    edges.add((i, i + cols))
        return Topology(n_qubits=rows * cols, edges=frozenset(edges))

    @staticmethod
    def line(n_qubits: int) -> "Topology":
        return Topology(
            n_qubits=n_qubits, edges=frozenset((i, i + 1) for i in range(n_qubits - 1))
        )

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def neighbors(self, q: int) -> list[int]:
        out = [b if a == q else a for a, b in self.edges if q in (a, b)]
        return sorted(out)

    def is_connected(self) -> bool:
        if self.n_qubits == 1:
            return True
        seen = {0}
        frontier = deque([0])
        while frontier:
            q = frontier.popleft()
            for nb in self.neighbors(q):
                if nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        return len(seen) == self.n_qubits

    def shortest_path(self, a: int, b: int) -> list[int]:
        """BFS shortest path from a to b, deterministic (sorted expansion).

        Raises DisconnectedTopologyError if b is unreachable from a.
        """
        if a == b:
            return [a]
        parent: dict[int, int] = {a: a}
        frontier = deque([a])
        while frontier:
            q = frontier.popleft()
            for nb in self.neighbors(q):
                if nb not in parent:
                    parent[nb] = q
                    if nb == b:
                        path = [b]
                        while path[-1] != a:
                            path.append(parent[path[-1]])
                        return path[::-1]
                    frontier.append(nb)
        raise DisconnectedTopologyError(f"no path between qubits {a} and {b}")


@dataclass(frozen=True)
class NativeGateSet:
    """Names a device executes directly (plus measure/barrier, always allowed)."""

    names: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", frozenset(self.names))
        if not self.names & ROTATION_GATES:
            raise ValueError("native set needs at least one rotation family")
        if not self.names & TWO_QUBIT_GATES:
            raise ValueError("native set needs at least one entangling gate")

    def __contains__(self, name: str) -> bool:
        return name in self.names


DEFAULT_NATIVE_GATES = NativeGateSet(names=frozenset({"rx", "rz", "cz"}))

_HALF_PI = math.pi / 2


def _one_step_rules(op: GateOp) -> list[GateOp]:
    """Rewrite one gate into the {rx, rz, cz} family (one step; callers recurse).

    Identities used (all exact up to global phase):
      h          = rz(pi/2) rx(pi/2) rz(pi/2)
      x          = rx(pi)
      y          = rz(pi) rx(pi)         (matrix product; rx applied first)
      z          = rz(pi)
      ry(t)      = rz(pi/2) rx(t) rz(-pi/2)   (applied rz(-pi/2) first)
      cx(a,b)    = h(b) cz(a,b) h(b)
      swap(a,b)  = cx(a,b) cx(b,a) cx(a,b)
    """
    q = op.qubits
    if op.name == "h":
        return [
            GateOp("rz", (q[0],), (_HALF_PI,)),
            GateOp("rx", (q[0],), (_HALF_PI,)),
            GateOp("rz", (q[0],), (_HALF_PI,)),
        ]
    if op.name == "x":
        return [GateOp("rx", (q[0],), (math.pi,))]
    if op.name == "y":
        return [GateOp("rx", (q[0],), (math.pi,)), GateOp("rz", (q[0],), (math.pi,))]
    if op.name == "z":
        return [GateOp("rz", (q[0],), (math.pi,))]
    if op.name == "ry":
        return [
            GateOp("rz", (q[0],), (-_HALF_PI,)),
            GateOp("rx", (q[0],), op.params),
            GateOp("rz", (q[0],), (_HALF_PI,)),
        ]
    if op.name == "cx":
        return [
            GateOp("h", (q[1],)),
            GateOp("cz", q),
            GateOp("h", (q[1],)),
        ]
    if op.name == "swap":
        return [GateOp("cx", q), GateOp("cx", (q[1], q[0])), GateOp("cx", q)]
    raise UnsupportedGateError(f"no decomposition rule for gate {op.name}")


def decompose_to_native(c: QuantumCircuit, gates: NativeGateSet) -> QuantumCircuit:
    """Rewrite every gate into ``gates`` (measure/barrier pass through).

    Raises UnsupportedGateError when a gate cannot be reached through the
    rule table (e.g. the native set lacks rx or rz).
    """
    out: list[GateOp] = []
    stack: list[GateOp] = list(reversed(c.ops))
    guard = 0
    limit = 64 * (len(c.ops) + 1)
    while stack:
        guard += 1
        if guard > limit:
            raise UnsupportedGateError("decomposition did not terminate; native set too small")
        op = stack.pop()
        if op.name in ("measure", "barrier") or op.name in gates:
            out.append(op)
            continue
        stack.extend(reversed(_one_step_rules(op)))
    return QuantumCircuit(n_qubits=c.n_qubits, ops=tuple(out), name=c.name)


def route_to_topology(
    c: QuantumCircuit, topo: Topology
) -> tuple[QuantumCircuit, tuple[int, ...]]:
    """Insert SWAPs so every two-qubit gate lands on a coupling edge.

    Greedy: gates in program order, each blocked pair resolved by swapping
    the first operand along the BFS shortest path until adjacent. Starts
    from the identity layout. Returns (routed circuit on topo.n_qubits wires,
    final layout) with layout[logical] = physical.
    """
    if c.n_qubits > topo.n_qubits:
        raise TranspileError(
            f"circuit needs {c.n_qubits} qubits, topology has {topo.n_qubits}"
        )
    if not topo.is_connected():
        raise DisconnectedTopologyError("routing target topology is not connected")

    log2phys = list(range(topo.n_qubits))
    phys2log = list(range(topo.n_qubits))

    def do_swap(pa: int, pb: int) -> None:
        la, lb = phys2log[pa], phys2log[pb]
        phys2log[pa], phys2log[pb] = lb, la
        log2phys[la], log2phys[lb] = pb, pa

    out: list[GateOp] = []
    for op in c.ops:
        if len(op.qubits) == 2 and op.name in TWO_QUBIT_GATES:
            pa, pb = log2phys[op.qubits[0]], log2phys[op.qubits[1]]
            if not topo.has_edge(pa, pb):
                path = topo.shortest_path(pa, pb)
                for i in range(len(path) - 2):
                    out.append(GateOp("swap", (path[i], path[i + 1])))
                    do_swap(path[i], path[i + 1])
                pa, pb = log2phys[op.qubits[0]], log2phys[op.qubits[1]]
            out.append(GateOp(op.name, (pa, pb), op.params))
        else:
            out.append(
                GateOp(op.name, tuple(log2phys[q] for q in op.qubits), op.params)
            )
    routed = QuantumCircuit(n_qubits=topo.n_qubits, ops=tuple(out), name=c.name)
    return routed, tuple(log2phys[:c.n_qubits])


def _wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.fmod(theta, 2 * math.pi)
    if wrapped > math.pi:
        wrapped -= 2 * math.pi
    elif wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


def _same_pair(a: GateOp, b: GateOp) -> bool:
    if a.qubits == b.qubits:
        return True
    # cz and swap are symmetric in their operands
    return a.name in ("cz", "swap") and a.qubits == b.qubits[::-1]


def optimize_gates(c: QuantumCircuit) -> QuantumCircuit:
    """Peephole pass: merge adjacent same-axis rotations (angles summed mod
    2pi, near-identity results dropped) and cancel adjacent self-inverse
    pairs. Runs to a fixpoint, so applying it twice changes nothing.
    """
    ops = list(c.ops)
    changed = True
    while changed:
        changed = False
        out: list[GateOp] = []
        # index in `out` of the last op touching each qubit
        last_on: dict[int, int] = {}

        def push(op: GateOp) -> None:
            out.append(op)
            for q in op.qubits:
                last_on[q] = len(out) - 1

        for op in ops:
            if op.name in ("measure", "barrier"):
                push(op)
                continue
            prev_i = max((last_on.get(q, -1) for q in op.qubits), default=-1)
            prev = out[prev_i] if prev_i >= 0 else None
            # merge/cancel only when prev touches exactly this op's qubit set
            if prev is not None and set(prev.qubits) == set(op.qubits):
                if op.name in ROTATION_GATES and prev.name == op.name and prev.qubits == op.qubits:
                    merged = _wrap_angle(prev.params[0] + op.params[0])
                    del out[prev_i]
                    last_on.clear()
                    for i, o in enumerate(out):
                        for q in o.qubits:
                            last_on[q] = i
                    if abs(merged) >= NEGLIGIBLE_ANGLE:
                        push(GateOp(op.name, op.qubits, (merged,)))
                    changed = True
                    continue
                if (
                    op.name in SELF_INVERSE_GATES
                    and prev.name == op.name
                    and _same_pair(prev, op)
                ):
                    del out[prev_i]
                    last_on.clear()
                    for i, o in enumerate(out):
                        for q in o.qubits:
                            last_on[q] = i
                    changed = True
                    continue
            if op.name in ROTATION_GATES and abs(_wrap_angle(op.params[0])) < NEGLIGIBLE_ANGLE:
                changed = True
                continue
            push(op)
        ops = out
    return QuantumCircuit(n_qubits=c.n_qubits, ops=tuple(ops), name=c.name)


def transpile(
    c: QuantumCircuit,
    topo: Topology,
    gates: NativeGateSet = DEFAULT_NATIVE_GATES,
) -> tuple[QuantumCircuit, tuple[int, ...]]:
    """Full pipeline: route, decompose (inserted SWAPs included), optimize.

    Returns (device-ready circuit, final logical->physical layout).
    """
    routed, layout = route_to_topology(c, topo)
    native = decompose_to_native(routed, gates)
    return optimize_gates(native), layout
