"""Variational hybrid workloads: VQE and QAOA-MaxCut over any execution
target (local simulator or gateway device), plus brute-force oracles.

The optimizer proposes parameters, the target executes measurement circuits,
and expectation values feed back into the loop. Pauli terms are measured via
basis-rotation suffixes (H for X, S-dagger then H for Y), one circuit per
non-identity term.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .backend.devices import DeviceSpec
from .backend.statevector import sample_counts
from .circuits import CircuitBatch, GateOp, QuantumCircuit
from .gateway import Gateway
from .transpile import transpile

__all__ = [
    "HybridError",
    "BasisMismatchError",
    "PauliObservable",
    "AnsatzTemplate",
    "OptimizerConfig",
    "ExecutionTarget",
    "LocalTarget",
    "GatewayTarget",
    "expectation_from_counts",
    "estimate_energy",
    "run_vqe",
    "run_qaoa_maxcut",
    "brute_force_ground_energy",
    "brute_force_maxcut",
    "qaoa_circuit",
    "load_observable",
    "load_graph",
    "write_run_report",
]

_HALF_PI = math.pi / 2
_ORACLE_QUBIT_CAP = 10


class HybridError(Exception):
    pass


class BasisMismatchError(HybridError):
    """Counts were measured in a basis that cannot estimate the term."""


@dataclass(frozen=True)
class PauliObservable:
    """Real linear combination of Pauli strings (characters over I, X, Y, Z;
    position = qubit index, leftmost = qubit 0)."""

    terms: tuple[tuple[float, str], ...]

    def __post_init__(self) -> None:
        terms = tuple((float(c), str(s).upper()) for c, s in self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise HybridError("observable needs at least one term")
        n = len(terms[0][1])
        for _, s in terms:
            if len(s) != n or any(ch not in "IXYZ" for ch in s):
                raise HybridError(f"bad pauli string {s!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.terms[0][1])

    @property
    def coeff_norm(self) -> float:
        return sum(abs(c) for c, _ in self.terms)


@dataclass(frozen=True)
class AnsatzTemplate:
    """Hardware-efficient ansatz: per layer a ry+rz rotation on every qubit,
    with a cz ring between consecutive layers. Parameter count 2*n*layers."""

    n_qubits: int
    layers: int = 1

    def __post_init__(self) -> None:
        if self.n_qubits < 1 or self.layers < 1:
            raise HybridError("ansatz needs n_qubits >= 1 and layers >= 1")

    @property
    def param_count(self) -> int:
        return 2 * self.n_qubits * self.layers

    def build(self, params: Sequence[float]) -> QuantumCircuit:
        if len(params) != self.param_count:
            raise HybridError(
                f"expected {self.param_count} parameters, got {len(params)}"
            )
        ops: list[GateOp] = []
        it = iter(params)
        for layer in range(self.layers):
            for q in range(self.n_qubits):
                ops.append(GateOp("ry", (q,), (next(it),)))
                ops.append(GateOp("rz", (q,), (next(it),)))
            if layer < self.layers - 1 and self.n_qubits >= 2:
                ring = (
                    [(0, 1)]
                    if self.n_qubits == 2
                    else [(q, (q + 1) % self.n_qubits) for q in range(self.n_qubits)]
                )
                ops.extend(GateOp("cz", pair) for pair in ring)
        return QuantumCircuit(self.n_qubits, tuple(ops), name="ansatz")


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "spsa"
    max_iterations: int = 150
    a: float = 0.2
    c: float = 0.1
    A: float = 10.0
    alpha: float = 0.602
    gamma: float = 0.101
    seed: int = 0
    restarts: int = 1

    def __post_init__(self) -> None:
        if self.method not in ("spsa", "nelder_mead"):
            raise HybridError(f"unknown optimizer {self.method!r}")
        if self.max_iterations < 1 or self.restarts < 1:
            raise HybridError("iterations and restarts must be >= 1")
        if min(self.a, self.c, self.A, self.alpha, self.gamma) <= 0:
            raise HybridError("SPSA gains must be positive")


# ---------------------------------------------------------------------------
# Execution targets
# ---------------------------------------------------------------------------

class ExecutionTarget(Protocol):
    def run_batch(self, circuits: Sequence[QuantumCircuit], shots: int) -> list[dict[str, int]]:
        ...


class LocalTarget:
    """Runs batches on the in-process simulator for one device spec.
    Per-call seeds derive deterministically from the base seed."""

    def __init__(self, spec: DeviceSpec, noisy: bool = False, seed: int = 0) -> None:
        self.spec = spec
        self.noisy = noisy
        self.seed = seed
        self._calls = 0

    def run_batch(self, circuits: Sequence[QuantumCircuit], shots: int) -> list[dict[str, int]]:
        self._calls += 1
        out = []
        for i, c in enumerate(circuits):
            tc, _ = transpile(c, self.spec.topology, self.spec.native_gates)
            circuit_seed = int(
                np.random.SeedSequence((self.seed, self._calls, i)).generate_state(1)[0]
            )
            out.append(sample_counts(tc, shots, self.spec, seed=circuit_seed, noisy=self.noisy))
        return out


class GatewayTarget:
    """Executes batches through a gateway device (driving its queue in-process)."""

    def __init__(self, gateway: Gateway, device_id: str, project_id: str, token: str) -> None:
        self.gateway = gateway
        self.device_id = device_id
        self.project_id = project_id
        self.token = token

    def run_batch(self, circuits: Sequence[QuantumCircuit], shots: int) -> list[dict[str, int]]:
        batch = CircuitBatch(circuits=tuple(circuits), shots=shots)
        job_id = self.gateway.submit_job(self.device_id, batch, self.project_id, self.token)
        while True:
            job = self.gateway.job_status(job_id)
            if job.state in ("done", "failed"):
                break
            if self.gateway.process_queue_step(self.device_id) is None:
                raise HybridError(
                    f"gateway stalled with job {job_id} in state {job.state}"
                )
        if job.state != "done":
            raise HybridError(f"gateway job failed: {job.failure_reason}")
        assert job.result is not None
        return job.result


# ---------------------------------------------------------------------------
# Expectation estimation
# ---------------------------------------------------------------------------

def expectation_from_counts(
    counts: dict[str, int],
    obs: PauliObservable,
    measured_basis: str | None = None,
) -> float:
    """Estimate <obs> from counts measured after the basis-rotation suffix
    for ``measured_basis`` (None = plain computational basis, i.e. all-Z).

    Every non-identity position of every term must match the measured basis;
    otherwise BasisMismatchError. The result is bounded by sum |coeff|.
    """
    n = obs.n_qubits
    basis = measured_basis.upper() if measured_basis else "Z" * n
    if len(basis) != n:
        raise BasisMismatchError(f"basis length {len(basis)} != {n} qubits")
    total_shots = sum(counts.values())
    if total_shots <= 0:
        raise HybridError("counts are empty")
    value = 0.0
    for coeff, term in obs.terms:
        positions = [q for q, p in enumerate(term) if p != "I"]
        for q in positions:
            if term[q] != basis[q]:
                raise BasisMismatchError(
                    f"term {term} needs {term[q]} on qubit {q}, counts measured {basis[q]}"
                )
        if not positions:
            value += coeff
            continue
        acc = 0
        for bitstring, m in counts.items():
            if len(bitstring) != n:
                raise BasisMismatchError(
                    f"bitstring width {len(bitstring)} != {n} qubits"
                )
            parity = sum(bitstring[q] == "1" for q in positions) & 1
            acc += -m if parity else m
        value += coeff * acc / total_shots
    return value


def _measurement_circuit(base: QuantumCircuit, term: str) -> QuantumCircuit:
    """Append the basis-rotation suffix for one Pauli term plus full measurement."""
    ops = list(base.ops)
    for q, p in enumerate(term):
        if p == "X":
            ops.append(GateOp("h", (q,)))
        elif p == "Y":
            ops.append(GateOp("rz", (q,), (-_HALF_PI,)))
            ops.append(GateOp("h", (q,)))
    ops.extend(GateOp("measure", (q,)) for q in range(base.n_qubits))
    return QuantumCircuit(base.n_qubits, tuple(ops), name=f"{base.name}:{term}")


def estimate_energy(
    base: QuantumCircuit, obs: PauliObservable, target: ExecutionTarget, shots: int
) -> float:
    """<obs> on the state prepared by ``base``, one circuit per non-identity term."""
    energy = 0.0
    measured: list[tuple[float, str]] = []
    for coeff, term in obs.terms:
        if set(term) <= {"I"}:
            energy += coeff
        else:
            measured.append((coeff, term))
    if measured:
        circuits = [_measurement_circuit(base, term) for _, term in measured]
        counts_list = target.run_batch(circuits, shots)
        for (coeff, term), counts in zip(measured, counts_list):
            single = PauliObservable(((1.0, term),))
            energy += coeff * expectation_from_counts(counts, single, measured_basis=term)
    return energy


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

@dataclass
class RestartTrace:
    restart: int
    iterations: list[tuple[int, list[float], float]] = field(default_factory=list)
    final_params: list[float] = field(default_factory=list)
    final_energy: float = math.nan

    def best_so_far(self) -> list[float]:
        out, best = [], math.inf
        for _, _, e in self.iterations:
            best = min(best, e)
            out.append(best)
        return out


def _spsa_minimize(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    config: OptimizerConfig,
    rng: np.random.Generator,
    trace: RestartTrace,
) -> np.ndarray:
    x = x0.astype(float).copy()
    for k in range(config.max_iterations):
        ak = config.a / (k + 1 + config.A) ** config.alpha
        ck = config.c / (k + 1) ** config.gamma
        delta = rng.integers(0, 2, size=x.size) * 2.0 - 1.0
        f_plus = f(x + ck * delta)
        f_minus = f(x - ck * delta)
        grad = (f_plus - f_minus) / (2.0 * ck) * delta
        x -= ak * grad
        # probe average stands in for f(x); a fresh eval lands in final_energy
        trace.iterations.append((k, x.tolist(), (f_plus + f_minus) / 2.0))
    return x


def _nelder_mead_minimize(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    config: OptimizerConfig,
    trace: RestartTrace,
) -> np.ndarray:
    from scipy.optimize import minimize

    history: list[float] = []

    def wrapped(x: np.ndarray) -> float:
        v = f(x)
        history.append(v)
        trace.iterations.append((len(history) - 1, x.tolist(), v))
        return v

    res = minimize(
        wrapped,
        x0,
        method="Nelder-Mead",
        options={"maxiter": config.max_iterations, "xatol": 1e-4, "fatol": 1e-4},
    )
    return np.asarray(res.x, dtype=float)


def _optimize(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    config: OptimizerConfig,
    rng: np.random.Generator,
    trace: RestartTrace,
) -> np.ndarray:
    if config.method == "spsa":
        return _spsa_minimize(f, x0, config, rng, trace)
    return _nelder_mead_minimize(f, x0, config, trace)


# ---------------------------------------------------------------------------
# VQE
# ---------------------------------------------------------------------------

@dataclass
class VQEResult:
    best_energy: float
    best_params: list[float]
    restarts: list[RestartTrace]


def run_vqe(
    ansatz: AnsatzTemplate,
    obs: PauliObservable,
    config: OptimizerConfig,
    target: ExecutionTarget,
    shots: int = 10_000,
) -> VQEResult:
    """Minimize <obs> over the ansatz parameters.

    Runs config.restarts independent optimizations from random starts; the
    reported energy is the minimum of the restarts' final (freshly evaluated)
    energies."""
    if obs.n_qubits != ansatz.n_qubits:
        raise HybridError(
            f"observable acts on {obs.n_qubits} qubits, ansatz on {ansatz.n_qubits}"
        )

    def energy(params: np.ndarray) -> float:
        return estimate_energy(ansatz.build(params.tolist()), obs, target, shots)

    traces: list[RestartTrace] = []
    for r in range(config.restarts):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, r)))
        x0 = rng.uniform(-math.pi, math.pi, size=ansatz.param_count)
        trace = RestartTrace(restart=r)
        x_final = _optimize(energy, x0, config, rng, trace)
        trace.final_params = x_final.tolist()
        trace.final_energy = energy(x_final)
        traces.append(trace)
    best = min(traces, key=lambda t: t.final_energy)
    return VQEResult(
        best_energy=best.final_energy,
        best_params=best.final_params,
        restarts=traces,
    )


# ---------------------------------------------------------------------------
# QAOA MaxCut
# ---------------------------------------------------------------------------

def _normalize_edges(edges: Iterable[tuple[int, int]]) -> tuple[list[tuple[int, int]], int]:
    norm = sorted({(min(a, b), max(a, b)) for a, b in edges})
    if not norm:
        raise HybridError("graph has no edges")
    if any(a == b or a < 0 for a, b in norm):
        raise HybridError("graph edges must join two distinct non-negative nodes")
    n = max(b for _, b in norm) + 1
    return norm, n


def _graph_connected(edges: list[tuple[int, int]], n: int) -> bool:
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == n


def cut_value(bits: str, edges: Iterable[tuple[int, int]]) -> int:
    return sum(1 for a, b in edges if bits[a] != bits[b])


def qaoa_circuit(
    edges: list[tuple[int, int]], n: int, gammas: Sequence[float], betas: Sequence[float]
) -> QuantumCircuit:
    """Standard QAOA: uniform superposition, then per layer the cost phase
    separator on every edge (cx-rz-cx) and the transverse mixer rx(2*beta)."""
    ops: list[GateOp] = [GateOp("h", (q,)) for q in range(n)]
    for gamma, beta in zip(gammas, betas):
        for a, b in edges:
            ops.append(GateOp("cx", (a, b)))
            ops.append(GateOp("rz", (b,), (gamma,)))
            ops.append(GateOp("cx", (a, b)))
        for q in range(n):
            ops.append(GateOp("rx", (q,), (2.0 * beta,)))
    ops.extend(GateOp("measure", (q,)) for q in range(n))
    return QuantumCircuit(n, tuple(ops), name=f"qaoa-p{len(gammas)}")


@dataclass
class QAOAResult:
    best_bitstring: str
    best_cut: int
    distribution: dict[str, float]
    best_angles: list[float]
    trace: RestartTrace


def run_qaoa_maxcut(
    edges: Iterable[tuple[int, int]],
    p: int,
    config: OptimizerConfig,
    target: ExecutionTarget,
    shots: int = 1024,
    final_shots: int = 4096,
) -> QAOAResult:
    """Optimize QAOA angles against the sampled mean cut, then report the best
    cut among the final samples and the final sampling distribution."""
    edge_list, n = _normalize_edges(edges)
    if not _graph_connected(edge_list, n):
        raise HybridError("graph must be connected")
    if p < 1:
        raise HybridError("p must be >= 1")

    def objective(angles: np.ndarray) -> float:
        circuit = qaoa_circuit(edge_list, n, angles[:p], angles[p:])
        counts = target.run_batch([circuit], shots)[0]
        total = sum(counts.values())
        mean_cut = sum(cut_value(bits, edge_list) * m for bits, m in counts.items()) / total
        return -mean_cut

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0)))
    x0 = rng.uniform(-math.pi, math.pi, size=2 * p)
    trace = RestartTrace(restart=0)
    best_angles = _optimize(objective, x0, config, rng, trace)
    trace.final_params = best_angles.tolist()
    trace.final_energy = objective(best_angles)

    final_circuit = qaoa_circuit(edge_list, n, best_angles[:p], best_angles[p:])
    final_counts = target.run_batch([final_circuit], final_shots)[0]
    total = sum(final_counts.values())
    best_bits = max(final_counts, key=lambda b: (cut_value(b, edge_list), final_counts[b]))
    return QAOAResult(
        best_bitstring=best_bits,
        best_cut=cut_value(best_bits, edge_list),
        distribution={b: m / total for b, m in sorted(final_counts.items())},
        best_angles=best_angles.tolist(),
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

_PAULI_MATS = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def observable_matrix(obs: PauliObservable) -> np.ndarray:
    """Dense matrix of the observable (qubit 0 = most significant factor)."""
    n = obs.n_qubits
    if n > _ORACLE_QUBIT_CAP:
        raise HybridError(f"oracle capped at {_ORACLE_QUBIT_CAP} qubits, got {n}")
    total = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    for coeff, term in obs.terms:
        m = np.eye(1, dtype=np.complex128)
        for ch in term:
            m = np.kron(m, _PAULI_MATS[ch])
        total += coeff * m
    return total


def brute_force_ground_energy(obs: PauliObservable) -> float:
    """Exact minimum eigenvalue by dense eigendecomposition (n <= 10)."""
    return float(np.linalg.eigvalsh(observable_matrix(obs))[0])


def brute_force_maxcut(edges: Iterable[tuple[int, int]]) -> int:
    """Exact maximum cut by bitstring enumeration (n <= 10)."""
    edge_list, n = _normalize_edges(edges)
    if n > _ORACLE_QUBIT_CAP:
        raise HybridError(f"oracle capped at {_ORACLE_QUBIT_CAP} nodes, got {n}")
    best = 0
    for i in range(1 << n):
        bits = format(i, f"0{n}b")
        best = max(best, cut_value(bits, edge_list))
    return best


# ---------------------------------------------------------------------------
# Problem files and run reports
# ---------------------------------------------------------------------------

def load_observable(path: str) -> PauliObservable:
    """Observable file: JSON array of [coeff, pauli-string] pairs."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return PauliObservable(tuple((float(c), str(s)) for c, s in data))


def load_graph(path: str) -> list[tuple[int, int]]:
    """Graph file: JSON array of [a, b] edges."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return [(int(a), int(b)) for a, b in data]


def write_run_report(path: str, result: VQEResult | QAOAResult) -> None:
    """Plain JSON run report: energy history plus final outcome."""
    if isinstance(result, VQEResult):
        doc = {
            "kind": "vqe",
            "best_energy": result.best_energy,
            "best_params": result.best_params,
            "energy_history": [
                [e for _, _, e in t.iterations] for t in result.restarts
            ],
            "final_energies": [t.final_energy for t in result.restarts],
        }
    else:
        doc = {
            "kind": "qaoa_maxcut",
            "best_bitstring": result.best_bitstring,
            "best_cut": result.best_cut,
            "best_angles": result.best_angles,
            "energy_history": [e for _, _, e in result.trace.iterations],
            "distribution": result.distribution,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
