"""Workload generation and full-stack replay.

generate_workload draws per-job shot counts log-uniformly and then adjusts by
largest remainder so the file total matches the profile total exactly. The
replay harness wires accounting, gateway, and scheduler onto one virtual
clock, pushes every job through, and folds the trace into a policy report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .accounting import AccountingService
from .backend.devices import device_preset
from .circuits import CircuitBatch, GateOp, QuantumCircuit, parse_circuit
from .gateway import Gateway, GatewayPolicy
from .scheduler import ClusterSim, ComputeJob, EventTrace, SchedulerPolicy, VirtualClock

__all__ = [
    "WorkloadProfile",
    "TABLE_DEFAULT_PROFILE",
    "PolicyReport",
    "generate_workload",
    "write_workload",
    "load_workload",
    "run_replay",
    "ReplayOutcome",
    "builtin_circuit",
    "write_trace",
    "write_report",
]

SHOT_RANGE = (100, 100_000)


@dataclass(frozen=True)
class WorkloadProfile:
    """Shape of a generated workload; defaults model the 4-day event record
    (83 users, 364 jobs, 2,533,588 shots)."""

    n_users: int = 83
    n_jobs: int = 364
    total_shots: int = 2_533_588
    window_s: float = 4 * 86400.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.n_jobs >= self.n_users >= 1):
            raise ValueError("need n_jobs >= n_users >= 1")
        if self.total_shots < self.n_jobs:
            raise ValueError("need total_shots >= n_jobs (every job gets >= 1 shot)")
        if self.window_s <= 0:
            raise ValueError("arrival window must be positive")


TABLE_DEFAULT_PROFILE = WorkloadProfile()


def _exact_total_shots(rng: np.random.Generator, n_jobs: int, total: int) -> list[int]:
    """Log-uniform draws scaled and largest-remainder rounded to the exact total."""
    lo, hi = SHOT_RANGE
    raw = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n_jobs))
    scaled = raw * (total / raw.sum())
    base = np.maximum(1, np.floor(scaled).astype(np.int64))
    diff = total - int(base.sum())
    if diff > 0:
        frac = scaled - np.floor(scaled)
        order = np.lexsort((np.arange(n_jobs), -frac))
        i = 0
        while diff > 0:
            base[order[i % n_jobs]] += 1
            i += 1
            diff -= 1
    while diff < 0:
        for j in np.argsort(-base):
            if diff == 0:
                break
            if base[j] > 1:
                base[j] -= 1
                diff += 1
    return [int(s) for s in base]


def generate_workload(profile: WorkloadProfile) -> list[dict]:
    """Deterministic job list: exactly n_jobs jobs over n_users users, shot
    total exact, arrivals uniform over the window, every user gets >= 1 job."""
    rng = np.random.default_rng(profile.seed)
    users = [f"u{i + 1:03d}" for i in range(profile.n_users)]
    shots = _exact_total_shots(rng, profile.n_jobs, profile.total_shots)
    owner = list(range(profile.n_users)) + [
        int(u) for u in rng.integers(0, profile.n_users, size=profile.n_jobs - profile.n_users)
    ]
    arrivals = np.sort(rng.uniform(0.0, profile.window_s, size=profile.n_jobs))
    cpu_seconds = rng.uniform(5.0, 120.0, size=profile.n_jobs)
    jobs = []
    for i in range(profile.n_jobs):
        user = users[owner[i]]
        jobs.append(
            {
                "job_id": f"job-{i + 1:04d}",
                "project": f"proj-{user}",
                "user": user,
                "submit_at_s": round(float(arrivals[i]), 3),
                "cpu_core_seconds": round(float(cpu_seconds[i]), 3),
                "needs_qpu": True,
                "shots": shots[i],
                "circuits_ref": "bell",
            }
        )
    return jobs


def write_workload(jobs: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jobs, fh, indent=1)
        fh.write("\n")


def load_workload(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        jobs = json.load(fh)
    if not isinstance(jobs, list):
        raise ValueError("workload file must be a JSON array of job objects")
    return jobs


# ---------------------------------------------------------------------------
# Builtin circuits for circuits_ref
# ---------------------------------------------------------------------------

def _bell() -> QuantumCircuit:
    return QuantumCircuit(
        2,
        (
            GateOp("h", (0,)),
            GateOp("cx", (0, 1)),
            GateOp("measure", (0,)),
            GateOp("measure", (1,)),
        ),
        name="bell",
    )


def _ghz3() -> QuantumCircuit:
    return QuantumCircuit(
        3,
        (
            GateOp("h", (0,)),
            GateOp("cx", (0, 1)),
            GateOp("cx", (1, 2)),
            GateOp("measure", (0,)),
            GateOp("measure", (1,)),
            GateOp("measure", (2,)),
        ),
        name="ghz3",
    )


_BUILTIN_CIRCUITS = {"bell": _bell, "ghz3": _ghz3}


def builtin_circuit(ref: str) -> QuantumCircuit:
    """Resolve a circuits_ref: builtin name or path to a wire-format file."""
    if ref in _BUILTIN_CIRCUITS:
        return _BUILTIN_CIRCUITS[ref]()
    with open(ref, encoding="utf-8") as fh:
        return parse_circuit(fh.read())


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

@dataclass
class PolicyReport:
    """Per-policy outcome summary over one replay."""

    policy: str
    device: str
    n_jobs: int
    done: int
    failed: int
    rejected: int
    mean_wait_s: float
    p95_wait_s: float
    utilization: float
    totals: dict[str, float]
    per_user: dict[str, dict] = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {
            "policy": self.policy,
            "device": self.device,
            "n_jobs": self.n_jobs,
            "done": self.done,
            "failed": self.failed,
            "rejected": self.rejected,
            "mean_wait_s": round(self.mean_wait_s, 6),
            "p95_wait_s": round(self.p95_wait_s, 6),
            "utilization": round(self.utilization, 6),
            "totals": {k: self.totals[k] for k in sorted(self.totals)},
            "per_user": {u: self.per_user[u] for u in sorted(self.per_user)},
        }


@dataclass
class ReplayOutcome:
    trace: EventTrace
    report: PolicyReport
    accounting: AccountingService
    sim: ClusterSim
    gateway: Gateway


def _p95(values: list[float]) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    return ordered[max(0, math.ceil(0.95 * len(ordered)) - 1)]


def run_replay(
    jobs: list[dict],
    policy: str | SchedulerPolicy = "fifo",
    device: str = "helmi-sim",
    *,
    noisy: bool = False,
    seed: int = 0,
    cpu_capacity: int = 8,
    gateway_policy: GatewayPolicy | None = None,
    grants: Optional[dict[str, float]] = None,
    ledger_path: str | None = None,
) -> ReplayOutcome:
    """Drive a workload through accounting + gateway + scheduler in virtual time.

    grants default to effectively unlimited per project ("no limits"); pass
    explicit grants or a restrictive gateway_policy to force rejections.
    """
    clock = VirtualClock()
    accounting = AccountingService(ledger_path=ledger_path, clock=clock)
    by_project: dict[str, set[str]] = {}
    for job in jobs:
        by_project.setdefault(job["project"], set()).add(job["user"])
    default_grants = {
        "cpu_core_seconds": 1e12,
        "qpu_seconds": 1e12,
        "shots": 1e12,
    }
    for project_id in sorted(by_project):
        accounting.open_project(sorted(by_project[project_id]), project_id=project_id)
        accounting.approve_project(project_id, grants or default_grants)
        for user in sorted(by_project[project_id]):
            accounting.register_token(f"tok-{user}", user, project_id)

    gateway = Gateway(
        accounting,
        clock=clock,
        policy=gateway_policy or GatewayPolicy(),
        noisy=noisy,
        seed=seed,
    )
    gateway.register_device(device_preset(device, seed=seed))
    sim = ClusterSim(
        accounting,
        gateway,
        cpu_capacity=cpu_capacity,
        policy=policy,
        clock=clock,
    )
    sim.inject_signal(0.0, device, "available")
    for job in jobs:
        batch = None
        if job["needs_qpu"]:
            batch = CircuitBatch((builtin_circuit(job["circuits_ref"]),), job["shots"])
        sim.submit(
            ComputeJob(
                job_id=job["job_id"],
                project_id=job["project"],
                user=job["user"],
                cpu_core_seconds=job["cpu_core_seconds"],
                needs_qpu=job["needs_qpu"],
                qc_batch=batch,
                submitted_at=job["submit_at_s"],
            )
        )
    trace = sim.run()
    report = _build_report(jobs, sim, accounting, device, trace)
    return ReplayOutcome(trace=trace, report=report, accounting=accounting, sim=sim, gateway=gateway)


def _build_report(
    jobs: list[dict],
    sim: ClusterSim,
    accounting: AccountingService,
    device: str,
    trace: EventTrace,
) -> PolicyReport:
    waits: list[float] = []
    per_user_waits: dict[str, list[float]] = {}
    per_user_shots: dict[str, int] = {}
    done = failed = rejected = 0
    for job in jobs:
        state = sim.jobs.get(job["job_id"])
        if state is None:
            continue
        user = job["user"]
        per_user_shots.setdefault(user, 0)
        per_user_waits.setdefault(user, [])
        if state.state == "done":
            done += 1
            if job["needs_qpu"]:
                per_user_shots[user] += job["shots"]
        elif state.state == "failed":
            failed += 1
        elif state.state == "rejected":
            rejected += 1
        if state.dispatched_at is not None:
            wait = state.dispatched_at - state.job.submitted_at
            waits.append(wait)
            per_user_waits[user].append(wait)

    busy = 0.0
    started: dict[str, float] = {}
    first_open = None
    last_finish = 0.0
    for t, kind, subject in trace.entries:
        if kind == "partition_open" and first_open is None:
            first_open = t
        elif kind == "qc_dispatch":
            started[subject] = t
        elif kind == "qc_complete" and subject in started:
            busy += t - started.pop(subject)
        if kind in ("job_finish", "job_failed"):
            last_finish = max(last_finish, t)
    span = (last_finish - first_open) if first_open is not None else 0.0
    utilization = busy / span if span > 0 else 0.0

    totals = accounting_totals(accounting)
    per_user = {
        user: {
            "shots": per_user_shots.get(user, 0),
            "mean_wait_s": round(float(np.mean(w)) if (w := per_user_waits.get(user)) else 0.0, 6),
            "p95_wait_s": round(_p95(per_user_waits.get(user, [])), 6),
        }
        for user in per_user_shots
    }
    return PolicyReport(
        policy=sim.policy.kind,
        device=device,
        n_jobs=len(jobs),
        done=done,
        failed=failed,
        rejected=rejected,
        mean_wait_s=float(np.mean(waits)) if waits else 0.0,
        p95_wait_s=_p95(waits),
        utilization=min(1.0, utilization),
        totals=totals,
        per_user=per_user,
    )


def accounting_totals(accounting: AccountingService) -> dict[str, float]:
    totals = {"cpu_core_seconds": 0.0, "qpu_seconds": 0.0, "shots": 0.0}
    counts = {"cpu_core_seconds": 0, "qpu_seconds": 0, "shots": 0}
    for project_id in accounting.project_ids():
        report = accounting.usage_report(project_id)
        for resource, value in report.totals.items():
            totals[resource] += value
            counts[resource] += report.record_counts[resource]
    totals["shot_records"] = counts["shots"]
    return totals


def write_trace(trace: EventTrace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in trace.lines():
            fh.write(line + "\n")


def write_report(report: PolicyReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_obj(), fh, indent=1)
        fh.write("\n")
