"""Discrete-event simulation of the HPC workload manager.

One CPU partition with a fixed number of slots plus one QPU partition per
gateway device. QPU partitions open and close on gateway availability
signals. Hybrid jobs run a classical phase in a CPU slot, then (holding the
slot) wait for an open QPU partition, submit their batch to the gateway,
and block until the device finishes.

The simulator is single-threaded and deterministic: events are processed in
(time, insertion order) order off a heap, and the virtual clock only moves
between events. Signals from a live gateway can be folded in as timestamped
external events.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .accounting import (
    AccountingService,
    QuotaExceededError,
    UnknownProjectError,
)
from .circuits import CircuitBatch
from .gateway import Gateway, JobRejected

__all__ = [
    "POLICIES",
    "SchedulerError",
    "UnmappedDeviceError",
    "VirtualClock",
    "ComputeJob",
    "Partition",
    "FairShareState",
    "EventTrace",
    "SchedulerPolicy",
    "compute_priority",
    "ClusterSim",
]

POLICIES = ("fifo", "fairshare", "timeslot")


class VirtualClock:
    """Shared mutable time source so accounting, gateway, and simulator all
    observe the same virtual clock. Construct it first, pass it everywhere."""

    def __init__(self, t: float = 0.0) -> None:
        self.t = t

    def __call__(self) -> float:
        return self.t


class SchedulerError(Exception):
    pass


class UnmappedDeviceError(SchedulerError):
    """Signal for a device with no QPU partition."""


@dataclass
class ComputeJob:
    """Scheduler-side job: classical work plus an optional quantum batch."""

    job_id: str
    project_id: str
    user: str
    cpu_core_seconds: float
    needs_qpu: bool = False
    qc_batch: Optional[CircuitBatch] = None
    walltime_limit_s: float = 10**9
    submitted_at: float = 0.0

    def __post_init__(self) -> None:
        if self.cpu_core_seconds <= 0 or self.walltime_limit_s <= 0:
            raise SchedulerError(f"{self.job_id}: requested resources must be positive")
        if self.needs_qpu != (self.qc_batch is not None):
            raise SchedulerError(f"{self.job_id}: qc_batch must be present iff needs_qpu")


@dataclass
class Partition:
    name: str
    kind: str  # cpu | qpu
    capacity: int
    state: str = "open"  # open | closed

    def __post_init__(self) -> None:
        if self.kind == "qpu" and self.capacity != 1:
            raise SchedulerError("qpu partitions have capacity 1 per device")


class FairShareState:
    """Per-project used and allocated amounts per resource kind."""

    def __init__(self, usage: dict[tuple[str, str], tuple[float, float]] | None = None):
        self._usage = dict(usage or {})

    @classmethod
    def from_accounting(
        cls, accounting: AccountingService, project_ids: Iterable[str], resources: Iterable[str]
    ) -> "FairShareState":
        usage = {}
        for project_id in project_ids:
            for resource in resources:
                try:
                    alloc = accounting.allocation(project_id, resource)
                except Exception:
                    continue
                usage[(project_id, resource)] = (alloc.used, alloc.granted)
        return cls(usage)

    def ratio(self, project_id: str, resource: str) -> float:
        used, granted = self._usage.get((project_id, resource), (0.0, 1.0))
        return used / granted if granted > 0 else 0.0

    def snapshot(self) -> dict:
        return {f"{p}/{r}": list(v) for (p, r), v in sorted(self._usage.items())}


@dataclass(frozen=True)
class SchedulerPolicy:
    kind: str = "fifo"
    window: tuple[float, float] = (0.0, 86400.0)

    def __post_init__(self) -> None:
        if self.kind not in POLICIES:
            raise SchedulerError(f"unknown policy {self.kind!r}")

    def in_window(self, t: float) -> bool:
        start, end = self.window
        return start <= (t % 86400.0) < end


_JOB_RESOURCES_CPU = ("cpu_core_seconds",)
_JOB_RESOURCES_HYBRID = ("cpu_core_seconds", "qpu_seconds", "shots")


def compute_priority(
    job: ComputeJob, fs: FairShareState, policy: SchedulerPolicy, now: float = 0.0
) -> float:
    """Priority score; higher dispatches first.

    fifo: strictly decreasing in submitted_at. fairshare: 1/(1 + used/allocated)
    on the job's dominant resource (largest usage ratio among the resources it
    consumes); ties resolved by the caller on submitted_at. timeslot: the fifo
    score, gated to -inf for QPU-needing jobs outside the daily window.
    """
    if policy.kind == "fairshare":
        resources = _JOB_RESOURCES_HYBRID if job.needs_qpu else _JOB_RESOURCES_CPU
        dominant = max(fs.ratio(job.project_id, r) for r in resources)
        return 1.0 / (1.0 + dominant)
    score = -job.submitted_at
    if policy.kind == "timeslot" and job.needs_qpu and not policy.in_window(now):
        return -math.inf
    return score


class EventTrace:
    """Ordered (time, kind, subject) log with non-decreasing times."""

    def __init__(self) -> None:
        self.entries: list[tuple[float, str, str]] = []

    def record(self, t: float, kind: str, subject: str) -> None:
        if self.entries and t < self.entries[-1][0] - 1e-9:
            raise SchedulerError(
                f"trace time went backwards: {t} after {self.entries[-1][0]}"
            )
        self.entries.append((t, kind, subject))

    def lines(self) -> list[str]:
        return [f"{t:.6f} {kind} {subject}" for t, kind, subject in self.entries]

    def of_kind(self, *kinds: str) -> list[tuple[float, str, str]]:
        return [e for e in self.entries if e[1] in kinds]


@dataclass
class _JobState:
    job: ComputeJob
    state: str = "pending"  # pending | running_cpu | qc_pending | running_qc | done | failed | rejected
    cpu_reservation: Optional[str] = None
    gateway_job_id: Optional[str] = None
    dispatched_at: Optional[float] = None
    finished_at: Optional[float] = None
    failure: Optional[str] = None
    queue_position: int = 0


@dataclass
class _DispatchDecision:
    """Inputs of one dispatch choice, for replay verification of the policy."""

    time: float
    partition: str
    chosen: str
    eligible: list[str]
    fairshare: dict


class ClusterSim:
    """Deterministic DES over an in-process gateway and accounting service.

    The gateway must share this simulator's clock (pass gateway
    clock=sim.clock) so gateway-side records line up with the virtual time.
    """

    def __init__(
        self,
        accounting: AccountingService,
        gateway: Gateway,
        cpu_capacity: int = 4,
        policy: str | SchedulerPolicy = "fifo",
        qpu_devices: Iterable[str] | None = None,
        token_for_user: Callable[[str], str] | None = None,
        clock: VirtualClock | None = None,
    ) -> None:
        self.accounting = accounting
        self.gateway = gateway
        self.policy = policy if isinstance(policy, SchedulerPolicy) else SchedulerPolicy(policy)
        self._clock = clock if clock is not None else VirtualClock()
        self.trace = EventTrace()
        self.decisions: list[_DispatchDecision] = []
        self._heap: list[tuple[float, int, str, tuple]] = []
        self._seq = 0
        self._submit_seq: dict[str, int] = {}
        self.jobs: dict[str, _JobState] = {}
        self.cpu = Partition(name="cpu", kind="cpu", capacity=cpu_capacity)
        self._cpu_in_use = 0
        device_ids = sorted(qpu_devices if qpu_devices is not None else gateway.device_ids())
        self.qpu: dict[str, Partition] = {
            d: Partition(name=f"qpu-{d}", kind="qpu", capacity=1, state="closed")
            for d in device_ids
        }
        self._device_busy_until: dict[str, float] = {d: 0.0 for d in device_ids}
        self._device_executing: dict[str, Optional[str]] = {d: None for d in device_ids}
        self._pending_cpu: list[str] = []
        self._pending_qc: list[str] = []
        self._next_window_wake: float | None = None
        self._token_for_user = token_for_user or (lambda user: f"tok-{user}")
        gateway.subscribe(self._gateway_signal)

    @property
    def now(self) -> float:
        return self._clock.t

    def clock(self) -> float:
        return self._clock.t

    # -- event plumbing ------------------------------------------------------

    def _schedule(self, t: float, kind: str, payload: tuple) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, kind, payload))

    def submit(self, job: ComputeJob) -> int:
        """Register a job arrival; returns the submission sequence number.

        The quota pre-check happens at the arrival event, not here."""
        if self.accounting.project_state(job.project_id) != "approved":
            raise UnknownProjectError(
                f"project {job.project_id} unknown or not approved"
            )
        self._submit_seq[job.job_id] = len(self._submit_seq)
        self._schedule(max(self.now, job.submitted_at), "submit", (job,))
        return self._submit_seq[job.job_id]

    def inject_signal(self, t: float, device_id: str, status: str) -> None:
        """Fold an external availability signal into the event loop."""
        if device_id not in self.qpu:
            raise UnmappedDeviceError(device_id)
        self._schedule(max(self.now, t), "signal", (device_id, status))

    def _gateway_signal(self, device_id: str, status: str, t: float) -> None:
        # Called synchronously by the gateway while we process a signal event
        # (or by a live gateway thread; then it lands at >= now on the heap).
        if device_id not in self.qpu:
            return
        self.on_device_signal(device_id, status)

    def on_device_signal(self, device_id: str, status: str) -> None:
        """Partition transition: available opens, anything else closes.

        A running hybrid job is never interrupted; closing only stops new
        dispatches. Duplicate transitions record no event."""
        if device_id not in self.qpu:
            raise UnmappedDeviceError(device_id)
        part = self.qpu[device_id]
        new_state = "open" if status == "available" else "closed"
        if part.state == new_state:
            return
        part.state = new_state
        self.trace.record(
            self.now,
            "partition_open" if new_state == "open" else "partition_close",
            device_id,
        )

    # -- event handlers --------------------------------------------------------

    def _handle_submit(self, job: ComputeJob) -> None:
        state = _JobState(job=job)
        self.jobs[job.job_id] = state
        precheck_ok = True
        detail = ""
        if job.cpu_core_seconds > job.walltime_limit_s:
            precheck_ok = False
            detail = "cpu phase alone exceeds walltime limit"
        try:
            if self.accounting.remaining(job.project_id, "cpu_core_seconds") < job.cpu_core_seconds:
                precheck_ok = False
                detail = "insufficient cpu_core_seconds allocation"
            if job.needs_qpu and job.qc_batch is not None:
                shots_total = job.qc_batch.shots * len(job.qc_batch.circuits)
                if self.accounting.remaining(job.project_id, "shots") < shots_total:
                    precheck_ok = False
                    detail = "insufficient shots allocation"
        except Exception as exc:
            precheck_ok = False
            detail = str(exc)
        if not precheck_ok:
            state.state = "rejected"
            state.failure = detail
            self.trace.record(self.now, "job_rejected", job.job_id)
            return
        self._pending_cpu.append(job.job_id)
        state.queue_position = len(self._pending_cpu)
        self.trace.record(self.now, "submit", job.job_id)

    def _handle_cpu_done(self, job_id: str) -> None:
        state = self.jobs[job_id]
        if state.job.needs_qpu:
            state.state = "qc_pending"
            self._pending_qc.append(job_id)
            self.trace.record(self.now, "cpu_phase_end", job_id)
        else:
            self._complete(state)

    def _handle_qc_done(self, job_id: str, device_id: str) -> None:
        state = self.jobs[job_id]
        self._device_executing[device_id] = None
        self.trace.record(self.now, "qc_complete", job_id)
        self._complete(state)

    def _complete(self, state: _JobState) -> None:
        job = state.job
        if state.cpu_reservation is not None:
            self.accounting.commit_usage(
                state.cpu_reservation,
                job.cpu_core_seconds,
                job.job_id,
                state.dispatched_at or self.now,
                self.now,
            )
            state.cpu_reservation = None
        self._cpu_in_use -= 1
        state.state = "done"
        state.finished_at = self.now
        self.trace.record(self.now, "job_finish", job.job_id)

    def _fail(self, state: _JobState, reason: str, consumed_cpu: bool) -> None:
        """Mark failed; consumed classical time is committed, unused holds released."""
        if state.cpu_reservation is not None:
            if consumed_cpu:
                self.accounting.commit_usage(
                    state.cpu_reservation,
                    state.job.cpu_core_seconds,
                    state.job.job_id,
                    state.dispatched_at or self.now,
                    self.now,
                )
            else:
                self.accounting.release(state.cpu_reservation)
            state.cpu_reservation = None
        self._cpu_in_use -= 1
        state.state = "failed"
        state.failure = reason
        state.finished_at = self.now
        self.trace.record(self.now, "job_failed", state.job.job_id)

    # -- dispatch ----------------------------------------------------------------

    def _fairshare(self) -> FairShareState:
        projects = {self.jobs[j].job.project_id for j in self._pending_cpu + self._pending_qc}
        return FairShareState.from_accounting(
            self.accounting, sorted(projects), _JOB_RESOURCES_HYBRID
        )

    def _pick(self, pending: list[str], partition: str) -> Optional[str]:
        """Highest-priority eligible job id, or None. Ties: earlier submitted_at,
        then earlier submission sequence."""
        fs = self._fairshare()
        scored = []
        for job_id in pending:
            job = self.jobs[job_id].job
            score = compute_priority(job, fs, self.policy, now=self.now)
            if score == -math.inf:
                continue
            scored.append((score, -job.submitted_at, -self._submit_seq[job_id], job_id))
        if not scored:
            return None
        best = max(scored)
        chosen = best[3]
        self.decisions.append(
            _DispatchDecision(
                time=self.now,
                partition=partition,
                chosen=chosen,
                eligible=[s[3] for s in scored],
                fairshare=fs.snapshot(),
            )
        )
        return chosen

    def _schedule_window_wake(self) -> None:
        """Timeslot liveness: with work gated by the window, wake at its start."""
        if self.policy.kind != "timeslot" or self.policy.in_window(self.now):
            return
        gated = any(
            self.jobs[j].job.needs_qpu for j in self._pending_cpu + self._pending_qc
        )
        if not gated:
            return
        start, _ = self.policy.window
        day = self.now // 86400.0
        wake = day * 86400.0 + start
        if wake <= self.now:
            wake += 86400.0
        if self._next_window_wake is not None and self._next_window_wake <= wake:
            return
        self._next_window_wake = wake
        self._schedule(wake, "wake", ())

    def _dispatch(self) -> None:
        # CPU partition: fill free slots by priority.
        while self.cpu.state == "open" and self._cpu_in_use < self.cpu.capacity:
            job_id = self._pick(self._pending_cpu, "cpu")
            if job_id is None:
                break
            state = self.jobs[job_id]
            self._pending_cpu.remove(job_id)
            try:
                state.cpu_reservation = self.accounting.reserve(
                    state.job.project_id, "cpu_core_seconds", state.job.cpu_core_seconds
                )
            except QuotaExceededError as exc:
                state.state = "failed"
                state.failure = str(exc)
                state.finished_at = self.now
                self.trace.record(self.now, "job_failed", job_id)
                continue
            self._cpu_in_use += 1
            state.state = "running_cpu"
            state.dispatched_at = self.now
            self.trace.record(self.now, "job_dispatch", job_id)
            self._schedule(self.now + state.job.cpu_core_seconds, "cpu_done", (job_id,))

        # QPU partitions: one executing job per device, zero idle while open.
        for device_id in sorted(self.qpu):
            part = self.qpu[device_id]
            while (
                part.state == "open"
                and self._device_executing[device_id] is None
                and self._pending_qc
            ):
                job_id = self._pick(self._pending_qc, f"qpu-{device_id}")
                if job_id is None:
                    break
                state = self.jobs[job_id]
                self._pending_qc.remove(job_id)
                job = state.job
                assert job.qc_batch is not None
                try:
                    gw_id = self.gateway.submit_job(
                        device_id,
                        job.qc_batch,
                        job.project_id,
                        self._token_for_user(job.user),
                    )
                except JobRejected as exc:
                    self._fail(state, f"gateway rejected: {exc.reason}", consumed_cpu=True)
                    continue
                state.gateway_job_id = gw_id
                gw_job = self.gateway.process_queue_step(device_id)
                if gw_job is None or gw_job.job_id != gw_id or gw_job.state != "done":
                    reason = (
                        gw_job.failure_reason
                        if gw_job is not None and gw_job.state == "failed"
                        else "gateway did not execute the job"
                    )
                    self._fail(state, f"gateway failure: {reason}", consumed_cpu=True)
                    continue
                duration = gw_job.usage["qpu_seconds"] if gw_job.usage else 0.0
                state.state = "running_qc"
                self._device_executing[device_id] = job_id
                self._device_busy_until[device_id] = self.now + duration
                self.trace.record(self.now, "qc_dispatch", job_id)
                self._schedule(self.now + duration, "qc_done", (job_id, device_id))
        self._schedule_window_wake()

    # -- main loop ------------------------------------------------------------

    def step(self) -> list[tuple[float, str, str]]:
        """Advance to the next event; returns the trace entries it produced."""
        if not self._heap:
            return []
        mark = len(self.trace.entries)
        t, _, kind, payload = heapq.heappop(self._heap)
        if t < self.now - 1e-9:
            raise SchedulerError("event time before current clock")
        self._clock.t = max(self.now, t)
        if kind == "submit":
            self._handle_submit(*payload)
        elif kind == "cpu_done":
            self._handle_cpu_done(*payload)
        elif kind == "qc_done":
            self._handle_qc_done(*payload)
        elif kind == "signal":
            device_id, status = payload
            changed = self.gateway.signal_status(device_id, status)
            if not changed:
                # duplicate: gateway did not broadcast; partitions follow anyway
                self.on_device_signal(device_id, status)
        elif kind == "wake":
            self._next_window_wake = None  # dispatch below re-evaluates the window
        else:
            raise SchedulerError(f"unknown event kind {kind!r}")
        self._dispatch()
        return self.trace.entries[mark:]

    def run(self, max_events: int = 10**7) -> EventTrace:
        """Process events until the queue drains."""
        for _ in range(max_events):
            if not self._heap:
                return self.trace
            self.step()
        raise SchedulerError("event budget exhausted")
