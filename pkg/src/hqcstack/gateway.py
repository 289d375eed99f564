"""QC-site gateway: device registry, FIFO single-job device queues, time-slot
and hard-limit policies, availability signals, and usage reporting.

The gateway owns one strict FIFO queue per registered device and executes at
most one job per device at a time. Submissions reserve project quota (shots
and device seconds) up front; execution commits the reservations and attaches
the usage record to the job. Job timestamps model device time: finished_at is
started_at plus the batch's device-seconds, regardless of host wall time.

Availability transitions are pushed to subscribers (the HPC scheduler) and
remain pollable; duplicate signals are idempotent.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .accounting import AccountingService, QuotaExceededError
from .backend.devices import (
    DeviceSpec,
    UnknownDeviceError,
    batch_qpu_seconds,
    generate_calibration_snapshot,
)
from .backend.statevector import sample_counts
from .circuits import CircuitBatch, QuantumCircuit, validate_circuit
from .transpile import TranspileError, transpile

__all__ = [
    "DEVICE_STATUSES",
    "REJECTION_REASONS",
    "GatewayError",
    "AuthenticationError",
    "UnknownJobError",
    "DuplicateDeviceError",
    "JobRejected",
    "GatewayPolicy",
    "DeviceStatus",
    "QCJob",
    "Gateway",
]

DEVICE_STATUSES = ("available", "calibrating", "maintenance", "offline")
REJECTION_REASONS = (
    "device_unavailable",
    "outside_window",
    "user_limit",
    "quota_exceeded",
    "invalid_circuit",
    "walltime",
)

SECONDS_PER_DAY = 86400.0


class GatewayError(Exception):
    pass


class AuthenticationError(GatewayError):
    """Credentials do not resolve to a member of the named project."""


class UnknownJobError(GatewayError):
    pass


class DuplicateDeviceError(GatewayError):
    pass


class JobRejected(GatewayError):
    """Submission refused; .reason is one of REJECTION_REASONS."""

    def __init__(self, reason: str, job_id: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.job_id = job_id
        self.detail = detail


@dataclass(frozen=True)
class GatewayPolicy:
    """Daily time slot and per-user hard limits."""

    window_start_s: float = 0.0
    window_end_s: float = SECONDS_PER_DAY
    max_jobs_per_user_per_day: int = 10**9
    max_job_walltime_s: float = 10**9
    max_shots_per_job: int = 10**9

    def __post_init__(self) -> None:
        if not (0.0 <= self.window_start_s < self.window_end_s <= SECONDS_PER_DAY):
            raise ValueError("window must satisfy 0 <= start < end <= 86400")
        if self.max_jobs_per_user_per_day < 1:
            raise ValueError("max_jobs_per_user_per_day must be positive")
        if self.max_job_walltime_s <= 0 or self.max_shots_per_job < 1:
            raise ValueError("limits must be positive")

    def in_window(self, t: float) -> bool:
        seconds_of_day = t % SECONDS_PER_DAY
        return self.window_start_s <= seconds_of_day < self.window_end_s


@dataclass
class DeviceStatus:
    device_id: str
    status: str = "offline"
    since: float = 0.0


@dataclass
class QCJob:
    """Gateway-side job record. States: queued -> executing -> done|failed;
    rejected is terminal at submission."""

    job_id: str
    device_id: str
    batch: CircuitBatch
    project_id: str
    submitter: str
    state: str = "queued"
    submitted_at: float = 0.0
    started_at: Optional[float] = None
    finished_at: Optional[float] = None
    result: Optional[list[dict[str, int]]] = None
    usage: Optional[dict] = None
    reject_reason: Optional[str] = None
    failure_reason: Optional[str] = None
    # internal: transpiled circuits and reservation ids, set at submission
    transpiled: tuple[QuantumCircuit, ...] = ()
    reservations: tuple[str, ...] = field(default_factory=tuple)
    qpu_seconds_estimate: float = 0.0


class _DeviceEntry:
    def __init__(self, spec: DeviceSpec, now: float) -> None:
        self.spec = spec
        self.status = DeviceStatus(device_id=spec.device_id, since=now)
        self.queue: deque[str] = deque()
        self.executing: Optional[str] = None


class Gateway:
    """In-process gateway service; the HTTP layer is a thin wrapper.

    clock is injectable so replays can drive the gateway in virtual time.
    noisy selects the sampling mode used for execution.
    """

    def __init__(
        self,
        accounting: AccountingService,
        clock: Callable[[], float] = time.time,
        policy: GatewayPolicy | None = None,
        noisy: bool = True,
        seed: int = 0,
        result_retention: int = 10_000,
    ) -> None:
        self.accounting = accounting
        self.clock = clock
        self.policy = policy or GatewayPolicy()
        self.noisy = noisy
        self.seed = seed
        self.result_retention = result_retention
        self._lock = threading.RLock()
        self._devices: dict[str, _DeviceEntry] = {}
        self._jobs: dict[str, QCJob] = {}
        self._job_seq = 0
        self._daily_accepted: dict[tuple[str, int], int] = {}
        self._subscribers: list[Callable[[str, str, float], None]] = []
        self._done_with_results: deque[str] = deque()
        self.events: list[tuple[float, str, str]] = []
        self._executor: Optional[threading.Thread] = None
        self._executor_stop = threading.Event()
        self._executor_wake = threading.Event()

    # -- devices -------------------------------------------------------------

    def register_device(self, spec: DeviceSpec) -> str:
        """Register a device; it stays offline until its first signal."""
        with self._lock:
            if spec.device_id in self._devices:
                raise DuplicateDeviceError(spec.device_id)
            self._devices[spec.device_id] = _DeviceEntry(spec, self.clock())
            self._event("device_registered", spec.device_id)
            return spec.device_id

    def device_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._devices)

    def _entry(self, device_id: str) -> _DeviceEntry:
        try:
            return self._devices[device_id]
        except KeyError:
            raise UnknownDeviceError(device_id) from None

    def get_device_info(self, device_id: str) -> tuple[DeviceSpec, DeviceStatus]:
        with self._lock:
            entry = self._entry(device_id)
            return entry.spec, DeviceStatus(**entry.status.__dict__)

    def refresh_calibration(self, device_id: str, seed: int):
        """Draw and store a fresh calibration snapshot for a registered device."""
        with self._lock:
            entry = self._entry(device_id)
            cal = generate_calibration_snapshot(
                device_id, seed=seed, taken_at=self.clock(), known_devices=[device_id]
            )
            entry.spec = entry.spec.with_calibration(cal)
            return cal

    def subscribe(self, callback: Callable[[str, str, float], None]) -> None:
        """callback(device_id, status, time) on every effective transition."""
        with self._lock:
            self._subscribers.append(callback)

    def signal_status(self, device_id: str, status: str) -> bool:
        """Store a device status; broadcast only on change (idempotent)."""
        if status not in DEVICE_STATUSES:
            raise GatewayError(f"unknown status {status!r}")
        with self._lock:
            entry = self._entry(device_id)
            if entry.status.status == status:
                return False
            now = self.clock()
            entry.status = DeviceStatus(device_id=device_id, status=status, since=now)
            self._event("signal", f"{device_id}:{status}")
            subscribers = list(self._subscribers)
        if status == "available":
            self._executor_wake.set()  # trigger queue processing in live mode
        for cb in subscribers:
            cb(device_id, status, now)
        return True

    # -- submission ----------------------------------------------------------

    def submit_job(
        self, device_id: str, batch: CircuitBatch, project_id: str, token: str
    ) -> str:
        """Queue a batch FIFO, or record a rejection and raise JobRejected."""
        user, token_project = self.accounting.resolve_token(token)
        if token_project != project_id or not self.accounting.is_member(project_id, user):
            raise AuthenticationError(
                f"token does not grant access to project {project_id}"
            )
        with self._lock:
            entry = self._entry(device_id)
            now = self.clock()
            self._job_seq += 1
            job = QCJob(
                job_id=f"qc-{self._job_seq:06d}",
                device_id=device_id,
                batch=batch,
                project_id=project_id,
                submitter=user,
                submitted_at=now,
            )
            self._jobs[job.job_id] = job

            def reject(reason: str, detail: str) -> JobRejected:
                job.state = "rejected"
                job.reject_reason = reason
                self._event("job_rejected", f"{job.job_id}:{reason}")
                return JobRejected(reason, job.job_id, detail)

            if entry.status.status != "available":
                raise reject("device_unavailable", f"device is {entry.status.status}")
            if not self.policy.in_window(now):
                raise reject(
                    "outside_window",
                    f"daily window is [{self.policy.window_start_s}, "
                    f"{self.policy.window_end_s})",
                )
            day = int(now // SECONDS_PER_DAY)
            accepted_today = self._daily_accepted.get((user, day), 0)
            if accepted_today >= self.policy.max_jobs_per_user_per_day:
                raise reject(
                    "user_limit",
                    f"{accepted_today} jobs already accepted today "
                    f"(limit {self.policy.max_jobs_per_user_per_day})",
                )
            if batch.shots > self.policy.max_shots_per_job:
                raise reject(
                    "user_limit",
                    f"shots {batch.shots} exceed per-job cap "
                    f"{self.policy.max_shots_per_job}",
                )
            for c in batch.circuits:
                hard = [v for v in validate_circuit(c, entry.spec) if v.hard]
                if hard:
                    raise reject("invalid_circuit", hard[0].message)
            try:
                transpiled = tuple(
                    transpile(c, entry.spec.topology, entry.spec.native_gates)[0]
                    for c in batch.circuits
                )
            except TranspileError as exc:
                raise reject("invalid_circuit", str(exc)) from exc
            qpu_seconds = batch_qpu_seconds(transpiled, batch.shots, entry.spec)
            if qpu_seconds > self.policy.max_job_walltime_s:
                raise reject(
                    "walltime",
                    f"batch needs {qpu_seconds:.3f}s device time "
                    f"(limit {self.policy.max_job_walltime_s}s)",
                )
            shots_total = batch.shots * len(batch.circuits)
            try:
                shots_rsv = self.accounting.reserve(project_id, "shots", shots_total)
            except QuotaExceededError as exc:
                raise reject("quota_exceeded", str(exc)) from exc
            try:
                qpu_rsv = self.accounting.reserve(project_id, "qpu_seconds", qpu_seconds)
            except QuotaExceededError as exc:
                self.accounting.release(shots_rsv)
                raise reject("quota_exceeded", str(exc)) from exc

            job.transpiled = transpiled
            job.reservations = (shots_rsv, qpu_rsv)
            job.qpu_seconds_estimate = qpu_seconds
            self._daily_accepted[(user, day)] = accepted_today + 1
            entry.queue.append(job.job_id)
            self._event("job_accepted", job.job_id)
            self._executor_wake.set()
            return job.job_id

    # -- execution -----------------------------------------------------------

    def process_queue_step(self, device_id: str) -> Optional[QCJob]:
        """Execute exactly the head job if the device is available and idle.

        Returns the completed (done or failed) job, or None if nothing ran.
        """
        with self._lock:
            entry = self._entry(device_id)
            if (
                entry.executing is not None
                or entry.status.status != "available"
                or not entry.queue
            ):
                return None
            job = self._jobs[entry.queue.popleft()]
            entry.executing = job.job_id
            job.state = "executing"
            job.started_at = self.clock()
            self._event("exec_start", job.job_id)
            spec = entry.spec
            seed_base = (self.seed, self._job_index(job.job_id))

        try:
            results = []
            for i, tc in enumerate(job.transpiled):
                circuit_seed = int(
                    np.random.SeedSequence((*seed_base, i)).generate_state(1)[0]
                )
                results.append(
                    sample_counts(
                        tc, job.batch.shots, spec, seed=circuit_seed, noisy=self.noisy
                    )
                )
        except Exception as exc:  # noqa: BLE001 - execution failure becomes job state
            return self._finish_failed(job, entry, str(exc))
        return self._finish_done(job, entry, results)

    def _job_index(self, job_id: str) -> int:
        return int(job_id.split("-")[1])

    def _finish_done(
        self, job: QCJob, entry: _DeviceEntry, results: list[dict[str, int]]
    ) -> QCJob:
        with self._lock:
            qpu_seconds = job.qpu_seconds_estimate
            started = job.started_at or 0.0
            finished = started + qpu_seconds
            shots_total = job.batch.shots * len(job.batch.circuits)
            shots_rsv, qpu_rsv = job.reservations
            self.accounting.commit_usage(
                shots_rsv, shots_total, job.job_id, started, finished
            )
            self.accounting.commit_usage(
                qpu_rsv, qpu_seconds, job.job_id, started, finished
            )
            job.result = results
            job.usage = {
                "shots": shots_total,
                "qpu_seconds": qpu_seconds,
                "started_at": started,
                "finished_at": finished,
            }
            job.finished_at = finished
            job.state = "done"
            entry.executing = None
            self._event("exec_end", job.job_id)
            self._done_with_results.append(job.job_id)
            while len(self._done_with_results) > self.result_retention:
                expired = self._jobs[self._done_with_results.popleft()]
                expired.result = None
            return job

    def _finish_failed(self, job: QCJob, entry: _DeviceEntry, reason: str) -> QCJob:
        with self._lock:
            for rsv in job.reservations:
                self.accounting.release(rsv)
            job.state = "failed"
            job.failure_reason = reason
            job.finished_at = self.clock()
            entry.executing = None
            self._event("job_failed", job.job_id)
            return job

    def drain(self, device_id: str, limit: int = 10**6) -> list[QCJob]:
        """Run queue steps until the device queue is empty or blocked."""
        out = []
        for _ in range(limit):
            job = self.process_queue_step(device_id)
            if job is None:
                break
            out.append(job)
        return out

    # -- queries ---------------------------------------------------------------

    def job_status(self, job_id: str) -> QCJob:
        with self._lock:
            try:
                return self._jobs[job_id]
            except KeyError:
                raise UnknownJobError(job_id) from None

    def queue_position(self, job_id: str) -> int:
        """1-based position among waiting jobs; 0 once dispatched or terminal."""
        with self._lock:
            job = self.job_status(job_id)
            entry = self._devices.get(job.device_id)
            if entry is None or job.state != "queued":
                return 0
            try:
                return list(entry.queue).index(job_id) + 1
            except ValueError:
                return 0

    def fetch_results(self, job_id: str) -> dict:
        """Result document: counts + usage when done, state otherwise."""
        job = self.job_status(job_id)
        with self._lock:
            doc: dict = {"job_id": job.job_id, "state": job.state}
            if job.state == "done":
                if job.result is None:
                    doc["detail"] = "result expired (retention)"
                else:
                    doc["counts"] = job.result
                doc["usage"] = job.usage
            elif job.state == "failed":
                doc["failure_reason"] = job.failure_reason
            elif job.state == "rejected":
                doc["reason"] = job.reject_reason
            return doc

    def queue_length(self, device_id: str) -> int:
        with self._lock:
            return len(self._entry(device_id).queue)

    def _event(self, kind: str, subject: str) -> None:
        self.events.append((self.clock(), kind, subject))

    # -- background executor (live service mode) ------------------------------

    def start_executor(self, interval_s: float = 0.05) -> None:
        if self._executor is not None:
            return
        self._executor_stop.clear()

        def loop() -> None:
            while not self._executor_stop.is_set():
                ran = False
                for device_id in self.device_ids():
                    if self.process_queue_step(device_id) is not None:
                        ran = True
                if not ran:
                    self._executor_wake.wait(interval_s)
                    self._executor_wake.clear()

        self._executor = threading.Thread(target=loop, daemon=True, name="gateway-exec")
        self._executor.start()

    def stop_executor(self) -> None:
        if self._executor is None:
            return
        self._executor_stop.set()
        self._executor_wake.set()
        self._executor.join(timeout=5)
        self._executor = None
