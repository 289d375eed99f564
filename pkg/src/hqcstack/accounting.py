"""Project, allocation, and usage accounting with an append-only ledger.

Grants classical and quantum quotas, holds reservations against them, and
folds committed usage records into reports. Every state change appends one
ledger event; replaying the ledger (optionally on top of a snapshot)
reconstructs the service state exactly. reserve/commit/release are atomic
under an internal lock, so used + reserved <= granted holds at every
observable instant.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

__all__ = [
    "RESOURCES",
    "AccountingError",
    "UnknownProjectError",
    "UnknownTokenError",
    "QuotaExceededError",
    "ProjectStateError",
    "ReservationError",
    "Project",
    "Allocation",
    "UsageRecord",
    "Reservation",
    "UsageReport",
    "AccountingService",
]

RESOURCES = ("cpu_core_seconds", "qpu_seconds", "shots")


class AccountingError(Exception):
    """Base accounting failure."""


class UnknownProjectError(AccountingError):
    pass


class UnknownTokenError(AccountingError):
    pass


class QuotaExceededError(AccountingError):
    """Reservation would push used + reserved past the grant."""


class ProjectStateError(AccountingError):
    """Operation not allowed in the project's current state."""


class ReservationError(AccountingError):
    """Unknown, double-committed, or over-committed reservation."""


@dataclass
class Project:
    project_id: str
    members: set[str]
    state: str = "pending"  # pending | approved | closed


@dataclass
class Allocation:
    project_id: str
    resource: str
    granted: float
    used: float = 0.0
    reserved: float = 0.0
    live_holds: int = 0

    @property
    def remaining(self) -> float:
        return self.granted - self.used - self.reserved

    def add_hold(self, amount: float) -> None:
        self.reserved += amount
        self.live_holds += 1

    def drop_hold(self, amount: float) -> None:
        self.reserved -= amount
        self.live_holds -= 1
        # snap float residue once nothing is held
        if self.live_holds == 0:
            self.reserved = 0.0


@dataclass(frozen=True)
class UsageRecord:
    record_id: str
    project_id: str
    job_id: str
    resource: str
    amount: float
    started_at: float
    finished_at: float


@dataclass
class Reservation:
    reservation_id: str
    project_id: str
    resource: str
    amount: float
    state: str = "live"  # live | committed | released


@dataclass(frozen=True)
class UsageReport:
    project_id: str
    period: tuple[float | None, float | None]
    totals: dict[str, float]
    record_counts: dict[str, int]


class AccountingService:
    """In-process accounting with optional ledger persistence.

    ledger_path: append every event as one JSON line (fixed field order).
    clock: injectable for virtual-time runs; defaults to wall time.
    """

    def __init__(
        self,
        ledger_path: str | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self._lock = threading.Lock()
        self._clock = clock
        self._projects: dict[str, Project] = {}
        self._allocations: dict[tuple[str, str], Allocation] = {}
        self._reservations: dict[str, Reservation] = {}
        self._records: list[UsageRecord] = []
        self._tokens: dict[str, tuple[str, str]] = {}
        self._seq = 0
        self._ledger_seq = 0
        self._ledger_path = ledger_path
        self._ledger_fh = open(ledger_path, "a", encoding="utf-8") if ledger_path else None

    # -- ledger ------------------------------------------------------------

    def _append(self, kind: str, **fields) -> None:
        self._ledger_seq += 1
        if self._ledger_fh is None:
            return
        entry = {"seq": self._ledger_seq, "at": self._clock(), "event": kind}
        entry.update(fields)
        self._ledger_fh.write(json.dumps(entry) + "\n")
        self._ledger_fh.flush()

    def close(self) -> None:
        if self._ledger_fh is not None:
            self._ledger_fh.close()
            self._ledger_fh = None

    def write_snapshot(self, path: str) -> None:
        """Full-state snapshot; from_files() replays only ledger events with
        seq greater than the snapshot's."""
        with self._lock:
            state = {
                "ledger_seq": self._ledger_seq,
                "seq": self._seq,
                "projects": [
                    {"project_id": p.project_id, "members": sorted(p.members), "state": p.state}
                    for p in self._projects.values()
                ],
                "allocations": [
                    {
                        "project_id": a.project_id,
                        "resource": a.resource,
                        "granted": a.granted,
                        "used": a.used,
                        "reserved": a.reserved,
                    }
                    for a in self._allocations.values()
                ],
                "reservations": [
                    {
                        "reservation_id": r.reservation_id,
                        "project_id": r.project_id,
                        "resource": r.resource,
                        "amount": r.amount,
                        "state": r.state,
                    }
                    for r in self._reservations.values()
                ],
                "records": [record.__dict__ for record in self._records],
                "tokens": {t: list(v) for t, v in self._tokens.items()},
            }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(state, fh)

    @classmethod
    def from_files(
        cls,
        ledger_path: str,
        snapshot_path: str | None = None,
        clock: Callable[[], float] = time.time,
    ) -> "AccountingService":
        """Reconstruct service state from a snapshot plus ledger tail (or the
        whole ledger when no snapshot is given). The returned service does not
        append to the source ledger."""
        svc = cls(ledger_path=None, clock=clock)
        start_seq = 0
        if snapshot_path is not None:
            with open(snapshot_path, encoding="utf-8") as fh:
                state = json.load(fh)
            start_seq = state["ledger_seq"]
            svc._ledger_seq = start_seq
            svc._seq = state["seq"]
            for p in state["projects"]:
                svc._projects[p["project_id"]] = Project(
                    p["project_id"], set(p["members"]), p["state"]
                )
            for a in state["allocations"]:
                svc._allocations[(a["project_id"], a["resource"])] = Allocation(**a)
            for r in state["reservations"]:
                svc._reservations[r["reservation_id"]] = Reservation(**r)
            for res in svc._reservations.values():
                if res.state == "live":
                    svc._allocations[(res.project_id, res.resource)].live_holds += 1
            for rec in state["records"]:
                svc._records.append(UsageRecord(**rec))
            for t, (user, project_id) in state["tokens"].items():
                svc._tokens[t] = (user, project_id)
        with open(ledger_path, encoding="utf-8") as fh:
            for line in fh:
                entry = json.loads(line)
                if entry["seq"] <= start_seq:
                    continue
                svc._replay_event(entry)
                svc._ledger_seq = entry["seq"]
        return svc

    def _replay_event(self, entry: dict) -> None:
        kind = entry["event"]
        if kind == "project_open":
            self._projects[entry["project_id"]] = Project(
                entry["project_id"], set(entry["members"])
            )
        elif kind == "project_approve":
            proj = self._projects[entry["project_id"]]
            proj.state = "approved"
            for resource, amount in entry["grants"].items():
                self._allocations[(proj.project_id, resource)] = Allocation(
                    proj.project_id, resource, amount
                )
        elif kind == "token":
            self._tokens[entry["token"]] = (entry["user"], entry["project_id"])
        elif kind == "reserve":
            res = Reservation(
                entry["reservation_id"], entry["project_id"], entry["resource"], entry["amount"]
            )
            self._reservations[res.reservation_id] = res
            self._allocations[(res.project_id, res.resource)].add_hold(res.amount)
        elif kind == "commit":
            res = self._reservations[entry["reservation_id"]]
            alloc = self._allocations[(res.project_id, res.resource)]
            alloc.drop_hold(res.amount)
            alloc.used += entry["amount"]
            res.state = "committed"
            self._records.append(
                UsageRecord(
                    record_id=entry["record_id"],
                    project_id=res.project_id,
                    job_id=entry["job_id"],
                    resource=res.resource,
                    amount=entry["amount"],
                    started_at=entry["started_at"],
                    finished_at=entry["finished_at"],
                )
            )
        elif kind == "release":
            res = self._reservations[entry["reservation_id"]]
            self._allocations[(res.project_id, res.resource)].drop_hold(res.amount)
            res.state = "released"
        else:
            raise AccountingError(f"unknown ledger event {kind!r}")

    # -- identity ----------------------------------------------------------

    def register_token(self, token: str, user: str, project_id: str) -> None:
        with self._lock:
            if project_id not in self._projects:
                raise UnknownProjectError(project_id)
            self._tokens[token] = (user, project_id)
            self._append("token", token=token, user=user, project_id=project_id)

    def resolve_token(self, token: str) -> tuple[str, str]:
        """Return (user, project_id) for an opaque bearer token."""
        with self._lock:
            try:
                return self._tokens[token]
            except KeyError:
                raise UnknownTokenError("unknown credentials") from None

    # -- projects ----------------------------------------------------------

    def open_project(self, members: Iterable[str], project_id: str | None = None) -> str:
        with self._lock:
            if project_id is None:
                self._seq += 1
                project_id = f"proj-{self._seq:04d}"
            if project_id in self._projects:
                raise ProjectStateError(f"project {project_id} already exists")
            self._projects[project_id] = Project(project_id, set(members))
            self._append("project_open", project_id=project_id, members=sorted(members))
            return project_id

    def approve_project(self, project_id: str, grants: Mapping[str, float]) -> None:
        with self._lock:
            proj = self._get_project(project_id)
            if proj.state != "pending":
                raise ProjectStateError(
                    f"project {project_id} is {proj.state}, not pending"
                )
            for resource, amount in grants.items():
                if resource not in RESOURCES:
                    raise AccountingError(f"unknown resource kind {resource!r}")
                if amount <= 0:
                    raise AccountingError(f"grant for {resource} must be positive")
            proj.state = "approved"
            for resource, amount in grants.items():
                self._allocations[(project_id, resource)] = Allocation(
                    project_id, resource, amount
                )
            self._append("project_approve", project_id=project_id, grants=dict(grants))

    def _get_project(self, project_id: str) -> Project:
        try:
            return self._projects[project_id]
        except KeyError:
            raise UnknownProjectError(project_id) from None

    def project_state(self, project_id: str) -> str:
        with self._lock:
            return self._get_project(project_id).state

    def is_member(self, project_id: str, user: str) -> bool:
        with self._lock:
            return user in self._get_project(project_id).members

    def allocation(self, project_id: str, resource: str) -> Allocation:
        with self._lock:
            self._get_project(project_id)
            alloc = self._allocations.get((project_id, resource))
            if alloc is None:
                raise AccountingError(f"{project_id} holds no {resource} allocation")
            return Allocation(**alloc.__dict__)

    def remaining(self, project_id: str, resource: str) -> float:
        return self.allocation(project_id, resource).remaining

    # -- reservations ------------------------------------------------------

    def reserve(self, project_id: str, resource: str, amount: float) -> str:
        with self._lock:
            proj = self._get_project(project_id)
            if proj.state != "approved":
                raise ProjectStateError(f"project {project_id} is not approved")
            if amount <= 0:
                raise AccountingError(f"reservation amount must be positive, got {amount}")
            alloc = self._allocations.get((project_id, resource))
            if alloc is None:
                raise AccountingError(f"{project_id} holds no {resource} allocation")
            if alloc.used + alloc.reserved + amount > alloc.granted:
                raise QuotaExceededError(
                    f"{project_id}/{resource}: requested {amount}, remaining {alloc.remaining}"
                )
            alloc.add_hold(amount)
            self._seq += 1
            reservation_id = f"rsv-{self._seq:06d}"
            self._reservations[reservation_id] = Reservation(
                reservation_id, project_id, resource, amount
            )
            self._append(
                "reserve",
                reservation_id=reservation_id,
                project_id=project_id,
                resource=resource,
                amount=amount,
            )
            return reservation_id

    def commit_usage(
        self,
        reservation_id: str,
        actual_amount: float,
        job_id: str,
        started_at: float,
        finished_at: float,
    ) -> UsageRecord:
        with self._lock:
            res = self._reservations.get(reservation_id)
            if res is None:
                raise ReservationError(f"unknown reservation {reservation_id}")
            if res.state != "live":
                raise ReservationError(f"reservation {reservation_id} already {res.state}")
            if actual_amount < 0:
                raise ReservationError("committed amount must be >= 0")
            if actual_amount > res.amount:
                raise ReservationError(
                    f"committed {actual_amount} exceeds reserved {res.amount}"
                )
            alloc = self._allocations[(res.project_id, res.resource)]
            alloc.drop_hold(res.amount)
            alloc.used += actual_amount
            res.state = "committed"
            self._seq += 1
            record = UsageRecord(
                record_id=f"rec-{self._seq:06d}",
                project_id=res.project_id,
                job_id=job_id,
                resource=res.resource,
                amount=actual_amount,
                started_at=started_at,
                finished_at=finished_at,
            )
            self._records.append(record)
            self._append(
                "commit",
                reservation_id=reservation_id,
                record_id=record.record_id,
                amount=actual_amount,
                job_id=job_id,
                started_at=started_at,
                finished_at=finished_at,
            )
            return record

    def release(self, reservation_id: str) -> None:
        with self._lock:
            res = self._reservations.get(reservation_id)
            if res is None:
                raise ReservationError(f"unknown reservation {reservation_id}")
            if res.state != "live":
                raise ReservationError(f"reservation {reservation_id} already {res.state}")
            self._allocations[(res.project_id, res.resource)].drop_hold(res.amount)
            res.state = "released"
            self._append("release", reservation_id=reservation_id)

    # -- reporting ---------------------------------------------------------

    def usage_report(
        self,
        project_id: str,
        period_start: float | None = None,
        period_end: float | None = None,
    ) -> UsageReport:
        """Fold committed records with finished_at inside [start, end)."""
        with self._lock:
            self._get_project(project_id)
            totals = {r: 0.0 for r in RESOURCES}
            counts = {r: 0 for r in RESOURCES}
            for record in self._records:
                if record.project_id != project_id:
                    continue
                if period_start is not None and record.finished_at < period_start:
                    continue
                if period_end is not None and record.finished_at >= period_end:
                    continue
                totals[record.resource] += record.amount
                counts[record.resource] += 1
            return UsageReport(
                project_id=project_id,
                period=(period_start, period_end),
                totals=totals,
                record_counts=counts,
            )

    def records(self, project_id: str | None = None) -> list[UsageRecord]:
        with self._lock:
            if project_id is None:
                return list(self._records)
            return [r for r in self._records if r.project_id == project_id]

    def project_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._projects)

    def audit(self) -> None:
        """Assert the quota-safety invariant on every allocation."""
        with self._lock:
            for alloc in self._allocations.values():
                if alloc.used < 0 or alloc.reserved < -1e-9:
                    raise AccountingError(f"negative usage on {alloc}")
                if alloc.used + alloc.reserved > alloc.granted + 1e-9:
                    raise AccountingError(
                        f"quota safety violated: {alloc.project_id}/{alloc.resource} "
                        f"used={alloc.used} reserved={alloc.reserved} granted={alloc.granted}"
                    )
