"""HTTP layer: thin FastAPI wrappers over the gateway and accounting services.

Gateway endpoints: POST /devices, GET /devices/{id}, POST /devices/{id}/status,
POST /devices/{id}/jobs, GET /jobs/{id}, GET /jobs/{id}/results,
GET /devices/{id}/calibration. Accounting endpoints: POST /projects,
POST /projects/{id}/approve, POST /reservations, POST /reservations/{id}/commit,
POST /reservations/{id}/release, GET /projects/{id}/report.

Submission auth is an opaque bearer token (Authorization: Bearer <token>)
resolved by accounting to (user, project).
"""

from __future__ import annotations

from fastapi import Body, FastAPI, Header, HTTPException, Query

from .accounting import (
    AccountingService,
    AccountingError,
    ProjectStateError,
    QuotaExceededError,
    ReservationError,
    UnknownProjectError,
    UnknownTokenError,
)
from .backend.devices import (
    CalibrationSnapshot,
    DeviceSpec,
    UnknownDeviceError,
    device_preset,
)
from .circuits import CircuitError, WireFormatError, batch_from_obj
from .gateway import (
    AuthenticationError,
    DuplicateDeviceError,
    Gateway,
    GatewayError,
    JobRejected,
    UnknownJobError,
)
from .transpile import NativeGateSet, Topology

__all__ = ["create_gateway_app", "create_accounting_app"]


def _job_doc(gateway: Gateway, job_id: str) -> dict:
    job = gateway.job_status(job_id)
    doc = {
        "job_id": job.job_id,
        "state": job.state,
        "queue_position": gateway.queue_position(job_id),
    }
    if job.state == "rejected":
        doc["reason"] = job.reject_reason
    if job.state == "failed":
        doc["failure_reason"] = job.failure_reason
    return doc


def _device_from_obj(obj: dict, seed: int) -> DeviceSpec:
    if "preset" in obj:
        return device_preset(obj["preset"], seed=obj.get("seed", seed))
    try:
        topology = Topology(
            n_qubits=obj["n_qubits"],
            edges=frozenset((int(a), int(b)) for a, b in obj["edges"]),
        )
        spec = DeviceSpec(
            device_id=obj["device_id"],
            topology=topology,
            native_gates=NativeGateSet(frozenset(obj["native_gates"]))
            if "native_gates" in obj
            else NativeGateSet(frozenset({"rx", "rz", "cz"})),
            calibration=CalibrationSnapshot(**obj["calibration"])
            if "calibration" in obj
            else CalibrationSnapshot(0.997, 0.95, 0.95, 15.0),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"bad device document: {exc}")
    return spec


def create_gateway_app(gateway: Gateway) -> FastAPI:
    app = FastAPI(title="qc-gateway", version="0.1.0")

    @app.exception_handler(UnknownDeviceError)
    async def _unknown_device(_, exc):  # type: ignore[no-untyped-def]
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=404, content={"detail": f"unknown device {exc}"})

    @app.post("/devices", status_code=201)
    def register_device(body: dict = Body(...)) -> dict:
        spec = _device_from_obj(body, gateway.seed)
        try:
            device_id = gateway.register_device(spec)
        except DuplicateDeviceError as exc:
            raise HTTPException(status_code=409, detail=f"device {exc} already registered")
        if body.get("signal_available"):
            gateway.signal_status(device_id, "available")
        return {"device_id": device_id}

    @app.get("/devices")
    def list_devices() -> dict:
        return {"devices": gateway.device_ids()}

    @app.get("/devices/{device_id}")
    def device_info(device_id: str) -> dict:
        spec, status = gateway.get_device_info(device_id)
        doc = spec.to_obj()
        doc["status"] = status.status
        doc["status_since"] = status.since
        doc["queue_length"] = gateway.queue_length(device_id)
        return doc

    @app.post("/devices/{device_id}/status")
    def signal(device_id: str, body: dict = Body(...)) -> dict:
        status = body.get("status")
        if status is None:
            raise HTTPException(status_code=400, detail="body needs 'status'")
        try:
            changed = gateway.signal_status(device_id, status)
        except GatewayError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"device_id": device_id, "status": status, "changed": changed}

    @app.get("/devices/{device_id}/calibration")
    def calibration(device_id: str) -> dict:
        spec, _ = gateway.get_device_info(device_id)
        return spec.calibration.to_obj()

    @app.post("/devices/{device_id}/jobs", status_code=201)
    def submit(
        device_id: str,
        body: dict = Body(...),
        authorization: str | None = Header(default=None),
    ) -> dict:
        if not authorization or not authorization.lower().startswith("bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        token = authorization.split(None, 1)[1]
        project_id = body.get("project_id")
        if not project_id:
            raise HTTPException(status_code=400, detail="body needs 'project_id'")
        try:
            batch = batch_from_obj({"circuits": body.get("circuits"), "shots": body.get("shots")})
        except (WireFormatError, CircuitError) as exc:
            raise HTTPException(
                status_code=400,
                detail={"reason": "invalid_circuit", "message": str(exc)},
            )
        try:
            job_id = gateway.submit_job(device_id, batch, project_id, token)
        except (AuthenticationError, UnknownTokenError) as exc:
            raise HTTPException(status_code=401, detail=str(exc))
        except UnknownProjectError as exc:
            raise HTTPException(status_code=404, detail=f"unknown project {exc}")
        except JobRejected as exc:
            raise HTTPException(
                status_code=409,
                detail={"reason": exc.reason, "job_id": exc.job_id, "message": exc.detail},
            )
        return _job_doc(gateway, job_id)

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str) -> dict:
        try:
            return _job_doc(gateway, job_id)
        except UnknownJobError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")

    @app.get("/jobs/{job_id}/results")
    def job_results(job_id: str) -> dict:
        try:
            return gateway.fetch_results(job_id)
        except UnknownJobError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")

    return app


def create_accounting_app(accounting: AccountingService) -> FastAPI:
    app = FastAPI(title="accounting", version="0.1.0")

    @app.post("/projects", status_code=201)
    def open_project(body: dict = Body(...)) -> dict:
        members = body.get("members")
        if not members:
            raise HTTPException(status_code=400, detail="body needs 'members'")
        try:
            project_id = accounting.open_project(members, project_id=body.get("project_id"))
        except ProjectStateError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"project_id": project_id, "state": "pending"}

    @app.post("/projects/{project_id}/approve")
    def approve(project_id: str, body: dict = Body(...)) -> dict:
        grants = body.get("grants")
        if not grants:
            raise HTTPException(status_code=400, detail="body needs 'grants'")
        try:
            accounting.approve_project(project_id, grants)
        except UnknownProjectError:
            raise HTTPException(status_code=404, detail=f"unknown project {project_id}")
        except (ProjectStateError, AccountingError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"project_id": project_id, "state": "approved"}

    @app.post("/reservations", status_code=201)
    def reserve(body: dict = Body(...)) -> dict:
        try:
            reservation_id = accounting.reserve(
                body["project_id"], body["resource"], body["amount"]
            )
        except KeyError as exc:
            raise HTTPException(status_code=400, detail=f"body needs {exc.args[0]!r}")
        except UnknownProjectError as exc:
            raise HTTPException(status_code=404, detail=f"unknown project {exc}")
        except QuotaExceededError as exc:
            raise HTTPException(
                status_code=409, detail={"reason": "quota_exceeded", "message": str(exc)}
            )
        except (ProjectStateError, AccountingError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"reservation_id": reservation_id}

    @app.post("/reservations/{reservation_id}/commit")
    def commit(reservation_id: str, body: dict = Body(...)) -> dict:
        try:
            record = accounting.commit_usage(
                reservation_id,
                body["amount"],
                body.get("job_id", ""),
                body.get("started_at", 0.0),
                body.get("finished_at", 0.0),
            )
        except KeyError as exc:
            raise HTTPException(status_code=400, detail=f"body needs {exc.args[0]!r}")
        except ReservationError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return record.__dict__

    @app.post("/reservations/{reservation_id}/release")
    def release(reservation_id: str) -> dict:
        try:
            accounting.release(reservation_id)
        except ReservationError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"reservation_id": reservation_id, "state": "released"}

    @app.get("/projects/{project_id}/report")
    def report(
        project_id: str,
        from_: float | None = Query(default=None, alias="from"),
        to: float | None = Query(default=None),
    ) -> dict:
        try:
            rep = accounting.usage_report(project_id, from_, to)
        except UnknownProjectError:
            raise HTTPException(status_code=404, detail=f"unknown project {project_id}")
        return {
            "project_id": rep.project_id,
            "period": list(rep.period),
            "totals": rep.totals,
            "record_counts": rep.record_counts,
        }

    return app
