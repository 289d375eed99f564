"""REST endpoints of the gateway and accounting services."""

import pytest
from fastapi.testclient import TestClient

from hqcstack.accounting import AccountingService
from hqcstack.backend.devices import device_preset
from hqcstack.gateway import Gateway, GatewayPolicy
from hqcstack.httpapi import create_accounting_app, create_gateway_app

BELL_DOC = {
    "name": "bell",
    "n_qubits": 2,
    "ops": [
        {"gate": "h", "qubits": [0], "params": []},
        {"gate": "cx", "qubits": [0, 1], "params": []},
        {"gate": "measure", "qubits": [0], "params": []},
        {"gate": "measure", "qubits": [1], "params": []},
    ],
}
AUTH = {"Authorization": "Bearer tok-alice"}


@pytest.fixture
def stack():
    acct = AccountingService(clock=lambda: 500.0)
    acct.open_project(["alice"], project_id="proj-a")
    acct.approve_project(
        "proj-a", {"cpu_core_seconds": 1e9, "qpu_seconds": 1e9, "shots": 1e9}
    )
    acct.register_token("tok-alice", "alice", "proj-a")
    gw = Gateway(acct, clock=lambda: 500.0, policy=GatewayPolicy(), noisy=False, seed=2)
    gw.register_device(device_preset("helmi-sim", seed=2))
    gw.signal_status("helmi-sim", "available")
    return acct, gw, TestClient(create_gateway_app(gw))


@pytest.fixture
def acct_client():
    acct = AccountingService(clock=lambda: 0.0)
    return acct, TestClient(create_accounting_app(acct))


class TestGatewayEndpoints:
    def test_register_device_preset(self, stack):
        _, _, client = stack
        resp = client.post("/devices", json={"preset": "qal9000-sim", "seed": 1})
        assert resp.status_code == 201
        assert resp.json() == {"device_id": "qal9000-sim"}
        info = client.get("/devices/qal9000-sim").json()
        assert info["n_qubits"] == 25
        assert info["status"] == "offline"

    def test_register_custom_device(self, stack):
        _, _, client = stack
        body = {
            "device_id": "line-3",
            "n_qubits": 3,
            "edges": [[0, 1], [1, 2]],
            "native_gates": ["rx", "rz", "cz"],
        }
        assert client.post("/devices", json=body).status_code == 201
        assert client.get("/devices/line-3").json()["n_qubits"] == 3

    def test_duplicate_device_conflict(self, stack):
        _, _, client = stack
        resp = client.post("/devices", json={"preset": "helmi-sim"})
        assert resp.status_code == 409

    def test_device_info_document(self, stack):
        _, _, client = stack
        doc = client.get("/devices/helmi-sim").json()
        assert doc["device_id"] == "helmi-sim"
        assert sorted(doc["native_gates"]) == ["cz", "rx", "rz"]
        assert [0, 1] in doc["edges"]
        assert doc["status"] == "available"
        assert 0.995 <= doc["calibration"]["f1"] <= 0.999

    def test_unknown_device_404(self, stack):
        _, _, client = stack
        assert client.get("/devices/ghost").status_code == 404

    def test_calibration_endpoint(self, stack):
        _, _, client = stack
        cal = client.get("/devices/helmi-sim/calibration").json()
        assert 10.0 <= cal["t2_us"] <= 20.0

    def test_status_signal(self, stack):
        _, _, client = stack
        resp = client.post("/devices/helmi-sim/status", json={"status": "maintenance"})
        assert resp.json()["changed"] is True
        resp = client.post("/devices/helmi-sim/status", json={"status": "maintenance"})
        assert resp.json()["changed"] is False
        assert client.post(
            "/devices/helmi-sim/status", json={"status": "nonsense"}
        ).status_code == 400

    def test_submit_poll_results(self, stack):
        _, gw, client = stack
        resp = client.post(
            "/devices/helmi-sim/jobs",
            json={"circuits": [BELL_DOC], "shots": 300, "project_id": "proj-a"},
            headers=AUTH,
        )
        assert resp.status_code == 201
        doc = resp.json()
        assert doc["state"] == "queued" and doc["queue_position"] == 1
        job_id = doc["job_id"]

        assert client.get(f"/jobs/{job_id}").json()["state"] == "queued"
        partial = client.get(f"/jobs/{job_id}/results").json()
        assert partial == {"job_id": job_id, "state": "queued"}

        gw.process_queue_step("helmi-sim")
        final = client.get(f"/jobs/{job_id}/results").json()
        assert final["state"] == "done"
        assert sum(final["counts"][0].values()) == 300
        assert final["usage"]["shots"] == 300
        assert final["usage"]["qpu_seconds"] > 0

    def test_submit_requires_token(self, stack):
        _, _, client = stack
        resp = client.post(
            "/devices/helmi-sim/jobs",
            json={"circuits": [BELL_DOC], "shots": 10, "project_id": "proj-a"},
        )
        assert resp.status_code == 401

    def test_submit_bad_token(self, stack):
        _, _, client = stack
        resp = client.post(
            "/devices/helmi-sim/jobs",
            json={"circuits": [BELL_DOC], "shots": 10, "project_id": "proj-a"},
            headers={"Authorization": "Bearer nope"},
        )
        assert resp.status_code == 401

    def test_rejection_maps_to_409_with_reason(self, stack):
        _, gw, client = stack
        gw.signal_status("helmi-sim", "offline")
        resp = client.post(
            "/devices/helmi-sim/jobs",
            json={"circuits": [BELL_DOC], "shots": 10, "project_id": "proj-a"},
            headers=AUTH,
        )
        assert resp.status_code == 409
        detail = resp.json()["detail"]
        assert detail["reason"] == "device_unavailable"
        # the rejected job remains queryable
        assert client.get(f"/jobs/{detail['job_id']}").json()["state"] == "rejected"

    def test_malformed_circuit_400(self, stack):
        _, _, client = stack
        resp = client.post(
            "/devices/helmi-sim/jobs",
            json={
                "circuits": [{"n_qubits": 1, "ops": [{"gate": "foo", "qubits": [0]}]}],
                "shots": 10,
                "project_id": "proj-a",
            },
            headers=AUTH,
        )
        assert resp.status_code == 400
        assert resp.json()["detail"]["reason"] == "invalid_circuit"

    def test_unknown_job_404(self, stack):
        _, _, client = stack
        assert client.get("/jobs/qc-424242").status_code == 404
        assert client.get("/jobs/qc-424242/results").status_code == 404


class TestAccountingEndpoints:
    def test_project_lifecycle(self, acct_client):
        _, client = acct_client
        resp = client.post("/projects", json={"members": ["u1"], "project_id": "p1"})
        assert resp.status_code == 201
        assert resp.json() == {"project_id": "p1", "state": "pending"}
        resp = client.post("/projects/p1/approve", json={"grants": {"shots": 5000}})
        assert resp.json()["state"] == "approved"
        assert client.post(
            "/projects/p1/approve", json={"grants": {"shots": 1}}
        ).status_code == 409

    def test_reservation_flow(self, acct_client):
        acct, client = acct_client
        client.post("/projects", json={"members": ["u"], "project_id": "p"})
        client.post("/projects/p/approve", json={"grants": {"shots": 1000}})
        resp = client.post(
            "/reservations", json={"project_id": "p", "resource": "shots", "amount": 400}
        )
        assert resp.status_code == 201
        rsv = resp.json()["reservation_id"]
        resp = client.post(
            f"/reservations/{rsv}/commit",
            json={"amount": 350, "job_id": "j1", "started_at": 1.0, "finished_at": 2.0},
        )
        assert resp.status_code == 200
        assert resp.json()["amount"] == 350
        assert acct.allocation("p", "shots").used == 350

    def test_quota_exceeded_409(self, acct_client):
        _, client = acct_client
        client.post("/projects", json={"members": ["u"], "project_id": "p"})
        client.post("/projects/p/approve", json={"grants": {"shots": 100}})
        resp = client.post(
            "/reservations", json={"project_id": "p", "resource": "shots", "amount": 101}
        )
        assert resp.status_code == 409
        assert resp.json()["detail"]["reason"] == "quota_exceeded"

    def test_release_endpoint(self, acct_client):
        acct, client = acct_client
        client.post("/projects", json={"members": ["u"], "project_id": "p"})
        client.post("/projects/p/approve", json={"grants": {"shots": 100}})
        rsv = client.post(
            "/reservations", json={"project_id": "p", "resource": "shots", "amount": 80}
        ).json()["reservation_id"]
        assert client.post(f"/reservations/{rsv}/release").status_code == 200
        assert acct.allocation("p", "shots").reserved == 0
        assert client.post(f"/reservations/{rsv}/release").status_code == 409

    def test_report_with_period(self, acct_client):
        _, client = acct_client
        client.post("/projects", json={"members": ["u"], "project_id": "p"})
        client.post("/projects/p/approve", json={"grants": {"shots": 1000}})
        for finished in (10.0, 50.0):
            rsv = client.post(
                "/reservations",
                json={"project_id": "p", "resource": "shots", "amount": 100},
            ).json()["reservation_id"]
            client.post(
                f"/reservations/{rsv}/commit",
                json={"amount": 100, "job_id": "j", "started_at": 0.0, "finished_at": finished},
            )
        full = client.get("/projects/p/report").json()
        assert full["totals"]["shots"] == 200
        windowed = client.get("/projects/p/report", params={"from": 0, "to": 20}).json()
        assert windowed["totals"]["shots"] == 100
        assert client.get("/projects/ghost/report").status_code == 404
