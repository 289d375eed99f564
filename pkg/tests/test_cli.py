"""CLI subcommands: exit codes, file outputs, client commands against a live server."""

import json
import socket
import threading
import time

import pytest
import uvicorn

from hqcstack.cli import EXIT_OK, EXIT_REJECTED, EXIT_USAGE, main
from hqcstack.config import ServiceConfig, build_gateway
from hqcstack.httpapi import create_gateway_app

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


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def live_gateway():
    """Real uvicorn server with the executor loop running."""
    config = ServiceConfig(port=_free_port())
    _, gateway = build_gateway(config)
    gateway.start_executor(interval_s=0.01)
    app = create_gateway_app(gateway)
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=config.port, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("uvicorn did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{config.port}", gateway
    gateway.stop_executor()
    server.should_exit = True
    thread.join(timeout=5)


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_unknown_flag(self):
        assert main(["replay", "--no-such-flag"]) == EXIT_USAGE

    def test_no_args(self):
        assert main([]) == EXIT_USAGE


class TestReplayCommands:
    def test_replay_writes_trace_and_report(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            [
                "replay",
                "--profile",
                "3,9,9000",
                "--policy",
                "fifo",
                "--out-dir",
                str(out),
                "--save-workload",
                str(tmp_path / "wl.json"),
            ]
        )
        assert code == EXIT_OK
        assert (out / "trace-fifo.txt").exists()
        report = json.loads((out / "report-fifo.json").read_text())
        assert report["done"] == 9
        assert (tmp_path / "wl.json").exists()
        assert "shots=9000" in capsys.readouterr().out

    def test_replay_deterministic_bytes(self, tmp_path):
        outputs = []
        for run in range(2):
            out = tmp_path / f"out{run}"
            assert main(
                ["replay", "--profile", "2,6,6000", "--seed", "9", "--out-dir", str(out)]
            ) == EXIT_OK
            outputs.append(
                (
                    (out / "trace-fifo.txt").read_bytes(),
                    (out / "report-fifo.json").read_bytes(),
                )
            )
        assert outputs[0] == outputs[1]

    def test_replay_existing_workload(self, tmp_path):
        wl = tmp_path / "wl.json"
        assert main(
            [
                "replay",
                "--profile",
                "2,4,4000",
                "--save-workload",
                str(wl),
                "--out-dir",
                str(tmp_path / "a"),
            ]
        ) == EXIT_OK
        assert main(
            ["replay", "--workload", str(wl), "--out-dir", str(tmp_path / "b")]
        ) == EXIT_OK

    def test_report_compares_policies(self, tmp_path, capsys):
        out = tmp_path / "cmp"
        code = main(
            [
                "report",
                "--profile",
                "3,9,9000",
                "--policies",
                "fifo,fairshare",
                "--out-dir",
                str(out),
            ]
        )
        assert code == EXIT_OK
        lines = (out / "policy-comparison.csv").read_text().strip().splitlines()
        assert lines[0].startswith("policy,")
        assert len(lines) == 3  # header + two policies
        printed = capsys.readouterr().out
        assert "fifo" in printed and "fairshare" in printed


class TestClientCommands:
    def test_devices_listing(self, live_gateway, capsys):
        url, _ = live_gateway
        assert main(["devices", "--url", url]) == EXIT_OK
        out = capsys.readouterr().out
        assert "helmi-sim" in out and "qal9000-sim" in out

    def test_submit_status_results(self, live_gateway, tmp_path, capsys):
        url, _ = live_gateway
        circuit = tmp_path / "bell.json"
        circuit.write_text(json.dumps(BELL_DOC))
        code = main(
            [
                "submit",
                "--url",
                url,
                "--device",
                "helmi-sim",
                "--circuit",
                str(circuit),
                "--shots",
                "250",
            ]
        )
        assert code == EXIT_OK
        job_id = capsys.readouterr().out.strip()
        assert job_id.startswith("qc-")

        deadline = time.time() + 10
        while time.time() < deadline:
            assert main(["status", "--url", url, job_id]) == EXIT_OK
            doc = json.loads(capsys.readouterr().out)
            if doc["state"] == "done":
                break
            time.sleep(0.05)
        assert doc["state"] == "done"

        assert main(["results", "--url", url, job_id]) == EXIT_OK
        results = json.loads(capsys.readouterr().out)
        assert sum(results["counts"][0].values()) == 250

    def test_submit_rejection_exit_code(self, live_gateway, tmp_path, capsys):
        url, gateway = live_gateway
        circuit = tmp_path / "bell.json"
        circuit.write_text(json.dumps(BELL_DOC))
        gateway.signal_status("qal9000-sim", "maintenance")
        code = main(
            [
                "submit",
                "--url",
                url,
                "--device",
                "qal9000-sim",
                "--circuit",
                str(circuit),
            ]
        )
        assert code == EXIT_REJECTED
        assert "device_unavailable" in capsys.readouterr().err
        gateway.signal_status("qal9000-sim", "available")
