"""Command-line entry point.

Subcommands: serve-gateway, serve-accounting, submit, status, results,
devices, replay, report. submit/status/results/devices talk HTTP to a
running gateway; replay/report run the whole stack in-process.

Exit codes: 0 success, 2 usage error, 3 job rejected, 4 service failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import load_config
from .workload import (
    WorkloadProfile,
    generate_workload,
    load_workload,
    run_replay,
    write_report,
    write_trace,
    write_workload,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_REJECTED = 3
EXIT_SERVICE = 4

_DEFAULT_URL = "http://127.0.0.1:8000"


def _request(method: str, url: str, **kwargs):
    import requests

    try:
        return requests.request(method, url, timeout=kwargs.pop("timeout", 30), **kwargs)
    except requests.RequestException as exc:
        print(f"service unreachable: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_SERVICE)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=1))


# -- service subcommands -----------------------------------------------------

def cmd_serve_gateway(args) -> int:
    import uvicorn

    from .config import build_gateway
    from .httpapi import create_gateway_app

    config = load_config(args.config)
    if args.port is not None:
        config.port = args.port
    if args.seed is not None:
        config.seed = args.seed
    _, gateway = build_gateway(config)
    gateway.start_executor()
    app = create_gateway_app(gateway)
    print(f"gateway on {config.host}:{config.port} devices={gateway.device_ids()}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return EXIT_OK


def cmd_serve_accounting(args) -> int:
    import uvicorn

    from .config import bootstrap_accounting
    from .httpapi import create_accounting_app

    config = load_config(args.config)
    if args.port is not None:
        config.port = args.port
    accounting = bootstrap_accounting(config)
    app = create_accounting_app(accounting)
    print(f"accounting on {config.host}:{config.port}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return EXIT_OK


# -- client subcommands --------------------------------------------------------

def cmd_submit(args) -> int:
    with open(args.circuit, encoding="utf-8") as fh:
        circuit_doc = json.load(fh)
    body = {
        "circuits": [circuit_doc],
        "shots": args.shots,
        "project_id": args.project,
    }
    resp = _request(
        "POST",
        f"{args.url}/devices/{args.device}/jobs",
        json=body,
        headers={"Authorization": f"Bearer {args.token}"},
    )
    if resp.status_code == 409:
        detail = resp.json().get("detail", {})
        print(f"rejected: {detail.get('reason')} ({detail.get('message', '')})", file=sys.stderr)
        return EXIT_REJECTED
    if resp.status_code >= 400:
        print(f"submit failed ({resp.status_code}): {resp.text}", file=sys.stderr)
        return EXIT_SERVICE
    doc = resp.json()
    print(doc["job_id"])
    return EXIT_OK


def cmd_status(args) -> int:
    resp = _request("GET", f"{args.url}/jobs/{args.job_id}")
    if resp.status_code >= 400:
        print(f"status failed ({resp.status_code}): {resp.text}", file=sys.stderr)
        return EXIT_SERVICE
    _print_json(resp.json())
    return EXIT_OK


def cmd_results(args) -> int:
    resp = _request("GET", f"{args.url}/jobs/{args.job_id}/results")
    if resp.status_code >= 400:
        print(f"results failed ({resp.status_code}): {resp.text}", file=sys.stderr)
        return EXIT_SERVICE
    _print_json(resp.json())
    return EXIT_OK


def cmd_devices(args) -> int:
    resp = _request("GET", f"{args.url}/devices")
    if resp.status_code >= 400:
        print(f"devices failed ({resp.status_code}): {resp.text}", file=sys.stderr)
        return EXIT_SERVICE
    ids = resp.json()["devices"]
    for device_id in ids:
        info = _request("GET", f"{args.url}/devices/{device_id}").json()
        print(
            f"{device_id}: {info['n_qubits']} qubits, status={info['status']}, "
            f"queue={info['queue_length']}"
        )
    return EXIT_OK


# -- replay subcommands ----------------------------------------------------------

def _profile_from_args(args) -> WorkloadProfile:
    if args.profile == "table1":
        return WorkloadProfile(seed=args.seed)
    n_users, n_jobs, total_shots = (int(x) for x in args.profile.split(","))
    return WorkloadProfile(
        n_users=n_users, n_jobs=n_jobs, total_shots=total_shots, seed=args.seed
    )


def _load_or_generate(args) -> list[dict]:
    if args.workload:
        return load_workload(args.workload)
    jobs = generate_workload(_profile_from_args(args))
    if args.save_workload:
        write_workload(jobs, args.save_workload)
    return jobs


def cmd_replay(args) -> int:
    jobs = _load_or_generate(args)
    outcome = run_replay(
        jobs,
        policy=args.policy,
        device=args.device,
        noisy=args.noisy,
        seed=args.seed,
        cpu_capacity=args.cpu_capacity,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    trace_path = os.path.join(args.out_dir, f"trace-{args.policy}.txt")
    report_path = os.path.join(args.out_dir, f"report-{args.policy}.json")
    write_trace(outcome.trace, trace_path)
    write_report(outcome.report, report_path)
    r = outcome.report
    print(
        f"{r.policy}: done={r.done} failed={r.failed} rejected={r.rejected} "
        f"mean_wait={r.mean_wait_s:.3f}s p95_wait={r.p95_wait_s:.3f}s "
        f"shots={r.totals['shots']:.0f}"
    )
    print(f"wrote {trace_path} and {report_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    jobs = _load_or_generate(args)
    policies = args.policies.split(",")
    rows = []
    for policy in policies:
        outcome = run_replay(
            jobs,
            policy=policy,
            device=args.device,
            noisy=args.noisy,
            seed=args.seed,
            cpu_capacity=args.cpu_capacity,
        )
        rows.append(outcome.report)
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "policy-comparison.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("policy,done,failed,rejected,mean_wait_s,p95_wait_s,utilization,shots\n")
        for r in rows:
            fh.write(
                f"{r.policy},{r.done},{r.failed},{r.rejected},"
                f"{r.mean_wait_s:.6f},{r.p95_wait_s:.6f},{r.utilization:.6f},"
                f"{r.totals['shots']:.0f}\n"
            )
    for r in rows:
        print(
            f"{r.policy:10s} done={r.done:4d} rejected={r.rejected:4d} "
            f"mean_wait={r.mean_wait_s:10.3f}s p95={r.p95_wait_s:10.3f}s "
            f"util={r.utilization:.4f}"
        )
    print(f"wrote {path}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hqc", description="Hybrid HPC+QC stack: services, clients, replay."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument(
            "--config",
            default=os.environ.get("HQC_CONFIG"),
            help="config file (or HQC_CONFIG)",
        )
        p.add_argument("--port", type=int, default=None)

    p = sub.add_parser("serve-gateway", help="run the gateway HTTP service")
    add_config(p)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_serve_gateway)

    p = sub.add_parser("serve-accounting", help="run the accounting HTTP service")
    add_config(p)
    p.set_defaults(func=cmd_serve_accounting)

    def add_url(p):
        p.add_argument("--url", default=os.environ.get("HQC_GATEWAY_URL", _DEFAULT_URL))

    p = sub.add_parser("submit", help="submit a circuit to a gateway device")
    add_url(p)
    p.add_argument("--device", required=True)
    p.add_argument("--circuit", required=True, help="wire-format circuit file")
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--project", default="proj-demo")
    p.add_argument("--token", default=os.environ.get("HQC_TOKEN", "demo-token"))
    p.set_defaults(func=cmd_submit)

    p = sub.add_parser("status", help="query job state")
    add_url(p)
    p.add_argument("job_id")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("results", help="fetch job results")
    add_url(p)
    p.add_argument("job_id")
    p.set_defaults(func=cmd_results)

    p = sub.add_parser("devices", help="list gateway devices")
    add_url(p)
    p.set_defaults(func=cmd_devices)

    def add_replay_args(p):
        p.add_argument("--profile", default="table1", help="'table1' or 'users,jobs,shots'")
        p.add_argument("--workload", default=None, help="replay an existing workload file")
        p.add_argument("--save-workload", default=None, help="write the generated workload here")
        p.add_argument("--device", default="helmi-sim")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--noisy", action="store_true")
        p.add_argument("--cpu-capacity", type=int, default=8)
        p.add_argument("--out-dir", default="replay-out")

    p = sub.add_parser("replay", help="replay a workload through the full stack")
    add_replay_args(p)
    p.add_argument("--policy", default="fifo", choices=["fifo", "fairshare", "timeslot"])
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="compare scheduling policies on one workload")
    add_replay_args(p)
    p.add_argument("--policies", default="fifo,fairshare")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_SERVICE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SERVICE


if __name__ == "__main__":
    sys.exit(main())
