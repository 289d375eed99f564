"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is pinned here, nothing is calibrated elsewhere.
"""

import json
import math
import time

import numpy as np

from hqcstack.backend.devices import CalibrationSnapshot, DeviceSpec, device_preset
from hqcstack.backend.statevector import sample_counts
from hqcstack.circuits import GateOp, QuantumCircuit, TWO_QUBIT_GATES, memory_estimate
from hqcstack.gateway import GatewayPolicy
from hqcstack.hybrid import (
    AnsatzTemplate,
    LocalTarget,
    OptimizerConfig,
    PauliObservable,
    brute_force_maxcut,
    run_qaoa_maxcut,
    run_vqe,
)
from hqcstack.transpile import Topology, transpile
from hqcstack.workload import (
    TABLE_DEFAULT_PROFILE,
    WorkloadProfile,
    accounting_totals,
    generate_workload,
    run_replay,
    write_report,
    write_trace,
)

from _oracles import random_circuit, routed_equivalent


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


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


def test_table1_replay_exactness():
    """83 users / 364 jobs / 2,533,588 shots replayed under fifo, no limits:
    accounting totals must match exactly (tolerance 0) in < 60 s."""
    start = time.time()
    jobs = generate_workload(TABLE_DEFAULT_PROFILE)
    outcome = run_replay(jobs, policy="fifo", device="helmi-sim")
    totals = accounting_totals(outcome.accounting)
    elapsed = time.time() - start
    ok = (
        totals["shots"] == 2_533_588
        and totals["shot_records"] == 364
        and outcome.report.done == 364
        and elapsed < 60.0
    )
    _report(
        "table1-replay-exactness",
        ok,
        f"shots={totals['shots']:.0f} jobs={totals['shot_records']} in {elapsed:.1f}s",
    )


def test_bell_sampling():
    """Noiseless helmi-sim, 10,000 shots: N(00), N(11) within 5000 +- 150 (3 sigma),
    zero odd-parity counts, in < 1 s."""
    start = time.time()
    helmi = device_preset("helmi-sim", seed=0)
    tc, _ = transpile(_bell(), helmi.topology)
    counts = sample_counts(tc, 10_000, helmi, seed=20_240, noisy=False)
    elapsed = time.time() - start
    n00, n11 = counts.get("00", 0), counts.get("11", 0)
    n01, n10 = counts.get("01", 0), counts.get("10", 0)
    ok = (
        abs(n00 - 5000) <= 150
        and abs(n11 - 5000) <= 150
        and n01 == 0
        and n10 == 0
        and elapsed < 1.0
    )
    _report(
        "bell-sampling",
        ok,
        f"N(00)={n00} N(11)={n11} N(01)={n01} N(10)={n10} in {elapsed:.2f}s",
    )


def test_readout_noise_calibration():
    """f_ro = 0.95, X then measure at 1e5 shots: fraction of '1' inside
    [0.9479, 0.9521], in < 5 s."""
    start = time.time()
    spec = DeviceSpec(
        device_id="readout-test",
        topology=Topology.star(2),
        calibration=CalibrationSnapshot(f1=1.0, f2=1.0, f_ro=0.95, t2_us=math.inf),
    )
    c = QuantumCircuit(1, (GateOp("rx", (0,), (math.pi,)), GateOp("measure", (0,))))
    counts = sample_counts(c, 100_000, spec, seed=7, noisy=True)
    elapsed = time.time() - start
    frac = counts.get("1", 0) / 100_000
    ok = 0.9479 <= frac <= 0.9521 and elapsed < 5.0
    _report("readout-noise-calibration", ok, f"P('1')={frac:.4f} in {elapsed:.2f}s")


def test_transpiler_equivalence_suite():
    """200 random circuits (n <= 4, depth <= 10) transpiled onto the star and
    the grid match the original unitary up to global phase and permutation,
    1e-9 entrywise, in < 60 s."""
    start = time.time()
    star = Topology.star(5)
    grid = Topology.grid(5, 5)
    rng = np.random.default_rng(314159)
    failures = 0
    for _ in range(200):
        c = random_circuit(rng, int(rng.integers(1, 5)), int(rng.integers(1, 11)))
        for topo in (star, grid):
            out, layout = transpile(c, topo)
            for op in out.ops:
                if op.name in TWO_QUBIT_GATES and not topo.has_edge(*op.qubits):
                    failures += 1
            if not routed_equivalent(c, out, layout, tol=1e-9):
                failures += 1
    elapsed = time.time() - start
    ok = failures == 0 and elapsed < 60.0
    _report(
        "transpiler-equivalence",
        ok,
        f"200 circuits x {{star, grid}}, {failures} failures in {elapsed:.1f}s",
    )


def test_memory_scaling_claim():
    """2^25 x 16 = 536,870,912 bytes; 2^50 x 16 = 1.8014e16 bytes (tolerance 0)."""
    m25 = memory_estimate(25)
    m50 = memory_estimate(50)
    ok = m25 == 536_870_912 and m50 == 18_014_398_509_481_984
    _report("memory-scaling", ok, f"mem(25)={m25} mem(50)={m50}")


# ---------------------------------------------------------------------------
# Scheduling trace properties over randomized workloads
# ---------------------------------------------------------------------------

def _random_scheduling_run(seed: int):
    from hqcstack.accounting import AccountingService
    from hqcstack.gateway import Gateway
    from hqcstack.scheduler import ClusterSim, ComputeJob, VirtualClock
    from hqcstack.circuits import CircuitBatch

    rng = np.random.default_rng(seed)
    clock = VirtualClock()
    acct = AccountingService(clock=clock)
    users = [f"u{i}" for i in range(int(rng.integers(2, 5)))]
    for user in users:
        pid = f"proj-{user}"
        acct.open_project([user], project_id=pid)
        acct.approve_project(
            pid, {"cpu_core_seconds": 1e9, "qpu_seconds": 1e9, "shots": 1e9}
        )
        acct.register_token(f"tok-{user}", user, pid)
    gw = Gateway(acct, clock=clock, policy=GatewayPolicy(), noisy=False, seed=seed)
    gw.register_device(device_preset("helmi-sim", seed=seed))
    sim = ClusterSim(
        acct, gw, cpu_capacity=int(rng.integers(1, 4)), policy="fifo", clock=clock
    )

    # availability signals injected at random times, starting open at t=0
    sim.inject_signal(0.0, "helmi-sim", "available")
    t = 0.0
    status = "available"
    for _ in range(int(rng.integers(1, 5))):
        t += float(rng.uniform(5.0, 60.0))
        status = "maintenance" if status == "available" else "available"
        sim.inject_signal(t, "helmi-sim", status)
    if status != "available":
        sim.inject_signal(t + float(rng.uniform(5.0, 60.0)), "helmi-sim", "available")

    n_jobs = int(rng.integers(6, 15))
    submitted = []
    for i in range(n_jobs):
        user = users[int(rng.integers(len(users)))]
        needs_qpu = bool(rng.random() < 0.6)
        job = ComputeJob(
            job_id=f"j{i:02d}",
            project_id=f"proj-{user}",
            user=user,
            cpu_core_seconds=float(rng.uniform(1.0, 20.0)),
            needs_qpu=needs_qpu,
            qc_batch=CircuitBatch((_bell(),), int(rng.integers(10, 100)))
            if needs_qpu
            else None,
            submitted_at=float(rng.uniform(0.0, 50.0)),
        )
        submitted.append(job)
        sim.submit(job)

    # audit quota safety at every observable instant (event boundary)
    violations = 0
    guard = 0
    while sim._heap:
        sim.step()
        try:
            acct.audit()
        except Exception:
            violations += 1
        guard += 1
        if guard > 100_000:
            raise RuntimeError("runaway simulation")
    return sim, gw, submitted, violations


def _check_trace_properties(sim, gw, submitted) -> list[str]:
    problems: list[str] = []
    entries = sim.trace.entries

    # FIFO preservation: cpu dispatch order equals submission order
    dispatch_order = [s for _, k, s in entries if k == "job_dispatch"]
    expected = [
        j.job_id
        for j in sorted(
            (j for j in submitted if j.job_id in set(dispatch_order)),
            key=lambda j: (j.submitted_at, j.job_id),
        )
    ]
    if dispatch_order != expected:
        problems.append(f"fifo order broken: {dispatch_order} != {expected}")

    # replay the trace as a state machine
    open_state = False
    busy = False
    pending = set()
    had_qc_dispatch = set()
    i = 0
    while i < len(entries):
        t = entries[i][0]
        group = []
        while i < len(entries) and entries[i][0] == t:
            group.append(entries[i])
            i += 1
        for _, kind, subject in group:
            if kind == "partition_open":
                open_state = True
            elif kind == "partition_close":
                open_state = False
            elif kind == "cpu_phase_end":
                pending.add(subject)
            elif kind == "qc_dispatch":
                if not open_state:
                    problems.append(f"dispatch into closed partition at {t}")
                if busy:
                    problems.append(f"two executions overlap at {t}")
                busy = True
                pending.discard(subject)
                had_qc_dispatch.add(subject)
            elif kind == "qc_complete":
                busy = False
            elif kind == "job_failed":
                pending.discard(subject)
        # no-stall: an open, idle device never leaves eligible work waiting
        if open_state and pending and not busy:
            problems.append(f"device idle with pending work after t={t}")
    if pending:
        problems.append(f"jobs never dispatched to device: {pending}")
    return problems


def test_scheduling_trace_properties():
    """100 randomized workloads with random availability signals: FIFO order,
    mutual exclusion, no closed-partition dispatch, no-stall, quota safety —
    zero violations allowed."""
    start = time.time()
    total_problems: list[str] = []
    for seed in range(100):
        sim, gw, submitted, audit_violations = _random_scheduling_run(seed)
        problems = _check_trace_properties(sim, gw, submitted)
        if audit_violations:
            problems.append(f"quota safety violated {audit_violations}x")
        if problems:
            total_problems.append(f"seed {seed}: {problems}")
    elapsed = time.time() - start
    ok = not total_problems
    _report(
        "scheduling-trace-properties",
        ok,
        f"100 workloads, {len(total_problems)} violating seeds in {elapsed:.1f}s"
        + (f" first={total_problems[0]}" if total_problems else ""),
    )


def test_hybrid_convergence():
    """VQE on Z(x)Z reaches <= -0.95 for >= 9/10 seeds (150 SPSA iterations x
    4 restarts, 1e4 shots); QAOA p=1 on the 4-cycle samples the optimal cut 4
    for >= 9/10 seeds. Both in < 5 min."""
    start = time.time()
    helmi = device_preset("helmi-sim", seed=0)
    obs = PauliObservable(((1.0, "ZZ"),))

    vqe_hits = 0
    for seed in range(10):
        config = OptimizerConfig(seed=seed, restarts=4, max_iterations=150)
        target = LocalTarget(helmi, noisy=False, seed=seed)
        result = run_vqe(AnsatzTemplate(2, 1), obs, config, target, shots=10_000)
        vqe_hits += result.best_energy <= -0.95

    optimum = brute_force_maxcut([(0, 1), (1, 2), (2, 3), (3, 0)])
    qaoa_hits = 0
    for seed in range(10):
        config = OptimizerConfig(seed=seed, restarts=1, max_iterations=60)
        target = LocalTarget(helmi, noisy=False, seed=seed)
        result = run_qaoa_maxcut(
            [(0, 1), (1, 2), (2, 3), (3, 0)], 1, config, target, shots=512, final_shots=2048
        )
        qaoa_hits += result.best_cut == optimum

    elapsed = time.time() - start
    ok = vqe_hits >= 9 and qaoa_hits >= 9 and elapsed < 300.0
    _report(
        "hybrid-convergence",
        ok,
        f"VQE {vqe_hits}/10 reached -0.95, QAOA {qaoa_hits}/10 cut {optimum}, "
        f"in {elapsed:.0f}s",
    )


def test_determinism(tmp_path):
    """Replay trace+report files and sampled counts byte-identical across two
    runs at a fixed seed."""
    profile = WorkloadProfile(n_users=6, n_jobs=25, total_shots=80_000, window_s=600.0, seed=99)
    jobs = generate_workload(profile)
    payloads = []
    for run in range(2):
        outcome = run_replay(jobs, policy="fairshare", seed=99)
        trace_path = tmp_path / f"trace-{run}.txt"
        report_path = tmp_path / f"report-{run}.json"
        write_trace(outcome.trace, str(trace_path))
        write_report(outcome.report, str(report_path))
        payloads.append(trace_path.read_bytes() + report_path.read_bytes())

    helmi = device_preset("helmi-sim", seed=1)
    tc, _ = transpile(_bell(), helmi.topology)
    sim_payloads = [
        json.dumps(sample_counts(tc, 10_000, helmi, seed=5, noisy=True), sort_keys=True)
        for _ in range(2)
    ]
    ok = payloads[0] == payloads[1] and sim_payloads[0] == sim_payloads[1]
    _report(
        "determinism",
        ok,
        f"replay bytes equal={payloads[0] == payloads[1]}, "
        f"counts equal={sim_payloads[0] == sim_payloads[1]}",
    )
