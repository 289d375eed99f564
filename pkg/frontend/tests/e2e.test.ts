/**
 * End-to-end: spawn the Python gateway service and exercise the full
 * submit / poll / results flow over real HTTP.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { batch, bellCircuit, CircuitBuilder } from "../src/circuit.js";
import { ClientSession, GatewayClient, JobRejectedError } from "../src/client.js";

const REPO_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForGateway(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/devices`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error("gateway did not come up");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "hqcstack.cli", "serve-gateway", "--port", String(PORT)],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stderr?.on("data", () => {});
  await waitForGateway();
}, 40_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

function client(): GatewayClient {
  return new GatewayClient(
    new ClientSession({ baseUrl: BASE, token: "demo-token", timeoutMs: 10_000 }),
  );
}

describe("live gateway", () => {
  it("lists the preset devices with topology metadata", async () => {
    const c = client();
    const devices = await c.listDevices();
    expect(devices).toContain("helmi-sim");
    expect(devices).toContain("qal9000-sim");
    const info = await c.deviceInfo("helmi-sim");
    expect(info.n_qubits).toBe(5);
    expect(info.status).toBe("available");
    const cal = await c.calibration("helmi-sim");
    expect(cal.t2_us).toBeGreaterThanOrEqual(10);
    expect(cal.t2_us).toBeLessThanOrEqual(20);
  });

  it("runs a Bell batch end-to-end with conserved counts", async () => {
    const c = client();
    const result = await c.submitAndWait(
      "helmi-sim",
      batch([bellCircuit()], 1000),
      "proj-demo",
      60_000,
      50,
    );
    expect(result.state).toBe("done");
    expect(result.counts).toHaveLength(1);
    const total = Object.values(result.counts![0]).reduce((a, b) => a + b, 0);
    expect(total).toBe(1000);
    expect(result.usage!.shots).toBe(1000);
    expect(result.usage!.qpu_seconds).toBeGreaterThan(0);
  }, 60_000);

  it("runs a multi-circuit batch built fluently", async () => {
    const c = client();
    const ghz = new CircuitBuilder(3, "ghz3").h(0).cx(0, 1).cx(1, 2).measureAll().build();
    const plus = new CircuitBuilder(1, "plus").h(0).measureAll().build();
    const result = await c.submitAndWait(
      "helmi-sim",
      batch([ghz, plus], 200),
      "proj-demo",
      60_000,
      50,
    );
    expect(result.counts).toHaveLength(2);
    for (const counts of result.counts!) {
      expect(Object.values(counts).reduce((a, b) => a + b, 0)).toBe(200);
    }
    expect(result.usage!.shots).toBe(400);
  }, 60_000);

  it("surfaces gateway rejection reasons verbatim", async () => {
    const c = client();
    await c.signalStatus("qal9000-sim", "maintenance");
    try {
      const err = await c
        .submit("qal9000-sim", batch([bellCircuit()], 10), "proj-demo")
        .catch((e) => e);
      expect(err).toBeInstanceOf(JobRejectedError);
      expect(err.reason).toBe("device_unavailable");
      // the rejected job is still queryable by id
      const status = await c.jobStatus(err.jobId);
      expect(status.state).toBe("rejected");
      expect(status.reason).toBe("device_unavailable");
    } finally {
      await c.signalStatus("qal9000-sim", "available");
    }
  }, 30_000);

  it("rejects invalid circuits at the wire level", async () => {
    const c = client();
    const tooWide = new CircuitBuilder(6, "wide").x(5).measureAll().build();
    const err = await c
      .submit("helmi-sim", batch([tooWide], 10), "proj-demo")
      .catch((e) => e);
    expect(err).toBeInstanceOf(JobRejectedError);
    expect(err.reason).toBe("invalid_circuit");
  }, 30_000);
});
