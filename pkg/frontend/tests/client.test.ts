import { describe, expect, it } from "vitest";

import {
  BACKOFF_CAP_MS,
  ClientSession,
  GatewayClient,
  GatewayError,
  JobRejectedError,
  PollTimeoutError,
  backoffDelayMs,
} from "../src/client.js";
import { batch, bellCircuit } from "../src/circuit.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function session(maxAttempts = 4): ClientSession {
  return new ClientSession({
    baseUrl: "http://gateway.test",
    token: "demo-token",
    maxAttempts,
  });
}

describe("backoff schedule", () => {
  it("doubles from the 0.5s base and caps at 8s", () => {
    expect([0, 1, 2, 3, 4, 5].map((a) => backoffDelayMs(a))).toEqual([
      500, 1000, 2000, 4000, 8000, 8000,
    ]);
    expect(backoffDelayMs(50)).toBe(BACKOFF_CAP_MS);
  });
});

describe("ClientSession", () => {
  it("requires a positive timeout", () => {
    expect(() => new ClientSession({ baseUrl: "x", token: "t", timeoutMs: 0 })).toThrow();
  });
});

describe("GatewayClient request handling", () => {
  it("sends the bearer token and batch schema on submit", async () => {
    let captured: { url: string; init?: RequestInit } | undefined;
    const client = new GatewayClient(session(), async (url, init) => {
      captured = { url, init };
      return jsonResponse(201, { job_id: "qc-1", state: "queued", queue_position: 1 });
    });
    const job = await client.submit("helmi-sim", batch([bellCircuit()], 100), "proj-demo");
    expect(job.job_id).toBe("qc-1");
    expect(captured!.url).toBe("http://gateway.test/devices/helmi-sim/jobs");
    const headers = captured!.init!.headers as Record<string, string>;
    expect(headers.Authorization).toBe("Bearer demo-token");
    const body = JSON.parse(String(captured!.init!.body));
    expect(body.shots).toBe(100);
    expect(body.project_id).toBe("proj-demo");
    expect(body.circuits[0].n_qubits).toBe(2);
  });

  it("retries server errors before succeeding", async () => {
    let calls = 0;
    const client = new GatewayClient(
      new ClientSession({ baseUrl: "http://g", token: "t", maxAttempts: 3 }),
      async () => {
        calls += 1;
        if (calls < 3) return jsonResponse(500, { detail: "boom" });
        return jsonResponse(200, { devices: ["helmi-sim"] });
      },
    );
    expect(await client.listDevices()).toEqual(["helmi-sim"]);
    expect(calls).toBe(3);
  }, 20_000);

  it("gives up after maxAttempts network failures", async () => {
    let calls = 0;
    const client = new GatewayClient(
      new ClientSession({ baseUrl: "http://g", token: "t", maxAttempts: 2 }),
      async () => {
        calls += 1;
        throw new TypeError("fetch failed");
      },
    );
    await expect(client.listDevices()).rejects.toThrow("fetch failed");
    expect(calls).toBe(2);
  }, 20_000);

  it("surfaces rejection reasons verbatim without retrying", async () => {
    let calls = 0;
    const client = new GatewayClient(session(), async () => {
      calls += 1;
      return jsonResponse(409, {
        detail: { reason: "outside_window", job_id: "qc-9", message: "window closed" },
      });
    });
    const err = await client
      .submit("helmi-sim", batch([bellCircuit()], 10), "proj-demo")
      .catch((e) => e);
    expect(err).toBeInstanceOf(JobRejectedError);
    expect(err.reason).toBe("outside_window");
    expect(err.jobId).toBe("qc-9");
    expect(calls).toBe(1);
  });

  it("maps other HTTP errors to GatewayError with status", async () => {
    const client = new GatewayClient(session(), async () =>
      jsonResponse(404, { detail: "unknown job qc-0" }),
    );
    const err = await client.jobStatus("qc-0").catch((e) => e);
    expect(err).toBeInstanceOf(GatewayError);
    expect(err.status).toBe(404);
  });
});

describe("submitAndWait polling", () => {
  function pollingFetch(statesBeforeDone: number) {
    let statusCalls = 0;
    return async (url: string): Promise<Response> => {
      if (url.endsWith("/jobs")) {
        return jsonResponse(201, { job_id: "qc-7", state: "queued", queue_position: 1 });
      }
      if (url.endsWith("/results")) {
        return jsonResponse(200, {
          job_id: "qc-7",
          state: "done",
          counts: [{ "00": 6, "11": 4 }],
          usage: { shots: 10, qpu_seconds: 1e-5, started_at: 0, finished_at: 1e-5 },
        });
      }
      statusCalls += 1;
      const state = statusCalls > statesBeforeDone ? "done" : "queued";
      return jsonResponse(200, { job_id: "qc-7", state, queue_position: 0 });
    };
  }

  it("polls until done and returns counts plus usage", async () => {
    const client = new GatewayClient(session(), pollingFetch(2));
    const result = await client.submitAndWait(
      "helmi-sim",
      batch([bellCircuit()], 10),
      "proj-demo",
      5_000,
      1, // fast poll base for the test
    );
    expect(result.state).toBe("done");
    const total = Object.values(result.counts![0]).reduce((a, b) => a + b, 0);
    expect(total).toBe(10);
    expect(result.usage!.shots).toBe(10);
  });

  it("times out but leaves the job queryable", async () => {
    const fetchImpl = async (url: string): Promise<Response> => {
      if (url.endsWith("/jobs")) {
        return jsonResponse(201, { job_id: "qc-8", state: "queued", queue_position: 1 });
      }
      return jsonResponse(200, { job_id: "qc-8", state: "executing", queue_position: 0 });
    };
    const client = new GatewayClient(session(), fetchImpl);
    const err = await client
      .submitAndWait("helmi-sim", batch([bellCircuit()], 10), "proj-demo", 20, 1)
      .catch((e) => e);
    expect(err).toBeInstanceOf(PollTimeoutError);
    expect(err.jobId).toBe("qc-8");
    const status = await client.jobStatus("qc-8");
    expect(status.state).toBe("executing");
  });

  it("reports failed jobs as errors", async () => {
    const fetchImpl = async (url: string): Promise<Response> => {
      if (url.endsWith("/jobs")) {
        return jsonResponse(201, { job_id: "qc-9", state: "queued", queue_position: 1 });
      }
      if (url.endsWith("/results")) {
        return jsonResponse(200, {
          job_id: "qc-9",
          state: "failed",
          failure_reason: "device exploded",
        });
      }
      return jsonResponse(200, { job_id: "qc-9", state: "failed", queue_position: 0 });
    };
    const client = new GatewayClient(session(), fetchImpl);
    await expect(
      client.submitAndWait("helmi-sim", batch([bellCircuit()], 10), "proj-demo", 5_000, 1),
    ).rejects.toThrow(/device exploded/);
  });
});
