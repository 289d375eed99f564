/**
 * Gateway HTTP client: bearer-token sessions, retrying requests, and
 * submit-then-poll with exponential backoff (base 0.5 s, cap 8 s).
 *
 * Rejection reasons from the gateway are surfaced verbatim on
 * JobRejectedError.reason.
 */

import type { BatchDoc } from "./circuit.js";

export interface SessionOptions {
  baseUrl: string;
  token: string;
  timeoutMs?: number;
  maxAttempts?: number;
}

export class ClientSession {
  readonly baseUrl: string;
  readonly token: string;
  readonly timeoutMs: number;
  readonly maxAttempts: number;

  constructor(opts: SessionOptions) {
    const timeoutMs = opts.timeoutMs ?? 30_000;
    if (timeoutMs <= 0) throw new Error(`timeoutMs must be positive, got ${timeoutMs}`);
    this.baseUrl = opts.baseUrl.replace(/\/+$/, "");
    this.token = opts.token;
    this.timeoutMs = timeoutMs;
    this.maxAttempts = opts.maxAttempts ?? 4;
  }
}

export class GatewayError extends Error {
  status?: number;
  constructor(message: string, status?: number) {
    super(message);
    this.status = status;
  }
}

export class JobRejectedError extends GatewayError {
  reason: string;
  jobId?: string;
  constructor(reason: string, jobId?: string, message?: string) {
    super(message ?? `job rejected: ${reason}`, 409);
    this.reason = reason;
    this.jobId = jobId;
  }
}

export class PollTimeoutError extends GatewayError {
  jobId: string;
  constructor(jobId: string, waitedMs: number) {
    super(`job ${jobId} still running after ${waitedMs}ms; it remains queryable`);
    this.jobId = jobId;
  }
}

export const BACKOFF_BASE_MS = 500;
export const BACKOFF_CAP_MS = 8_000;

export function backoffDelayMs(
  attempt: number,
  base = BACKOFF_BASE_MS,
  cap = BACKOFF_CAP_MS,
): number {
  return Math.min(cap, base * 2 ** attempt);
}

function isRetryableStatus(status: number): boolean {
  return status >= 500 || status === 429;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export interface JobDoc {
  job_id: string;
  state: string;
  queue_position: number;
  reason?: string;
  failure_reason?: string;
}

export interface ResultDoc {
  job_id: string;
  state: string;
  counts?: Record<string, number>[];
  usage?: { shots: number; qpu_seconds: number; started_at: number; finished_at: number };
  failure_reason?: string;
  reason?: string;
}

export interface DeviceInfoDoc {
  device_id: string;
  n_qubits: number;
  edges: number[][];
  native_gates: string[];
  status: string;
  queue_length: number;
  calibration: Record<string, number>;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  private session: ClientSession;
  private fetchImpl: FetchLike;

  constructor(session: ClientSession, fetchImpl: FetchLike = fetch) {
    this.session = session;
    this.fetchImpl = fetchImpl;
  }

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const url = `${this.session.baseUrl}${path}`;
    let lastError: unknown;
    for (let attempt = 0; attempt < this.session.maxAttempts; attempt++) {
      if (attempt > 0) await sleep(backoffDelayMs(attempt - 1));
      let resp: Response;
      try {
        resp = await this.fetchImpl(url, {
          method,
          headers: {
            "Content-Type": "application/json",
            Authorization: `Bearer ${this.session.token}`,
          },
          body: body === undefined ? undefined : JSON.stringify(body),
          signal: AbortSignal.timeout(this.session.timeoutMs),
        });
      } catch (err) {
        lastError = err; // network failure: retry
        continue;
      }
      if (isRetryableStatus(resp.status)) {
        lastError = new GatewayError(`HTTP ${resp.status} from ${path}`, resp.status);
        continue;
      }
      const payload = (await resp.json().catch(() => ({}))) as Record<string, unknown>;
      if (resp.status === 409) {
        const detail = (payload.detail ?? {}) as Record<string, string>;
        throw new JobRejectedError(
          detail.reason ?? "rejected",
          detail.job_id,
          detail.message || undefined,
        );
      }
      if (!resp.ok) {
        const detail = payload.detail;
        throw new GatewayError(
          `HTTP ${resp.status} from ${path}: ${typeof detail === "string" ? detail : JSON.stringify(detail)}`,
          resp.status,
        );
      }
      return payload;
    }
    throw lastError instanceof Error
      ? lastError
      : new GatewayError(`request to ${path} failed after ${this.session.maxAttempts} attempts`);
  }

  async listDevices(): Promise<string[]> {
    const doc = (await this.request("GET", "/devices")) as { devices: string[] };
    return doc.devices;
  }

  async deviceInfo(deviceId: string): Promise<DeviceInfoDoc> {
    return (await this.request("GET", `/devices/${deviceId}`)) as DeviceInfoDoc;
  }

  async calibration(deviceId: string): Promise<Record<string, number>> {
    return (await this.request("GET", `/devices/${deviceId}/calibration`)) as Record<
      string,
      number
    >;
  }

  async signalStatus(deviceId: string, status: string): Promise<void> {
    await this.request("POST", `/devices/${deviceId}/status`, { status });
  }

  async submit(deviceId: string, batchDoc: BatchDoc, projectId: string): Promise<JobDoc> {
    return (await this.request("POST", `/devices/${deviceId}/jobs`, {
      circuits: batchDoc.circuits,
      shots: batchDoc.shots,
      project_id: projectId,
    })) as JobDoc;
  }

  async jobStatus(jobId: string): Promise<JobDoc> {
    return (await this.request("GET", `/jobs/${jobId}`)) as JobDoc;
  }

  async results(jobId: string): Promise<ResultDoc> {
    return (await this.request("GET", `/jobs/${jobId}/results`)) as ResultDoc;
  }

  /**
   * Submit a batch and poll until it reaches a terminal state.
   * Polling delays follow the exponential backoff schedule; a job that is
   * still running after maxWaitMs raises PollTimeoutError but stays
   * queryable by id.
   */
  async submitAndWait(
    deviceId: string,
    batchDoc: BatchDoc,
    projectId: string,
    maxWaitMs = 120_000,
    pollBaseMs = BACKOFF_BASE_MS,
  ): Promise<ResultDoc> {
    const job = await this.submit(deviceId, batchDoc, projectId);
    const started = Date.now();
    for (let attempt = 0; ; attempt++) {
      const status = await this.jobStatus(job.job_id);
      if (status.state === "done" || status.state === "failed") break;
      if (Date.now() - started > maxWaitMs) {
        throw new PollTimeoutError(job.job_id, Date.now() - started);
      }
      await sleep(backoffDelayMs(attempt, pollBaseMs));
    }
    const result = await this.results(job.job_id);
    if (result.state === "failed") {
      throw new GatewayError(`job ${job.job_id} failed: ${result.failure_reason}`);
    }
    return result;
  }
}
