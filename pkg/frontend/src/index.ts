export {
  CircuitBuilder,
  CircuitError,
  batch,
  bellCircuit,
  type BatchDoc,
  type CircuitDoc,
  type GateOpDoc,
} from "./circuit.js";
export {
  BACKOFF_BASE_MS,
  BACKOFF_CAP_MS,
  ClientSession,
  GatewayClient,
  GatewayError,
  JobRejectedError,
  PollTimeoutError,
  backoffDelayMs,
  type DeviceInfoDoc,
  type JobDoc,
  type ResultDoc,
  type SessionOptions,
} from "./client.js";
