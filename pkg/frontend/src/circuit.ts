/**
 * Fluent circuit builder emitting the gateway's wire-format documents.
 *
 * Field names are normative and case-sensitive: a circuit document is
 * {name, n_qubits, ops} with ops entries {gate, qubits, params}; a batch is
 * {circuits, shots}. Measurement is terminal per qubit.
 */

export interface GateOpDoc {
  gate: string;
  qubits: number[];
  params: number[];
}

export interface CircuitDoc {
  name: string;
  n_qubits: number;
  ops: GateOpDoc[];
}

export interface BatchDoc {
  circuits: CircuitDoc[];
  shots: number;
}

// gate name -> [qubit arity, param arity]; barrier takes any qubit count (-1)
const GATE_ARITY: Record<string, [number, number]> = {
  h: [1, 0],
  x: [1, 0],
  y: [1, 0],
  z: [1, 0],
  rx: [1, 1],
  ry: [1, 1],
  rz: [1, 1],
  cz: [2, 0],
  cx: [2, 0],
  swap: [2, 0],
  barrier: [-1, 0],
  measure: [1, 0],
};

export class CircuitError extends Error {}

export class CircuitBuilder {
  readonly nQubits: number;
  readonly name: string;
  private ops: GateOpDoc[] = [];
  private measured = new Set<number>();

  constructor(nQubits: number, name = "circuit") {
    if (!Number.isInteger(nQubits) || nQubits < 1) {
      throw new CircuitError(`n_qubits must be a positive integer, got ${nQubits}`);
    }
    this.nQubits = nQubits;
    this.name = name;
  }

  addGate(gate: string, qubits: number[], params: number[] = []): this {
    const arity = GATE_ARITY[gate];
    if (!arity) throw new CircuitError(`unknown gate '${gate}'`);
    const [nq, np] = arity;
    if (nq >= 0 && qubits.length !== nq) {
      throw new CircuitError(`${gate} expects ${nq} qubit(s), got ${qubits.length}`);
    }
    if (qubits.length === 0) throw new CircuitError(`${gate} names no qubits`);
    if (params.length !== np) {
      throw new CircuitError(`${gate} expects ${np} param(s), got ${params.length}`);
    }
    const seen = new Set<number>();
    for (const q of qubits) {
      if (!Number.isInteger(q) || q < 0 || q >= this.nQubits) {
        throw new CircuitError(`qubit index ${q} out of range [0, ${this.nQubits})`);
      }
      if (seen.has(q)) throw new CircuitError(`duplicate qubit ${q} in ${gate}`);
      seen.add(q);
      if (this.measured.has(q)) {
        throw new CircuitError(`qubit ${q} already measured; measurement is terminal`);
      }
    }
    if (gate === "measure") this.measured.add(qubits[0]);
    this.ops.push({ gate, qubits: [...qubits], params: [...params] });
    return this;
  }

  h(q: number): this {
    return this.addGate("h", [q]);
  }
  x(q: number): this {
    return this.addGate("x", [q]);
  }
  y(q: number): this {
    return this.addGate("y", [q]);
  }
  z(q: number): this {
    return this.addGate("z", [q]);
  }
  rx(q: number, theta: number): this {
    return this.addGate("rx", [q], [theta]);
  }
  ry(q: number, theta: number): this {
    return this.addGate("ry", [q], [theta]);
  }
  rz(q: number, theta: number): this {
    return this.addGate("rz", [q], [theta]);
  }
  cz(a: number, b: number): this {
    return this.addGate("cz", [a, b]);
  }
  cx(control: number, target: number): this {
    return this.addGate("cx", [control, target]);
  }
  swap(a: number, b: number): this {
    return this.addGate("swap", [a, b]);
  }
  barrier(...qubits: number[]): this {
    return this.addGate("barrier", qubits.length ? qubits : [...Array(this.nQubits).keys()]);
  }
  measure(q: number): this {
    return this.addGate("measure", [q]);
  }
  measureAll(): this {
    for (let q = 0; q < this.nQubits; q++) {
      if (!this.measured.has(q)) this.measure(q);
    }
    return this;
  }

  build(): CircuitDoc {
    return {
      name: this.name,
      n_qubits: this.nQubits,
      ops: this.ops.map((op) => ({
        gate: op.gate,
        qubits: [...op.qubits],
        params: [...op.params],
      })),
    };
  }
}

export function batch(circuits: CircuitDoc[], shots: number): BatchDoc {
  if (circuits.length === 0) throw new CircuitError("batch needs at least one circuit");
  if (!Number.isInteger(shots) || shots < 1) {
    throw new CircuitError(`shots must be >= 1, got ${shots}`);
  }
  return { circuits, shots };
}

export function bellCircuit(): CircuitDoc {
  return new CircuitBuilder(2, "bell").h(0).cx(0, 1).measureAll().build();
}
