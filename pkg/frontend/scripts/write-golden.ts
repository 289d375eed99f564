// Regenerate the committed golden documents (run via `npm run golden`).
import { mkdirSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { bellCircuit } from "../src/circuit.js";

const goldenDir = join(dirname(fileURLToPath(import.meta.url)), "..", "golden");
mkdirSync(goldenDir, { recursive: true });
writeFileSync(join(goldenDir, "bell.json"), JSON.stringify(bellCircuit(), null, 1) + "\n");
console.log("wrote", join(goldenDir, "bell.json"));
