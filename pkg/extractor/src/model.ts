/**
 * Minimal causal transformer with deterministic seeded weights.
 *
 * Pre-norm blocks, multi-head masked attention, GELU feed-forward, sinusoidal
 * positions. Position i's hidden state is a function of tokens 0..i only and
 * every operation runs in a fixed order, so outputs for a prefix are
 * bit-identical no matter what follows it: the causality contract the
 * extractor's tests pin down.
 *
 * Hub-style names resolve to built-in configurations; a path to a JSON file
 * with {nLayers, dModel, nHeads, dFf, vocabSize, seed} loads a custom one.
 * Layer indexing everywhere EXCLUDES the input embedding: layer 1 is the
 * output of block 1.
 */

import { createHash } from "node:crypto";
import { existsSync, readFileSync } from "node:fs";

import { SeededRandom, fnv1a } from "./prng.js";

export interface ModelConfig {
  name: string;
  nLayers: number;
  dModel: number;
  nHeads: number;
  dFf: number;
  vocabSize: number;
  seed: number;
}

const BUILTIN: Record<string, Omit<ModelConfig, "name" | "seed">> = {
  "tiny-causal": { nLayers: 4, dModel: 32, nHeads: 2, dFf: 64, vocabSize: 4096 },
  "small-causal": { nLayers: 8, dModel: 64, nHeads: 4, dFf: 128, vocabSize: 8192 },
};

export function resolveConfig(modelName: string): ModelConfig {
  if (modelName.endsWith(".json") && existsSync(modelName)) {
    const raw = JSON.parse(readFileSync(modelName, "utf-8"));
    for (const key of ["nLayers", "dModel", "nHeads", "dFf", "vocabSize"]) {
      if (typeof raw[key] !== "number" || raw[key] < 1) {
        throw new Error(`model config ${modelName}: bad field ${key}`);
      }
    }
    return { name: modelName, seed: raw.seed ?? 0, ...raw };
  }
  const base = BUILTIN[modelName];
  if (!base) {
    throw new Error(
      `model ${modelName} not loadable (built-ins: ${Object.keys(BUILTIN).join(", ")}, or a .json config path)`
    );
  }
  return { name: modelName, seed: fnv1a(modelName), ...base };
}

export function configHash(config: ModelConfig): string {
  const h = createHash("sha256");
  h.update(JSON.stringify([config.nLayers, config.dModel, config.nHeads, config.dFf, config.vocabSize, config.seed]));
  return h.digest("hex").slice(0, 16);
}

interface BlockWeights {
  wq: Float64Array;
  wk: Float64Array;
  wv: Float64Array;
  wo: Float64Array;
  ln1g: Float64Array;
  ln1b: Float64Array;
  ln2g: Float64Array;
  ln2b: Float64Array;
  w1: Float64Array; // dModel x dFf
  b1: Float64Array;
  w2: Float64Array; // dFf x dModel
  b2: Float64Array;
}

function initMatrix(rng: SeededRandom, rows: number, cols: number): Float64Array {
  const scale = Math.sqrt(2.0 / (rows + cols));
  const out = new Float64Array(rows * cols);
  for (let i = 0; i < out.length; i++) out[i] = scale * rng.gaussian();
  return out;
}

export class CausalTransformer {
  readonly config: ModelConfig;
  private embedding: Float64Array; // vocab x dModel
  private blocks: BlockWeights[];

  constructor(config: ModelConfig) {
    this.config = config;
    const rng = new SeededRandom(config.seed);
    const d = config.dModel;
    this.embedding = initMatrix(rng, config.vocabSize, d);
    this.blocks = [];
    for (let l = 0; l < config.nLayers; l++) {
      this.blocks.push({
        wq: initMatrix(rng, d, d),
        wk: initMatrix(rng, d, d),
        wv: initMatrix(rng, d, d),
        wo: initMatrix(rng, d, d),
        ln1g: new Float64Array(d).fill(1),
        ln1b: new Float64Array(d),
        ln2g: new Float64Array(d).fill(1),
        ln2b: new Float64Array(d),
        w1: initMatrix(rng, d, config.dFf),
        b1: new Float64Array(config.dFf),
        w2: initMatrix(rng, config.dFf, d),
        b2: new Float64Array(d),
      });
    }
  }

  /**
   * Hidden states after every block: nLayers arrays of (seqLen * dModel).
   * Positions are 0-based within the given token sequence.
   */
  forward(tokenIds: Int32Array): Float64Array[] {
    const { dModel: d, nHeads, dFf } = this.config;
    const n = tokenIds.length;
    if (n === 0) throw new Error("empty token sequence");
    const dHead = d / nHeads;
    if (!Number.isInteger(dHead)) throw new Error("dModel must be divisible by nHeads");

    let x = new Float64Array(n * d);
    for (let i = 0; i < n; i++) {
      const row = tokenIds[i] * d;
      for (let j = 0; j < d; j++) x[i * d + j] = this.embedding[row + j];
      // sinusoidal positions, restarted per sequence
      for (let j = 0; j < d; j += 2) {
        const angle = i / Math.pow(10000, j / d);
        x[i * d + j] += Math.sin(angle);
        if (j + 1 < d) x[i * d + j + 1] += Math.cos(angle);
      }
    }

    const perLayer: Float64Array[] = [];
    for (const w of this.blocks) {
      const normed = layerNorm(x, n, d, w.ln1g, w.ln1b);
      const q = matmul(normed, w.wq, n, d, d);
      const k = matmul(normed, w.wk, n, d, d);
      const v = matmul(normed, w.wv, n, d, d);
      const attnOut = new Float64Array(n * d);
      const scale = 1.0 / Math.sqrt(dHead);
      for (let h = 0; h < nHeads; h++) {
        const off = h * dHead;
        for (let i = 0; i < n; i++) {
          // causal mask: attend to j <= i only
          let maxScore = -Infinity;
          const scores = new Float64Array(i + 1);
          for (let j = 0; j <= i; j++) {
            let s = 0;
            for (let c = 0; c < dHead; c++) s += q[i * d + off + c] * k[j * d + off + c];
            scores[j] = s * scale;
            if (scores[j] > maxScore) maxScore = scores[j];
          }
          let denom = 0;
          for (let j = 0; j <= i; j++) {
            scores[j] = Math.exp(scores[j] - maxScore);
            denom += scores[j];
          }
          for (let c = 0; c < dHead; c++) {
            let acc = 0;
            for (let j = 0; j <= i; j++) acc += (scores[j] / denom) * v[j * d + off + c];
            attnOut[i * d + off + c] = acc;
          }
        }
      }
      const projected = matmul(attnOut, w.wo, n, d, d);
      for (let i = 0; i < n * d; i++) x[i] += projected[i];

      const normed2 = layerNorm(x, n, d, w.ln2g, w.ln2b);
      const hidden = matmul(normed2, w.w1, n, d, dFf);
      for (let i = 0; i < n; i++) {
        for (let j = 0; j < dFf; j++) hidden[i * dFf + j] = gelu(hidden[i * dFf + j] + w.b1[j]);
      }
      const ff = matmul(hidden, w.w2, n, dFf, d);
      for (let i = 0; i < n; i++) {
        for (let j = 0; j < d; j++) x[i * d + j] += ff[i * d + j] + w.b2[j];
      }
      perLayer.push(x.slice());
    }
    return perLayer;
  }
}

function layerNorm(x: Float64Array, n: number, d: number, gamma: Float64Array, beta: Float64Array): Float64Array {
  const out = new Float64Array(n * d);
  for (let i = 0; i < n; i++) {
    let mean = 0;
    for (let j = 0; j < d; j++) mean += x[i * d + j];
    mean /= d;
    let variance = 0;
    for (let j = 0; j < d; j++) {
      const delta = x[i * d + j] - mean;
      variance += delta * delta;
    }
    variance /= d;
    const inv = 1.0 / Math.sqrt(variance + 1e-5);
    for (let j = 0; j < d; j++) out[i * d + j] = gamma[j] * (x[i * d + j] - mean) * inv + beta[j];
  }
  return out;
}

function matmul(a: Float64Array, b: Float64Array, n: number, inner: number, out: number): Float64Array {
  const result = new Float64Array(n * out);
  for (let i = 0; i < n; i++) {
    for (let k = 0; k < inner; k++) {
      const aik = a[i * inner + k];
      if (aik === 0) continue;
      for (let j = 0; j < out; j++) result[i * out + j] += aik * b[k * out + j];
    }
  }
  return result;
}

function gelu(v: number): number {
  return 0.5 * v * (1.0 + Math.tanh(Math.sqrt(2.0 / Math.PI) * (v + 0.044715 * v * v * v)));
}
