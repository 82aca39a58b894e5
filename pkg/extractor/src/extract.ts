/**
 * Embedding extraction under context-window truncation.
 *
 * For each word's last token at position p, every layer's hidden state is
 * computed with attention over tokens (p - N + 1)..p; FULL uses all preceding
 * tokens of the passage. Truncation re-runs the model on the sliding token
 * window (input truncation, positions restarting at 0 per window), which has
 * identical causal semantics to masking and no position-id ambiguity.
 * Context never crosses passage boundaries. Word ids are global across
 * passages in stimulus order.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { CausalTransformer, ModelConfig, configHash, resolveConfig } from "./model.js";
import { ContextWindow, TensorFile, writeTensor } from "./nmt1.js";
import { Tokenized, tokenizeWithWordMap } from "./tokenizer.js";

export interface ExtractionJob {
  modelName: string;
  passages: string[];
  contextWindow: ContextWindow;
  device?: string;
  outputPath: string;
}

export interface ExtractionResult {
  tensor: TensorFile;
  manifest: Record<string, unknown>;
}

export function contextTag(window: ContextWindow): string {
  return window === "full" ? "full" : String(window);
}

export function readPassagesFile(path: string): string[] {
  const passages = readFileSync(path, "utf-8")
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
  if (passages.length === 0) throw new Error(`${path}: no passages`);
  return passages;
}

function validateWindow(window: ContextWindow): void {
  if (window === "full") return;
  if (!Number.isInteger(window) || window < 1) {
    throw new Error(`context window must be a positive integer or "full", got ${window}`);
  }
}

/** Per-layer embeddings for every word of one passage: [layer][word * dModel]. */
export function extractPassage(
  model: CausalTransformer,
  tokens: Tokenized,
  window: ContextWindow
): Float64Array[] {
  const d = model.config.dModel;
  const nLayers = model.config.nLayers;
  const nWords = tokens.lastTokenIndex.length;
  const out: Float64Array[] = [];
  for (let l = 0; l < nLayers; l++) out.push(new Float64Array(nWords * d));

  if (window === "full") {
    const hidden = model.forward(tokens.tokenIds);
    for (let w = 0; w < nWords; w++) {
      const p = tokens.lastTokenIndex[w];
      for (let l = 0; l < nLayers; l++) {
        out[l].set(hidden[l].subarray(p * d, (p + 1) * d), w * d);
      }
    }
    return out;
  }

  for (let w = 0; w < nWords; w++) {
    const p = tokens.lastTokenIndex[w];
    const start = Math.max(0, p - (window as number) + 1);
    const hidden = model.forward(tokens.tokenIds.subarray(start, p + 1));
    const last = p - start;
    for (let l = 0; l < nLayers; l++) {
      out[l].set(hidden[l].subarray(last * d, (last + 1) * d), w * d);
    }
  }
  return out;
}

export function runExtraction(job: ExtractionJob): ExtractionResult {
  validateWindow(job.contextWindow);
  if (job.passages.length === 0) throw new Error("no passages given");
  const config: ModelConfig = resolveConfig(job.modelName);
  const model = new CausalTransformer(config);

  const perPassage: Float64Array[][] = [];
  let totalWords = 0;
  let totalTokens = 0;
  for (const passage of job.passages) {
    const tokens = tokenizeWithWordMap(passage, config.vocabSize);
    perPassage.push(extractPassage(model, tokens, job.contextWindow));
    totalWords += tokens.lastTokenIndex.length;
    totalTokens += tokens.tokenIds.length;
  }

  const d = config.dModel;
  const data = new Float32Array(config.nLayers * totalWords * d);
  for (let l = 0; l < config.nLayers; l++) {
    let wordBase = 0;
    for (const layers of perPassage) {
      const block = layers[l];
      const nWords = block.length / d;
      for (let i = 0; i < block.length; i++) {
        data[(l * totalWords + wordBase) * d + i] = block[i];
      }
      wordBase += nWords;
    }
  }

  const tensor: TensorFile = {
    modelId: config.name,
    contextWindow: job.contextWindow,
    shape: [config.nLayers, totalWords, d],
    wordIds: Array.from({ length: totalWords }, (_, i) => i),
    data,
  };
  const manifest = {
    model: config.name,
    revision_hash: configHash(config),
    device: job.device ?? "cpu",
    context: contextTag(job.contextWindow),
    n_passages: job.passages.length,
    n_words: totalWords,
    n_layers: config.nLayers,
    n_dims: d,
    tokens_per_word: totalTokens / totalWords,
  };
  return { tensor, manifest };
}

export function outputFileNames(outDir: string, modelName: string, window: ContextWindow) {
  const safe = modelName.replace(/[^A-Za-z0-9_.-]/g, "_");
  return {
    tensor: join(outDir, `${safe}__ctx${contextTag(window)}.nmt1`),
    manifest: join(outDir, `${safe}__ctx${contextTag(window)}.manifest.json`),
  };
}
