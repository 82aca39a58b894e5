/**
 * Tensor verification: format, finiteness, and config/word-count consistency.
 */

import { readFileSync } from "node:fs";

import { resolveConfig } from "./model.js";
import { readTensor } from "./nmt1.js";
import { splitWords } from "./tokenizer.js";

export interface VerifyReport {
  path: string;
  ok: boolean;
  problems: string[];
  shape?: [number, number, number];
}

export interface VerifyOptions {
  /** model whose layer count the tensor must match */
  modelName?: string;
  /** passages file whose total word count the tensor must match */
  passagesPath?: string;
  /** explicit expected word count (overrides passagesPath) */
  expectWords?: number;
}

export function verifyTensor(path: string, options: VerifyOptions = {}): VerifyReport {
  const problems: string[] = [];
  let shape: [number, number, number] | undefined;
  try {
    const parsed = readTensor(path);
    shape = parsed.shape;
    const wordIds = parsed.header.word_ids as number[];
    if (!Array.isArray(wordIds) || wordIds.length !== shape[1]) {
      problems.push(`word_ids length ${Array.isArray(wordIds) ? wordIds.length : "?"} != n_words ${shape[1]}`);
    } else {
      for (let i = 1; i < wordIds.length; i++) {
        if (wordIds[i] <= wordIds[i - 1]) {
          problems.push(`word_ids not strictly increasing at index ${i}`);
          break;
        }
      }
    }
    for (let i = 0; i < parsed.data.length; i++) {
      if (!Number.isFinite(parsed.data[i])) {
        problems.push(`non-finite value at flat index ${i}`);
        break;
      }
    }
    if (options.modelName) {
      const config = resolveConfig(options.modelName);
      if (shape[0] !== config.nLayers) {
        let hint = "";
        if (shape[0] === config.nLayers + 1) {
          hint = " (off by one: the input embedding layer must be excluded; layer 1 is block 1's output)";
        }
        problems.push(`layer count ${shape[0]} != model ${options.modelName} layer count ${config.nLayers}${hint}`);
      }
      if (shape[2] !== config.dModel) {
        problems.push(`dim count ${shape[2]} != model dimension ${config.dModel}`);
      }
    }
    let expectWords = options.expectWords;
    if (expectWords === undefined && options.passagesPath) {
      expectWords = readFileSync(options.passagesPath, "utf-8")
        .split("\n")
        .map((line) => line.trim())
        .filter((line) => line.length > 0)
        .reduce((acc, passage) => acc + splitWords(passage).length, 0);
    }
    if (expectWords !== undefined && shape[1] !== expectWords) {
      problems.push(`word count ${shape[1]} != expected ${expectWords}`);
    }
  } catch (exc) {
    problems.push(exc instanceof Error ? exc.message : String(exc));
  }
  return { path, ok: problems.length === 0, problems, shape };
}
