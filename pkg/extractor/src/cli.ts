/**
 * CLI: extract per-layer word embeddings, verify emitted tensors.
 *
 *   extract --model <id> --passages <file> --context <N|full> --out <dir>
 *   verify  --path <file> [--model <id>] [--passages <file>] [--expect-words N]
 *
 * Exit codes: 0 success, 2 usage error, 1 failed extraction/verification.
 */

import { writeFileSync } from "node:fs";

import { outputFileNames, readPassagesFile, runExtraction } from "./extract.js";
import { ContextWindow, writeTensor } from "./nmt1.js";
import { verifyTensor } from "./verify.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new UsageError(`bad argument ${key}`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

class UsageError extends Error {}

function need(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) throw new UsageError(`missing --${name}`);
  return value;
}

function parseContext(text: string): ContextWindow {
  if (text.toLowerCase() === "full") return "full";
  const n = Number(text);
  if (!Number.isInteger(n) || n < 1) throw new UsageError(`bad --context ${text} (positive integer or "full")`);
  return n;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "extract") {
      const flags = parseFlags(rest);
      const window = parseContext(need(flags, "context"));
      const outDir = need(flags, "out");
      const modelName = need(flags, "model");
      const result = runExtraction({
        modelName,
        passages: readPassagesFile(need(flags, "passages")),
        contextWindow: window,
        device: flags.get("device"),
        outputPath: outDir,
      });
      const files = outputFileNames(outDir, modelName, window);
      writeTensor(files.tensor, result.tensor);
      writeFileSync(files.manifest, JSON.stringify(result.manifest, null, 2) + "\n");
      console.log(
        `extracted ${result.manifest.n_words} words x ${result.manifest.n_layers} layers -> ${files.tensor}`
      );
      return 0;
    }
    if (command === "verify") {
      const flags = parseFlags(rest);
      const report = verifyTensor(need(flags, "path"), {
        modelName: flags.get("model"),
        passagesPath: flags.get("passages"),
        expectWords: flags.has("expect-words") ? Number(flags.get("expect-words")) : undefined,
      });
      if (report.ok) {
        console.log(`${report.path}: ok (shape ${report.shape?.join("x")})`);
        return 0;
      }
      console.error(`${report.path}: FAILED`);
      for (const problem of report.problems) console.error(`  - ${problem}`);
      return 1;
    }
    throw new UsageError(`unknown command ${command ?? "(none)"}; use extract or verify`);
  } catch (exc) {
    if (exc instanceof UsageError) {
      console.error(`usage error: ${exc.message}`);
      return 2;
    }
    console.error(`error: ${exc instanceof Error ? exc.message : exc}`);
    return 1;
  }
}

import { fileURLToPath } from "node:url";

if (process.argv[1] && fileURLToPath(import.meta.url) === process.argv[1]) {
  process.exit(main(process.argv.slice(2)));
}
