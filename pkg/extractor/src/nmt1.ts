/**
 * NMT1 tensor files: one JSON header line, then raw little-endian float32 in
 * (layer, word, dim) row-major order. Byte layout must stay interchangeable
 * with the analysis engine's reader.
 */

import { mkdirSync, readFileSync, renameSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

export const MAGIC = "NMT1";
export const DTYPE = "f32le";

export type ContextWindow = number | "full";

export interface TensorFile {
  modelId: string;
  contextWindow: ContextWindow;
  shape: [number, number, number];
  wordIds: number[];
  data: Float32Array;
}

export function writeTensor(path: string, tensor: TensorFile): void {
  const [layers, words, dims] = tensor.shape;
  if (tensor.data.length !== layers * words * dims) {
    throw new Error(`data length ${tensor.data.length} does not match shape ${tensor.shape}`);
  }
  if (tensor.wordIds.length !== words) {
    throw new Error("word_ids length must equal the word dimension");
  }
  for (const v of tensor.data) {
    if (!Number.isFinite(v)) throw new Error("non-finite values in tensor data");
  }
  const header =
    JSON.stringify({
      magic: MAGIC,
      dtype: DTYPE,
      shape: tensor.shape,
      model_id: tensor.modelId,
      context_window: tensor.contextWindow,
      word_ids: tensor.wordIds,
    }) + "\n";
  const payload = Buffer.alloc(tensor.data.length * 4);
  for (let i = 0; i < tensor.data.length; i++) payload.writeFloatLE(tensor.data[i], i * 4);
  mkdirSync(dirname(path), { recursive: true });
  const tmp = path + ".tmp";
  writeFileSync(tmp, Buffer.concat([Buffer.from(header, "utf-8"), payload]));
  renameSync(tmp, path);
}

export interface ParsedTensor {
  header: Record<string, unknown>;
  shape: [number, number, number];
  payloadBytes: number;
  data: Float32Array;
}

export function readTensor(path: string): ParsedTensor {
  const raw = readFileSync(path);
  const newline = raw.indexOf(0x0a);
  if (newline < 0 || raw[0] !== 0x7b) {
    throw new Error(`${path}: not an NMT1 file (missing JSON header)`);
  }
  let header: Record<string, unknown>;
  try {
    header = JSON.parse(raw.subarray(0, newline).toString("utf-8"));
  } catch (exc) {
    throw new Error(`${path}: malformed header: ${exc}`);
  }
  if (header.magic !== MAGIC) throw new Error(`${path}: bad magic ${JSON.stringify(header.magic)}`);
  if (header.dtype !== DTYPE) throw new Error(`${path}: unsupported dtype ${JSON.stringify(header.dtype)}`);
  const shape = header.shape as [number, number, number];
  if (!Array.isArray(shape) || shape.length !== 3 || shape.some((s) => !Number.isInteger(s) || s < 1)) {
    throw new Error(`${path}: bad shape ${JSON.stringify(shape)}`);
  }
  const payload = raw.subarray(newline + 1);
  const expected = 4 * shape[0] * shape[1] * shape[2];
  if (payload.length !== expected) {
    throw new Error(`${path}: payload length mismatch (expected ${expected} bytes, got ${payload.length})`);
  }
  const data = new Float32Array(shape[0] * shape[1] * shape[2]);
  for (let i = 0; i < data.length; i++) data[i] = payload.readFloatLE(i * 4);
  return { header, shape, payloadBytes: payload.length, data };
}
