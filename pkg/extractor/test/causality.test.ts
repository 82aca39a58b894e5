import { describe, expect, it } from "vitest";

import { extractPassage, runExtraction } from "../src/extract.js";
import { CausalTransformer, resolveConfig } from "../src/model.js";
import { tokenizeWithWordMap } from "../src/tokenizer.js";

const MODEL = "tiny-causal";

function embeddings(passage: string, window: number | "full") {
  const config = resolveConfig(MODEL);
  const model = new CausalTransformer(config);
  const tokens = tokenizeWithWordMap(passage, config.vocabSize);
  return { layers: extractPassage(model, tokens, window), d: config.dModel, tokens };
}

function wordVector(layers: Float64Array[], layer: number, word: number, d: number): Float64Array {
  return layers[layer].slice(word * d, (word + 1) * d);
}

describe("causal extraction", () => {
  it("is bit-identical for words before a perturbation of later text", () => {
    const base = embeddings("one two three four five six", "full");
    const perturbed = embeddings("one two three four NINE ELEVEN", "full");
    for (let layer = 0; layer < base.layers.length; layer++) {
      for (let word = 0; word < 4; word++) {
        expect(wordVector(base.layers, layer, word, base.d)).toEqual(
          wordVector(perturbed.layers, layer, word, base.d)
        );
      }
    }
  });

  it("keeps the first copy unchanged when a duplicate passage is appended", () => {
    const single = runExtraction({
      modelName: MODEL,
      passages: ["alpha beta gamma"],
      contextWindow: "full",
      outputPath: "",
    });
    const doubled = runExtraction({
      modelName: MODEL,
      passages: ["alpha beta gamma", "alpha beta gamma"],
      contextWindow: "full",
      outputPath: "",
    });
    const [L, W, D] = single.tensor.shape;
    for (let l = 0; l < L; l++) {
      for (let w = 0; w < W; w++) {
        for (let c = 0; c < D; c++) {
          const i = (l * W + w) * D + c;
          const j = (l * 2 * W + w) * D + c;
          expect(doubled.tensor.data[j]).toBe(single.tensor.data[i]);
        }
      }
    }
  });

  it("makes 1-token embeddings independent of all preceding text", () => {
    const a = embeddings("completely different prefix words then target", 1);
    const b = embeddings("x target", 1);
    // last word is "target" in both
    const lastA = a.tokens.lastTokenIndex.length - 1;
    const lastB = b.tokens.lastTokenIndex.length - 1;
    for (let layer = 0; layer < a.layers.length; layer++) {
      expect(wordVector(a.layers, layer, lastA, a.d)).toEqual(wordVector(b.layers, layer, lastB, b.d));
    }
  });

  it("is a no-op to truncate when the context is shorter than the window", () => {
    const passage = "tiny prefix target";
    const full = embeddings(passage, "full");
    const windowed = embeddings(passage, 64); // window far exceeds token count
    for (let layer = 0; layer < full.layers.length; layer++) {
      expect(windowed.layers[layer]).toEqual(full.layers[layer]);
    }
  });

  it("differs between a short window and full context once enough text precedes", () => {
    const words = Array.from({ length: 30 }, (_, i) => `word${i}`).join(" ");
    const full = embeddings(words, "full");
    const short = embeddings(words, 3);
    const lastWord = 29;
    let identical = true;
    for (let c = 0; c < full.d; c++) {
      if (
        full.layers[0][lastWord * full.d + c] !== short.layers[0][lastWord * full.d + c]
      ) {
        identical = false;
        break;
      }
    }
    expect(identical).toBe(false);
  });

  it("is deterministic across repeated runs at the same window", () => {
    const a = embeddings("repeat run check", 2);
    const b = embeddings("repeat run check", 2);
    for (let layer = 0; layer < a.layers.length; layer++) {
      expect(a.layers[layer]).toEqual(b.layers[layer]);
    }
  });
});
