import { describe, expect, it } from "vitest";

import { tokenizeWithWordMap, wordPieces } from "../src/tokenizer.js";

describe("tokenizeWithWordMap", () => {
  it("maps single-token words one to one", () => {
    const t = tokenizeWithWordMap("the cat sat", 4096);
    expect(t.words).toEqual(["the", "cat", "sat"]);
    expect(Array.from(t.lastTokenIndex)).toEqual([0, 1, 2]);
    expect(t.tokensPerWord).toBe(1.0);
  });

  it("splits long words into contiguous spans ending at the last token", () => {
    const t = tokenizeWithWordMap("understanding it", 4096);
    expect(wordPieces("understanding")).toEqual(["unde", "rsta", "ndin", "g"]);
    expect(Array.from(t.wordOfToken)).toEqual([0, 0, 0, 0, 1]);
    expect(Array.from(t.lastTokenIndex)).toEqual([3, 4]);
    expect(t.tokensPerWord).toBeGreaterThan(1.0);
  });

  it("keeps last-token indices strictly increasing", () => {
    const t = tokenizeWithWordMap("a bb ccc dddd eeeee ffffff", 4096);
    for (let w = 1; w < t.lastTokenIndex.length; w++) {
      expect(t.lastTokenIndex[w]).toBeGreaterThan(t.lastTokenIndex[w - 1]);
    }
  });

  it("rejects empty passages", () => {
    expect(() => tokenizeWithWordMap("   \t  ", 4096)).toThrow(/empty passage/);
  });

  it("keeps token ids inside the vocabulary", () => {
    const t = tokenizeWithWordMap("zebra quokka axolotl", 128);
    for (const id of t.tokenIds) {
      expect(id).toBeGreaterThanOrEqual(0);
      expect(id).toBeLessThan(128);
    }
  });
});
