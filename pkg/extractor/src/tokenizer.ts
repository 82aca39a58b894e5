/**
 * Whitespace words split into fixed-width subword pieces with a word map.
 *
 * Every word maps to a contiguous token span and is represented downstream by
 * its LAST token, so multi-token words behave like they do under BPE-style
 * tokenizers without shipping a learned merge table.
 */

import { fnv1a } from "./prng.js";

export const PIECE_LEN = 4;

export interface Tokenized {
  tokenIds: Int32Array;
  /** word index (within the passage) of each token */
  wordOfToken: Int32Array;
  /** index of the last token of each word; strictly increasing */
  lastTokenIndex: Int32Array;
  words: string[];
  /** token count / word count */
  tokensPerWord: number;
}

export function splitWords(passage: string): string[] {
  return passage.split(/\s+/).filter((w) => w.length > 0);
}

export function wordPieces(word: string): string[] {
  const pieces: string[] = [];
  for (let i = 0; i < word.length; i += PIECE_LEN) {
    pieces.push(word.slice(i, i + PIECE_LEN));
  }
  return pieces;
}

export function tokenizeWithWordMap(passage: string, vocabSize: number): Tokenized {
  const words = splitWords(passage);
  if (words.length === 0) {
    throw new Error("empty passage after whitespace normalization");
  }
  const tokenIds: number[] = [];
  const wordOfToken: number[] = [];
  const lastTokenIndex: number[] = [];
  for (let w = 0; w < words.length; w++) {
    const pieces = wordPieces(words[w]);
    if (pieces.length === 0) {
      throw new Error(`word ${w} (${JSON.stringify(words[w])}) produced zero tokens`);
    }
    for (const piece of pieces) {
      tokenIds.push(fnv1a(piece) % vocabSize);
      wordOfToken.push(w);
    }
    lastTokenIndex.push(tokenIds.length - 1);
  }
  for (let w = 1; w < lastTokenIndex.length; w++) {
    if (lastTokenIndex[w] <= lastTokenIndex[w - 1]) {
      throw new Error("last-token indices are not strictly increasing");
    }
  }
  return {
    tokenIds: Int32Array.from(tokenIds),
    wordOfToken: Int32Array.from(wordOfToken),
    lastTokenIndex: Int32Array.from(lastTokenIndex),
    words,
    tokensPerWord: tokenIds.length / words.length,
  };
}
