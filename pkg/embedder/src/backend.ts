/**
 * Embedding backends. A backend turns a tokenized sentence into final-
 * hidden-layer vectors plus the piece alignment for every input token.
 *
 * Two offline backends ship here:
 *  - HashBackend: deterministic context-sensitive pseudo-embeddings for
 *    pipeline testing with zero model downloads;
 *  - TinyContextBackend: a minimal trainable contextual encoder
 *    (tanh(W x_i + U c)) used to exercise the fine-tuning recipe end
 *    to end with real gradient updates.
 *
 * Pretrained transformer checkpoints load through the optional
 * transformers.js backend in transformersBackend.ts.
 */

export interface SentenceEncoding {
  /** Final-layer hidden state per subword piece, in piece order. */
  hiddenStates: Float32Array[];
  /** For each input token, its [start, end) piece range. */
  pieceRanges: Array<[number, number]>;
}

export interface EmbeddingBackend {
  readonly name: string;
  readonly dimension: number;
  encode(tokens: string[]): Promise<SentenceEncoding>;
}

// ---------------------------------------------------------------------------
// Deterministic primitives

export function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

/** mulberry32: tiny seeded PRNG, uniform in [0, 1). */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function seededVector(seed: number, dim: number): Float32Array {
  const next = mulberry32(seed);
  const out = new Float32Array(dim);
  for (let i = 0; i < dim; i++) {
    out[i] = Math.fround(next() * 2 - 1);
  }
  return out;
}

const PIECE_CHARS = 4;

/** Greedy fixed-width word-piece split: short words stay single-piece. */
export function splitPieces(token: string): string[] {
  if (token.length <= PIECE_CHARS) return [token];
  const pieces: string[] = [];
  for (let start = 0; start < token.length; start += PIECE_CHARS) {
    pieces.push(token.slice(start, start + PIECE_CHARS));
  }
  return pieces;
}

// ---------------------------------------------------------------------------
// HashBackend

export class HashBackend implements EmbeddingBackend {
  readonly name: string;
  readonly dimension: number;
  private readonly seed: number;

  constructor(dimension = 32, seed = 1) {
    this.dimension = dimension;
    this.seed = seed;
    this.name = `hash-d${dimension}-s${seed}`;
  }

  async encode(tokens: string[]): Promise<SentenceEncoding> {
    // context term makes the same piece embed differently per sentence
    const contextHash = fnv1a(tokens.join(""));
    const hiddenStates: Float32Array[] = [];
    const pieceRanges: Array<[number, number]> = [];
    for (let t = 0; t < tokens.length; t++) {
      const start = hiddenStates.length;
      for (const piece of splitPieces(tokens[t])) {
        const pieceSeed =
          (fnv1a(piece) ^ Math.imul(t + 1, 0x9e3779b1) ^ contextHash ^ this.seed) >>> 0;
        hiddenStates.push(seededVector(pieceSeed, this.dimension));
      }
      pieceRanges.push([start, hiddenStates.length]);
    }
    return { hiddenStates, pieceRanges };
  }
}

// ---------------------------------------------------------------------------
// TinyContextBackend

export interface ForwardCache {
  feats: Float64Array[]; // token features x_i
  context: Float64Array; // mean feature vector c
  hidden: Float64Array[]; // tanh outputs
}

/**
 * Minimal trainable contextual encoder: every token is one piece and
 * hidden_i = tanh(W x_i + U c + b) with fixed hash features x and the
 * sentence-mean context c. Parameters W, U, b are updated in place by
 * the fine-tuning trainer, so inoculation really changes what
 * extraction reads afterwards.
 */
export class TinyContextBackend implements EmbeddingBackend {
  readonly name: string;
  readonly dimension: number;
  readonly featureDim: number;
  w: Float64Array; // dimension x featureDim
  u: Float64Array; // dimension x featureDim
  b: Float64Array; // dimension

  constructor(dimension = 24, featureDim = 16, seed = 9) {
    this.dimension = dimension;
    this.featureDim = featureDim;
    this.name = `tiny-context-d${dimension}`;
    const next = mulberry32(seed);
    const init = (n: number, scale: number) => {
      const arr = new Float64Array(n);
      for (let i = 0; i < n; i++) arr[i] = (next() * 2 - 1) * scale;
      return arr;
    };
    this.w = init(dimension * featureDim, 0.6);
    this.u = init(dimension * featureDim, 0.3);
    this.b = init(dimension, 0.05);
  }

  features(token: string): Float64Array {
    const out = new Float64Array(this.featureDim);
    const next = mulberry32(fnv1a(token));
    for (let i = 0; i < this.featureDim; i++) out[i] = next() * 2 - 1;
    return out;
  }

  forward(tokens: string[]): ForwardCache {
    const feats = tokens.map((t) => this.features(t));
    const context = new Float64Array(this.featureDim);
    for (const x of feats) {
      for (let i = 0; i < this.featureDim; i++) context[i] += x[i];
    }
    for (let i = 0; i < this.featureDim; i++) context[i] /= tokens.length;
    const hidden = feats.map((x) => {
      const h = new Float64Array(this.dimension);
      for (let d = 0; d < this.dimension; d++) {
        let z = this.b[d];
        const rowOffset = d * this.featureDim;
        for (let f = 0; f < this.featureDim; f++) {
          z += this.w[rowOffset + f] * x[f] + this.u[rowOffset + f] * context[f];
        }
        h[d] = Math.tanh(z);
      }
      return h;
    });
    return { feats, context, hidden };
  }

  /**
   * Accumulate gradients for a loss gradient arriving at one token's
   * hidden vector. Returns nothing; adds into the given buffers.
   */
  accumulateGrads(
    cache: ForwardCache,
    tokenIndex: number,
    gradHidden: Float64Array,
    gradW: Float64Array,
    gradU: Float64Array,
    gradB: Float64Array
  ): void {
    const x = cache.feats[tokenIndex];
    const h = cache.hidden[tokenIndex];
    for (let d = 0; d < this.dimension; d++) {
      const dz = gradHidden[d] * (1 - h[d] * h[d]);
      gradB[d] += dz;
      const rowOffset = d * this.featureDim;
      for (let f = 0; f < this.featureDim; f++) {
        gradW[rowOffset + f] += dz * x[f];
        gradU[rowOffset + f] += dz * cache.context[f];
      }
    }
  }

  parameters(): Float64Array[] {
    return [this.w, this.u, this.b];
  }

  snapshot(): Float64Array[] {
    return [
      Float64Array.from(this.w),
      Float64Array.from(this.u),
      Float64Array.from(this.b),
    ];
  }

  async encode(tokens: string[]): Promise<SentenceEncoding> {
    const { hidden } = this.forward(tokens);
    return {
      hiddenStates: hidden.map((h) => Float32Array.from(h, Math.fround)),
      pieceRanges: tokens.map((_t, i) => [i, i + 1]),
    };
  }
}
