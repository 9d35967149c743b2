/**
 * Subword pooling: collapse the target token's piece vectors from the
 * final hidden layer into one embedding. A single-piece target must
 * come out bit-identical to its raw hidden state under every mode.
 */

export type PoolingMode = "mean" | "first" | "max";

export const POOLING_MODES: PoolingMode[] = ["mean", "first", "max"];

export function poolPieces(pieces: Float32Array[], mode: PoolingMode): Float32Array {
  if (pieces.length === 0) {
    throw new Error("cannot pool zero subword pieces");
  }
  if (pieces.length === 1) {
    return Float32Array.from(pieces[0]);
  }
  const dim = pieces[0].length;
  for (const piece of pieces) {
    if (piece.length !== dim) {
      throw new Error("subword piece vectors disagree on dimension");
    }
  }
  const out = new Float32Array(dim);
  if (mode === "first") {
    out.set(pieces[0]);
    return out;
  }
  if (mode === "max") {
    out.set(pieces[0]);
    for (let p = 1; p < pieces.length; p++) {
      for (let i = 0; i < dim; i++) {
        if (pieces[p][i] > out[i]) out[i] = pieces[p][i];
      }
    }
    return out;
  }
  // mean, accumulated in float64 then truncated to f32 storage width
  for (let i = 0; i < dim; i++) {
    let total = 0;
    for (let p = 0; p < pieces.length; p++) {
      total += pieces[p][i];
    }
    out[i] = Math.fround(total / pieces.length);
  }
  return out;
}
