/**
 * Backend over pretrained checkpoints via transformers.js, loaded
 * lazily so environments without the optional dependency (or without
 * network access to model weights) can still use the offline backends.
 *
 * Pre-tokenized words are sub-tokenized one by one to build the piece
 * alignment, then the whole sentence runs through the model once and
 * the final hidden layer is read back per piece. Decoder-only models
 * take the same path: full sentence in, target positions out.
 */

import { EmbeddingBackend, SentenceEncoding } from "./backend.js";

interface TransformersModule {
  AutoTokenizer: { from_pretrained(id: string, opts?: object): Promise<any> };
  AutoModel: { from_pretrained(id: string, opts?: object): Promise<any> };
  Tensor: any;
}

export interface TransformersBackendOptions {
  device?: string;
  dtype?: string;
}

export class TransformersJsBackend implements EmbeddingBackend {
  readonly name: string;
  dimension = 0;
  private tokenizer: any;
  private model: any;

  private constructor(modelId: string) {
    this.name = modelId;
  }

  static async load(
    modelId: string,
    options: TransformersBackendOptions = {}
  ): Promise<TransformersJsBackend> {
    let mod: TransformersModule;
    try {
      // optional peer dependency; typed locally via TransformersModule
      // @ts-ignore TS2307 when the peer is not installed
      mod = (await import("@huggingface/transformers")) as unknown as TransformersModule;
    } catch (err) {
      throw new Error(
        "the optional dependency @huggingface/transformers is not installed; " +
          "install it (with network access for model weights) or use an " +
          `offline backend (${(err as Error).message})`
      );
    }
    const backend = new TransformersJsBackend(modelId);
    backend.tokenizer = await mod.AutoTokenizer.from_pretrained(modelId);
    backend.model = await mod.AutoModel.from_pretrained(modelId, {
      device: options.device,
      dtype: options.dtype ?? "fp32",
    });
    return backend;
  }

  private async pieceIds(word: string): Promise<number[]> {
    const encoded = await this.tokenizer(word, { add_special_tokens: false });
    return Array.from(encoded.input_ids.data as BigInt64Array, Number);
  }

  async encode(tokens: string[]): Promise<SentenceEncoding> {
    const pieceRanges: Array<[number, number]> = [];
    const ids: number[] = [];
    for (const token of tokens) {
      const start = ids.length;
      ids.push(...(await this.pieceIds(token)));
      pieceRanges.push([start, ids.length]);
    }

    const withSpecials = await this.tokenizer(tokens.join(" "), {
      add_special_tokens: true,
    });
    const fullIds = Array.from(withSpecials.input_ids.data as BigInt64Array, Number);
    // leading-special offset: pieces of the first word start after any
    // prepended special tokens (CLS/BOS); trailing specials are ignored
    let lead = 0;
    while (lead < fullIds.length && ids.length > 0 && fullIds[lead] !== ids[0]) {
      lead += 1;
    }
    if (lead >= fullIds.length) lead = 0;

    const modelInputs = await this.tokenizer(tokens.join(" "), {
      add_special_tokens: true,
      return_tensor: true,
    });
    const output = await this.model(modelInputs);
    const states = output.last_hidden_state;
    const [, seqLen, dim] = states.dims as number[];
    this.dimension = dim;
    const data = states.data as Float32Array;

    const hiddenStates: Float32Array[] = [];
    for (let p = 0; p < ids.length; p++) {
      const position = lead + p;
      if (position >= seqLen) break;
      hiddenStates.push(
        Float32Array.from(data.subarray(position * dim, (position + 1) * dim))
      );
    }
    const bounded: Array<[number, number]> = pieceRanges.map(([s, e]) => [
      Math.min(s, hiddenStates.length),
      Math.min(e, hiddenStates.length),
    ]);
    return { hiddenStates, pieceRanges: bounded };
  }
}
