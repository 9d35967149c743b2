#!/usr/bin/env node
/**
 * cwe-embed extract --corpus c.jsonl --store out.store [--backend hash|tiny|MODEL_ID]
 *                   [--pooling mean|first|max] [--dim N] [--seed N] [--ft N]
 * cwe-embed inoculate --supervision s.jsonl --samples N [--seed N]
 *                     --corpus c.jsonl --store out.store [--pooling ...]
 *
 * `inoculate` fine-tunes the trainable offline encoder on a balanced
 * supersense sample (40 epochs, lr 2e-5), then extracts with the tuned
 * weights; the projection head is discarded.
 */

import { HashBackend, TinyContextBackend, EmbeddingBackend } from "./backend.js";
import { extractEmbeddings } from "./extract.js";
import { loadInterchange } from "./interchange.js";
import { inoculate, loadSupersenseCorpus } from "./inoculate.js";
import { PoolingMode, POOLING_MODES } from "./pooling.js";
import { TransformersJsBackend } from "./transformersBackend.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument '${arg}'`);
    const value = argv[i + 1];
    if (value === undefined || value.startsWith("--")) {
      throw new Error(`flag ${arg} needs a value`);
    }
    flags.set(arg.slice(2), value);
    i += 1;
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (!value) throw new Error(`missing required flag --${name}`);
  return value;
}

function pooling(flags: Map<string, string>): PoolingMode {
  const mode = (flags.get("pooling") ?? "mean") as PoolingMode;
  if (!POOLING_MODES.includes(mode)) {
    throw new Error(`--pooling must be one of ${POOLING_MODES.join("|")}`);
  }
  return mode;
}

async function makeBackend(
  spec: string,
  dim: number,
  seed: number
): Promise<EmbeddingBackend> {
  if (spec === "hash") return new HashBackend(dim, seed);
  if (spec === "tiny") return new TinyContextBackend(dim);
  return TransformersJsBackend.load(spec);
}

async function cmdExtract(flags: Map<string, string>): Promise<void> {
  const corpus = required(flags, "corpus");
  const store = required(flags, "store");
  const dim = Number(flags.get("dim") ?? 32);
  const seed = Number(flags.get("seed") ?? 1);
  const backend = await makeBackend(flags.get("backend") ?? "hash", dim, seed);
  const instances = loadInterchange(corpus);
  const result = await extractEmbeddings(
    instances,
    backend,
    {
      pooling: pooling(flags),
      storePath: store,
      seed,
      ftInstances: Number(flags.get("ft") ?? 0),
    },
    corpus
  );
  console.log(
    `wrote ${result.written} embeddings to ${store} ` +
      `(${result.omissions.length} omitted)`
  );
}

async function cmdInoculate(flags: Map<string, string>): Promise<void> {
  const supervision = required(flags, "supervision");
  const corpus = required(flags, "corpus");
  const store = required(flags, "store");
  const samples = Number(required(flags, "samples"));
  const seed = Number(flags.get("seed") ?? 1);
  const dim = Number(flags.get("dim") ?? 32);

  const backend = new TinyContextBackend(dim);
  const log = inoculate(backend, loadSupersenseCorpus(supervision), {
    sampleSize: samples,
    seed,
  });
  console.log(
    `inoculated: ${log.sampleSize} instances ` +
      `(noun/verb/prep = ${log.perPosCounts.noun}/${log.perPosCounts.verb}/` +
      `${log.perPosCounts.prep}), ${log.epochsRun} epochs at lr ${log.learningRate}`
  );
  const instances = loadInterchange(corpus);
  const result = await extractEmbeddings(
    instances,
    backend,
    { pooling: pooling(flags), storePath: store, seed, ftInstances: samples },
    corpus
  );
  console.log(
    `wrote ${result.written} embeddings to ${store} ` +
      `(${result.omissions.length} omitted)`
  );
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    const flags = parseFlags(rest);
    if (command === "extract") {
      await cmdExtract(flags);
    } else if (command === "inoculate") {
      await cmdInoculate(flags);
    } else {
      console.error("usage: cwe-embed <extract|inoculate> --flags...");
      return 1;
    }
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
