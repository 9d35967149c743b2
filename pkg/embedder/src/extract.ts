/**
 * Extraction pipeline: corpus instances -> backend hidden states ->
 * pooled target-token vectors -> store files the retrieval engine
 * opens directly.
 *
 * Targets whose token yields no subword piece are recorded in an
 * omissions sidecar and skipped; the run continues. Record order in
 * the store follows corpus order, so extraction output is fully
 * deterministic for a deterministic backend.
 */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";

import { EmbeddingBackend } from "./backend.js";
import { SenseInstance } from "./interchange.js";
import { PoolingMode, poolPieces } from "./pooling.js";
import { StoreRecord, writeStore } from "./store.js";

export interface ExtractConfig {
  pooling: PoolingMode;
  storePath: string;
  /** Recorded in the manifest for fine-tuned checkpoints. */
  ftInstances?: number;
  seed?: number;
  batchSize?: number;
}

export interface Omission {
  instanceId: string;
  reason: string;
}

export interface ExtractResult {
  written: number;
  omissions: Omission[];
  manifestPath: string;
}

export function corpusSha256(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

export async function extractEmbeddings(
  instances: SenseInstance[],
  backend: EmbeddingBackend,
  config: ExtractConfig,
  corpusPath?: string
): Promise<ExtractResult> {
  const records: StoreRecord[] = [];
  const omissions: Omission[] = [];
  for (const inst of instances) {
    const encoding = await backend.encode(inst.tokens);
    const [start, end] = encoding.pieceRanges[inst.targetIndex];
    if (end <= start) {
      omissions.push({
        instanceId: inst.instanceId,
        reason: `target token ${JSON.stringify(
          inst.tokens[inst.targetIndex]
        )} produced no subword pieces`,
      });
      continue;
    }
    const pieces = encoding.hiddenStates.slice(start, end);
    records.push({
      instanceId: inst.instanceId,
      lemma: inst.lemma,
      vector: poolPieces(pieces, config.pooling),
    });
  }
  const written = writeStore(records, backend.dimension, config.storePath);

  const manifest = {
    model: backend.name,
    pooling: config.pooling,
    layer: "last",
    dimension: backend.dimension,
    corpus_sha256: corpusPath ? corpusSha256(corpusPath) : null,
    ft_instances: config.ftInstances ?? 0,
    seed: config.seed ?? null,
    instances: written,
    omitted: omissions.length,
  };
  const manifestPath = config.storePath + ".manifest.json";
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  if (omissions.length > 0) {
    writeFileSync(
      config.storePath + ".omitted.json",
      JSON.stringify(omissions, null, 2) + "\n"
    );
  }
  return { written, omissions, manifestPath };
}
