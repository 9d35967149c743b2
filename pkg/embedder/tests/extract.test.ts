import { mkdtempSync, readFileSync, writeFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { EmbeddingBackend, HashBackend, SentenceEncoding } from "../src/backend.js";
import { extractEmbeddings } from "../src/extract.js";
import { loadInterchange, SenseInstance } from "../src/interchange.js";

function tmpDir(): string {
  return mkdtempSync(join(tmpdir(), "cweextract-"));
}

function toyCorpus(dir: string, rows: number): string {
  const lines: string[] = [];
  for (let i = 0; i < rows; i++) {
    lines.push(
      JSON.stringify({
        instance_id: `inst-${i}`,
        sentence_id: `s${i}`,
        split: i % 5 === 4 ? "test" : "train",
        lemma: i % 2 === 0 ? "pull" : "carry",
        sense: `sense.${i % 3}`,
        target_index: 1,
        tokens: ["they", i % 2 === 0 ? "pull" : "carrying", "boxes"],
      })
    );
  }
  const path = join(dir, "corpus.jsonl");
  writeFileSync(path, lines.join("\n") + "\n");
  return path;
}

describe("extractEmbeddings", () => {
  it("writes one pooled vector per instance in corpus order", async () => {
    const dir = tmpDir();
    const corpus = toyCorpus(dir, 12);
    const instances = loadInterchange(corpus);
    const result = await extractEmbeddings(
      instances,
      new HashBackend(16, 11),
      { pooling: "mean", storePath: join(dir, "out.store") },
      corpus
    );
    expect(result.written).toBe(12);
    expect(result.omissions).toEqual([]);
    const bytes = readFileSync(join(dir, "out.store"));
    expect(bytes.readBigUInt64LE(16)).toBe(12n);
    expect(bytes.readUInt32LE(12)).toBe(16);
  });

  it("is deterministic byte for byte", async () => {
    const dir = tmpDir();
    const corpus = toyCorpus(dir, 20);
    const instances = loadInterchange(corpus);
    for (const name of ["a.store", "b.store"]) {
      await extractEmbeddings(
        instances,
        new HashBackend(16, 11),
        { pooling: "mean", storePath: join(dir, name) },
        corpus
      );
    }
    expect(
      readFileSync(join(dir, "a.store")).equals(readFileSync(join(dir, "b.store")))
    ).toBe(true);
    expect(
      readFileSync(join(dir, "a.store.idx")).equals(
        readFileSync(join(dir, "b.store.idx"))
      )
    ).toBe(true);
  });

  it("writes a manifest with pooling, layer and corpus checksum", async () => {
    const dir = tmpDir();
    const corpus = toyCorpus(dir, 6);
    const result = await extractEmbeddings(
      loadInterchange(corpus),
      new HashBackend(8, 2),
      { pooling: "max", storePath: join(dir, "m.store"), ftInstances: 250, seed: 7 },
      corpus
    );
    const manifest = JSON.parse(readFileSync(result.manifestPath, "utf-8"));
    expect(manifest.pooling).toBe("max");
    expect(manifest.layer).toBe("last");
    expect(manifest.dimension).toBe(8);
    expect(manifest.ft_instances).toBe(250);
    expect(manifest.seed).toBe(7);
    expect(manifest.corpus_sha256).toMatch(/^[0-9a-f]{64}$/);
  });

  it("records unalignable targets in the omissions sidecar and continues", async () => {
    const dir = tmpDir();
    const corpus = toyCorpus(dir, 4);
    const instances = loadInterchange(corpus);

    class DroppingBackend implements EmbeddingBackend {
      readonly name = "dropping";
      readonly dimension = 4;
      private inner = new HashBackend(4, 1);
      async encode(tokens: string[]): Promise<SentenceEncoding> {
        const enc = await this.inner.encode(tokens);
        if (tokens[1] === "carrying") {
          enc.pieceRanges[1] = [enc.pieceRanges[1][0], enc.pieceRanges[1][0]];
        }
        return enc;
      }
    }

    const result = await extractEmbeddings(
      instances,
      new DroppingBackend(),
      { pooling: "mean", storePath: join(dir, "drop.store") },
      corpus
    );
    const carrying = instances.filter((i: SenseInstance) => i.lemma === "carry");
    expect(result.omissions.length).toBe(carrying.length);
    expect(result.written).toBe(instances.length - carrying.length);
    const sidecar = JSON.parse(
      readFileSync(join(dir, "drop.store.omitted.json"), "utf-8")
    );
    expect(sidecar[0].reason).toMatch(/no subword pieces/);
  });

  it("omits the sidecar when nothing was dropped", async () => {
    const dir = tmpDir();
    const corpus = toyCorpus(dir, 4);
    await extractEmbeddings(
      loadInterchange(corpus),
      new HashBackend(8, 2),
      { pooling: "first", storePath: join(dir, "clean.store") },
      corpus
    );
    expect(existsSync(join(dir, "clean.store.omitted.json"))).toBe(false);
  });
});
