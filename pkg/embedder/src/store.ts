/**
 * Writer for the engine's embedding store format (see FORMAT.md at the
 * repository root). Two files: the main vector file and the `.idx`
 * lemma sidecar. Layout is byte-exact; the retrieval engine's strict
 * validator is the reference reader.
 */

import { writeFileSync } from "node:fs";

const MAGIC = "CWESTORE";
const INDEX_MAGIC = "CWESIDX1";
const FORMAT_VERSION = 1;
export const MAX_DIMENSION = 8192;

export interface StoreRecord {
  instanceId: string;
  lemma: string;
  vector: Float32Array;
}

function utf8(s: string): Buffer {
  return Buffer.from(s, "utf-8");
}

/** Byte-wise UTF-8 comparison; equals code-point order for valid strings. */
export function compareUtf8(a: string, b: string): number {
  return Buffer.compare(utf8(a), utf8(b));
}

function normF64(vector: Float32Array): number {
  let total = 0;
  for (let i = 0; i < vector.length; i++) {
    total += vector[i] * vector[i];
  }
  return Math.sqrt(total);
}

class ByteSink {
  private chunks: Buffer[] = [];
  length = 0;

  push(buf: Buffer): void {
    this.chunks.push(buf);
    this.length += buf.length;
  }

  u32(value: number): void {
    const buf = Buffer.alloc(4);
    buf.writeUInt32LE(value, 0);
    this.push(buf);
  }

  u64(value: number | bigint): void {
    const buf = Buffer.alloc(8);
    buf.writeBigUInt64LE(BigInt(value), 0);
    this.push(buf);
  }

  f64(value: number): void {
    const buf = Buffer.alloc(8);
    buf.writeDoubleLE(value, 0);
    this.push(buf);
  }

  lengthPrefixed(s: string): void {
    const bytes = utf8(s);
    this.u32(bytes.length);
    this.push(bytes);
  }

  concat(): Buffer {
    return Buffer.concat(this.chunks);
  }
}

function vectorBuffer(vector: Float32Array): Buffer {
  const buf = Buffer.alloc(vector.length * 4);
  for (let i = 0; i < vector.length; i++) {
    buf.writeFloatLE(vector[i], i * 4);
  }
  return buf;
}

/**
 * Write a store (main file + sidecar index). Returns the record count.
 * Rejects dimension mismatches, non-finite components, zero norms and
 * duplicate ids, naming the offending instance.
 */
export function writeStore(
  records: StoreRecord[],
  dimension: number,
  path: string
): number {
  if (dimension < 1 || dimension > MAX_DIMENSION) {
    throw new Error(`dimension must be in 1..${MAX_DIMENSION}, got ${dimension}`);
  }
  const seen = new Set<string>();
  const norms: number[] = [];
  for (const record of records) {
    if (!record.instanceId) throw new Error("empty instance_id in store input");
    if (!record.lemma) {
      throw new Error(`${record.instanceId}: empty lemma in store input`);
    }
    if (seen.has(record.instanceId)) {
      throw new Error(`duplicate instance_id '${record.instanceId}'`);
    }
    seen.add(record.instanceId);
    if (record.vector.length !== dimension) {
      throw new Error(
        `${record.instanceId}: vector has dimension ${record.vector.length}, ` +
          `store expects ${dimension}`
      );
    }
    for (let i = 0; i < record.vector.length; i++) {
      if (!Number.isFinite(record.vector[i])) {
        throw new Error(`${record.instanceId}: vector has non-finite components`);
      }
    }
    const norm = normF64(record.vector);
    if (norm === 0) {
      throw new Error(`${record.instanceId}: vector has zero norm`);
    }
    norms.push(norm);
  }

  const main = new ByteSink();
  main.push(Buffer.from(MAGIC, "ascii"));
  main.u32(FORMAT_VERSION);
  main.u32(dimension);
  main.u64(records.length);
  for (const record of records) {
    main.push(vectorBuffer(record.vector));
  }
  for (const record of records) {
    main.lengthPrefixed(record.instanceId);
    main.lengthPrefixed(record.lemma);
  }
  const mainBytes = main.concat();
  writeFileSync(path, mainBytes);

  const byLemma = new Map<string, number[]>();
  records.forEach((record, row) => {
    const rows = byLemma.get(record.lemma) ?? [];
    rows.push(row);
    byLemma.set(record.lemma, rows);
  });
  const lemmas = [...byLemma.keys()].sort(compareUtf8);

  const index = new ByteSink();
  index.push(Buffer.from(INDEX_MAGIC, "ascii"));
  index.u32(FORMAT_VERSION);
  index.u32(dimension);
  index.u64(records.length);
  index.u64(mainBytes.length);
  index.u64(lemmas.length);
  for (const lemma of lemmas) {
    const rows = [...byLemma.get(lemma)!].sort((a, b) =>
      compareUtf8(records[a].instanceId, records[b].instanceId)
    );
    index.lengthPrefixed(lemma);
    index.u64(rows.length);
    for (const row of rows) {
      index.u64(row);
      index.f64(norms[row]);
      index.lengthPrefixed(records[row].instanceId);
    }
  }
  writeFileSync(path + ".idx", index.concat());
  return records.length;
}
