/**
 * Reader for the JSON Lines corpus interchange format shared with the
 * retrieval engine: one instance per line with fixed field names;
 * extra fields are ignored.
 */

import { readFileSync } from "node:fs";

export interface SenseInstance {
  instanceId: string;
  sentenceId: string;
  tokens: string[];
  targetIndex: number;
  lemma: string;
  sense: string;
  split: "train" | "dev" | "test";
}

const SPLITS = new Set(["train", "dev", "test"]);

export function parseInstanceLine(line: string, lineNo: number): SenseInstance {
  let record: Record<string, unknown>;
  try {
    record = JSON.parse(line);
  } catch (err) {
    throw new Error(`line ${lineNo}: invalid JSON (${(err as Error).message})`);
  }
  for (const field of [
    "instance_id",
    "sentence_id",
    "split",
    "lemma",
    "sense",
    "target_index",
    "tokens",
  ]) {
    if (!(field in record)) {
      throw new Error(`line ${lineNo}: missing field '${field}'`);
    }
  }
  const tokens = record.tokens;
  if (!Array.isArray(tokens) || !tokens.every((t) => typeof t === "string")) {
    throw new Error(`line ${lineNo}: tokens must be an array of strings`);
  }
  const targetIndex = record.target_index;
  if (typeof targetIndex !== "number" || !Number.isInteger(targetIndex)) {
    throw new Error(`line ${lineNo}: target_index must be an integer`);
  }
  if (targetIndex < 0 || targetIndex >= tokens.length) {
    throw new Error(`line ${lineNo}: target_index ${targetIndex} out of range`);
  }
  const split = String(record.split);
  if (!SPLITS.has(split)) {
    throw new Error(`line ${lineNo}: unknown split '${split}'`);
  }
  return {
    instanceId: String(record.instance_id),
    sentenceId: String(record.sentence_id),
    tokens: tokens as string[],
    targetIndex,
    lemma: String(record.lemma),
    sense: String(record.sense),
    split: split as SenseInstance["split"],
  };
}

export function loadInterchange(path: string): SenseInstance[] {
  const text = readFileSync(path, "utf-8");
  const instances: SenseInstance[] = [];
  const seen = new Set<string>();
  let lineNo = 0;
  for (const raw of text.split("\n")) {
    lineNo += 1;
    if (!raw.trim()) continue;
    const inst = parseInstanceLine(raw, lineNo);
    if (seen.has(inst.instanceId)) {
      throw new Error(`line ${lineNo}: duplicate instance_id '${inst.instanceId}'`);
    }
    seen.add(inst.instanceId);
    instances.push(inst);
  }
  return instances;
}
