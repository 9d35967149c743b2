/**
 * Inoculation by fine-tuning: briefly train the encoder on a small,
 * POS-balanced sample of supersense annotations so task-relevant
 * information surfaces in its output embeddings, without teaching it
 * anything new. A linear projection head maps the target token's
 * final-layer state to supersense logits; after training the head is
 * discarded and extraction keeps reading the final layer.
 *
 * Fixed recipe: AdamW, learning rate 2e-5, 40 epochs. Prepositions may
 * carry two supersenses; only the first is used.
 */

import { readFileSync } from "node:fs";

import { AdamW } from "./adamw.js";
import { TinyContextBackend, mulberry32 } from "./backend.js";

export type PartOfSpeech = "noun" | "verb" | "prep";

export const POS_ORDER: PartOfSpeech[] = ["noun", "verb", "prep"];
export const STANDARD_SAMPLE_TOTALS = [100, 250, 500, 1000, 2500];

export const FINE_TUNE_LEARNING_RATE = 2e-5;
export const FINE_TUNE_EPOCHS = 40;

export interface SupersenseAnnotation {
  tokens: string[];
  targetIndex: number;
  pos: PartOfSpeech;
  supersenses: string[];
}

export interface InoculationConfig {
  sampleSize: number;
  seed: number;
  learningRate?: number; // default 2e-5; override only for experiments
  epochs?: number; // default 40
}

export interface TrainingLog {
  sampleSize: number;
  perPosCounts: Record<PartOfSpeech, number>;
  epochsRun: number;
  learningRate: number;
  labelSet: string[];
  stepsRun: number;
  finalLoss: number;
}

export function loadSupersenseCorpus(path: string): SupersenseAnnotation[] {
  const annotations: SupersenseAnnotation[] = [];
  let lineNo = 0;
  for (const raw of readFileSync(path, "utf-8").split("\n")) {
    lineNo += 1;
    if (!raw.trim()) continue;
    const record = JSON.parse(raw);
    const pos = record.pos;
    if (!POS_ORDER.includes(pos)) {
      throw new Error(`line ${lineNo}: pos must be one of ${POS_ORDER}, got '${pos}'`);
    }
    if (!Array.isArray(record.supersenses) || record.supersenses.length === 0) {
      throw new Error(`line ${lineNo}: supersenses must be a non-empty array`);
    }
    annotations.push({
      tokens: record.tokens,
      targetIndex: record.target_index,
      pos,
      supersenses: record.supersenses.map(String),
    });
  }
  return annotations;
}

/** Supervision label: single annotation for nouns/verbs, first of the pair for prepositions. */
export function trainingLabel(annotation: SupersenseAnnotation): string {
  return annotation.supersenses[0];
}

/**
 * Split a total into per-POS quotas that differ by at most one, in the
 * fixed noun/verb/prep order.
 */
export function balancedQuotas(total: number): Record<PartOfSpeech, number> {
  const base = Math.floor(total / POS_ORDER.length);
  const remainder = total % POS_ORDER.length;
  const quotas = {} as Record<PartOfSpeech, number>;
  POS_ORDER.forEach((pos, i) => {
    quotas[pos] = base + (i < remainder ? 1 : 0);
  });
  return quotas;
}

/** Seeded sample without replacement, balanced across POS within one. */
export function balancedSample(
  annotations: SupersenseAnnotation[],
  total: number,
  seed: number
): SupersenseAnnotation[] {
  if (total < 0) throw new Error(`sample size must be >= 0, got ${total}`);
  if (total === 0) return [];
  const quotas = balancedQuotas(total);
  const next = mulberry32(seed);
  const sample: SupersenseAnnotation[] = [];
  for (const pos of POS_ORDER) {
    const pool = annotations.filter((a) => a.pos === pos);
    if (pool.length < quotas[pos]) {
      throw new Error(
        `supervision corpus has ${pool.length} '${pos}' annotations, ` +
          `need ${quotas[pos]} for a balanced sample of ${total}`
      );
    }
    // partial Fisher-Yates draw
    const indices = pool.map((_a, i) => i);
    for (let i = 0; i < quotas[pos]; i++) {
      const j = i + Math.floor(next() * (indices.length - i));
      [indices[i], indices[j]] = [indices[j], indices[i]];
      sample.push(pool[indices[i]]);
    }
  }
  return sample;
}

function softmaxCrossEntropy(
  logits: Float64Array,
  label: number
): { loss: number; gradLogits: Float64Array } {
  let max = -Infinity;
  for (const v of logits) max = Math.max(max, v);
  let total = 0;
  const exps = new Float64Array(logits.length);
  for (let i = 0; i < logits.length; i++) {
    exps[i] = Math.exp(logits[i] - max);
    total += exps[i];
  }
  const gradLogits = new Float64Array(logits.length);
  for (let i = 0; i < logits.length; i++) {
    const p = exps[i] / total;
    gradLogits[i] = p - (i === label ? 1 : 0);
  }
  return { loss: Math.log(total) + max - logits[label], gradLogits };
}

/**
 * Fine-tune a trainable encoder on a balanced supersense sample.
 *
 * Mutates the backend's parameters in place for sampleSize > 0 and
 * returns the training log. sampleSize 0 is the identity inoculation:
 * no step runs and the model is untouched.
 */
export function inoculate(
  backend: TinyContextBackend,
  annotations: SupersenseAnnotation[],
  config: InoculationConfig
): TrainingLog {
  const learningRate = config.learningRate ?? FINE_TUNE_LEARNING_RATE;
  const epochs = config.epochs ?? FINE_TUNE_EPOCHS;
  const sample = balancedSample(annotations, config.sampleSize, config.seed);
  const perPosCounts = { noun: 0, verb: 0, prep: 0 } as Record<PartOfSpeech, number>;
  for (const a of sample) perPosCounts[a.pos] += 1;

  const labelSet = [...new Set(sample.map(trainingLabel))].sort();
  if (config.sampleSize === 0) {
    return {
      sampleSize: 0,
      perPosCounts,
      epochsRun: 0,
      learningRate,
      labelSet,
      stepsRun: 0,
      finalLoss: 0,
    };
  }
  const labelIndex = new Map(labelSet.map((label, i) => [label, i]));
  const nLabels = labelSet.length;
  const dim = backend.dimension;

  // linear projection head, discarded after training
  const headInit = mulberry32(config.seed ^ 0x5ee32);
  const headW = new Float64Array(nLabels * dim);
  for (let i = 0; i < headW.length; i++) headW[i] = (headInit() * 2 - 1) * 0.05;
  const headB = new Float64Array(nLabels);

  const params = [...backend.parameters(), headW, headB];
  const optimizer = new AdamW(params, { learningRate });
  const order = sample.map((_a, i) => i);
  const shuffle = mulberry32(config.seed ^ 0x7a11);

  let stepsRun = 0;
  let finalLoss = 0;
  for (let epoch = 0; epoch < epochs; epoch++) {
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(shuffle() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let epochLoss = 0;
    for (const idx of order) {
      const example = sample[idx];
      const cache = backend.forward(example.tokens);
      const hidden = cache.hidden[example.targetIndex];

      const logits = new Float64Array(nLabels);
      for (let l = 0; l < nLabels; l++) {
        let z = headB[l];
        for (let d = 0; d < dim; d++) z += headW[l * dim + d] * hidden[d];
        logits[l] = z;
      }
      const label = labelIndex.get(trainingLabel(example))!;
      const { loss, gradLogits } = softmaxCrossEntropy(logits, label);
      epochLoss += loss;

      const gradHidden = new Float64Array(dim);
      const gradHeadW = new Float64Array(nLabels * dim);
      const gradHeadB = new Float64Array(nLabels);
      for (let l = 0; l < nLabels; l++) {
        gradHeadB[l] = gradLogits[l];
        for (let d = 0; d < dim; d++) {
          gradHeadW[l * dim + d] = gradLogits[l] * hidden[d];
          gradHidden[d] += headW[l * dim + d] * gradLogits[l];
        }
      }
      const gradW = new Float64Array(backend.w.length);
      const gradU = new Float64Array(backend.u.length);
      const gradB = new Float64Array(backend.b.length);
      backend.accumulateGrads(
        cache, example.targetIndex, gradHidden, gradW, gradU, gradB
      );
      optimizer.update([gradW, gradU, gradB, gradHeadW, gradHeadB]);
      stepsRun += 1;
    }
    finalLoss = epochLoss / order.length;
  }
  return {
    sampleSize: config.sampleSize,
    perPosCounts,
    epochsRun: epochs,
    learningRate,
    labelSet,
    stepsRun,
    finalLoss,
  };
}
