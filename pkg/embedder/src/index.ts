export {
  EmbeddingBackend,
  HashBackend,
  SentenceEncoding,
  TinyContextBackend,
  splitPieces,
} from "./backend.js";
export { AdamW } from "./adamw.js";
export { ExtractConfig, ExtractResult, extractEmbeddings } from "./extract.js";
export { SenseInstance, loadInterchange, parseInstanceLine } from "./interchange.js";
export {
  FINE_TUNE_EPOCHS,
  FINE_TUNE_LEARNING_RATE,
  InoculationConfig,
  POS_ORDER,
  STANDARD_SAMPLE_TOTALS,
  SupersenseAnnotation,
  TrainingLog,
  balancedQuotas,
  balancedSample,
  inoculate,
  loadSupersenseCorpus,
  trainingLabel,
} from "./inoculate.js";
export { POOLING_MODES, PoolingMode, poolPieces } from "./pooling.js";
export { StoreRecord, writeStore } from "./store.js";
export { TransformersJsBackend } from "./transformersBackend.js";
