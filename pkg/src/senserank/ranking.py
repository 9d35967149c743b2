"""Lemma-restricted cosine ranking of database instances against a query.

Candidates are exactly the database records sharing the query's lemma
(a few thousand at most), so every query is an exact brute-force scan
of its partition: dot products accumulate in float64 over the stored
f32 vectors, which keeps rankings platform-stable and lets tests check
the engine against a naive full-sort oracle.

Ties in similarity are broken by ascending instance_id. The store's
lemma index lists candidates in that order already, so a stable sort on
descending similarity realizes the total order with no extra key.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, TypeVar

import numpy as np

from senserank.corpus import SenseInstance
from senserank.errors import ConsistencyError, NoCandidates, NoGoldInstances, QuerySkip
from senserank.store import LemmaCandidates, Store

DEFAULT_TOP_K = 50

T = TypeVar("T")

GoldLabels = Mapping[str, tuple[str, str]]
QueryItem = tuple[SenseInstance, np.ndarray]


@dataclass(frozen=True)
class RankedEntry:
    instance_id: str
    similarity: float
    is_gold: bool


@dataclass(frozen=True)
class RankedResult:
    """Top-ranked database instances for one query.

    candidate_count (N) and gold_count (g) always cover the full
    candidate set, not just the returned top_k entries.
    """

    query_id: str
    entries: tuple[RankedEntry, ...]
    candidate_count: int
    gold_count: int


@dataclass(frozen=True)
class SkippedQuery:
    query_id: str
    lemma: str
    reason: str


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two vectors, accumulated in float64, clamped to [-1, 1]."""
    a64 = np.asarray(a, dtype=np.float64).reshape(-1)
    b64 = np.asarray(b, dtype=np.float64).reshape(-1)
    if a64.shape != b64.shape:
        raise ValueError(f"dimension mismatch: {a64.shape[0]} vs {b64.shape[0]}")
    norm_a = float(np.sqrt(np.square(a64).sum()))
    norm_b = float(np.sqrt(np.square(b64).sum()))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    return float(np.clip(np.dot(a64, b64) / (norm_a * norm_b), -1.0, 1.0))


def _group_senses(
    candidates: LemmaCandidates, gold_labels: GoldLabels, lemma: str
) -> np.ndarray:
    senses = []
    missing = []
    for instance_id in candidates.instance_ids:
        label = gold_labels.get(instance_id)
        if label is None:
            missing.append(instance_id)
            continue
        if label[0] != lemma:
            raise ConsistencyError(
                f"store lists {instance_id!r} under lemma {lemma!r} but gold "
                f"labels say {label[0]!r}"
            )
        senses.append(label[1])
    if missing:
        shown = ", ".join(repr(m) for m in missing[:10])
        raise ConsistencyError(
            f"{len(missing)} candidate instance(s) missing from gold labels "
            f"(lemma {lemma!r}): {shown}"
        )
    return np.asarray(senses, dtype=np.str_)


def _rank_against_block(
    query: SenseInstance,
    query_vector: np.ndarray,
    block64: np.ndarray,
    candidates: LemmaCandidates,
    cand_senses: np.ndarray,
    query_norm_scale: np.ndarray,
    top_k: int,
) -> RankedResult:
    q64 = np.asarray(query_vector, dtype=np.float64).reshape(-1)
    if q64.shape[0] != block64.shape[1]:
        raise ValueError(
            f"query {query.instance_id!r} has dimension {q64.shape[0]}, "
            f"store has {block64.shape[1]}"
        )
    q_norm = float(np.sqrt(np.square(q64).sum()))
    if q_norm == 0.0:
        raise ValueError(f"query {query.instance_id!r} has a zero-norm embedding")

    sims = block64 @ q64
    sims /= query_norm_scale * q_norm
    np.clip(sims, -1.0, 1.0, out=sims)

    gold_mask = cand_senses == query.sense
    g = int(gold_mask.sum())
    if g == 0:
        raise NoGoldInstances(
            f"no database instance carries ({query.lemma!r}, {query.sense!r})"
        )

    n = len(candidates)
    order = np.argsort(-sims, kind="stable")[: min(top_k, n)]
    entries = tuple(
        RankedEntry(
            instance_id=candidates.instance_ids[i],
            similarity=float(sims[i]),
            is_gold=bool(gold_mask[i]),
        )
        for i in order
    )
    return RankedResult(
        query_id=query.instance_id,
        entries=entries,
        candidate_count=n,
        gold_count=g,
    )


def run_query(
    query: SenseInstance,
    query_vector: np.ndarray,
    store: Store,
    gold_labels: GoldLabels,
    top_k: int = DEFAULT_TOP_K,
) -> RankedResult:
    """Rank all same-lemma database instances by cosine to the query.

    Raises NoCandidates when the lemma is absent from the store and
    NoGoldInstances when no candidate shares the query's sense; batch
    callers record both as skips.
    """
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    candidates = store.candidates_for_lemma(query.lemma)
    if candidates is None or len(candidates) == 0:
        raise NoCandidates(f"lemma {query.lemma!r} has no instances in the store")
    cand_senses = _group_senses(candidates, gold_labels, query.lemma)
    block64 = store.take(candidates.rows).astype(np.float64)
    return _rank_against_block(
        query, query_vector, block64, candidates, cand_senses, candidates.norms, top_k
    )


def batch_evaluate(
    queries: Sequence[QueryItem],
    store: Store,
    gold_labels: GoldLabels,
    top_k: int = DEFAULT_TOP_K,
    workers: int = 1,
    transform: Callable[[RankedResult, int], T] | None = None,
) -> tuple[list, list[SkippedQuery]]:
    """Run every query, returning results in input order plus skips.

    Queries are grouped by lemma so each candidate block is gathered
    from the store once; within a group each query is ranked with the
    exact same kernel as run_query, so the output is identical to
    sequential run_query calls regardless of worker count.

    transform, when given, maps each RankedResult (with its input
    position) to what gets collected, letting callers evaluate and drop
    the full entry lists as they stream by.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")

    by_lemma: dict[str, list[int]] = {}
    for idx, (inst, _vec) in enumerate(queries):
        by_lemma.setdefault(inst.lemma, []).append(idx)

    outputs: list = [None] * len(queries)
    skip_slots: list[SkippedQuery | None] = [None] * len(queries)

    def process_group(lemma: str) -> None:
        idxs = by_lemma[lemma]
        candidates = store.candidates_for_lemma(lemma)
        if candidates is None or len(candidates) == 0:
            for idx in idxs:
                inst = queries[idx][0]
                skip_slots[idx] = SkippedQuery(
                    inst.instance_id, lemma, NoCandidates.reason
                )
            return
        cand_senses = _group_senses(candidates, gold_labels, lemma)
        block64 = store.take(candidates.rows).astype(np.float64)
        for idx in idxs:
            inst, vec = queries[idx]
            try:
                result = _rank_against_block(
                    inst, vec, block64, candidates, cand_senses, candidates.norms, top_k
                )
            except QuerySkip as skip:
                skip_slots[idx] = SkippedQuery(inst.instance_id, lemma, skip.reason)
                continue
            outputs[idx] = transform(result, idx) if transform is not None else result

    lemmas = sorted(by_lemma)
    if workers == 1:
        for lemma in lemmas:
            process_group(lemma)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # materialize to surface worker exceptions
            list(pool.map(process_group, lemmas))

    results = [out for out in outputs if out is not None]
    skipped = [skip for skip in skip_slots if skip is not None]
    return results, skipped
