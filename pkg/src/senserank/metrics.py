"""Ranking-quality metrics for lemma-restricted retrieval.

The headline metric averages precision@k over every cutoff k = 1..K,
K = min(50, N): it rewards any gold instance retrieved early, not only
those at gold ranks. That differs from conventional IR average
precision, which is provided separately (standard_ap_50) for
comparability but never used in reports.

Two analytic companions make scores interpretable per query:

  oracle_ap_50(g, N)           the score of a perfect ranking, below 1.0
                               whenever fewer than K gold instances exist;
  expected_random_ap_50(g, N)  the exact expectation under a uniformly
                               random ranking. Every rank position is gold
                               with probability g/N, so E[P@k] = g/N for
                               all k and the expectation collapses to g/N.

A seeded Monte Carlo estimator is kept for validating the analytic
baseline; it is never the reported number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EVAL_DEPTH = 50


def _k_eff(n_candidates: int) -> int:
    return min(EVAL_DEPTH, n_candidates)


def precision_at_k(hits: Sequence[bool], k: int) -> float:
    """Fraction of the first k results that are gold."""
    if not 1 <= k <= len(hits):
        raise ValueError(f"k must be in 1..{len(hits)}, got {k}")
    return sum(1 for h in hits[:k] if h) / k


def _p_at_k_curve(hits: Sequence[bool], k_eff: int) -> np.ndarray:
    flags = np.asarray(hits[:k_eff], dtype=np.float64)
    return np.cumsum(flags) / np.arange(1, k_eff + 1, dtype=np.float64)


def average_precision_50(hits: Sequence[bool], n_candidates: int) -> float:
    """Mean of precision@k over k = 1..min(50, N).

    hits is the gold/non-gold flag sequence of a ranking, best first,
    and must cover at least min(50, N) positions.
    """
    if n_candidates < 1:
        raise ValueError(f"n_candidates must be >= 1, got {n_candidates}")
    k_eff = _k_eff(n_candidates)
    if len(hits) < k_eff:
        raise ValueError(
            f"need at least {k_eff} ranked flags for N={n_candidates}, got {len(hits)}"
        )
    return float(_p_at_k_curve(hits, k_eff).mean())


def oracle_ap_50(g: int, n_candidates: int) -> float:
    """Score of the perfect ranking: all g gold instances first.

    P@k under that ranking is min(g, k) / k, so the mean over k = 1..K
    is below 1.0 whenever g < K.
    """
    _check_g_n(g, n_candidates)
    k_eff = _k_eff(n_candidates)
    ks = np.arange(1, k_eff + 1, dtype=np.float64)
    return float((np.minimum(g, ks) / ks).mean())


def expected_random_ap_50(g: int, n_candidates: int) -> float:
    """Exact expectation of average_precision_50 under a random ranking."""
    _check_g_n(g, n_candidates)
    return g / n_candidates


def recall_at_50(hits: Sequence[bool], g: int) -> float:
    """Fraction of all g gold instances appearing in the top min(50, N).

    hits must be the ranking flags truncated no shorter than min(50, N).
    """
    if g < 1:
        raise ValueError(f"g must be >= 1, got {g}")
    k_eff = min(EVAL_DEPTH, len(hits))
    retrieved = sum(1 for h in hits[:k_eff] if h)
    return retrieved / g


def oracle_recall_50(g: int, n_candidates: int) -> float:
    """Recall of the perfect ranking: min(g, K) of g gold retrieved."""
    _check_g_n(g, n_candidates)
    return min(g, _k_eff(n_candidates)) / g


def expected_random_recall_50(g: int, n_candidates: int) -> float:
    """Expected recall under a random ranking: K/N of the gold mass."""
    _check_g_n(g, n_candidates)
    return _k_eff(n_candidates) / n_candidates


def standard_ap_50(hits: Sequence[bool], g: int) -> float:
    """Conventional IR average precision truncated at 50.

    Averages precision only at gold ranks, normalized by the total gold
    count g. Secondary output for cross-paper comparability; the
    reporting pipeline never uses it.
    """
    if g < 1:
        raise ValueError(f"g must be >= 1, got {g}")
    k_eff = min(EVAL_DEPTH, len(hits))
    total = 0.0
    seen = 0
    for k in range(1, k_eff + 1):
        if hits[k - 1]:
            seen += 1
            total += seen / k
    return total / g


def monte_carlo_random_ap_50(
    g: int, n_candidates: int, trials: int, rng: np.random.Generator
) -> float:
    """Estimate the random-ranking AP by sampling permutations.

    Validation tool for expected_random_ap_50 only.
    """
    mean, _ = monte_carlo_random_ap_50_stats(g, n_candidates, trials, rng)
    return mean


def monte_carlo_random_ap_50_stats(
    g: int, n_candidates: int, trials: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo mean and its standard error, sampled in bounded chunks."""
    _check_g_n(g, n_candidates)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    k_eff = _k_eff(n_candidates)
    ks = np.arange(1, k_eff + 1, dtype=np.float64)
    base = np.zeros(n_candidates, dtype=np.float64)
    base[:g] = 1.0
    chunk = max(1, 2_000_000 // n_candidates)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        flags = np.tile(base, (t, 1))
        rng.permuted(flags, axis=1, out=flags)
        p_at_k = np.cumsum(flags[:, :k_eff], axis=1) / ks
        ap = p_at_k.mean(axis=1)
        total += float(ap.sum())
        total_sq += float(np.square(ap).sum())
        done += t
    mean = total / trials
    variance = max(0.0, total_sq / trials - mean * mean)
    std_error = math.sqrt(variance / trials)
    return mean, std_error


def _check_g_n(g: int, n_candidates: int) -> None:
    if n_candidates < 1:
        raise ValueError(f"n_candidates must be >= 1, got {n_candidates}")
    if not 1 <= g <= n_candidates:
        raise ValueError(f"g must be in 1..{n_candidates}, got {g}")


@dataclass(frozen=True)
class QueryEvaluation:
    """All evaluation quantities for one executed query."""

    query_id: str
    p_at_k: tuple[float, ...]  # k = 1..k_eff
    ap_50: float
    recall_50: float
    oracle_ap_50: float
    baseline_ap_50: float
    oracle_recall_50: float
    baseline_recall_50: float
    g: int
    n_candidates: int
    k_eff: int
    lemma_freq: int  # the query lemma's frequency in D
    sense_ratio: float  # proportional frequency of the query's sense


def evaluate_ranking(result, lemma_freq: int, sense_ratio: float) -> QueryEvaluation:
    """Score one RankedResult against its gold flags.

    result must carry at least min(50, N) entries; run queries with
    top_k >= 50 when they feed evaluation.
    """
    n = result.candidate_count
    g = result.gold_count
    _check_g_n(g, n)
    k_eff = _k_eff(n)
    if len(result.entries) < k_eff:
        raise ValueError(
            f"{result.query_id}: ranking has {len(result.entries)} entries, "
            f"evaluation needs {k_eff}"
        )
    hits = [entry.is_gold for entry in result.entries[:k_eff]]
    curve = _p_at_k_curve(hits, k_eff)
    return QueryEvaluation(
        query_id=result.query_id,
        p_at_k=tuple(float(p) for p in curve),
        ap_50=float(curve.mean()),
        recall_50=recall_at_50(hits, g),
        oracle_ap_50=oracle_ap_50(g, n),
        baseline_ap_50=expected_random_ap_50(g, n),
        oracle_recall_50=oracle_recall_50(g, n),
        baseline_recall_50=expected_random_recall_50(g, n),
        g=g,
        n_candidates=n,
        k_eff=k_eff,
        lemma_freq=lemma_freq,
        sense_ratio=sense_ratio,
    )
