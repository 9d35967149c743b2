"""Synthetic corpora with planted cluster structure.

Each (lemma, sense) pair gets a Gaussian cluster: a random center whose
scale is `separation` times the within-cluster standard deviation, so
embeddings are trivially retrievable when clusters are used and
uninformative when replaced by i.i.d. noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from senserank.corpus import SenseInstance


@dataclass(frozen=True)
class PlantedSpec:
    n_low_lemmas: int = 25
    n_high_lemmas: int = 25
    low_sense_counts: tuple[int, ...] = (20, 10, 5, 5)  # lemma freq 40
    high_sense_counts: tuple[int, ...] = (300, 150, 75, 75)  # lemma freq 600
    queries_per_sense: int = 4  # half dev, half test
    dim: int = 32
    within_std: float = 1.0
    separation: float = 10.0


def _instance(instance_id: str, lemma: str, sense: str, split: str) -> SenseInstance:
    return SenseInstance(
        instance_id=instance_id,
        sentence_id=f"sent-{instance_id}",
        tokens=("they", lemma, "daily"),
        target_index=1,
        lemma=lemma,
        sense=sense,
        split=split,
    )


def build_planted_corpus(spec: PlantedSpec = PlantedSpec()) -> list[SenseInstance]:
    """Instances for every lemma band, sense and split; ids are stable."""
    instances: list[SenseInstance] = []
    bands = [("low", spec.n_low_lemmas, spec.low_sense_counts),
             ("high", spec.n_high_lemmas, spec.high_sense_counts)]
    for band, n_lemmas, counts in bands:
        for li in range(n_lemmas):
            lemma = f"{band}{li:03d}"
            for si, count in enumerate(counts):
                sense = f"{lemma}.s{si}"
                for j in range(count):
                    instances.append(
                        _instance(f"d-{lemma}-s{si}-{j:04d}", lemma, sense, "train")
                    )
                for j in range(spec.queries_per_sense):
                    split = "dev" if j % 2 == 0 else "test"
                    instances.append(
                        _instance(f"q-{lemma}-s{si}-{j:02d}", lemma, sense, split)
                    )
    return instances


def cluster_vectors(
    instances: list[SenseInstance], spec: PlantedSpec, seed: int
) -> dict[str, np.ndarray]:
    """One embedding per instance, drawn from its (lemma, sense) cluster."""
    rng = np.random.default_rng(seed)
    centers: dict[tuple[str, str], np.ndarray] = {}
    for inst in instances:
        if inst.key() not in centers:
            centers[inst.key()] = rng.normal(
                size=spec.dim, scale=spec.separation * spec.within_std
            )
    vectors = {}
    for inst in instances:
        point = centers[inst.key()] + rng.normal(size=spec.dim, scale=spec.within_std)
        vectors[inst.instance_id] = point.astype(np.float32)
    return vectors


def noise_vectors(
    instances: list[SenseInstance], dim: int, seed: int
) -> dict[str, np.ndarray]:
    """I.i.d. standard normal embeddings, ignoring all structure."""
    rng = np.random.default_rng(seed)
    return {
        inst.instance_id: rng.normal(size=dim).astype(np.float32)
        for inst in instances
    }
