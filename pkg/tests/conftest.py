from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from senserank.corpus import SenseInstance


def make_instance(
    instance_id: str,
    lemma: str = "pull",
    sense: str = "pull.1",
    split: str = "train",
    tokens: tuple[str, ...] | None = None,
    target_index: int = 1,
    sentence_id: str | None = None,
) -> SenseInstance:
    return SenseInstance(
        instance_id=instance_id,
        sentence_id=sentence_id or f"sent-{instance_id}",
        tokens=tokens or ("we", lemma, "it"),
        target_index=target_index,
        lemma=lemma,
        sense=sense,
        split=split,
    )


def write_corpus(path: Path, records: list[dict]) -> Path:
    path.write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records),
        encoding="utf-8",
    )
    return path


def corpus_record(
    instance_id: str,
    lemma: str = "pull",
    sense: str = "pull.1",
    split: str = "train",
    tokens: list[str] | None = None,
    target_index: int = 1,
    **extra,
) -> dict:
    record = {
        "instance_id": instance_id,
        "sentence_id": f"sent-{instance_id}",
        "split": split,
        "lemma": lemma,
        "sense": sense,
        "target_index": target_index,
        "tokens": tokens or ["we", lemma, "it"],
    }
    record.update(extra)
    return record


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240)
