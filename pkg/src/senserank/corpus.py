"""Interchange representation of sense-annotated corpora and D/Q split logic.

A corpus is a JSON Lines file, one instance per line, with fixed field
names: instance_id, sentence_id, split, lemma, sense, target_index,
tokens. Extra fields are ignored. The engine never parses raw corpus
releases; converters produce this format upstream.

The database set D is the surviving train split; the query set Q is the
surviving dev+test splits, additionally restricted to senses with at
least ``min_sense_count_in_d`` occurrences in D.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from senserank.errors import ConfigurationError, InterchangeError, ValidationError

SPLITS = ("train", "dev", "test")

_REQUIRED_FIELDS = (
    "instance_id",
    "sentence_id",
    "split",
    "lemma",
    "sense",
    "target_index",
    "tokens",
)


@dataclass(frozen=True)
class SenseInstance:
    """One target token in sentence context, with its gold sense label."""

    instance_id: str
    sentence_id: str
    tokens: tuple[str, ...]
    target_index: int
    lemma: str
    sense: str
    split: str

    def __post_init__(self) -> None:
        if not self.instance_id:
            raise ValidationError("instance_id must be non-empty")
        if not self.lemma:
            raise ValidationError(f"{self.instance_id}: lemma must be non-empty")
        if not self.sense:
            raise ValidationError(f"{self.instance_id}: sense must be non-empty")
        if self.split not in SPLITS:
            raise ValidationError(
                f"{self.instance_id}: split must be one of {SPLITS}, got {self.split!r}"
            )
        if not self.tokens:
            raise ValidationError(f"{self.instance_id}: tokens must be non-empty")
        if not 0 <= self.target_index < len(self.tokens):
            raise ValidationError(
                f"{self.instance_id}: target_index {self.target_index} outside "
                f"0..{len(self.tokens) - 1}"
            )

    @property
    def target_token(self) -> str:
        return self.tokens[self.target_index]

    def key(self) -> tuple[str, str]:
        """The (lemma, sense) pair used for gold matching."""
        return (self.lemma, self.sense)


@dataclass(frozen=True)
class FilterConfig:
    """Corpus filtering rules applied when building D and Q.

    discard_sense_patterns are glob patterns matched case-sensitively
    against the sense label; matching instances are dropped everywhere
    (catch-all "none of the above" labels vary by corpus release, so
    they are configuration, not code).
    """

    min_sense_count_in_d: int = 5
    discard_sense_patterns: tuple[str, ...] = ()
    lemma_allowlist: frozenset[str] | None = None
    single_word_targets_only: bool = True

    def __post_init__(self) -> None:
        if self.min_sense_count_in_d < 1:
            raise ConfigurationError(
                f"min_sense_count_in_d must be >= 1, got {self.min_sense_count_in_d}"
            )

    def discards_sense(self, sense: str) -> bool:
        return any(fnmatchcase(sense, pat) for pat in self.discard_sense_patterns)


@dataclass(frozen=True)
class CorpusStats:
    """Lemma and sense frequencies over the final database set D."""

    lemma_freq_in_d: Mapping[str, int]
    sense_freq_in_d: Mapping[tuple[str, str], int]
    proportional_freq: Mapping[tuple[str, str], float]

    def has_lemma(self, lemma: str) -> bool:
        return lemma in self.lemma_freq_in_d


@dataclass(frozen=True)
class SplitResult:
    """Outcome of build_splits: D, Q, stats, and the discard tally."""

    d: tuple[SenseInstance, ...]
    q: tuple[SenseInstance, ...]
    stats: CorpusStats
    discarded: int = field(default=0)


def _instance_from_record(record: dict, path: str | None, line: int) -> SenseInstance:
    for name in _REQUIRED_FIELDS:
        if name not in record:
            raise InterchangeError(f"missing field {name!r}", path, line)
    tokens = record["tokens"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise InterchangeError("tokens must be an array of strings", path, line)
    if not isinstance(record["target_index"], int) or isinstance(
        record["target_index"], bool
    ):
        raise InterchangeError("target_index must be an integer", path, line)
    try:
        return SenseInstance(
            instance_id=str(record["instance_id"]),
            sentence_id=str(record["sentence_id"]),
            tokens=tuple(tokens),
            target_index=record["target_index"],
            lemma=str(record["lemma"]),
            sense=str(record["sense"]),
            split=str(record["split"]),
        )
    except ValidationError as exc:
        raise InterchangeError(str(exc), path, line) from exc


def load_interchange(path: str | Path) -> list[SenseInstance]:
    """Read a JSON Lines corpus file, preserving record order.

    Raises InterchangeError with the 1-based line number for malformed
    lines, ValidationError for duplicate instance_ids.
    """
    path = Path(path)
    instances: list[SenseInstance] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise InterchangeError(f"invalid JSON ({exc.msg})", str(path), lineno)
            if not isinstance(record, dict):
                raise InterchangeError("record must be a JSON object", str(path), lineno)
            inst = _instance_from_record(record, str(path), lineno)
            if inst.instance_id in seen:
                raise ValidationError(
                    f"duplicate instance_id {inst.instance_id!r} at {path}:line {lineno}"
                )
            seen.add(inst.instance_id)
            instances.append(inst)
    return instances


def save_interchange(instances: Iterable[SenseInstance], path: str | Path) -> None:
    """Write instances as JSON Lines with a fixed field order."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for inst in instances:
            record = {
                "instance_id": inst.instance_id,
                "sentence_id": inst.sentence_id,
                "split": inst.split,
                "lemma": inst.lemma,
                "sense": inst.sense,
                "target_index": inst.target_index,
                "tokens": list(inst.tokens),
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _is_single_word(inst: SenseInstance) -> bool:
    # Multi-word targets reach the interchange as one whitespace-joined token
    # or lemma; gold single-word targets contain neither.
    return not any(ch.isspace() for ch in inst.target_token) and not any(
        ch.isspace() for ch in inst.lemma
    )


def _passes_base_filters(inst: SenseInstance, config: FilterConfig) -> bool:
    if config.discards_sense(inst.sense):
        return False
    if config.lemma_allowlist is not None and inst.lemma not in config.lemma_allowlist:
        return False
    if config.single_word_targets_only and not _is_single_word(inst):
        return False
    return True


def compute_stats(d_instances: Sequence[SenseInstance]) -> CorpusStats:
    """Tally lemma and (lemma, sense) frequencies over D."""
    lemma_freq = Counter(inst.lemma for inst in d_instances)
    sense_freq = Counter(inst.key() for inst in d_instances)
    proportional = {
        key: count / lemma_freq[key[0]] for key, count in sense_freq.items()
    }
    return CorpusStats(
        lemma_freq_in_d=dict(lemma_freq),
        sense_freq_in_d=dict(sense_freq),
        proportional_freq=proportional,
    )


def build_splits(
    instances: Sequence[SenseInstance], config: FilterConfig
) -> SplitResult:
    """Apply the filtering rules and divide the corpus into D and Q.

    D is every surviving train instance. Q is every surviving dev/test
    instance whose (lemma, sense) occurs at least min_sense_count_in_d
    times in D. Discarded-sense, allowlist and single-word filters apply
    everywhere before the split. Stats are computed over the final D.
    """
    survivors = [inst for inst in instances if _passes_base_filters(inst, config)]
    d = tuple(inst for inst in survivors if inst.split == "train")
    if not d:
        raise ConfigurationError("empty D after filtering")
    q_pool = [inst for inst in survivors if inst.split in ("dev", "test")]
    stats = compute_stats(d)
    q = tuple(
        inst
        for inst in q_pool
        if stats.sense_freq_in_d.get(inst.key(), 0) >= config.min_sense_count_in_d
    )
    discarded = len(instances) - len(d) - len(q)
    return SplitResult(d=d, q=q, stats=stats, discarded=discarded)


def lemma_stats_for_query(
    q: SenseInstance, stats: CorpusStats
) -> tuple[int, float]:
    """Return (lemma frequency in D, proportional sense frequency) for a query.

    Raises NoCandidates when the lemma never occurs in D; callers treat
    that as a recorded skip, not a fatal error.
    """
    from senserank.errors import NoCandidates

    if q.lemma not in stats.lemma_freq_in_d:
        raise NoCandidates(f"lemma {q.lemma!r} has no instances in D")
    ell = stats.lemma_freq_in_d[q.lemma]
    ratio = stats.proportional_freq.get(q.key(), 0.0)
    return ell, ratio
