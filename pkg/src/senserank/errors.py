"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: UsageError/ConfigurationError -> 1,
DataError and subclasses -> 2, anything else -> 3. Plain ValueError is
reserved for programming errors (violated function preconditions).
"""

from __future__ import annotations


class SenseRankError(Exception):
    """Base class for all package-raised errors."""


class UsageError(SenseRankError):
    """Bad command-line usage or unusable run configuration."""


class ConfigurationError(UsageError):
    """Configuration that cannot produce a runnable setup (e.g. empty D)."""


class DataError(SenseRankError):
    """Problem with input data files."""


class InterchangeError(DataError):
    """Malformed interchange corpus line."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


class ValidationError(DataError):
    """Well-formed input that violates a corpus or store invariant."""


class StoreFormatError(DataError):
    """Store file does not carry the expected magic/version/layout."""


class StoreCorruptError(DataError):
    """Store file is structurally inconsistent (e.g. truncated)."""


class ConsistencyError(DataError):
    """Corpus and store disagree about which instances exist."""


class QuerySkip(SenseRankError):
    """A single query cannot be evaluated; batches record it and move on."""

    reason = "skipped"


class NoCandidates(QuerySkip):
    """The query's lemma has no instances in the database store."""

    reason = "no-candidates"


class NoGoldInstances(QuerySkip):
    """The query's (lemma, sense) pair has no instances in the database."""

    reason = "no-gold"
