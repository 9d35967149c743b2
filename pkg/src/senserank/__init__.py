"""Query-by-example retrieval over sense-annotated corpora.

The engine ranks same-lemma database occurrences by cosine similarity of
their contextualized target-token embeddings and scores each ranking by
sense agreement, reporting mean average precision per lemma/sense
frequency bucket next to an analytic random baseline and an oracle bound.
"""

__version__ = "0.1.0"

from senserank.errors import (
    ConfigurationError,
    ConsistencyError,
    DataError,
    InterchangeError,
    NoCandidates,
    NoGoldInstances,
    QuerySkip,
    SenseRankError,
    StoreCorruptError,
    StoreFormatError,
    UsageError,
    ValidationError,
)

__all__ = [
    "__version__",
    "SenseRankError",
    "UsageError",
    "ConfigurationError",
    "DataError",
    "InterchangeError",
    "ValidationError",
    "StoreFormatError",
    "StoreCorruptError",
    "ConsistencyError",
    "QuerySkip",
    "NoCandidates",
    "NoGoldInstances",
]
