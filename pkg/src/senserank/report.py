"""Frequency-band bucketing and report emission.

Each evaluated query lands in exactly one of four buckets determined by
its lemma frequency in D (low: below the lemma threshold) and its
proportional sense frequency (rare: below the sense threshold). Values
exactly at a threshold go to the high/common side, so the bands
partition.

Reports come in three shapes: a console grid (one column per bucket),
per-bucket CSVs with baseline/oracle/model rows, and per-bucket mean
precision@k curve series for external plotting. Human-facing numbers
are percent with two decimals; machine-facing CSVs keep full float
precision. All emission is deterministic byte-for-byte for a fixed
report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from senserank.metrics import EVAL_DEPTH, QueryEvaluation

DEFAULT_LEMMA_THRESHOLD = 500
DEFAULT_SENSE_THRESHOLD = 0.25

SUMMARY_CSV_COLUMNS = (
    "corpus",
    "model",
    "ft_instances",
    "lemma_band",
    "sense_band",
    "query_count",
    "map_50",
    "recall_50",
    "baseline_map",
    "oracle_map",
)

BUCKET_CSV_COLUMNS = ("Model", "FT Instances", "Precision", "Recall")


@dataclass(frozen=True)
class BucketKey:
    lemma_band: str  # "low" | "high"
    sense_band: str  # "rare" | "common"

    @property
    def label(self) -> str:
        return f"{self.lemma_band}_{self.sense_band}"


BUCKET_ORDER = (
    BucketKey("low", "rare"),
    BucketKey("low", "common"),
    BucketKey("high", "rare"),
    BucketKey("high", "common"),
)


def assign_bucket(
    lemma_freq: int,
    sense_ratio: float,
    lemma_threshold: int = DEFAULT_LEMMA_THRESHOLD,
    sense_threshold: float = DEFAULT_SENSE_THRESHOLD,
) -> BucketKey:
    """Band a query by its (lemma frequency, sense ratio) statistics."""
    if lemma_freq < 1:
        raise ValueError(f"lemma_freq must be >= 1, got {lemma_freq}")
    if not 0.0 < sense_ratio <= 1.0:
        raise ValueError(f"sense_ratio must be in (0, 1], got {sense_ratio}")
    lemma_band = "low" if lemma_freq < lemma_threshold else "high"
    sense_band = "rare" if sense_ratio < sense_threshold else "common"
    return BucketKey(lemma_band, sense_band)


@dataclass(frozen=True)
class BucketCell:
    """Aggregated evaluation quantities for one bucket."""

    query_count: int
    mean_ap_50: float | None
    mean_recall_50: float | None
    mean_oracle_ap_50: float | None
    mean_baseline_ap_50: float | None
    mean_oracle_recall_50: float | None
    mean_baseline_recall_50: float | None
    mean_p_at_k: tuple[float | None, ...]  # k = 1..EVAL_DEPTH
    n_at_k: tuple[int, ...]  # queries contributing at each k


_EMPTY_CELL = BucketCell(
    query_count=0,
    mean_ap_50=None,
    mean_recall_50=None,
    mean_oracle_ap_50=None,
    mean_baseline_ap_50=None,
    mean_oracle_recall_50=None,
    mean_baseline_recall_50=None,
    mean_p_at_k=(None,) * EVAL_DEPTH,
    n_at_k=(0,) * EVAL_DEPTH,
)


@dataclass(frozen=True)
class BucketReport:
    """Per-bucket aggregation for one (corpus, model, fine-tune) run."""

    corpus: str
    model_label: str
    fine_tune_count: int
    lemma_threshold: int
    sense_threshold: float
    cells: dict[BucketKey, BucketCell]

    @property
    def evaluated_queries(self) -> int:
        return sum(cell.query_count for cell in self.cells.values())


def aggregate(
    evals: Sequence[QueryEvaluation],
    keys: Sequence[BucketKey],
    corpus: str = "",
    model_label: str = "",
    fine_tune_count: int = 0,
    lemma_threshold: int = DEFAULT_LEMMA_THRESHOLD,
    sense_threshold: float = DEFAULT_SENSE_THRESHOLD,
) -> BucketReport:
    """Fold per-query evaluations into bucket means.

    evals and keys are aligned; empty buckets keep count 0 and null
    means. Queries with fewer than EVAL_DEPTH candidates contribute to
    the mean curve only at the ranks they actually have.
    """
    if len(evals) != len(keys):
        raise ValueError(f"{len(evals)} evaluations but {len(keys)} bucket keys")
    grouped: dict[BucketKey, list[QueryEvaluation]] = {k: [] for k in BUCKET_ORDER}
    for ev, key in zip(evals, keys):
        grouped.setdefault(key, []).append(ev)

    cells: dict[BucketKey, BucketCell] = {}
    for key, members in grouped.items():
        if not members:
            cells[key] = _EMPTY_CELL
            continue
        count = len(members)
        mean_p, n_at_k = _mean_curve(members)
        cells[key] = BucketCell(
            query_count=count,
            mean_ap_50=_mean(ev.ap_50 for ev in members),
            mean_recall_50=_mean(ev.recall_50 for ev in members),
            mean_oracle_ap_50=_mean(ev.oracle_ap_50 for ev in members),
            mean_baseline_ap_50=_mean(ev.baseline_ap_50 for ev in members),
            mean_oracle_recall_50=_mean(ev.oracle_recall_50 for ev in members),
            mean_baseline_recall_50=_mean(ev.baseline_recall_50 for ev in members),
            mean_p_at_k=mean_p,
            n_at_k=n_at_k,
        )
    return BucketReport(
        corpus=corpus,
        model_label=model_label,
        fine_tune_count=fine_tune_count,
        lemma_threshold=lemma_threshold,
        sense_threshold=sense_threshold,
        cells=cells,
    )


def _mean(values: Iterable[float]) -> float:
    items = list(values)
    return math.fsum(items) / len(items)


def _mean_curve(
    members: Sequence[QueryEvaluation],
) -> tuple[tuple[float | None, ...], tuple[int, ...]]:
    means: list[float | None] = []
    counts: list[int] = []
    for k in range(1, EVAL_DEPTH + 1):
        points = [ev.p_at_k[k - 1] for ev in members if ev.k_eff >= k]
        counts.append(len(points))
        means.append(math.fsum(points) / len(points) if points else None)
    return tuple(means), tuple(counts)


# ---------------------------------------------------------------------------
# Emission


def _pct(value: float | None) -> str:
    return "" if value is None else f"{100.0 * value:.2f}"


def _full(value: float | None) -> str:
    return "" if value is None else repr(value)


def render_table(report: BucketReport) -> str:
    """Console grid: baseline, oracle and model rows over the four buckets."""
    lt, st = report.lemma_threshold, report.sense_threshold
    headers = [
        f"l<{lt} r<{st}",
        f"l<{lt} r>={st}",
        f"l>={lt} r<{st}",
        f"l>={lt} r>={st}",
    ]
    rows = [
        ("queries", [str(report.cells[k].query_count) for k in BUCKET_ORDER]),
        ("baseline", [_pct(report.cells[k].mean_baseline_ap_50) for k in BUCKET_ORDER]),
        ("oracle", [_pct(report.cells[k].mean_oracle_ap_50) for k in BUCKET_ORDER]),
        (
            _model_row_label(report),
            [_pct(report.cells[k].mean_ap_50) for k in BUCKET_ORDER],
        ),
    ]
    name_width = max(len(name) for name, _ in rows)
    col_widths = [
        max(len(headers[i]), *(len(r[1][i]) for r in rows)) for i in range(4)
    ]
    lines = [f"corpus: {report.corpus}" if report.corpus else "corpus: (unnamed)"]
    header_cells = "  ".join(h.rjust(w) for h, w in zip(headers, col_widths))
    lines.append(f"{'':<{name_width}}  {header_cells}")
    for name, cells in rows:
        body = "  ".join(c.rjust(w) for c, w in zip(cells, col_widths))
        lines.append(f"{name:<{name_width}}  {body}")
    return "\n".join(lines) + "\n"


def _model_row_label(report: BucketReport) -> str:
    label = report.model_label or "model"
    if report.fine_tune_count:
        label += f" (ft={report.fine_tune_count})"
    return label


def summary_csv_lines(reports: Iterable[BucketReport]) -> list[str]:
    """Machine-readable summary rows, full float precision."""
    lines = [",".join(SUMMARY_CSV_COLUMNS)]
    for report in reports:
        for key in BUCKET_ORDER:
            cell = report.cells[key]
            lines.append(
                ",".join(
                    (
                        report.corpus,
                        report.model_label,
                        str(report.fine_tune_count),
                        key.lemma_band,
                        key.sense_band,
                        str(cell.query_count),
                        _full(cell.mean_ap_50),
                        _full(cell.mean_recall_50),
                        _full(cell.mean_baseline_ap_50),
                        _full(cell.mean_oracle_ap_50),
                    )
                )
            )
    return lines


def write_summary_csv(reports: Iterable[BucketReport], path: str | Path) -> Path:
    path = Path(path)
    path.write_text("\n".join(summary_csv_lines(reports)) + "\n", encoding="utf-8")
    return path


def bucket_csv_lines(report: BucketReport, key: BucketKey) -> list[str]:
    """One bucket's rows in the baseline/oracle/model review shape."""
    cell = report.cells[key]
    lines = [",".join(BUCKET_CSV_COLUMNS)]
    lines.append(
        f"random baseline,0,{_pct(cell.mean_baseline_ap_50)},"
        f"{_pct(cell.mean_baseline_recall_50)}"
    )
    lines.append(
        f"oracle,0,{_pct(cell.mean_oracle_ap_50)},{_pct(cell.mean_oracle_recall_50)}"
    )
    lines.append(
        f"{report.model_label},{report.fine_tune_count},"
        f"{_pct(cell.mean_ap_50)},{_pct(cell.mean_recall_50)}"
    )
    return lines


def write_bucket_csvs(report: BucketReport, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for key in BUCKET_ORDER:
        path = out_dir / f"bucket_{key.label}.csv"
        path.write_text(
            "\n".join(bucket_csv_lines(report, key)) + "\n", encoding="utf-8"
        )
        written.append(path)
    return written


def curve_lines(report: BucketReport) -> list[str]:
    """Per-bucket mean precision@k series, exactly EVAL_DEPTH rows each."""
    lines = ["bucket,k,mean_p_at_k,n_queries_at_k"]
    for key in BUCKET_ORDER:
        cell = report.cells[key]
        for k in range(1, EVAL_DEPTH + 1):
            lines.append(
                f"{key.label},{k},{_full(cell.mean_p_at_k[k - 1])},{cell.n_at_k[k - 1]}"
            )
    return lines


def write_curves(report: BucketReport, path: str | Path) -> Path:
    path = Path(path)
    path.write_text("\n".join(curve_lines(report)) + "\n", encoding="utf-8")
    return path


def emit_report(
    report: BucketReport, format: str, out: str | Path | None = None
) -> str | list[Path] | Path:
    """Render a report as a console table, bucket CSVs, or curve series."""
    if format == "table":
        return render_table(report)
    if out is None:
        raise ValueError(f"format {format!r} needs an output location")
    if format == "csv":
        return write_bucket_csvs(report, out)
    if format == "curves":
        out = Path(out)
        if out.is_dir():
            out = out / "curves.csv"
        return write_curves(report, out)
    raise ValueError(f"unknown report format {format!r}")
