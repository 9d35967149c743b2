"""Command-line surface: ingest, evaluate, query, report.

Configuration comes from an optional JSON file (--config) with flag
overrides; flags win. Exit codes: 0 success, 1 usage or configuration
error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

import senserank
from senserank.corpus import (
    FilterConfig,
    SenseInstance,
    build_splits,
    load_interchange,
    save_interchange,
)
from senserank.errors import (
    ConsistencyError,
    DataError,
    QuerySkip,
    SenseRankError,
    UsageError,
)
from senserank.metrics import (
    EVAL_DEPTH,
    QueryEvaluation,
    evaluate_ranking,
    monte_carlo_random_ap_50,
)
from senserank.ranking import batch_evaluate, run_query
from senserank.report import (
    BUCKET_ORDER,
    BucketKey,
    DEFAULT_LEMMA_THRESHOLD,
    DEFAULT_SENSE_THRESHOLD,
    aggregate,
    assign_bucket,
    render_table,
    write_bucket_csvs,
    write_curves,
    write_summary_csv,
)
from senserank.store import index_path_for, open_store

EVALUATIONS_CSV = "evaluations.csv"
SUMMARY_CSV = "summary.csv"
CURVES_CSV = "curves.csv"
TABLE_TXT = "table.txt"
MANIFEST_JSON = "manifest.json"

_EVAL_BASE_COLUMNS = (
    "query_id",
    "lemma",
    "sense",
    "lemma_freq",
    "sense_ratio",
    "lemma_band",
    "sense_band",
    "n_candidates",
    "gold_count",
    "k_eff",
    "ap_50",
    "recall_50",
    "oracle_ap_50",
    "baseline_ap_50",
    "oracle_recall_50",
    "baseline_recall_50",
)
_EVAL_CURVE_COLUMNS = tuple(f"p_at_{k}" for k in range(1, EVAL_DEPTH + 1))


@dataclass
class RunConfig:
    """Resolved settings for an evaluation run."""

    corpus_path: str = ""
    store_path_d: str = ""
    store_path_q: str = ""
    min_sense_count: int = 5
    discard_sense_patterns: tuple[str, ...] = ()
    lemma_allowlist: tuple[str, ...] | None = None
    single_word_targets_only: bool = True
    lemma_threshold: int = DEFAULT_LEMMA_THRESHOLD
    sense_threshold: float = DEFAULT_SENSE_THRESHOLD
    top_k: int = EVAL_DEPTH
    out_dir: str = "out"
    corpus_label: str = ""
    model_label: str = ""
    ft_instances: int = 0
    workers: int = 1
    baseline_mode: str = "analytic"  # "monte-carlo" validates the analytic value
    mc_trials: int = 100_000
    seed: int | None = None

    def filter_config(self) -> FilterConfig:
        allow = None
        if self.lemma_allowlist is not None:
            allow = frozenset(self.lemma_allowlist)
        return FilterConfig(
            min_sense_count_in_d=self.min_sense_count,
            discard_sense_patterns=tuple(self.discard_sense_patterns),
            lemma_allowlist=allow,
            single_word_targets_only=self.single_word_targets_only,
        )

    def validate(self, eval_depth_required: bool = False) -> None:
        if self.top_k < 1:
            raise UsageError(f"top_k must be >= 1, got {self.top_k}")
        if eval_depth_required and self.top_k < EVAL_DEPTH:
            raise UsageError(
                f"top_k must be >= {EVAL_DEPTH} (the evaluation depth), got {self.top_k}"
            )
        if self.workers < 1:
            raise UsageError(f"workers must be >= 1, got {self.workers}")
        if self.baseline_mode not in ("analytic", "monte-carlo"):
            raise UsageError(f"unknown baseline mode {self.baseline_mode!r}")


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def _load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise UsageError(f"config {path} has unknown keys: {sorted(unknown)}")
    return data


def _read_allowlist(path: str) -> tuple[str, ...]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read lemma allowlist {path}: {exc}")
    return tuple(line.strip() for line in lines if line.strip())


def resolve_config(
    args: argparse.Namespace, eval_depth_required: bool = False
) -> RunConfig:
    """Builtin defaults, then config file, then explicit flags."""
    merged: dict = {}
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config))
    overrides = {
        "corpus_path": args.corpus,
        "store_path_d": getattr(args, "store_d", None),
        "store_path_q": getattr(args, "store_q", None),
        "min_sense_count": args.min_sense_count,
        "lemma_threshold": args.l_threshold,
        "sense_threshold": args.r_threshold,
        "top_k": getattr(args, "top_k", None),
        "out_dir": getattr(args, "out", None),
        "corpus_label": getattr(args, "corpus_label", None),
        "model_label": getattr(args, "model_label", None),
        "ft_instances": getattr(args, "ft_instances", None),
        "workers": getattr(args, "workers", None),
        "baseline_mode": getattr(args, "baseline_mode", None),
        "mc_trials": getattr(args, "mc_trials", None),
        "seed": getattr(args, "seed", None),
    }
    if args.discard_sense:
        overrides["discard_sense_patterns"] = tuple(args.discard_sense)
    if getattr(args, "lemma_allowlist", None):
        overrides["lemma_allowlist"] = _read_allowlist(args.lemma_allowlist)
    if getattr(args, "allow_multiword", False):
        overrides["single_word_targets_only"] = False
    merged.update({k: v for k, v in overrides.items() if v is not None})
    if "discard_sense_patterns" in merged:
        merged["discard_sense_patterns"] = tuple(merged["discard_sense_patterns"])
    if merged.get("lemma_allowlist") is not None:
        merged["lemma_allowlist"] = tuple(merged["lemma_allowlist"])
    config = RunConfig(**merged)
    config.validate(eval_depth_required=eval_depth_required)
    return config


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# ingest


def cmd_ingest(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if not config.corpus_path:
        raise UsageError("ingest needs --corpus")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    instances = load_interchange(config.corpus_path)
    split = build_splits(instances, config.filter_config())

    save_interchange(split.d, out_dir / "d.jsonl")
    save_interchange(split.q, out_dir / "q.jsonl")

    bucket_counts = {key.label: 0 for key in BUCKET_ORDER}
    for inst in split.q:
        ell = split.stats.lemma_freq_in_d[inst.lemma]
        ratio = split.stats.proportional_freq[inst.key()]
        key = assign_bucket(ell, ratio, config.lemma_threshold, config.sense_threshold)
        bucket_counts[key.label] += 1

    stats_payload = {
        "input_count": len(instances),
        "d_count": len(split.d),
        "q_count": len(split.q),
        "discarded_count": split.discarded,
        "lemma_threshold": config.lemma_threshold,
        "sense_threshold": config.sense_threshold,
        "bucket_query_counts": bucket_counts,
    }
    (out_dir / "ingest_stats.json").write_text(
        json.dumps(stats_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"ingested {len(instances)} instances: |D|={len(split.d)} |Q|={len(split.q)} "
        f"discarded={split.discarded}"
    )
    print(f"bucket query counts: {bucket_counts}")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _check_store_coverage(
    instances, store, store_name: str, require_exact: bool
) -> None:
    corpus_ids = {inst.instance_id for inst in instances}
    missing = sorted(i for i in corpus_ids if i not in store)
    if missing:
        shown = ", ".join(missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise ConsistencyError(
            f"{store_name} is missing embeddings for {len(missing)} "
            f"instance(s): {shown}{more}"
        )
    if require_exact and store.count != len(corpus_ids):
        extras = sorted(set(store.instance_ids()) - corpus_ids)
        shown = ", ".join(extras[:10])
        raise ConsistencyError(
            f"{store_name} holds {store.count - len(corpus_ids)} embedding(s) "
            f"for instances outside the database corpus: {shown}"
        )


def _evaluation_rows(evaluations, keys) -> list[list[str]]:
    rows = []
    for ev, key in zip(evaluations, keys):
        row = [
            ev.query_id,
            "",  # lemma filled by caller
            "",  # sense filled by caller
            str(ev.lemma_freq),
            repr(ev.sense_ratio),
            key.lemma_band,
            key.sense_band,
            str(ev.n_candidates),
            str(ev.g),
            str(ev.k_eff),
            repr(ev.ap_50),
            repr(ev.recall_50),
            repr(ev.oracle_ap_50),
            repr(ev.baseline_ap_50),
            repr(ev.oracle_recall_50),
            repr(ev.baseline_recall_50),
        ]
        curve = [repr(p) for p in ev.p_at_k]
        curve.extend([""] * (EVAL_DEPTH - len(curve)))
        rows.append(row + curve)
    return rows


def write_evaluations_csv(
    path: Path,
    evaluations: list[QueryEvaluation],
    keys: list[BucketKey],
    instances_by_id: dict[str, SenseInstance],
) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_EVAL_BASE_COLUMNS + _EVAL_CURVE_COLUMNS)
    rows = _evaluation_rows(evaluations, keys)
    for row, ev in zip(rows, evaluations):
        inst = instances_by_id[ev.query_id]
        row[1] = inst.lemma
        row[2] = inst.sense
        writer.writerow(row)
    path.write_text(buf.getvalue(), encoding="utf-8")


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = resolve_config(args, eval_depth_required=True)
    for field, flag in (
        ("corpus_path", "--corpus"),
        ("store_path_d", "--store-d"),
        ("store_path_q", "--store-q"),
    ):
        if not getattr(config, field):
            raise UsageError(f"evaluate needs {flag}")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    instances = load_interchange(config.corpus_path)
    split = build_splits(instances, config.filter_config())
    stats = split.stats
    gold_labels = {inst.instance_id: inst.key() for inst in split.d}

    store_d = open_store(config.store_path_d)
    store_q = open_store(config.store_path_q)
    _check_store_coverage(split.d, store_d, "database store", require_exact=True)
    _check_store_coverage(split.q, store_q, "query store", require_exact=False)

    queries = [(inst, store_q.get(inst.instance_id)) for inst in split.q]
    stat_pairs = [
        (stats.lemma_freq_in_d[inst.lemma], stats.proportional_freq[inst.key()])
        for inst in split.q
    ]

    def to_evaluation(result, idx: int) -> QueryEvaluation:
        ell, ratio = stat_pairs[idx]
        return evaluate_ranking(result, ell, ratio)

    evaluations, skipped = batch_evaluate(
        queries,
        store_d,
        gold_labels,
        top_k=config.top_k,
        workers=config.workers,
        transform=to_evaluation,
    )

    if config.baseline_mode == "monte-carlo":
        rng = np.random.default_rng(config.seed)
        evaluations = [
            dataclasses.replace(
                ev,
                baseline_ap_50=monte_carlo_random_ap_50(
                    ev.g, ev.n_candidates, config.mc_trials, rng
                ),
            )
            for ev in evaluations
        ]

    keys = [
        assign_bucket(
            ev.lemma_freq, ev.sense_ratio, config.lemma_threshold, config.sense_threshold
        )
        for ev in evaluations
    ]
    report = aggregate(
        evaluations,
        keys,
        corpus=config.corpus_label or Path(config.corpus_path).stem,
        model_label=config.model_label or "model",
        fine_tune_count=config.ft_instances,
        lemma_threshold=config.lemma_threshold,
        sense_threshold=config.sense_threshold,
    )

    instances_by_id = {inst.instance_id: inst for inst in split.q}
    write_evaluations_csv(out_dir / EVALUATIONS_CSV, evaluations, keys, instances_by_id)
    write_summary_csv([report], out_dir / SUMMARY_CSV)
    write_curves(report, out_dir / CURVES_CSV)
    write_bucket_csvs(report, out_dir / "buckets")
    table = render_table(report)
    (out_dir / TABLE_TXT).write_text(table, encoding="utf-8")

    manifest = {
        "tool": "senserank",
        "tool_version": senserank.__version__,
        "config": {
            **dataclasses.asdict(config),
            "discard_sense_patterns": list(config.discard_sense_patterns),
            "lemma_allowlist": (
                None
                if config.lemma_allowlist is None
                else sorted(config.lemma_allowlist)
            ),
        },
        "corpus_counts": {
            "input": len(instances),
            "d": len(split.d),
            "q": len(split.q),
            "discarded": split.discarded,
        },
        "store_checksums": {
            "d": file_sha256(config.store_path_d),
            "d_index": file_sha256(index_path_for(config.store_path_d)),
            "q": file_sha256(config.store_path_q),
            "q_index": file_sha256(index_path_for(config.store_path_q)),
        },
        "evaluated_queries": len(evaluations),
        "skipped_queries": [
            {"query_id": s.query_id, "lemma": s.lemma, "reason": s.reason}
            for s in skipped
        ],
        "bucket_query_counts": {
            key.label: report.cells[key].query_count for key in BUCKET_ORDER
        },
    }
    (out_dir / MANIFEST_JSON).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    print(table, end="")
    print(f"evaluated {len(evaluations)} queries, skipped {len(skipped)}")
    print(f"artifacts in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# query


def _mark_target(inst: SenseInstance) -> str:
    tokens = list(inst.tokens)
    tokens[inst.target_index] = f"**{tokens[inst.target_index]}**"
    return " ".join(tokens)


def cmd_query(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    for field, flag in (
        ("corpus_path", "--corpus"),
        ("store_path_d", "--store-d"),
        ("store_path_q", "--store-q"),
    ):
        if not getattr(config, field):
            raise UsageError(f"query needs {flag}")

    instances = load_interchange(config.corpus_path)
    split = build_splits(instances, config.filter_config())
    by_id_q = {inst.instance_id: inst for inst in split.q}
    inst = by_id_q.get(args.id)
    if inst is None:
        raise DataError(f"instance {args.id!r} is not in the query set Q")

    store_d = open_store(config.store_path_d)
    store_q = open_store(config.store_path_q)
    if args.id not in store_q:
        raise ConsistencyError(f"query store has no embedding for {args.id!r}")

    gold_labels = {i.instance_id: i.key() for i in split.d}
    d_by_id = {i.instance_id: i for i in split.d}
    try:
        result = run_query(
            inst, store_q.get(args.id), store_d, gold_labels, top_k=args.top_k
        )
    except QuerySkip as skip:
        raise DataError(f"query {args.id!r} cannot be ranked: {skip}")

    ell = split.stats.lemma_freq_in_d.get(inst.lemma, 0)
    ratio = split.stats.proportional_freq.get(inst.key(), 0.0)
    print(
        f"query {inst.instance_id} [{inst.lemma}/{inst.sense}] "
        f"(l={ell}, r={ratio:.4f}, g={result.gold_count}, N={result.candidate_count})"
    )
    print(f"  {_mark_target(inst)}")
    for rank, entry in enumerate(result.entries, start=1):
        db_inst = d_by_id[entry.instance_id]
        mark = "*" if entry.is_gold else " "
        print(
            f"{rank:3d} {mark} [{db_inst.sense}] {entry.similarity:+.4f}  "
            f"{_mark_target(db_inst)}"
        )
    return 0


# ---------------------------------------------------------------------------
# report (re-render saved evaluations)


def _read_evaluations_csv(path: Path) -> tuple[list[QueryEvaluation], list[str]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read evaluations {path}: {exc}")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{path}: empty evaluations file")
    expected = list(_EVAL_BASE_COLUMNS + _EVAL_CURVE_COLUMNS)
    if header != expected:
        raise DataError(f"{path}: unexpected evaluations header")
    evaluations = []
    lemmas = []
    for row in reader:
        base = dict(zip(_EVAL_BASE_COLUMNS, row))
        k_eff = int(base["k_eff"])
        curve = tuple(float(v) for v in row[len(_EVAL_BASE_COLUMNS):][:k_eff])
        evaluations.append(
            QueryEvaluation(
                query_id=base["query_id"],
                p_at_k=curve,
                ap_50=float(base["ap_50"]),
                recall_50=float(base["recall_50"]),
                oracle_ap_50=float(base["oracle_ap_50"]),
                baseline_ap_50=float(base["baseline_ap_50"]),
                oracle_recall_50=float(base["oracle_recall_50"]),
                baseline_recall_50=float(base["baseline_recall_50"]),
                g=int(base["gold_count"]),
                n_candidates=int(base["n_candidates"]),
                k_eff=k_eff,
                lemma_freq=int(base["lemma_freq"]),
                sense_ratio=float(base["sense_ratio"]),
            )
        )
        lemmas.append(base["lemma"])
    return evaluations, lemmas


def cmd_report(args: argparse.Namespace) -> int:
    evaluations, _ = _read_evaluations_csv(Path(args.evaluations))
    lemma_threshold = args.l_threshold if args.l_threshold is not None else DEFAULT_LEMMA_THRESHOLD
    sense_threshold = args.r_threshold if args.r_threshold is not None else DEFAULT_SENSE_THRESHOLD
    keys = [
        assign_bucket(ev.lemma_freq, ev.sense_ratio, lemma_threshold, sense_threshold)
        for ev in evaluations
    ]
    report = aggregate(
        evaluations,
        keys,
        corpus=args.corpus_label or "",
        model_label=args.model_label or "model",
        fine_tune_count=args.ft_instances or 0,
        lemma_threshold=lemma_threshold,
        sense_threshold=sense_threshold,
    )
    if args.format == "table":
        print(render_table(report), end="")
        return 0
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        paths = write_bucket_csvs(report, out_dir)
        print("\n".join(str(p) for p in paths))
    elif args.format == "curves":
        path = write_curves(report, out_dir / CURVES_CSV)
        print(str(path))
    elif args.format == "summary":
        path = write_summary_csv([report], out_dir / SUMMARY_CSV)
        print(str(path))
    else:
        raise UsageError(f"unknown report format {args.format!r}")
    return 0


# ---------------------------------------------------------------------------
# parser and entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _add_common_flags(sub: argparse.ArgumentParser, with_stores: bool) -> None:
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--corpus", help="interchange corpus (JSON Lines)")
    if with_stores:
        sub.add_argument("--store-d", dest="store_d", help="database embedding store")
        sub.add_argument("--store-q", dest="store_q", help="query embedding store")
    sub.add_argument("--min-sense-count", dest="min_sense_count", type=int)
    sub.add_argument(
        "--discard-sense",
        dest="discard_sense",
        action="append",
        metavar="GLOB",
        help="drop instances whose sense label matches (repeatable)",
    )
    sub.add_argument(
        "--lemma-allowlist",
        dest="lemma_allowlist",
        metavar="FILE",
        help="file with one allowed lemma per line",
    )
    sub.add_argument(
        "--allow-multiword",
        dest="allow_multiword",
        action="store_true",
        help="keep targets/lemmas containing whitespace",
    )
    sub.add_argument("--l-threshold", dest="l_threshold", type=int)
    sub.add_argument("--r-threshold", dest="r_threshold", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="senserank", description=__doc__)
    parser.add_argument(
        "--version", action="version", version=f"senserank {senserank.__version__}"
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_ingest = subs.add_parser("ingest", help="filter a corpus into D/Q files")
    _add_common_flags(p_ingest, with_stores=False)
    p_ingest.add_argument("--out", help="output directory")
    p_ingest.set_defaults(func=cmd_ingest)

    p_eval = subs.add_parser("evaluate", help="run and score every query in Q")
    _add_common_flags(p_eval, with_stores=True)
    p_eval.add_argument("--top-k", dest="top_k", type=int)
    p_eval.add_argument("--workers", type=int)
    p_eval.add_argument("--out", help="output directory")
    p_eval.add_argument("--corpus-label", dest="corpus_label")
    p_eval.add_argument("--model-label", dest="model_label")
    p_eval.add_argument("--ft-instances", dest="ft_instances", type=int)
    p_eval.add_argument(
        "--baseline-mode", dest="baseline_mode", choices=("analytic", "monte-carlo")
    )
    p_eval.add_argument("--mc-trials", dest="mc_trials", type=int)
    p_eval.add_argument("--seed", type=int)
    p_eval.set_defaults(func=cmd_evaluate)

    p_query = subs.add_parser("query", help="inspect one query's ranked results")
    _add_common_flags(p_query, with_stores=True)
    p_query.add_argument("--id", required=True, help="query instance id")
    p_query.add_argument("--top-k", dest="top_k", type=int, default=EVAL_DEPTH)
    p_query.set_defaults(func=cmd_query)

    p_report = subs.add_parser("report", help="re-render saved evaluations")
    p_report.add_argument("--evaluations", required=True, help="evaluations.csv path")
    p_report.add_argument(
        "--format", required=True, choices=("table", "csv", "curves", "summary")
    )
    p_report.add_argument("--out", help="output directory")
    p_report.add_argument("--l-threshold", dest="l_threshold", type=int)
    p_report.add_argument("--r-threshold", dest="r_threshold", type=float)
    p_report.add_argument("--corpus-label", dest="corpus_label")
    p_report.add_argument("--model-label", dest="model_label")
    p_report.add_argument("--ft-instances", dest="ft_instances", type=int)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SenseRankError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
