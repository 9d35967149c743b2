"""Memory-mapped store of fixed-dimension f32 vectors keyed by instance id.

Two files per store (byte-exact layout in FORMAT.md at the repo root):

  <path>       header {magic "CWESTORE", u32 version=1, u32 d, u64 count},
               count records of d little-endian f32, then a string table
               of (u32 len + UTF-8 id, u32 len + UTF-8 lemma) per record
               in write order.
  <path>.idx   sidecar lemma index {magic "CWESIDX1", u32 version=1,
               u32 d, u64 count, u64 main_file_size, u64 lemma_count,
               then per lemma (sorted): name, record count, and
               (u64 row, f64 norm, u32 len + UTF-8 id) triples sorted
               ascending by instance id}.

The sidecar is fully rebuildable from the main file (rebuild_index).
Vectors are stored as given, never pre-normalized; Euclidean norms of
the float64 upcast are cached in the index so cosine needs one dot
product per candidate. Opening reads header and index only; vector
bytes are memory-mapped and touched on demand. A store is immutable
once built and a handle is safe to share across threads.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from senserank.errors import StoreCorruptError, StoreFormatError, ValidationError

MAGIC = b"CWESTORE"
INDEX_MAGIC = b"CWESIDX1"
FORMAT_VERSION = 1
MAX_DIMENSION = 8192

_HEADER = struct.Struct("<8sIIQ")  # magic, version, dimension, count
_INDEX_HEADER = struct.Struct("<8sIIQQQ")  # magic, version, d, count, main size, lemmas
_U32 = struct.Struct("<I")
_ROW_NORM = struct.Struct("<Qd")

_VECTOR_OFFSET = _HEADER.size  # 24


def _norms_f64(matrix: np.ndarray) -> np.ndarray:
    """Canonical per-row Euclidean norm: float64 square-sum then sqrt."""
    m = matrix.astype(np.float64, copy=False)
    return np.sqrt(np.square(m).sum(axis=1))


def index_path_for(path: str | Path) -> Path:
    return Path(str(path) + ".idx")


@dataclass(frozen=True)
class LemmaCandidates:
    """All database records sharing one lemma, ascending by instance id."""

    lemma: str
    instance_ids: tuple[str, ...]
    rows: np.ndarray  # int64 record indices into the vector region
    norms: np.ndarray  # float64 cached Euclidean norms

    def __len__(self) -> int:
        return len(self.instance_ids)


def build_store(
    records: Iterable[tuple[str, str, np.ndarray]],
    dimension: int,
    path: str | Path,
) -> int:
    """Write a store (main file + sidecar index) and return the record count.

    records yields (instance_id, lemma, vector). Vectors are converted to
    little-endian f32; any dimension mismatch, non-finite component or
    zero norm fails the build, naming the offending instance_id.
    """
    if not 1 <= dimension <= MAX_DIMENSION:
        raise ValidationError(
            f"dimension must be in 1..{MAX_DIMENSION}, got {dimension}"
        )
    path = Path(path)
    ids: list[str] = []
    lemmas: list[str] = []
    norms: list[float] = []
    seen: set[str] = set()

    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dimension, 0))
        for instance_id, lemma, vector in records:
            if not instance_id:
                raise ValidationError("empty instance_id in store input")
            if not lemma:
                raise ValidationError(f"{instance_id}: empty lemma in store input")
            if instance_id in seen:
                raise ValidationError(f"duplicate instance_id {instance_id!r}")
            vec = np.asarray(vector, dtype="<f4").reshape(-1)
            if vec.shape[0] != dimension:
                raise ValidationError(
                    f"{instance_id}: vector has dimension {vec.shape[0]}, "
                    f"store expects {dimension}"
                )
            if not np.isfinite(vec).all():
                raise ValidationError(f"{instance_id}: vector has non-finite components")
            norm = float(_norms_f64(vec.reshape(1, -1))[0])
            if norm == 0.0:
                raise ValidationError(f"{instance_id}: vector has zero norm")
            fh.write(vec.tobytes())
            seen.add(instance_id)
            ids.append(instance_id)
            lemmas.append(lemma)
            norms.append(norm)

        for instance_id, lemma in zip(ids, lemmas):
            id_bytes = instance_id.encode("utf-8")
            lemma_bytes = lemma.encode("utf-8")
            fh.write(_U32.pack(len(id_bytes)))
            fh.write(id_bytes)
            fh.write(_U32.pack(len(lemma_bytes)))
            fh.write(lemma_bytes)

        fh.seek(0)
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dimension, len(ids)))

    _write_index(path, dimension, ids, lemmas, norms)
    return len(ids)


def _write_index(
    path: Path,
    dimension: int,
    ids: list[str],
    lemmas: list[str],
    norms: list[float],
) -> None:
    by_lemma: dict[str, list[int]] = {}
    for row, lemma in enumerate(lemmas):
        by_lemma.setdefault(lemma, []).append(row)

    main_size = os.path.getsize(path)
    buf = io.BytesIO()
    buf.write(
        _INDEX_HEADER.pack(
            INDEX_MAGIC, FORMAT_VERSION, dimension, len(ids), main_size, len(by_lemma)
        )
    )
    for lemma in sorted(by_lemma):
        rows = sorted(by_lemma[lemma], key=lambda r: ids[r])
        lemma_bytes = lemma.encode("utf-8")
        buf.write(_U32.pack(len(lemma_bytes)))
        buf.write(lemma_bytes)
        buf.write(struct.pack("<Q", len(rows)))
        for row in rows:
            buf.write(_ROW_NORM.pack(row, norms[row]))
            id_bytes = ids[row].encode("utf-8")
            buf.write(_U32.pack(len(id_bytes)))
            buf.write(id_bytes)
    index_path_for(path).write_bytes(buf.getvalue())


def rebuild_index(path: str | Path, chunk_rows: int = 4096) -> None:
    """Regenerate the sidecar index from the main file alone."""
    path = Path(path)
    dimension, count = _read_main_header(path)
    ids: list[str] = []
    lemmas: list[str] = []
    for instance_id, lemma, _row in _scan_string_table(path, count):
        ids.append(instance_id)
        lemmas.append(lemma)

    norms: list[float] = []
    vectors = _map_vectors(path, dimension, count)
    for start in range(0, count, chunk_rows):
        chunk = np.asarray(vectors[start : start + chunk_rows])
        norms.extend(float(x) for x in _norms_f64(chunk))
    del vectors
    _write_index(path, dimension, ids, lemmas, norms)


def _read_main_header(path: Path) -> tuple[int, int]:
    try:
        with path.open("rb") as fh:
            raw = fh.read(_HEADER.size)
    except OSError as exc:
        raise StoreFormatError(f"cannot read store {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise StoreCorruptError(f"{path}: file shorter than the store header")
    magic, version, dimension, count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise StoreFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise StoreFormatError(f"{path}: unsupported format version {version}")
    if not 1 <= dimension <= MAX_DIMENSION:
        raise StoreFormatError(f"{path}: dimension {dimension} out of range")
    min_size = _VECTOR_OFFSET + count * dimension * 4
    if os.path.getsize(path) < min_size:
        raise StoreCorruptError(
            f"{path}: {os.path.getsize(path)} bytes is too short for "
            f"{count} records of dimension {dimension}"
        )
    return dimension, count


def _map_vectors(path: Path, dimension: int, count: int) -> np.ndarray:
    if count == 0:
        return np.empty((0, dimension), dtype="<f4")
    return np.memmap(
        path, dtype="<f4", mode="r", offset=_VECTOR_OFFSET, shape=(count, dimension)
    )


def _scan_string_table(path: Path, count: int) -> Iterator[tuple[str, str, int]]:
    """Yield (instance_id, lemma, row) from the main-file string table."""

    def read_string(fh) -> str:
        raw_len = fh.read(_U32.size)
        if len(raw_len) < _U32.size:
            raise StoreCorruptError(f"{path}: string table truncated")
        (n,) = _U32.unpack(raw_len)
        data = fh.read(n)
        if len(data) < n:
            raise StoreCorruptError(f"{path}: string table truncated")
        return data.decode("utf-8")

    with path.open("rb") as fh:
        raw = fh.read(_HEADER.size)
        _, _, dimension, _ = _HEADER.unpack(raw)
        fh.seek(_VECTOR_OFFSET + count * dimension * 4)
        for row in range(count):
            instance_id = read_string(fh)
            lemma = read_string(fh)
            yield instance_id, lemma, row


class Store:
    """Read-only handle over a built store; shareable across threads."""

    def __init__(
        self,
        path: Path,
        dimension: int,
        count: int,
        vectors: np.ndarray,
        by_lemma: dict[str, LemmaCandidates],
        row_by_id: dict[str, int],
    ):
        self.path = path
        self.dimension = dimension
        self.count = count
        self._vectors = vectors
        self._by_lemma = by_lemma
        self._row_by_id = row_by_id

    def __len__(self) -> int:
        return self.count

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._row_by_id

    def get(self, instance_id: str) -> np.ndarray:
        """The stored f32 vector for one instance (bit-exact copy)."""
        row = self._row_by_id[instance_id]
        return np.array(self._vectors[row])

    def take(self, rows: np.ndarray) -> np.ndarray:
        """Gather vector rows as an (n, d) f32 array."""
        return np.asarray(self._vectors[rows])

    def candidates_for_lemma(self, lemma: str) -> LemmaCandidates | None:
        """Every record with this lemma, or None when the lemma is absent."""
        return self._by_lemma.get(lemma)

    def lemmas(self) -> Iterator[str]:
        return iter(self._by_lemma)

    def instance_ids(self) -> Iterator[str]:
        return iter(self._row_by_id)

    def scan_records(self) -> Iterator[tuple[str, str, np.ndarray]]:
        """Sequentially read (id, lemma, vector) from the main file.

        Linear-scan ground truth for index verification; does not use
        the sidecar.
        """
        for instance_id, lemma, row in _scan_string_table(self.path, self.count):
            yield instance_id, lemma, np.array(self._vectors[row])

    def close(self) -> None:
        self._vectors = np.empty((0, self.dimension), dtype="<f4")
        self._by_lemma = {}
        self._row_by_id = {}

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_store(path: str | Path) -> Store:
    """Open a store read-only, validating header and sidecar consistency.

    Cost is header + index only; vectors stay on disk until accessed.
    """
    path = Path(path)
    dimension, count = _read_main_header(path)

    idx_path = index_path_for(path)
    if not idx_path.exists():
        raise StoreFormatError(
            f"{idx_path}: missing sidecar index (rebuild_index can regenerate it)"
        )
    blob = idx_path.read_bytes()
    if len(blob) < _INDEX_HEADER.size:
        raise StoreCorruptError(f"{idx_path}: file shorter than the index header")
    magic, version, idx_dim, idx_count, main_size, lemma_count = _INDEX_HEADER.unpack_from(
        blob, 0
    )
    if magic != INDEX_MAGIC:
        raise StoreFormatError(f"{idx_path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise StoreFormatError(f"{idx_path}: unsupported index version {version}")
    if idx_dim != dimension or idx_count != count:
        raise StoreCorruptError(
            f"{idx_path}: index describes d={idx_dim}, count={idx_count}; "
            f"store header says d={dimension}, count={count}"
        )
    actual_size = os.path.getsize(path)
    if actual_size != main_size:
        raise StoreCorruptError(
            f"{path}: {actual_size} bytes on disk, index recorded {main_size}"
        )

    def take_bytes(offset: int, n: int) -> tuple[bytes, int]:
        end = offset + n
        if end > len(blob):
            raise StoreCorruptError(f"{idx_path}: truncated index entry")
        return blob[offset:end], end

    by_lemma: dict[str, LemmaCandidates] = {}
    row_by_id: dict[str, int] = {}
    offset = _INDEX_HEADER.size
    try:
        for _ in range(lemma_count):
            (name_len,) = _U32.unpack_from(blob, offset)
            offset += _U32.size
            raw, offset = take_bytes(offset, name_len)
            lemma = raw.decode("utf-8")
            (n_rows,) = struct.unpack_from("<Q", blob, offset)
            offset += 8
            rows = np.empty(n_rows, dtype=np.int64)
            norms = np.empty(n_rows, dtype=np.float64)
            ids: list[str] = []
            for i in range(n_rows):
                row, norm = _ROW_NORM.unpack_from(blob, offset)
                offset += _ROW_NORM.size
                (id_len,) = _U32.unpack_from(blob, offset)
                offset += _U32.size
                raw, offset = take_bytes(offset, id_len)
                instance_id = raw.decode("utf-8")
                if row >= count:
                    raise StoreCorruptError(
                        f"{idx_path}: row {row} out of range for count {count}"
                    )
                rows[i] = row
                norms[i] = norm
                ids.append(instance_id)
                row_by_id[instance_id] = row
            by_lemma[lemma] = LemmaCandidates(
                lemma=lemma, instance_ids=tuple(ids), rows=rows, norms=norms
            )
    except struct.error as exc:
        raise StoreCorruptError(f"{idx_path}: truncated index entry") from exc
    if offset != len(blob):
        raise StoreCorruptError(
            f"{idx_path}: {len(blob) - offset} unexplained trailing bytes"
        )
    if len(row_by_id) != count:
        raise StoreCorruptError(
            f"{idx_path}: index lists {len(row_by_id)} records, header says {count}"
        )

    vectors = _map_vectors(path, dimension, count)
    return Store(
        path=path,
        dimension=dimension,
        count=count,
        vectors=vectors,
        by_lemma=by_lemma,
        row_by_id=row_by_id,
    )
