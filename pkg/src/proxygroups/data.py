"""Core value types and file formats.

Two embedding formats are supported: a human-auditable CSV and a compact
little-endian binary (``femb``). Binary values are stored as 32-bit floats
and promoted to 64-bit on load; all downstream numerics run in float64.

All types are immutable after construction and validate their invariants
eagerly, so a value that exists is a value that is well-formed.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DataFormatError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyFileError,
    MalformedHeaderError,
    NonFiniteValueError,
    ValidationError,
)

FEMB_MAGIC = b"FEMB"
FEMB_VERSION = 1

GENDER_VALUES = ("F", "M")
AGE_MAX = 130


def _check_ids(ids: Sequence[str], n_rows: int) -> tuple[str, ...]:
    ids = tuple(str(i) for i in ids)
    if len(ids) != n_rows:
        raise ValidationError(f"ids: got {len(ids)} ids for {n_rows} rows")
    seen = set()
    for i in ids:
        if not i:
            raise ValidationError("ids: empty identifier")
        if i in seen:
            raise DuplicateIdError(f"duplicate id {i!r}")
        seen.add(i)
    return ids


@dataclass(frozen=True)
class EmbeddingMatrix:
    """n samples by d embedding coordinates, with one string id per row."""

    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"values: expected 2-D array, got ndim={values.ndim}")
        n, d = values.shape
        if n < 1 or d < 1:
            raise ValidationError(f"values: need n >= 1 and d >= 1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise NonFiniteValueError(
                f"non-finite value at row {bad[0]}, column {bad[1]}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", _check_ids(self.ids, n))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def row_index(self) -> dict[str, int]:
        return {i: k for k, i in enumerate(self.ids)}


@dataclass(frozen=True)
class ReducedCoordinates:
    """2-D plane coordinates produced by dimensionality reduction."""

    ids: tuple[str, ...]
    coords: np.ndarray

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValidationError(f"coords: expected shape (n, 2), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise NonFiniteValueError("coords contain non-finite values")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "ids", _check_ids(self.ids, coords.shape[0]))

    @property
    def n(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class SampleRecord:
    """Per-sample metadata; every field is optional (absent, never imputed)."""

    gender: str | None = None
    age: int | None = None
    label: int | None = None
    prediction: int | None = None
    score: float | None = None

    def __post_init__(self):
        if self.gender is not None and self.gender not in GENDER_VALUES:
            raise ValidationError(f"gender: expected one of {GENDER_VALUES}, got {self.gender!r}")
        if self.age is not None and not (0 <= self.age <= AGE_MAX):
            raise ValidationError(f"age: expected 0..{AGE_MAX}, got {self.age}")
        for name in ("label", "prediction"):
            v = getattr(self, name)
            if v is not None and v not in (0, 1):
                raise ValidationError(f"{name}: expected 0 or 1, got {v}")
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"score: expected value in [0, 1], got {self.score}")


@dataclass(frozen=True)
class MetadataTable:
    """Sample records keyed by identifier. Used for validation and reporting only."""

    records: Mapping[str, SampleRecord]

    def __post_init__(self):
        object.__setattr__(self, "records", dict(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self.records

    def get(self, sample_id: str) -> SampleRecord | None:
        return self.records.get(sample_id)


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-sample group id; -1 marks unclustered noise.

    Cluster ids other than -1 must form the contiguous range 0..K-1 with at
    least one member each. ``eps``/``min_samples`` record the parameters used
    when known (assignments loaded from CSV do not carry them).
    """

    ids: tuple[str, ...]
    labels: np.ndarray
    eps: float | None = None
    min_samples: int | None = None

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValidationError("labels: expected 1-D array")
        if labels.size and labels.min() < -1:
            raise ValidationError(f"labels: cluster id below -1 ({labels.min()})")
        non_noise = labels[labels >= 0]
        if non_noise.size:
            present = np.unique(non_noise)
            expected = np.arange(present.size)
            if not np.array_equal(present, expected):
                raise ValidationError(
                    f"labels: cluster ids not contiguous 0..K-1 (got {present.tolist()})"
                )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", _check_ids(self.ids, labels.shape[0]))
        if self.eps is not None and not self.eps > 0:
            raise ValidationError(f"eps: expected > 0, got {self.eps}")
        if self.min_samples is not None and self.min_samples < 1:
            raise ValidationError(f"min_samples: expected >= 1, got {self.min_samples}")

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def n_clusters(self) -> int:
        non_noise = self.labels[self.labels >= 0]
        return int(non_noise.max()) + 1 if non_noise.size else 0

    @property
    def noise_count(self) -> int:
        return int(np.sum(self.labels == -1))

    def members(self, cluster_id: int) -> np.ndarray:
        """Row indices of the given cluster, in input order."""
        return np.flatnonzero(self.labels == cluster_id)


@dataclass(frozen=True)
class SubsetSelection:
    """Result of a sampling operation.

    ``per_cluster_take`` is None for samplers that have no grouping (uniform
    random); when present its counts sum to the selection size. ``shortfall``
    is the number of requested samples that could not be drawn because the
    clustered population ran out.
    """

    selected_ids: tuple[str, ...]
    per_cluster_take: Mapping[int, int] | None
    seed: int
    fraction: float
    shortfall: int = 0

    def __post_init__(self):
        object.__setattr__(self, "selected_ids", _check_ids(self.selected_ids, len(self.selected_ids)))
        if not (0.0 < self.fraction <= 1.0):
            raise ValidationError(f"fraction: expected value in (0, 1], got {self.fraction}")
        if self.seed < 0:
            raise ValidationError(f"seed: expected unsigned integer, got {self.seed}")
        if self.shortfall < 0:
            raise ValidationError(f"shortfall: expected >= 0, got {self.shortfall}")
        if self.per_cluster_take is not None:
            takes = dict(self.per_cluster_take)
            total = sum(takes.values())
            if total != len(self.selected_ids):
                raise ValidationError(
                    f"per_cluster_take: counts sum to {total}, expected {len(self.selected_ids)}"
                )
            if any(t < 0 for t in takes.values()):
                raise ValidationError("per_cluster_take: negative count")
            object.__setattr__(self, "per_cluster_take", takes)

    def __len__(self) -> int:
        return len(self.selected_ids)


@dataclass(frozen=True)
class JoinedView:
    """Metadata aligned to embedding rows; missing entries flagged, not dropped."""

    matrix: EmbeddingMatrix
    table: MetadataTable
    missing_in_metadata: tuple[str, ...]
    extra_in_metadata: tuple[str, ...]

    def record_for_row(self, row: int) -> SampleRecord | None:
        return self.table.get(self.matrix.ids[row])


def join(matrix: EmbeddingMatrix, table: MetadataTable) -> JoinedView:
    """Align a metadata table to a matrix, reporting ids missing on either side."""
    matrix_ids = set(matrix.ids)
    missing = tuple(i for i in matrix.ids if i not in table)
    extra = tuple(sorted(k for k in table.records if k not in matrix_ids))
    return JoinedView(matrix=matrix, table=table, missing_in_metadata=missing, extra_in_metadata=extra)


# ---------------------------------------------------------------------------
# Embedding files
# ---------------------------------------------------------------------------

def infer_format(path: str) -> str:
    return "femb" if str(path).endswith(".femb") else "csv"


def load_embeddings(path: str, fmt: str | None = None) -> EmbeddingMatrix:
    """Load an embedding matrix from ``csv`` or ``femb``; row order is file order."""
    fmt = fmt or infer_format(path)
    if fmt == "csv":
        return _load_embeddings_csv(path)
    if fmt == "femb":
        return _load_embeddings_femb(path)
    raise ValueError(f"format: expected 'csv' or 'femb', got {fmt!r}")


def save_embeddings(matrix: EmbeddingMatrix, path: str, fmt: str | None = None) -> None:
    fmt = fmt or infer_format(path)
    if fmt == "csv":
        _save_embeddings_csv(matrix, path)
    elif fmt == "femb":
        _save_embeddings_femb(matrix, path)
    else:
        raise ValueError(f"format: expected 'csv' or 'femb', got {fmt!r}")


def _load_embeddings_csv(path: str) -> EmbeddingMatrix:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path}: file is empty") from None
        if len(header) < 2 or header[0] != "id":
            raise MalformedHeaderError(f"{path}: expected header 'id,e0,...', got {header!r}")
        d = len(header) - 1
        expected = ["id"] + [f"e{k}" for k in range(d)]
        if header != expected:
            raise MalformedHeaderError(f"{path}: expected header {','.join(expected)!r}")

        ids: list[str] = []
        rows: list[np.ndarray] = []
        seen: set[str] = set()
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise DimensionMismatchError(
                    f"{path}: line {line_no} has {len(row) - 1} values, header declares {d}"
                )
            sample_id = row[0]
            if sample_id in seen:
                raise DuplicateIdError(f"{path}: line {line_no} duplicates id {sample_id!r}")
            seen.add(sample_id)
            values = np.empty(d, dtype=np.float64)
            for col, cell in enumerate(row[1:]):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonFiniteValueError(
                        f"{path}: line {line_no}, column e{col}: not a number ({cell!r})"
                    ) from None
                if not math.isfinite(v):
                    raise NonFiniteValueError(
                        f"{path}: line {line_no}, column e{col}: non-finite value ({cell!r})"
                    )
                values[col] = v
            ids.append(sample_id)
            rows.append(values)

    if not rows:
        raise EmptyFileError(f"{path}: no data rows")
    return EmbeddingMatrix(ids=tuple(ids), values=np.vstack(rows))


def _save_embeddings_csv(matrix: EmbeddingMatrix, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + [f"e{k}" for k in range(matrix.d)])
        for i, row in zip(matrix.ids, matrix.values):
            writer.writerow([i] + [repr(float(v)) for v in row])


def _load_embeddings_femb(path: str) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob:
        raise EmptyFileError(f"{path}: file is empty")
    if len(blob) < 24:
        raise MalformedHeaderError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, n, d = struct.unpack_from("<4sIQQ", blob, 0)
    if magic != FEMB_MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic {magic!r}, expected {FEMB_MAGIC!r}")
    if version != FEMB_VERSION:
        raise MalformedHeaderError(f"{path}: unsupported version {version}")
    if n < 1 or d < 1:
        raise EmptyFileError(f"{path}: declared shape {n}x{d}")
    offset = 24
    need = n * d * 4
    if len(blob) < offset + need:
        raise DimensionMismatchError(
            f"{path}: value block truncated (need {need} bytes, have {len(blob) - offset})"
        )
    values = np.frombuffer(blob, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    offset += need
    ids: list[str] = []
    for row in range(n):
        if len(blob) < offset + 2:
            raise DimensionMismatchError(f"{path}: id block truncated at row {row}")
        (id_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        if len(blob) < offset + id_len:
            raise DimensionMismatchError(f"{path}: id block truncated at row {row}")
        ids.append(blob[offset : offset + id_len].decode("utf-8"))
        offset += id_len
    if offset != len(blob):
        raise DimensionMismatchError(f"{path}: {len(blob) - offset} trailing bytes")
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteValueError(f"{path}: non-finite value at row {bad[0]}, column e{bad[1]}")
    seen: set[str] = set()
    for row, sample_id in enumerate(ids):
        if sample_id in seen:
            raise DuplicateIdError(f"{path}: row {row} duplicates id {sample_id!r}")
        seen.add(sample_id)
    return EmbeddingMatrix(ids=tuple(ids), values=values.astype(np.float64))


def _save_embeddings_femb(matrix: EmbeddingMatrix, path: str) -> None:
    parts = [struct.pack("<4sIQQ", FEMB_MAGIC, FEMB_VERSION, matrix.n, matrix.d)]
    parts.append(np.ascontiguousarray(matrix.values, dtype="<f4").tobytes())
    for sample_id in matrix.ids:
        raw = sample_id.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValidationError(f"id too long for femb ({len(raw)} bytes): {sample_id[:32]!r}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


# ---------------------------------------------------------------------------
# Metadata files
# ---------------------------------------------------------------------------

METADATA_HEADER = ["id", "gender", "age", "label", "prediction", "score"]


def load_metadata(path: str) -> MetadataTable:
    """Load per-sample metadata; an empty cell means the attribute is absent."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path}: file is empty") from None
        if header != METADATA_HEADER:
            raise MalformedHeaderError(
                f"{path}: expected header {','.join(METADATA_HEADER)!r}, got {','.join(header)!r}"
            )
        records: dict[str, SampleRecord] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(METADATA_HEADER):
                raise DimensionMismatchError(f"{path}: line {line_no} has {len(row)} cells")
            sample_id, gender, age, label, prediction, score = row
            if sample_id in records:
                raise DuplicateIdError(f"{path}: line {line_no} duplicates id {sample_id!r}")
            try:
                records[sample_id] = SampleRecord(
                    gender=gender or None,
                    age=int(age) if age else None,
                    label=int(label) if label else None,
                    prediction=int(prediction) if prediction else None,
                    score=float(score) if score else None,
                )
            except (ValueError, ValidationError) as exc:
                raise DataFormatError(f"{path}: line {line_no}: {exc}") from None
    return MetadataTable(records=records)


def save_metadata(table: MetadataTable, path: str, order: Iterable[str] | None = None) -> None:
    keys = list(order) if order is not None else sorted(table.records)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METADATA_HEADER)
        for k in keys:
            r = table.records[k]
            writer.writerow([
                k,
                r.gender or "",
                "" if r.age is None else r.age,
                "" if r.label is None else r.label,
                "" if r.prediction is None else r.prediction,
                "" if r.score is None else repr(float(r.score)),
            ])


# ---------------------------------------------------------------------------
# Coordinate / assignment / subset files
# ---------------------------------------------------------------------------

def load_coordinates(path: str) -> ReducedCoordinates:
    ids, rows = _load_simple_csv(path, ["id", "x", "y"], n_floats=2)
    return ReducedCoordinates(ids=tuple(ids), coords=np.array(rows, dtype=np.float64))


def save_coordinates(coords: ReducedCoordinates, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "x", "y"])
        for i, (x, y) in zip(coords.ids, coords.coords):
            writer.writerow([i, repr(float(x)), repr(float(y))])


def load_assignment(path: str) -> ClusterAssignment:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path}: file is empty") from None
        if header != ["id", "cluster"]:
            raise MalformedHeaderError(f"{path}: expected header 'id,cluster'")
        ids: list[str] = []
        labels: list[int] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DimensionMismatchError(f"{path}: line {line_no} has {len(row)} cells")
            try:
                labels.append(int(row[1]))
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {line_no}: cluster must be an integer, got {row[1]!r}"
                ) from None
            ids.append(row[0])
    if not ids:
        raise EmptyFileError(f"{path}: no data rows")
    return ClusterAssignment(ids=tuple(ids), labels=np.array(labels, dtype=np.int64))


def save_assignment(assignment: ClusterAssignment, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "cluster"])
        for i, c in zip(assignment.ids, assignment.labels):
            writer.writerow([i, int(c)])


def save_subset(subset: SubsetSelection, cluster_of: Mapping[str, int] | None, path: str) -> None:
    """Write a subset as ``id,cluster``; unknown grouping leaves the cell empty."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "cluster"])
        for i in subset.selected_ids:
            c = cluster_of.get(i) if cluster_of is not None else None
            writer.writerow([i, "" if c is None else int(c)])


def load_subset_ids(path: str) -> tuple[str, ...]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path}: file is empty") from None
        if header != ["id", "cluster"]:
            raise MalformedHeaderError(f"{path}: expected header 'id,cluster'")
        ids = [row[0] for row in reader if row]
    if not ids:
        raise EmptyFileError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise DuplicateIdError(f"{path}: duplicate ids in subset")
    return tuple(ids)


def _load_simple_csv(path: str, expected_header: list[str], n_floats: int):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path}: file is empty") from None
        if header != expected_header:
            raise MalformedHeaderError(
                f"{path}: expected header {','.join(expected_header)!r}, got {','.join(header)!r}"
            )
        ids: list[str] = []
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_floats + 1:
                raise DimensionMismatchError(f"{path}: line {line_no} has {len(row)} cells")
            try:
                values = [float(c) for c in row[1:]]
            except ValueError:
                raise NonFiniteValueError(f"{path}: line {line_no}: not a number") from None
            if not all(math.isfinite(v) for v in values):
                raise NonFiniteValueError(f"{path}: line {line_no}: non-finite value")
            ids.append(row[0])
            rows.append(values)
    if not ids:
        raise EmptyFileError(f"{path}: no data rows")
    return ids, rows
