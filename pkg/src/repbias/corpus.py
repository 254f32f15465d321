"""Bit-exact readers/writers for datasets, feature matrices, prediction tables
and subset manifests.

File formats (the cross-component contract):
  * image batch  -- records of 3073 bytes: 1 label byte + 1024 R + 1024 G +
    1024 B bytes, row-major within each plane.
  * feature file -- magic "RFV1" | count u32le | dim u32le |
    count*dim float32le, row-major.
  * predictions  -- CSV lines "index,true_label,pred_label", no header, LF.
  * manifest     -- one decimal index per line, sorted ascending.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RECORD_BYTES = 3073
PIXEL_BYTES = 3072
IMAGE_SIDE = 32
NUM_CLASSES = 10
FEATURE_MAGIC = b"RFV1"


class CorpusError(Exception):
    """Base class for file-format failures."""


class MalformedFileError(CorpusError):
    pass


class CorruptRecordError(CorpusError):
    pass


class BadMagicError(CorpusError):
    pass


class TruncatedPayloadError(CorpusError):
    pass


class NonFiniteValueError(CorpusError):
    pass


class CsvParseError(CorpusError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ManifestError(CorpusError):
    pass


@dataclass
class ImageRecord:
    """One 32x32 RGB image; pixels shaped (3, 32, 32) uint8, planes R,G,B."""

    label: int
    pixels: np.ndarray

    def validate(self) -> None:
        if not (0 <= self.label < NUM_CLASSES):
            raise CorruptRecordError(f"label {self.label} out of range")
        if self.pixels.shape != (3, IMAGE_SIDE, IMAGE_SIDE):
            raise CorruptRecordError(f"bad pixel shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise CorruptRecordError(f"bad pixel dtype {self.pixels.dtype}")


@dataclass
class Dataset:
    """Ordered image records; index i is the image's identity everywhere."""

    records: list[ImageRecord]
    split_name: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)


@dataclass
class FeatureMatrix:
    """N x dim float32 embedding matrix for one model over one split."""

    rows: np.ndarray
    model_id: str = ""
    split_name: str = ""

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    def __len__(self) -> int:
        return int(self.rows.shape[0])


@dataclass
class PredictionTable:
    """Per-image (index, true_label, pred_label), indices strictly increasing."""

    model_id: str
    entries: list[tuple[int, int, int]]

    def __len__(self) -> int:
        return len(self.entries)

    def indices(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries], dtype=np.int64)

    def true_labels(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries], dtype=np.int64)

    def pred_labels(self) -> np.ndarray:
        return np.array([e[2] for e in self.entries], dtype=np.int64)


@dataclass
class SubsetManifest:
    """Named, sorted, duplicate-free list of dataset indices."""

    name: str
    indices: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.indices)

    def validate(self, dataset_size: int | None = None) -> None:
        for a, b in zip(self.indices, self.indices[1:]):
            if b <= a:
                raise ManifestError(f"indices not strictly increasing at {b}")
        if self.indices and self.indices[0] < 0:
            raise ManifestError(f"negative index {self.indices[0]}")
        if dataset_size is not None:
            for i in self.indices:
                if i >= dataset_size:
                    raise ManifestError(
                        f"index {i} out of bounds for dataset of size {dataset_size}"
                    )


def load_cifar_batch(path: str | Path, split_name: str = "") -> Dataset:
    """Parse a binary image batch; raises on bad record size or label bytes."""
    data = Path(path).read_bytes()
    if len(data) == 0 or len(data) % RECORD_BYTES != 0:
        raise MalformedFileError(
            f"{path}: size {len(data)} is not a positive multiple of {RECORD_BYTES}"
        )
    n = len(data) // RECORD_BYTES
    raw = np.frombuffer(data, dtype=np.uint8).reshape(n, RECORD_BYTES)
    labels = raw[:, 0]
    bad = np.nonzero(labels >= NUM_CLASSES)[0]
    if bad.size:
        i = int(bad[0])
        raise CorruptRecordError(f"{path}: record {i} has label byte {labels[i]}")
    pixels = raw[:, 1:].reshape(n, 3, IMAGE_SIDE, IMAGE_SIDE)
    records = [ImageRecord(int(labels[i]), pixels[i]) for i in range(n)]
    return Dataset(records, split_name=split_name or Path(path).stem)


def write_cifar_batch(ds: Dataset, path: str | Path) -> None:
    if len(ds) == 0:
        raise ValueError("refusing to write an empty dataset")
    out = np.empty((len(ds), RECORD_BYTES), dtype=np.uint8)
    for i, rec in enumerate(ds.records):
        rec.validate()
        out[i, 0] = rec.label
        out[i, 1:] = rec.pixels.reshape(PIXEL_BYTES)
    Path(path).write_bytes(out.tobytes())


def read_features(
    path: str | Path, model_id: str = "", split_name: str = ""
) -> FeatureMatrix:
    """Parse a feature file; count and dim come from the header."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != FEATURE_MAGIC:
        raise BadMagicError(f"{path}: missing {FEATURE_MAGIC!r} header")
    count, dim = struct.unpack_from("<II", data, 4)
    if dim == 0:
        raise MalformedFileError(f"{path}: dim must be positive")
    expected = 12 + count * dim * 4
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"{path}: expected {expected} bytes for {count}x{dim}, got {len(data)}"
        )
    if len(data) > expected:
        raise MalformedFileError(f"{path}: {len(data) - expected} trailing bytes")
    rows = np.frombuffer(data, dtype="<f4", offset=12).reshape(count, dim)
    if not np.all(np.isfinite(rows)):
        raise NonFiniteValueError(f"{path}: payload contains non-finite floats")
    return FeatureMatrix(rows, model_id=model_id or Path(path).stem, split_name=split_name)


def write_features(fm: FeatureMatrix, path: str | Path) -> None:
    rows = np.ascontiguousarray(fm.rows, dtype="<f4")
    if rows.ndim != 2 or rows.shape[1] == 0:
        raise ValueError(f"feature matrix must be 2-D with positive dim, got {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise NonFiniteValueError("refusing to write non-finite features")
    header = FEATURE_MAGIC + struct.pack("<II", rows.shape[0], rows.shape[1])
    Path(path).write_bytes(header + rows.tobytes())


def read_predictions(path: str | Path, model_id: str = "") -> PredictionTable:
    entries: list[tuple[int, int, int]] = []
    prev = -1
    with open(path, "r", encoding="ascii", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line == "":
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise CsvParseError(f"expected 3 fields, got {len(parts)}", lineno)
            try:
                idx, true_label, pred_label = (int(p) for p in parts)
            except ValueError:
                raise CsvParseError(f"non-integer field in {line!r}", lineno) from None
            if idx <= prev:
                raise CsvParseError(f"index {idx} not strictly increasing", lineno)
            for name, lab in (("true_label", true_label), ("pred_label", pred_label)):
                if not (0 <= lab < NUM_CLASSES):
                    raise CsvParseError(f"{name} {lab} out of range", lineno)
            entries.append((idx, true_label, pred_label))
            prev = idx
    return PredictionTable(model_id or Path(path).stem, entries)


def write_predictions(pt: PredictionTable, path: str | Path) -> None:
    prev = -1
    lines = []
    for idx, true_label, pred_label in pt.entries:
        if idx <= prev:
            raise ValueError(f"indices not strictly increasing at {idx}")
        prev = idx
        lines.append(f"{idx},{true_label},{pred_label}\n")
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.writelines(lines)


def read_manifest(path: str | Path, name: str = "") -> SubsetManifest:
    indices: list[int] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line == "":
                continue
            try:
                idx = int(line)
            except ValueError:
                raise ManifestError(f"{path}: line {lineno}: not an index: {line!r}") from None
            indices.append(idx)
    m = SubsetManifest(name or Path(path).stem, indices)
    m.validate()
    return m


def write_manifest(m: SubsetManifest, path: str | Path) -> None:
    m.validate()
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.writelines(f"{i}\n" for i in m.indices)
