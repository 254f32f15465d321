"""The wire formats shared with the audit toolkit, implemented over raw bytes.

Image batch: 3073-byte records (label byte + 1024 R + 1024 G + 1024 B).
Feature file: "RFV1" | count u32le | dim u32le | count*dim float32le rows.
Prediction CSV: "index,true_label,pred_label" lines, LF, no header.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

RECORD_BYTES = 3073
FEATURE_MAGIC = b"RFV1"


class DatasetFormatError(Exception):
    pass


def read_image_batch(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (labels (N,), images (N,3,32,32) uint8)."""
    data = Path(path).read_bytes()
    if len(data) == 0 or len(data) % RECORD_BYTES != 0:
        raise DatasetFormatError(
            f"{path}: size {len(data)} is not a positive multiple of {RECORD_BYTES}"
        )
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = raw[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise DatasetFormatError(f"{path}: label byte {labels.max()} out of range")
    images = raw[:, 1:].reshape(-1, 3, 32, 32)
    return labels, images


def write_feature_file(path: str | Path, rows: np.ndarray) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f4")
    header = FEATURE_MAGIC + struct.pack("<II", rows.shape[0], rows.shape[1])
    Path(path).write_bytes(header + rows.tobytes())


def write_prediction_csv(path: str | Path, truth: np.ndarray, preds: np.ndarray) -> None:
    lines = [f"{i},{int(t)},{int(p)}\n" for i, (t, p) in enumerate(zip(truth, preds))]
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.writelines(lines)
