"""Writers for the embedding file formats the downstream toolkit reads.

femb layout (little-endian): magic ``FEMB``, version u32 = 1, n u64, d u64,
then n*d float32 row-major, then per row a u16 byte length plus UTF-8 id.
CSV layout: header ``id,e0,...,e{d-1}``, decimal floats.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

FEMB_MAGIC = b"FEMB"
FEMB_VERSION = 1


def write_femb(ids: list[str], values: np.ndarray, path: str) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    n, d = values.shape
    if len(ids) != n:
        raise ValueError(f"ids: got {len(ids)} ids for {n} rows")
    parts = [struct.pack("<4sIQQ", FEMB_MAGIC, FEMB_VERSION, n, d), values.tobytes()]
    for sample_id in ids:
        raw = sample_id.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"id too long for femb: {sample_id[:32]!r}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def write_csv(ids: list[str], values: np.ndarray, path: str) -> None:
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + [f"e{k}" for k in range(values.shape[1])])
        for sample_id, row in zip(ids, values):
            writer.writerow([sample_id] + [repr(float(v)) for v in row])
