"""Directory-to-embedding-file extraction."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backbones import load_backbone
from .femb import write_csv, write_femb

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}


@dataclass(frozen=True)
class ExtractionConfig:
    images_dir: str
    model: str
    out: str
    size: int = 448  # input resolution fed to the backbone, 3 channels
    batch_size: int = 32
    out_format: str | None = None  # inferred from the out suffix when None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"size: expected >= 1, got {self.size}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size: expected >= 1, got {self.batch_size}")
        fmt = self.resolved_format()
        if fmt not in ("csv", "femb"):
            raise ValueError(f"out_format: expected 'csv' or 'femb', got {fmt!r}")

    def resolved_format(self) -> str:
        if self.out_format:
            return self.out_format
        return "femb" if self.out.endswith(".femb") else "csv"


@dataclass(frozen=True)
class ExtractionResult:
    n_embedded: int
    dim: int
    skipped: tuple[tuple[str, str], ...] = field(default_factory=tuple)  # (file, reason)
    manifest_path: str = ""


def _load_image(path: Path, size: int) -> np.ndarray:
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    return np.asarray(rgb, dtype=np.float32) / 255.0


def extract(config: ExtractionConfig) -> ExtractionResult:
    """Embed every decodable image in the directory, one row per file stem.

    Undecodable files are skipped with a warning recorded in the sidecar
    manifest; the backbone runs inference only and is never updated.
    """
    root = Path(config.images_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"images: {config.images_dir} is not a directory")
    files = sorted(
        p for p in root.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    backbone = load_backbone(config.model)

    ids: list[str] = []
    rows: list[np.ndarray] = []
    skipped: list[tuple[str, str]] = []
    batch_paths: list[Path] = []
    batch_arrays: list[np.ndarray] = []

    def flush():
        if not batch_arrays:
            return
        embedded = backbone.embed(np.stack(batch_arrays))
        for path, row in zip(batch_paths, embedded):
            ids.append(path.stem)
            rows.append(row)
        batch_paths.clear()
        batch_arrays.clear()

    for path in files:
        try:
            batch_arrays.append(_load_image(path, config.size))
            batch_paths.append(path)
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            skipped.append((path.name, str(exc) or type(exc).__name__))
            continue
        if len(batch_arrays) >= config.batch_size:
            flush()
    flush()

    if not ids:
        raise RuntimeError(
            f"images: no decodable images in {config.images_dir} "
            f"({len(skipped)} skipped, {len(files)} candidates)"
        )

    values = np.stack(rows)
    if config.resolved_format() == "femb":
        write_femb(ids, values, config.out)
    else:
        write_csv(ids, values, config.out)

    manifest_path = f"{config.out}.manifest.json"
    manifest = {
        "tool": "embed-extract",
        "model": config.model,
        "size": config.size,
        "batch_size": config.batch_size,
        "format": config.resolved_format(),
        "embedded": len(ids),
        "dim": int(values.shape[1]),
        "skipped": [{"file": f, "reason": r} for f, r in skipped],
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return ExtractionResult(
        n_embedded=len(ids),
        dim=int(values.shape[1]),
        skipped=tuple(skipped),
        manifest_path=manifest_path,
    )
