"""Frozen backbones. A backbone maps a batch of preprocessed images
(B, H, W, 3) float32 in [0, 1] to a (B, d) float32 embedding matrix and is
never trained or updated here.

Model references:
  * ``stub``            deterministic pixel-pooling features, no ML runtime
  * a ``.pt``/``.ts`` path   TorchScript module run under torch.no_grad()
"""

from __future__ import annotations

import numpy as np


class StubBackbone:
    """Average-pools the grayscale image to a 16x16 grid and flattens it.

    Cheap, deterministic, and dependency-free; meant for tests and for
    wiring checks of the downstream pipeline.
    """

    GRID = 16

    def embed(self, batch: np.ndarray) -> np.ndarray:
        b, h, w, _ = batch.shape
        gray = batch.mean(axis=3)
        gh = h // self.GRID
        gw = w // self.GRID
        if gh == 0 or gw == 0:
            raise ValueError(f"input resolution {h}x{w} below the {self.GRID}x{self.GRID} pooling grid")
        trimmed = gray[:, : gh * self.GRID, : gw * self.GRID]
        pooled = trimmed.reshape(b, self.GRID, gh, self.GRID, gw).mean(axis=(2, 4))
        return pooled.reshape(b, self.GRID * self.GRID).astype(np.float32)


class TorchScriptBackbone:
    """Wraps a user-supplied TorchScript module, frozen in eval mode."""

    def __init__(self, path: str):
        import torch

        self._torch = torch
        self.module = torch.jit.load(path, map_location="cpu")
        self.module.eval()

    def embed(self, batch: np.ndarray) -> np.ndarray:
        torch = self._torch
        tensor = torch.from_numpy(np.ascontiguousarray(batch.transpose(0, 3, 1, 2)))
        with torch.no_grad():
            out = self.module(tensor)
        out = out.detach().cpu().numpy()
        if out.ndim != 2:
            raise ValueError(f"backbone returned shape {out.shape}, expected (batch, d)")
        return out.astype(np.float32)


def load_backbone(reference: str):
    if reference == "stub":
        return StubBackbone()
    if reference.endswith((".pt", ".ts")):
        return TorchScriptBackbone(reference)
    raise ValueError(
        f"model: unknown backbone reference {reference!r} (use 'stub' or a TorchScript .pt/.ts path)"
    )
