"""Synthetic datasets with planted group structure.

Samples are drawn from Gaussian modes placed on scaled coordinate axes, so
any two mode centers are separation * sqrt(2) apart (in units of the
within-mode standard deviation). Modes are gender-skewed: half of them
favor F and half favor M with probability ``purity``, and the two halves
get different total mass so the aggregate gender split matches
``gender_split``. That makes the planted modes behave like the latent
groups a balanced sampler should equalize over.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EmbeddingMatrix, MetadataTable, SampleRecord
from .errors import ParameterError


@dataclass(frozen=True)
class SynthConfig:
    n: int = 10_000
    modes: int = 12
    dim: int = 16
    gender_split: float = 0.7  # aggregate male share
    purity: float = 0.95  # majority-gender probability within a mode
    separation: float = 20.0  # center distance from origin, in mode sigmas
    seed: int = 0
    with_outcomes: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n: expected >= 1, got {self.n}")
        if self.modes < 2:
            raise ParameterError(f"modes: expected >= 2, got {self.modes}")
        if self.modes % 2 != 0:
            raise ParameterError(f"modes: expected an even count, got {self.modes}")
        if self.dim < self.modes:
            raise ParameterError(
                f"dim: expected >= modes for axis-aligned centers, got dim={self.dim}, modes={self.modes}"
            )
        if not (0.0 < self.gender_split < 1.0):
            raise ParameterError(f"gender_split: expected in (0, 1), got {self.gender_split}")
        if not (0.5 < self.purity <= 1.0):
            raise ParameterError(f"purity: expected in (0.5, 1], got {self.purity}")
        if not self.separation > 0:
            raise ParameterError(f"separation: expected > 0, got {self.separation}")
        male_mode_share = (self.gender_split - (1.0 - self.purity)) / (2.0 * self.purity - 1.0)
        if not (0.0 < male_mode_share < 1.0):
            raise ParameterError(
                "gender_split: unreachable with this purity "
                f"(gender_split={self.gender_split}, purity={self.purity})"
            )


@dataclass(frozen=True)
class SynthDataset:
    matrix: EmbeddingMatrix
    metadata: MetadataTable
    modes: np.ndarray  # true mode index per row


def generate(config: SynthConfig) -> SynthDataset:
    """Draw a dataset; deterministic for a fixed config."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed))
    m = config.modes
    half = m // 2

    # mass of the M-skewed half that reproduces the aggregate split
    male_mode_share = (config.gender_split - (1.0 - config.purity)) / (2.0 * config.purity - 1.0)
    weights = np.empty(m)
    weights[:half] = male_mode_share / half  # M-skewed modes
    weights[half:] = (1.0 - male_mode_share) / half  # F-skewed modes

    mode_of = rng.choice(m, size=config.n, p=weights)
    centers = np.zeros((m, config.dim))
    centers[np.arange(m), np.arange(m)] = config.separation
    values = centers[mode_of] + rng.standard_normal((config.n, config.dim))

    p_male = np.where(mode_of < half, config.purity, 1.0 - config.purity)
    is_male = rng.random(config.n) < p_male

    # per-mode age profile so age KDE comparisons have structure
    mode_age_mu = rng.uniform(25.0, 80.0, size=m)
    ages = np.clip(
        np.rint(mode_age_mu[mode_of] + 8.0 * rng.standard_normal(config.n)), 1, 100
    ).astype(int)

    if config.with_outcomes:
        base = 0.3 + 0.4 * (mode_of % 2)
        labels = (rng.random(config.n) < base).astype(int)
        flip = np.where(is_male, 0.1, 0.25)
        flipped = rng.random(config.n) < flip
        predictions = np.where(flipped, 1 - labels, labels)
        scores = np.clip(
            predictions * 0.7 + 0.3 * rng.random(config.n), 0.0, 1.0
        )

    width = len(str(config.n - 1))
    ids = tuple(f"s{i:0{width}d}" for i in range(config.n))
    records = {}
    for i, sample_id in enumerate(ids):
        records[sample_id] = SampleRecord(
            gender="M" if is_male[i] else "F",
            age=int(ages[i]),
            label=int(labels[i]) if config.with_outcomes else None,
            prediction=int(predictions[i]) if config.with_outcomes else None,
            score=float(scores[i]) if config.with_outcomes else None,
        )

    return SynthDataset(
        matrix=EmbeddingMatrix(ids=ids, values=values),
        metadata=MetadataTable(records=records),
        modes=mode_of.astype(np.int64),
    )
