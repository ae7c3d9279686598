"""Group-fairness criteria over arbitrary groupings.

The binary-classification criteria (demographic parity, equalized odds,
predictive parity) are generalized to K groups as the maximum pairwise
absolute difference, which reduces to the usual two-group definition at
K = 2. Groups lacking the needed denominator are excluded and reported,
never silently scored as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

from .data import MetadataTable
from .errors import ParameterError


@dataclass(frozen=True)
class GroupOutcome:
    """Confusion counts for one group.

    ``size`` counts all members; the confusion quantities cover only members
    with both a label and a prediction; ``n_scored`` / ``pred_pos`` cover
    members with a prediction.
    """

    size: int = 0
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    n_scored: int = 0
    pred_pos: int = 0

    @property
    def n_confusion(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positive_rate(self) -> float | None:
        return self.pred_pos / self.n_scored if self.n_scored else None

    @property
    def tpr(self) -> float | None:
        pos = self.tp + self.fn
        return self.tp / pos if pos else None

    @property
    def fpr(self) -> float | None:
        neg = self.fp + self.tn
        return self.fp / neg if neg else None

    @property
    def ppv(self) -> float | None:
        pred = self.tp + self.fp
        return self.tp / pred if pred else None


@dataclass(frozen=True)
class GroupedOutcomes:
    groups: Mapping[Hashable, GroupOutcome]

    def __post_init__(self):
        object.__setattr__(self, "groups", dict(self.groups))


def group_outcomes(grouping: Mapping[str, Hashable], table: MetadataTable) -> GroupedOutcomes:
    """Tally per-group confusion counts from metadata.

    ``grouping`` maps sample id to a group key (cluster id, gender value, ...).
    Samples missing a label or prediction contribute to ``size`` only.
    """
    counts: dict[Hashable, dict[str, int]] = {}
    for sample_id, key in grouping.items():
        c = counts.setdefault(key, {"size": 0, "tp": 0, "fp": 0, "tn": 0, "fn": 0, "n_scored": 0, "pred_pos": 0})
        c["size"] += 1
        record = table.get(sample_id)
        if record is None:
            continue
        if record.prediction is not None:
            c["n_scored"] += 1
            c["pred_pos"] += record.prediction
            if record.label is not None:
                if record.label == 1:
                    c["tp" if record.prediction == 1 else "fn"] += 1
                else:
                    c["fp" if record.prediction == 1 else "tn"] += 1
    return GroupedOutcomes(groups={k: GroupOutcome(**v) for k, v in counts.items()})


@dataclass(frozen=True)
class GapResult:
    """Max pairwise rate difference; ``value`` is None with < 2 comparable groups."""

    value: float | None
    excluded: tuple = ()

    def __bool__(self) -> bool:
        return self.value is not None


def _max_gap(rates: Mapping[Hashable, float | None]) -> GapResult:
    usable = {k: v for k, v in rates.items() if v is not None}
    excluded = tuple(sorted((k for k, v in rates.items() if v is None), key=str))
    if len(usable) < 2:
        return GapResult(value=None, excluded=excluded)
    values = list(usable.values())
    return GapResult(value=max(values) - min(values), excluded=excluded)


def demographic_parity_gap(outcomes: GroupedOutcomes) -> GapResult:
    """Max pairwise |P(pred=1 | group a) - P(pred=1 | group b)|."""
    return _max_gap({k: g.positive_rate for k, g in outcomes.groups.items()})


@dataclass(frozen=True)
class EqualizedOddsResult:
    tpr_gap: GapResult
    fpr_gap: GapResult


def equalized_odds_gap(outcomes: GroupedOutcomes) -> EqualizedOddsResult:
    """Max pairwise TPR and FPR differences; zero-positive (zero-negative)
    groups are excluded from the TPR (FPR) comparison."""
    return EqualizedOddsResult(
        tpr_gap=_max_gap({k: g.tpr for k, g in outcomes.groups.items()}),
        fpr_gap=_max_gap({k: g.fpr for k, g in outcomes.groups.items()}),
    )


def predictive_parity_gap(outcomes: GroupedOutcomes) -> GapResult:
    """Max pairwise PPV difference; groups with no predicted positives excluded."""
    return _max_gap({k: g.ppv for k, g in outcomes.groups.items()})


def representation_gap(
    table: MetadataTable, ids: Iterable[str], attribute: str = "gender"
) -> float | None:
    """Absolute difference between the two attribute-value shares in a subset.

    Computed over records where the attribute is known; returns None when no
    subset member has a known value. The result is a fraction in [0, 1].
    """
    if attribute != "gender":
        raise ParameterError(f"attribute: only 'gender' is supported, got {attribute!r}")
    n_f = 0
    n_m = 0
    for sample_id in ids:
        record = table.get(sample_id)
        if record is None or record.gender is None:
            continue
        if record.gender == "F":
            n_f += 1
        else:
            n_m += 1
    known = n_f + n_m
    if known == 0:
        return None
    return abs(n_f - n_m) / known


def gap_improvement(gap_baseline: float, gap_method: float) -> float:
    """Baseline gap minus method gap; negative when the method is worse."""
    for name, value in (("gap_baseline", gap_baseline), ("gap_method", gap_method)):
        if not (0.0 <= value <= 1.0):
            raise ParameterError(f"{name}: expected value in [0, 1], got {value}")
    return gap_baseline - gap_method


def attribute_proportions(table: MetadataTable, ids: Iterable[str]) -> dict[str, float]:
    """Gender shares over known records of a subset (empty dict if none known)."""
    counts = {"F": 0, "M": 0}
    for sample_id in ids:
        record = table.get(sample_id)
        if record is not None and record.gender is not None:
            counts[record.gender] += 1
    total = sum(counts.values())
    if total == 0:
        return {}
    return {k: v / total for k, v in counts.items()}
