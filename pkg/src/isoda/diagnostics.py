"""Order-violation statistics between soft labels and hard labels."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .isotonic import adapted_irt, count_violations
from .types import LabelDistribution, MixedHardLabel, build_order_tree


@dataclass(frozen=True)
class ViolationReport:
    kendall_tau: float
    top2_hit: bool
    violation_count: int
    known_pair_count: int


def known_pairs(h: Optional[MixedHardLabel], c: int, true_label: Optional[int] = None):
    """Pairs (hi, lo) whose hard-label order is known, hi ranked above lo.

    A mixed sample gives (a, b), (a, l), (b, l) for every other label l. An
    original sample (pass ``true_label`` instead of ``h``) gives (true, l).
    """
    if h is None:
        return [(true_label, k) for k in range(c) if k != true_label]
    a, b = h.label_a, h.label_b
    pairs = [(a, b)]
    for k in h.others():
        pairs.append((a, int(k)))
    for k in h.others():
        pairs.append((b, int(k)))
    return pairs


def _check(soft: LabelDistribution, c: int):
    if len(soft) != c:
        raise ValueError(f"soft label has {len(soft)} entries, expected {c}")


def kendall_tau_known(soft: LabelDistribution, h: MixedHardLabel) -> float:
    """Tau-a over the known pairs only; soft ties count as neither side."""
    _check(soft, h.c)
    v = soft.values
    pairs = known_pairs(h, h.c)
    concordant = sum(1 for i, j in pairs if v[i] > v[j])
    discordant = sum(1 for i, j in pairs if v[i] < v[j])
    return (concordant - discordant) / len(pairs)


def kendall_tau_onehot(soft: LabelDistribution, true_label: int) -> float:
    c = len(soft)
    v = soft.values
    pairs = known_pairs(None, c, true_label)
    return (sum(v[i] > v[j] for i, j in pairs) - sum(v[i] < v[j] for i, j in pairs)) / len(pairs)


def top2_contains_original(soft: LabelDistribution, h: MixedHardLabel) -> bool:
    _check(soft, h.c)
    top = np.argsort(-soft.values, kind="stable")[:2]
    return bool(h.label_a in top or h.label_b in top)


def violation_report(soft: LabelDistribution, h: MixedHardLabel) -> ViolationReport:
    return ViolationReport(
        kendall_tau=kendall_tau_known(soft, h),
        top2_hit=top2_contains_original(soft, h),
        violation_count=count_violations(soft, build_order_tree(h)),
        known_pair_count=2 * h.c - 3,
    )


def summarize(reports: Sequence[ViolationReport]) -> dict:
    """Batch means; independent of the order of ``reports``."""
    n = len(reports)
    if n == 0:
        return {"n": 0, "mean_kendall_tau": None, "top2_ratio": None, "mean_violations": None}
    # fsum is exactly rounded, so permuting the batch cannot change the mean
    return {
        "n": n,
        "mean_kendall_tau": math.fsum(r.kendall_tau for r in reports) / n,
        "top2_ratio": sum(r.top2_hit for r in reports) / n,
        "mean_violations": sum(r.violation_count for r in reports) / n,
    }


def calibration_subset(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask picking round(fraction * n) samples uniformly at random."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    k = int(np.floor(fraction * n + 0.5))
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[:k]] = True
    return mask


def calibrate_fraction(batch: Sequence[tuple[LabelDistribution, MixedHardLabel]], fraction: float,
                       rng: np.random.Generator) -> list[LabelDistribution]:
    mask = calibration_subset(len(batch), fraction, rng)
    out = []
    for (soft, h), chosen in zip(batch, mask):
        out.append(adapted_irt(soft, build_order_tree(h)).calibrated if chosen else soft)
    return out
