"""Hinge penalty on student logits for the mixed-label order constraints."""
from __future__ import annotations

import numpy as np

from .types import LabelDistribution, MixedHardLabel


def _check(student_logits: LabelDistribution, h: MixedHardLabel) -> np.ndarray:
    if len(student_logits) != h.c:
        raise ValueError(f"logits have {len(student_logits)} entries, hard label expects {h.c}")
    return student_logits.values


def order_penalty(student_logits: LabelDistribution, h: MixedHardLabel) -> float:
    """max(0, s_b - s_a) + max(0, max(others) - min(s_a, s_b)).

    Zero exactly when the student ranks label_a over label_b over everything else.
    """
    s = _check(student_logits, h)
    sa, sb = s[h.label_a], s[h.label_b]
    value = max(0.0, sb - sa)
    if h.c > 2:
        value += max(0.0, s[h.others()].max() - min(sa, sb))
    return float(value)


def order_penalty_gradient(student_logits: LabelDistribution, h: MixedHardLabel) -> np.ndarray:
    """Subgradient of ``order_penalty``.

    Hinges at exactly zero contribute nothing; on ties the lowest label index
    takes the gradient.
    """
    s = _check(student_logits, h)
    a, b = h.label_a, h.label_b
    g = np.zeros(h.c)
    if s[b] - s[a] > 0:
        g[b] += 1.0
        g[a] -= 1.0
    if h.c > 2:
        others = h.others()
        k = others[np.argmax(s[others])]
        if s[a] != s[b]:
            lo = a if s[a] < s[b] else b
        else:
            lo = min(a, b)
        if s[k] - s[lo] > 0:
            g[k] += 1.0
            g[lo] -= 1.0
    return g


def batch_order_penalty(S: np.ndarray, label_a: np.ndarray, label_b: np.ndarray):
    """Vectorized penalty and subgradient for an (n, c) logit matrix.

    Same tie rules as the per-sample functions. Returns (values, grad).
    """
    S = np.asarray(S, dtype=np.float64)
    n, c = S.shape
    rows = np.arange(n)
    sa, sb = S[rows, label_a], S[rows, label_b]
    G = np.zeros_like(S)

    first = sb - sa
    active = first > 0
    vals = np.where(active, first, 0.0)
    np.add.at(G, (rows[active], label_b[active]), 1.0)
    np.add.at(G, (rows[active], label_a[active]), -1.0)

    if c > 2:
        masked = S.copy()
        masked[rows, label_a] = -np.inf
        masked[rows, label_b] = -np.inf
        k = np.argmax(masked, axis=1)
        smax = masked[rows, k]
        lo = np.where(sa < sb, label_a, np.where(sb < sa, label_b, np.minimum(label_a, label_b)))
        second = smax - S[rows, lo]
        active = second > 0
        vals = vals + np.where(active, second, 0.0)
        np.add.at(G, (rows[active], k[active]), 1.0)
        np.add.at(G, (rows[active], lo[active]), -1.0)
    return vals, G
