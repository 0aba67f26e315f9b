"""Distillation objectives: KD, KD on mixed samples, and the two order-aware variants.

Everything funnels through :func:`batch_objective`, which works on (n, c) logit
matrices and returns per-sample losses together with their gradient with respect
to the student logits. The single-sample functions are thin wrappers over it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .isotonic import adapted_irt
from .penalty import batch_order_penalty
from .types import (LabelDistribution, MixedHardLabel, OrderTree, Space,
                    build_order_tree, expand_hard_label)

LOG_FLOOR = 1e-12


class Mode(str, enum.Enum):
    KD = "kd"
    KD_AUG = "kd_aug"
    KD_I = "kd_i"
    KD_P = "kd_p"


@dataclass(frozen=True)
class DistillConfig:
    tau: float = 4.5
    alpha: float = 0.95
    beta: float = 3.0
    sigma: float = 2.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.beta < 0 or self.sigma < 0:
            raise ValueError("beta and sigma must be nonnegative")


def _softmax_rows(Z: np.ndarray, tau: float) -> np.ndarray:
    Z = Z / tau
    Z = Z - Z.max(axis=-1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=-1, keepdims=True)


def _ce_rows(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row-wise -sum(Q * log(P)) with P clamped below."""
    return -np.sum(Q * np.log(np.maximum(P, LOG_FLOOR)), axis=-1)


def softmax_t(logits: LabelDistribution, tau: float) -> LabelDistribution:
    if logits.space is not Space.LOGIT:
        raise ValueError("softmax_t expects logits")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return LabelDistribution(_softmax_rows(logits.values, tau), Space.PROBABILITY)


def cross_entropy(pred: LabelDistribution, target: LabelDistribution) -> float:
    if pred.space is not Space.PROBABILITY or target.space is not Space.PROBABILITY:
        raise ValueError("cross entropy needs two probability distributions")
    if len(pred) != len(target):
        raise ValueError("length mismatch")
    return float(_ce_rows(pred.values, target.values))


def calibrate_teacher(teacher_logits: np.ndarray, tree: OrderTree, tau: float,
                      space: str = "probability") -> np.ndarray:
    """Order-restricted soft target for one sample.

    ``space="probability"`` projects softmax(teacher / tau). ``space="logit"``
    projects the raw logits and softens the result afterwards.
    """
    if Space(space) is Space.PROBABILITY:
        p = _softmax_rows(teacher_logits, tau)
        return adapted_irt(LabelDistribution(p, Space.PROBABILITY), tree).calibrated.values
    m = adapted_irt(LabelDistribution(teacher_logits, Space.LOGIT), tree).calibrated.values
    return _softmax_rows(m, tau)


def batch_objective(mode, S, T, Y, cfg: DistillConfig, label_a=None, label_b=None,
                    calibrated=None, literal_kdi: bool = False):
    """Per-sample loss values and d(loss)/dS for a batch.

    S, T: (n, c) student and teacher logits. Y: (n, c) hard label distributions.
    ``label_a``/``label_b`` are required for kd_p. ``calibrated`` holds the
    (n, c) order-restricted targets for kd_i; when omitted they are computed from
    T. ``literal_kdi`` swaps the kd_i extra term for CE(m_hat, y), which does not
    depend on the student and therefore adds no gradient.
    """
    mode = Mode(mode)
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    T = np.atleast_2d(np.asarray(T, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    tau, alpha = cfg.tau, cfg.alpha

    ps_t = _softmax_rows(S, tau)
    pt_t = _softmax_rows(T, tau)
    ps_1 = _softmax_rows(S, 1.0)

    soft = _ce_rows(ps_t, pt_t)
    hard = _ce_rows(ps_1, Y)
    values = alpha * tau ** 2 * soft + (1.0 - alpha) * hard
    grad = (alpha * tau * (ps_t * pt_t.sum(axis=1, keepdims=True) - pt_t)
            + (1.0 - alpha) * (ps_1 * Y.sum(axis=1, keepdims=True) - Y))

    if mode is Mode.KD_I:
        if calibrated is None:
            if label_a is None or label_b is None:
                raise ValueError("kd_i needs the original labels or precomputed targets")
            calibrated = np.stack([
                calibrate_teacher(T[r], _tree(int(label_a[r]), int(label_b[r]), S.shape[1]), tau)
                for r in range(S.shape[0])])
        M = np.atleast_2d(calibrated)
        if literal_kdi:
            values = values + cfg.beta * _ce_rows(M, Y)
        else:
            values = values + cfg.beta * _ce_rows(ps_t, M)
            grad = grad + cfg.beta / tau * (ps_t * M.sum(axis=1, keepdims=True) - M)
    elif mode is Mode.KD_P:
        if label_a is None or label_b is None:
            raise ValueError("kd_p needs the original labels")
        pen, pen_grad = batch_order_penalty(S, np.asarray(label_a), np.asarray(label_b))
        values = values + cfg.sigma * pen
        grad = grad + cfg.sigma * pen_grad
    return values, grad


def _tree(a: int, b: int, c: int) -> OrderTree:
    return OrderTree(a, b, tuple(k for k in range(c) if k != a and k != b))


def _single(mode, student_logits, teacher_logits, y, cfg, h=None, **kw):
    if len(student_logits) != len(teacher_logits) or len(y) != len(student_logits):
        raise ValueError("student, teacher and label lengths differ")
    la = lb = None
    if h is not None:
        la, lb = np.array([h.label_a]), np.array([h.label_b])
    values, grad = batch_objective(mode, student_logits.values, teacher_logits.values, y.values,
                                   cfg, la, lb, **kw)
    return float(values[0]), grad[0]


def kd_loss(student_logits: LabelDistribution, teacher_logits: LabelDistribution,
            y: LabelDistribution, cfg: DistillConfig) -> float:
    return _single(Mode.KD, student_logits, teacher_logits, y, cfg)[0]


def kd_aug_loss(student_logits, teacher_logits, h: MixedHardLabel, cfg: DistillConfig) -> float:
    return _single(Mode.KD_AUG, student_logits, teacher_logits, expand_hard_label(h), cfg, h)[0]


def kd_i_loss(student_logits, teacher_logits, h: MixedHardLabel, cfg: DistillConfig,
              space: str = "probability", literal: bool = False) -> float:
    """KD on the mixed sample plus beta * CE(student softened at tau, calibrated teacher)."""
    m_hat = calibrate_teacher(teacher_logits.values, build_order_tree(h), cfg.tau, space)
    return _single(Mode.KD_I, student_logits, teacher_logits, expand_hard_label(h), cfg, h,
                   calibrated=m_hat[None, :], literal_kdi=literal)[0]


def kd_p_loss(student_logits, teacher_logits, h: MixedHardLabel, cfg: DistillConfig) -> float:
    return _single(Mode.KD_P, student_logits, teacher_logits, expand_hard_label(h), cfg, h)[0]


def loss_gradient(mode, student_logits: LabelDistribution, teacher_logits: LabelDistribution,
                  target, cfg: DistillConfig) -> np.ndarray:
    """Gradient of a single-sample loss with respect to the student logits.

    ``target`` is a LabelDistribution for kd and a MixedHardLabel otherwise.
    """
    mode = Mode(mode)
    if mode is Mode.KD:
        return _single(mode, student_logits, teacher_logits, target, cfg)[1]
    kw = {}
    if mode is Mode.KD_I:
        kw["calibrated"] = calibrate_teacher(teacher_logits.values, build_order_tree(target), cfg.tau)[None, :]
    return _single(mode, student_logits, teacher_logits, expand_hard_label(target), cfg, target, **kw)[1]
