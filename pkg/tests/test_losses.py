import math

import numpy as np
import pytest

from conftest import central_diff, rel_err
from isoda.isotonic import brute_force_projection
from isoda.losses import (DistillConfig, Mode, batch_objective, cross_entropy, kd_aug_loss, kd_i_loss, kd_loss,
                          kd_p_loss, loss_gradient, softmax_t)
from isoda.types import LabelDistribution, MixedHardLabel, build_order_tree, expand_hard_label

L = LabelDistribution.logits
P = LabelDistribution.probs


# plain-Python reference evaluation, kept apart from the numpy path
def ref_softmax(z, tau):
    m = max(z)
    e = [math.exp((x - m) / tau) for x in z]
    s = sum(e)
    return [x / s for x in e]


def ref_ce(pred, target):
    return -sum(t * math.log(max(p, 1e-12)) for p, t in zip(pred, target))


def ref_kd(s, t, y, cfg):
    soft = ref_ce(ref_softmax(s, cfg.tau), ref_softmax(t, cfg.tau))
    hard = ref_ce(ref_softmax(s, 1.0), y)
    return cfg.alpha * cfg.tau ** 2 * soft + (1 - cfg.alpha) * hard


def ref_penalty(s, a, b):
    others = [x for k, x in enumerate(s) if k not in (a, b)]
    return max(0.0, s[b] - s[a]) + (max(0.0, max(others) - min(s[a], s[b])) if others else 0.0)


def test_softmax_examples():
    np.testing.assert_allclose(softmax_t(L([0, 0, 0]), 1).values, [1 / 3] * 3, atol=1e-15)
    np.testing.assert_allclose(softmax_t(L([math.log(2), 0]), 1).values, [2 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(softmax_t(L([5, 1]), 1000).values, [0.5, 0.5], atol=1e-3)
    assert abs(softmax_t(L([800.0, -800.0, 3.0]), 0.5).values.sum() - 1) <= 1e-12
    with pytest.raises(ValueError):
        softmax_t(L([1, 2]), 0.0)
    with pytest.raises(ValueError):
        softmax_t(P([0.5, 0.5]), 1.0)


def test_cross_entropy_examples():
    assert cross_entropy(P([0, 1, 0]), P([0, 1, 0])) <= 1e-11
    assert cross_entropy(P([0.5, 0.5]), P([1, 0])) == pytest.approx(math.log(2), abs=1e-15)
    assert cross_entropy(P([1 / 3] * 3), P([0.2, 0.5, 0.3])) == pytest.approx(math.log(3), abs=1e-12)
    with pytest.raises(ValueError):
        cross_entropy(L([0.5, 0.5]), P([1, 0]))


def test_config_validation():
    assert DistillConfig() == DistillConfig(tau=4.5, alpha=0.95, beta=3.0, sigma=2.0)
    for bad in (dict(tau=0), dict(alpha=1.5), dict(beta=-1), dict(sigma=-0.1)):
        with pytest.raises(ValueError):
            DistillConfig(**bad)


def test_kd_loss_examples():
    s, t = L([1.0, 0.0]), L([0.0, 1.0])
    y = P([1.0, 0.0])
    cfg = DistillConfig()
    assert kd_loss(s, t, y, cfg) == pytest.approx(ref_kd([1, 0], [0, 1], [1, 0], cfg), rel=1e-12)
    # alpha = 0: hard loss only
    assert kd_loss(s, t, y, DistillConfig(alpha=0.0)) == pytest.approx(ref_ce(ref_softmax([1, 0], 1), [1, 0]))
    # alpha = 1 and student == teacher: tau^2 times the entropy of the softened teacher
    cfg1 = DistillConfig(alpha=1.0, tau=2.0)
    p = ref_softmax([0.3, -1.0, 2.0], 2.0)
    assert kd_loss(L([0.3, -1.0, 2.0]), L([0.3, -1.0, 2.0]), P([0, 0, 1]), cfg1) == \
        pytest.approx(4.0 * -sum(x * math.log(x) for x in p), rel=1e-12)


def test_kd_aug_examples():
    cfg = DistillConfig()
    s, t = L([0.2, 1.1, -0.4]), L([1.5, 0.3, -0.2])
    h = MixedHardLabel(1, 0, 1.0, 3)
    assert kd_aug_loss(s, t, h, cfg) == kd_loss(s, t, P([0, 1, 0]), cfg)
    assert kd_aug_loss(s, t, MixedHardLabel(0, 2, 0.3, 3), cfg) == kd_aug_loss(s, t, MixedHardLabel(2, 0, 0.7, 3), cfg)
    h = MixedHardLabel(0, 2, 0.65, 3)
    assert kd_aug_loss(s, t, h, cfg) == pytest.approx(
        ref_kd([0.2, 1.1, -0.4], [1.5, 0.3, -0.2], [0.65, 0, 0.35], cfg), rel=1e-12)


def test_kd_i_examples():
    cfg = DistillConfig()
    s = L([0.4, -0.3, 0.9, 0.1])
    h = MixedHardLabel(0, 1, 0.7, 4)
    # concordant teacher: the calibrated target is the softened teacher itself
    t_ok = L([3.0, 2.0, 0.5, -1.0])
    extra = cfg.beta * ref_ce(ref_softmax(s.values, cfg.tau), ref_softmax(t_ok.values, cfg.tau))
    assert kd_i_loss(s, t_ok, h, cfg) == pytest.approx(kd_aug_loss(s, t_ok, h, cfg) + extra, rel=1e-12)
    # beta = 0
    t_bad = L([1.0, 2.0, 0.5, -1.0])
    cfg0 = DistillConfig(beta=0.0)
    assert kd_i_loss(s, t_bad, h, cfg0) == kd_aug_loss(s, t_bad, h, cfg0)
    # one violation: compose the exhaustive projection with the reference CE
    m_hat = brute_force_projection(softmax_t(t_bad, cfg.tau), build_order_tree(h)).values
    expected = ref_kd(s.values, t_bad.values, [0.7, 0.3, 0, 0], cfg) + cfg.beta * ref_ce(
        ref_softmax(s.values, cfg.tau), m_hat)
    assert kd_i_loss(s, t_bad, h, cfg) == pytest.approx(expected, rel=1e-12)


def test_kd_i_variants():
    cfg = DistillConfig()
    s, t = L([0.4, -0.3, 0.9, 0.1]), L([1.0, 2.0, 0.5, -1.0])
    h = MixedHardLabel(0, 1, 0.7, 4)
    lit = kd_i_loss(s, t, h, cfg, literal=True)
    m_hat = brute_force_projection(softmax_t(t, cfg.tau), build_order_tree(h)).values
    assert lit == pytest.approx(kd_aug_loss(s, t, h, cfg) + cfg.beta * ref_ce(m_hat, [0.7, 0.3, 0, 0]), rel=1e-12)
    # calibrating logits first still yields a finite loss above kd_aug
    assert kd_i_loss(s, t, h, cfg, space="logit") >= kd_aug_loss(s, t, h, cfg)


def test_kd_p_examples():
    cfg = DistillConfig()
    h = MixedHardLabel(0, 1, 0.8, 4)
    t = L([0.5, 0.1, 0.3, -0.2])
    feasible = L([3.0, 2.0, 1.0, 0.5])
    assert kd_p_loss(feasible, t, h, cfg) == kd_aug_loss(feasible, t, h, cfg)
    s = L([2.0, 3.0, 3.5, 0.5])  # both hinges active
    assert kd_p_loss(s, t, h, DistillConfig(sigma=0.0)) == kd_aug_loss(s, t, h, DistillConfig(sigma=0.0))
    expected = ref_kd(s.values, t.values, [0.8, 0.2, 0, 0], cfg) + cfg.sigma * (1.0 + 1.5)
    assert ref_penalty(list(s.values), 0, 1) == 2.5
    assert kd_p_loss(s, t, h, cfg) == pytest.approx(expected, rel=1e-12)


def test_tau_squared_scaling():
    s, t = [0.3, -0.7, 1.2], [1.0, 0.2, -0.5]
    for tau in (1.0, 2.0, 4.5):
        cfg = DistillConfig(tau=tau, alpha=1.0)
        soft = ref_ce(ref_softmax(s, tau), ref_softmax(t, tau))
        assert kd_loss(L(s), L(t), P([1, 0, 0]), cfg) == pytest.approx(tau ** 2 * soft, rel=1e-12)


def _random_instance(rng, c=None):
    c = c or int(rng.integers(3, 8))
    a, b = rng.choice(c, 2, replace=False)
    h = MixedHardLabel(int(a), int(b), float(rng.uniform(0.5, 1.0)), c)
    return rng.standard_normal(c) * 2, rng.standard_normal(c) * 2, h


def _far_from_kinks(s, h, eps=1e-3):
    others = np.sort(s[h.others()])
    gaps = [s[h.label_b] - s[h.label_a], others[-1] - min(s[h.label_a], s[h.label_b])]
    if len(others) > 1:
        gaps.append(others[-1] - others[-2])
    return min(abs(g) for g in gaps) > eps


@pytest.mark.parametrize("mode", list(Mode))
def test_loss_gradients_match_finite_differences(mode):
    rng = np.random.default_rng(100 + list(Mode).index(mode))
    cfg = DistillConfig()
    done = 0
    while done < 50:
        s, t, h = _random_instance(rng)
        if not _far_from_kinks(s, h):
            continue
        if mode is Mode.KD:
            y = P(np.eye(h.c)[h.label_a])
            f = lambda x: kd_loss(L(x), L(t), y, cfg)
            g = loss_gradient(mode, L(s), L(t), y, cfg)
        else:
            fn = {Mode.KD_AUG: kd_aug_loss, Mode.KD_I: kd_i_loss, Mode.KD_P: kd_p_loss}[mode]
            f = lambda x: fn(L(x), L(t), h, cfg)
            g = loss_gradient(mode, L(s), L(t), h, cfg)
        assert rel_err(g, central_diff(f, s)) <= 1e-4
        done += 1


def test_added_terms_are_nonnegative(rng):
    cfg = DistillConfig()
    for _ in range(200):
        s, t, h = _random_instance(rng)
        base = kd_aug_loss(L(s), L(t), h, cfg)
        assert np.isfinite(base)
        assert kd_i_loss(L(s), L(t), h, cfg) >= base
        assert kd_p_loss(L(s), L(t), h, cfg) >= base


def test_batch_objective_rows_match_single(rng):
    cfg = DistillConfig()
    cases = [_random_instance(rng, 5) for _ in range(20)]
    S = np.stack([c[0] for c in cases])
    T = np.stack([c[1] for c in cases])
    Y = np.stack([expand_hard_label(c[2]).values for c in cases])
    la = np.array([c[2].label_a for c in cases])
    lb = np.array([c[2].label_b for c in cases])
    for mode, fn in ((Mode.KD_AUG, kd_aug_loss), (Mode.KD_I, kd_i_loss), (Mode.KD_P, kd_p_loss)):
        vals, _ = batch_objective(mode, S, T, Y, cfg, la, lb)
        for r, (s, t, h) in enumerate(cases):
            assert vals[r] == pytest.approx(fn(L(s), L(t), h, cfg), rel=1e-14)


def test_length_mismatch():
    with pytest.raises(ValueError):
        kd_loss(L([0.0, 1.0]), L([0.0, 1.0, 2.0]), P([1, 0]), DistillConfig())
