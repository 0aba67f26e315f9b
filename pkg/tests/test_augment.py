import numpy as np
import pytest

from isoda.augment import cutmix, mixup, sample_box, sample_gamma
from isoda.types import SampleTensor


def T(a):
    return SampleTensor(np.asarray(a, float))


def test_mixup_endpoints_and_value(rng):
    x, y = T(rng.standard_normal((4, 4, 3))), T(rng.standard_normal((4, 4, 3)))
    assert mixup(x, y, 1.0) == x
    assert mixup(x, y, 0.0) == y
    np.testing.assert_allclose(mixup(T([[2.0]]), T([[4.0]]), 0.7).data, [[[2.6]]])


def test_mixup_of_identical_inputs(rng):
    x = T(rng.standard_normal((5, 5, 1)))
    for g in (0.1, 0.37, 0.5, 0.93):
        np.testing.assert_allclose(mixup(x, x, g).data, x.data, atol=1e-15)


def test_shape_mismatch(rng):
    with pytest.raises(ValueError):
        mixup(T(np.zeros((2, 2))), T(np.zeros((3, 2))), 0.5)
    with pytest.raises(ValueError):
        cutmix(T(np.zeros((2, 2))), T(np.zeros((3, 2))), 0.5, rng)


def test_cutmix_rejects_zero_gamma(rng):
    with pytest.raises(ValueError):
        cutmix(T(np.zeros((4, 4))), T(np.ones((4, 4))), 0.0, rng)


def test_cutmix_gamma_one_is_identity(rng):
    x, y = T(rng.standard_normal((6, 6, 2))), T(rng.standard_normal((6, 6, 2)))
    out, eff, box = cutmix(x, y, 1.0, rng)
    assert out == x and eff == 1.0 and box.area == 0


def test_cutmix_mask(rng):
    x, y = T(np.zeros((10, 10, 2))), T(np.ones((10, 10, 2)))
    for _ in range(200):
        g = float(rng.uniform(0.05, 1.0))
        out, eff, box = cutmix(x, y, g, rng)
        inside = np.zeros((10, 10), bool)
        inside[box.x0:box.x1, box.y0:box.y1] = True
        assert np.all(out.data[inside] == 1.0) and np.all(out.data[~inside] == 0.0)
        assert eff == pytest.approx(1 - inside.sum() / 100)
        assert g - 1e-12 <= eff <= 1.0


def test_interior_box_area():
    # 10x10 at gamma 0.75: a 5x5 patch, 25 pixels, whenever it fits inside
    rng = np.random.default_rng(3)
    x, y = T(np.zeros((10, 10))), T(np.ones((10, 10)))
    seen = 0
    for _ in range(500):
        out, eff, box = cutmix(x, y, 0.75, rng)
        if box.interior(10, 10):
            assert box.area == 25 and eff == 0.75
            assert out.data.sum() == 25
            seen += 1
    assert seen > 50


def test_box_uses_height_for_height():
    box = sample_box(20, 8, 0.75, np.random.default_rng(0))
    assert box.r_w == pytest.approx(10.0) and box.r_h == pytest.approx(4.0)


def test_cutmix_reproducible():
    def run():
        rng = np.random.default_rng(99)
        x, y = T(np.zeros((16, 16))), T(np.ones((16, 16)))
        return [cutmix(x, y, 0.6, rng)[1] for _ in range(2000)]
    assert run() == run()


def test_sample_gamma_uniform():
    rng = np.random.default_rng(5)
    draws = np.array([sample_gamma(1.0, rng) for _ in range(100_000)])
    assert abs(draws.mean() - 0.5) <= 0.01


def test_sample_gamma_variance_small_a():
    rng = np.random.default_rng(6)
    draws = np.array([sample_gamma(0.2, rng) for _ in range(100_000)])
    assert abs(draws.var() - 0.25 / (2 * 0.2 + 1)) <= 0.01
    assert draws.min() > 0.0 and draws.max() < 1.0


@pytest.mark.parametrize("a", [0.0, -1.0])
def test_sample_gamma_rejects(a, rng):
    with pytest.raises(ValueError):
        sample_gamma(a, rng)
