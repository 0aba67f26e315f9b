"""Mixup, CutMix and the Beta(a, a) mixing-weight sampler."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import SampleTensor


@dataclass(frozen=True)
class PatchBox:
    """A patch centred at (r_x, r_y) with extents (r_w, r_h), plus its clipped pixel bounds.

    Pixel bounds are half-open: rows x0:x1 along W, columns y0:y1 along H.
    """

    r_x: float
    r_y: float
    r_w: float
    r_h: float
    x0: int
    x1: int
    y0: int
    y1: int

    @property
    def area(self) -> int:
        return max(0, self.x1 - self.x0) * max(0, self.y1 - self.y0)

    def interior(self, W: int, H: int) -> bool:
        """True when the unclipped box lies fully inside the image."""
        return (self.r_x - self.r_w / 2 >= 0 and self.r_x + self.r_w / 2 <= W
                and self.r_y - self.r_h / 2 >= 0 and self.r_y + self.r_h / 2 <= H)


def _same_shape(x_i: SampleTensor, x_j: SampleTensor):
    if x_i.shape != x_j.shape:
        raise ValueError(f"shape mismatch: {x_i.shape} vs {x_j.shape}")


def mixup(x_i: SampleTensor, x_j: SampleTensor, gamma: float) -> SampleTensor:
    _same_shape(x_i, x_j)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 1.0:
        return x_i
    if gamma == 0.0:
        return x_j
    return SampleTensor(gamma * x_i.data + (1.0 - gamma) * x_j.data)


def sample_box(W: int, H: int, gamma: float, rng: np.random.Generator) -> PatchBox:
    cut = math.sqrt(1.0 - gamma)
    r_x, r_y = rng.uniform(0, W), rng.uniform(0, H)
    r_w, r_h = W * cut, H * cut
    # integer extent never exceeds the real one, so clipping and rounding can
    # only raise the effective gamma; the start is rounded half up
    w, h = math.floor(r_w), math.floor(r_h)
    x0, y0 = math.floor(r_x - w / 2 + 0.5), math.floor(r_y - h / 2 + 0.5)
    x1, y1 = min(x0 + w, W), min(y0 + h, H)
    x0, y0 = max(x0, 0), max(y0, 0)
    return PatchBox(r_x, r_y, r_w, r_h, x0, x1, y0, y1)


def cutmix(x_i: SampleTensor, x_j: SampleTensor, gamma: float, rng: np.random.Generator):
    """Paste a patch of ``x_j`` into ``x_i``.

    Returns (mixed sample, effective gamma, box). The effective gamma is the
    fraction of pixels still taken from ``x_i`` after clipping the box.
    """
    _same_shape(x_i, x_j)
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"cutmix needs gamma in (0, 1], got {gamma}")
    W, H, _ = x_i.shape
    box = sample_box(W, H, gamma, rng)
    out = np.array(x_i.data)
    out[box.x0:box.x1, box.y0:box.y1, :] = x_j.data[box.x0:box.x1, box.y0:box.y1, :]
    effective = 1.0 - box.area / (W * H)
    return SampleTensor(out), effective, box


def sample_gamma(a: float, rng: np.random.Generator) -> float:
    """One draw from Beta(a, a), kept strictly inside (0, 1)."""
    if not a > 0:
        raise ValueError(f"Beta parameter must be positive, got {a}")
    g = float(rng.beta(a, a))
    # small a puts mass near the endpoints; float draws can land exactly on them
    tiny = np.finfo(np.float64).tiny
    return min(max(g, tiny), 1.0 - np.finfo(np.float64).epsneg)
