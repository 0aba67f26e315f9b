"""Label-space data model shared by every other module.

Label indices are 0-based everywhere.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Space(str, enum.Enum):
    PROBABILITY = "probability"
    LOGIT = "logit"


@dataclass(frozen=True, eq=False)
class LabelDistribution:
    """A length-c vector over the label space, tagged as probabilities or logits."""

    values: np.ndarray
    space: Space = Space.PROBABILITY

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] < 2:
            raise ValueError(f"label distribution needs a 1-d vector of length >= 2, got shape {v.shape}")
        space = Space(self.space)
        if space is Space.PROBABILITY:
            if np.any(v < 0):
                raise ValueError("probability entries must be nonnegative")
            if abs(v.sum() - 1.0) > 1e-9:
                raise ValueError(f"probabilities must sum to 1, got {float(v.sum())!r}")
        elif not np.all(np.isfinite(v)):
            raise ValueError("logits must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "space", space)

    def __len__(self):
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LabelDistribution):
            return NotImplemented
        return self.space is other.space and np.array_equal(self.values, other.values)

    __hash__ = None

    @classmethod
    def logits(cls, values) -> "LabelDistribution":
        return cls(values, Space.LOGIT)

    @classmethod
    def probs(cls, values) -> "LabelDistribution":
        return cls(values, Space.PROBABILITY)


@dataclass(frozen=True)
class MixedHardLabel:
    """Two original labels mixed with weight ``gamma`` on ``label_a``.

    Construction normalizes so that ``gamma >= 0.5``: a smaller weight swaps the
    labels. At exactly 0.5 the caller's order is kept.
    """

    label_a: int
    label_b: int
    gamma: float
    c: int

    def __post_init__(self):
        a, b, g, c = int(self.label_a), int(self.label_b), float(self.gamma), int(self.c)
        if c < 2:
            raise ValueError("label space needs at least 2 labels")
        if not (0 <= a < c and 0 <= b < c):
            raise ValueError(f"label indices ({a}, {b}) outside [0, {c})")
        if a == b:
            raise ValueError("mixed samples must come from two different labels")
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {g}")
        if g < 0.5:
            a, b, g = b, a, 1.0 - g
        object.__setattr__(self, "label_a", a)
        object.__setattr__(self, "label_b", b)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "c", c)

    def others(self) -> np.ndarray:
        mask = np.ones(self.c, dtype=bool)
        mask[[self.label_a, self.label_b]] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class OrderTree:
    """Constraint tree: root >= second, second >= every leaf."""

    root: int
    second: int
    leaves: tuple[int, ...] = field(default=())

    @property
    def size(self) -> int:
        return len(self.leaves) + 2

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(self.root, self.second)] + [(self.second, leaf) for leaf in self.leaves]


@dataclass(frozen=True, eq=False)
class SampleTensor:
    """A W x H x C array standing in for an image."""

    data: np.ndarray

    def __post_init__(self):
        d = np.array(self.data, dtype=np.float64)
        if d.ndim == 2:
            d = d[:, :, None]
        if d.ndim != 3 or min(d.shape) < 1:
            raise ValueError(f"sample tensor must be W x H x C with positive dims, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("sample tensor entries must be finite")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, SampleTensor):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


def expand_hard_label(h: MixedHardLabel) -> LabelDistribution:
    y = np.zeros(h.c)
    y[h.label_a] = h.gamma
    y[h.label_b] = 1.0 - h.gamma
    return LabelDistribution(y, Space.PROBABILITY)


def build_order_tree(h: MixedHardLabel) -> OrderTree:
    return OrderTree(h.label_a, h.label_b, tuple(int(i) for i in h.others()))
