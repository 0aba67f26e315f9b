"""Desk-scale distillation: a two-layer ReLU MLP trained by hand-written backprop.

Teacher and student are both :class:`Mlp`. The dataset is a mixture of Gaussian
clusters; the teacher can be trained on labels with a fraction flipped, which
gives it the kind of order violations that the calibrated losses target.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .augment import cutmix, sample_gamma
from .losses import DistillConfig, Mode, _softmax_rows, batch_objective, calibrate_teacher
from .diagnostics import calibration_subset
from .types import OrderTree, SampleTensor


class Augmentation:
    MIXUP = "mixup"
    CUTMIX = "cutmix"
    ALL = (MIXUP, CUTMIX)


@dataclass
class Mlp:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, d: int, h: int, c: int, rng: np.random.Generator) -> "Mlp":
        # He scaling for the ReLU layer, Glorot-ish for the logit layer
        W1 = rng.standard_normal((d, h)) * math.sqrt(2.0 / d)
        W2 = rng.standard_normal((h, c)) * math.sqrt(1.0 / h)
        return cls(W1, np.zeros(h), W2, np.zeros(c))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.W1.shape[0], self.W1.shape[1], self.W2.shape[1]

    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "Mlp":
        return Mlp(*(p.copy() for p in self.params()))

    def forward(self, X: np.ndarray, cache: bool = False):
        X = np.atleast_2d(X)
        pre = X @ self.W1 + self.b1
        act = np.maximum(pre, 0.0)
        logits = act @ self.W2 + self.b2
        if cache:
            return logits, (X, pre, act)
        return logits

    def backward(self, cache, dlogits: np.ndarray) -> list[np.ndarray]:
        X, pre, act = cache
        dW2 = act.T @ dlogits
        db2 = dlogits.sum(axis=0)
        dact = dlogits @ self.W2.T
        dpre = dact * (pre > 0)
        dW1 = X.T @ dpre
        db1 = dpre.sum(axis=0)
        return [dW1, db1, dW2, db2]

    def sgd_step(self, grads: list[np.ndarray], lr: float) -> None:
        for p, g in zip(self.params(), grads):
            p -= lr * g

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(X), axis=1)

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X) == y))


@dataclass(frozen=True)
class SyntheticDataset:
    """Gaussian-cluster classification data.

    ``y_teacher`` equals ``y_train`` with a ``label_noise`` fraction of labels
    replaced by a different class; only the teacher sees it.
    """

    X_train: np.ndarray
    y_train: np.ndarray
    y_teacher: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    c: int
    params: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.X_train.shape[1]

    @property
    def n(self) -> int:
        return self.X_train.shape[0]


def make_dataset(seed: int = 0, n: int = 1200, d: int = 16, c: int = 6, overlap: float = 1.0,
                 label_noise: float = 0.0, n_test: Optional[int] = None) -> SyntheticDataset:
    """Draw ``c`` unit-norm-ish cluster centres and sample around them.

    ``overlap`` is the within-cluster standard deviation relative to the
    typical centre spacing; larger values mean harder problems.
    """
    if n < 2 or c < 2 or d < 1:
        raise ValueError("need n >= 2, c >= 2 and d >= 1")
    if not 0.0 <= label_noise < 1.0:
        raise ValueError(f"label_noise must lie in [0, 1), got {label_noise}")
    n_test = n if n_test is None else n_test
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA7A]))
    centres = rng.standard_normal((c, d))
    centres /= np.linalg.norm(centres, axis=1, keepdims=True)
    spread = overlap / math.sqrt(d)

    def draw(m):
        y = np.arange(m) % c
        y = y[rng.permutation(m)]
        X = centres[y] + spread * rng.standard_normal((m, d))
        return X, y

    X_train, y_train = draw(n)
    X_test, y_test = draw(n_test)
    y_teacher = y_train.copy()
    flip = rng.random(n) < label_noise
    shift = rng.integers(1, c, size=n)
    y_teacher[flip] = (y_train[flip] + shift[flip]) % c
    params = dict(seed=seed, n=n, d=d, c=c, overlap=overlap, label_noise=label_noise, n_test=n_test)
    return SyntheticDataset(X_train, y_train, y_teacher, X_test, y_test, c, params)


def lr_at(epoch: int, epochs: int, lr: float) -> float:
    """Step schedule: x0.2 at 30%, 60% and 80% of training."""
    factor = 1.0
    for frac in (0.3, 0.6, 0.8):
        if epoch >= int(round(frac * epochs)):
            factor *= 0.2
    return lr * factor


def _streams(seed: int, k: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def train_teacher(ds: SyntheticDataset, epochs: int = 60, lr: float = 0.1, seed: int = 0,
                  hidden: int = 64, batch_size: int = 64, log: Optional[list] = None) -> Mlp:
    """Plain cross-entropy SGD on the (possibly noisy) teacher labels."""
    if ds.n == 0:
        raise ValueError("empty dataset")
    init_rng, order_rng = _streams(seed, 2)
    net = Mlp.init(ds.d, hidden, ds.c, init_rng)
    onehot = np.eye(ds.c)[ds.y_teacher]
    for epoch in range(epochs):
        step_lr = lr_at(epoch, epochs, lr)
        perm = order_rng.permutation(ds.n)
        total = 0.0
        for start in range(0, ds.n, batch_size):
            idx = perm[start:start + batch_size]
            logits, cache = net.forward(ds.X_train[idx], cache=True)
            p = _softmax_rows(logits, 1.0)
            total += float(-np.sum(onehot[idx] * np.log(np.maximum(p, 1e-12))))
            net.sgd_step(net.backward(cache, (p - onehot[idx]) / len(idx)), step_lr)
        if log is not None:
            log.append({"epoch": epoch, "lr": step_lr, "loss": total / ds.n,
                        "train_acc": net.accuracy(ds.X_train, ds.y_train),
                        "test_acc": net.accuracy(ds.X_test, ds.y_test)})
    return net


def grid_side(d: int) -> int:
    s = math.isqrt(d)
    if s * s != d:
        raise ValueError(f"cutmix needs a square feature count, got d={d}")
    return s


@dataclass
class Batch:
    """One step's worth of training inputs, already augmented."""

    X: np.ndarray
    Y: np.ndarray
    label_a: np.ndarray
    label_b: np.ndarray
    gamma: np.ndarray


def draw_pairs(y: np.ndarray, idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A random partner for each index in ``idx`` carrying a different label."""
    n = y.shape[0]
    partner = rng.integers(0, n, size=idx.shape[0])
    bad = y[partner] == y[idx]
    while bad.any():
        partner[bad] = rng.integers(0, n, size=int(bad.sum()))
        bad = y[partner] == y[idx]
    return partner


def make_batch(ds: SyntheticDataset, idx: np.ndarray, mode: Mode, augmentation: str,
               rng: np.random.Generator, beta_a: float = 1.0,
               fixed_gamma: Optional[float] = None) -> Batch:
    """Pair and mix samples for one step.

    Pairs and gammas are drawn in every mode, so the random stream is consumed
    identically whether or not the mix is used. In ``kd`` mode the batch is the
    first sample of each pair with its one-hot label.
    """
    partner = draw_pairs(ds.y_train, idx, rng)
    gamma = np.array([fixed_gamma if fixed_gamma is not None else sample_gamma(beta_a, rng)
                      for _ in range(idx.shape[0])])
    ya, yb = ds.y_train[idx], ds.y_train[partner]
    Xa, Xb = ds.X_train[idx], ds.X_train[partner]
    c = ds.c
    rows = np.arange(idx.shape[0])

    if augmentation == Augmentation.CUTMIX:
        s = grid_side(ds.d)
        X = np.empty_like(Xa)
        eff = np.empty_like(gamma)
        for r in rows:
            mixed, eff[r], _ = cutmix(SampleTensor(Xa[r].reshape(s, s)), SampleTensor(Xb[r].reshape(s, s)),
                                      gamma[r], rng)
            X[r] = mixed.data.reshape(-1)
        gamma = eff
    elif augmentation == Augmentation.MIXUP:
        g = gamma[:, None]
        X = np.where(g == 1.0, Xa, g * Xa + (1.0 - g) * Xb)
    else:
        raise ValueError(f"unknown augmentation {augmentation!r}")

    if mode is Mode.KD:
        Y = np.zeros((idx.shape[0], c))
        Y[rows, ya] = 1.0
        return Batch(Xa, Y, ya, yb, np.ones_like(gamma))

    # orient each pair so that gamma >= 0.5 sits on label_a
    swap = gamma < 0.5
    la = np.where(swap, yb, ya)
    lb = np.where(swap, ya, yb)
    g = np.where(swap, 1.0 - gamma, gamma)
    Y = np.zeros((idx.shape[0], c))
    Y[rows, la] = g
    Y[rows, lb] = 1.0 - g
    return Batch(X, Y, la, lb, g)


def _tree(a: int, b: int, c: int) -> OrderTree:
    return OrderTree(a, b, tuple(k for k in range(c) if k != a and k != b))


def calibrated_targets(T: np.ndarray, batch: Batch, tau: float, fraction: float,
                       rng: np.random.Generator, space: str = "probability") -> np.ndarray:
    """Teacher soft labels with a ``fraction`` of rows order-restricted."""
    M = _softmax_rows(T, tau)
    mask = calibration_subset(T.shape[0], fraction, rng)
    for r in np.flatnonzero(mask):
        M[r] = calibrate_teacher(T[r], _tree(int(batch.label_a[r]), int(batch.label_b[r]), T.shape[1]),
                                 tau, space)
    return M


def step_loss(student: Mlp, teacher: Mlp, batch: Batch, mode: Mode, cfg: DistillConfig,
              calibrated: Optional[np.ndarray] = None):
    """Mean loss over the batch and its gradient for every student parameter."""
    S, cache = student.forward(batch.X, cache=True)
    T = teacher.forward(batch.X)
    values, dS = batch_objective(mode, S, T, batch.Y, cfg, batch.label_a, batch.label_b,
                                 calibrated=calibrated)
    n = batch.X.shape[0]
    return float(values.mean()), student.backward(cache, dS / n)


@dataclass(frozen=True)
class DistillSettings:
    epochs: int = 40
    lr: float = 0.1
    batch_size: int = 64
    hidden: int = 32
    beta_a: float = 1.0
    calibrate_fraction: float = 1.0
    irt_space: str = "probability"
    fixed_gamma: Optional[float] = None


def distill(teacher: Mlp, ds: SyntheticDataset, mode, cfg: DistillConfig, augmentation: str = "mixup",
            seed: int = 0, settings: Optional[DistillSettings] = None, **overrides):
    """Train a fresh student against ``teacher`` with the chosen objective.

    Returns (student, metrics) where metrics holds one dict per epoch.
    """
    mode = Mode(mode)
    st = replace(settings or DistillSettings(), **overrides)
    if teacher.dims[0] != ds.d or teacher.dims[2] != ds.c:
        raise ValueError(f"teacher dims {teacher.dims} do not fit data (d={ds.d}, c={ds.c})")
    if augmentation == Augmentation.CUTMIX:
        grid_side(ds.d)
    elif augmentation != Augmentation.MIXUP:
        raise ValueError(f"unknown augmentation {augmentation!r}")

    init_rng, order_rng, mix_rng, select_rng = _streams(seed, 4)
    student = Mlp.init(ds.d, st.hidden, ds.c, init_rng)
    metrics = []
    for epoch in range(st.epochs):
        step_lr = lr_at(epoch, st.epochs, st.lr)
        perm = order_rng.permutation(ds.n)
        losses = []
        for start in range(0, ds.n, st.batch_size):
            idx = perm[start:start + st.batch_size]
            batch = make_batch(ds, idx, mode, augmentation, mix_rng, st.beta_a, st.fixed_gamma)
            M = None
            if mode is Mode.KD_I:
                M = calibrated_targets(teacher.forward(batch.X), batch, cfg.tau, st.calibrate_fraction,
                                       select_rng, st.irt_space)
            loss, grads = step_loss(student, teacher, batch, mode, cfg, M)
            student.sgd_step(grads, step_lr)
            losses.append(loss)
        metrics.append({"epoch": epoch, "lr": step_lr, "loss": float(np.mean(losses)),
                        "step_losses": losses,
                        "train_acc": student.accuracy(ds.X_train, ds.y_train),
                        "test_acc": student.accuracy(ds.X_test, ds.y_test)})
    return student, metrics
