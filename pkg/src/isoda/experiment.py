"""Seed x fraction sweeps over the distillation harness.

The defaults are the noisy-teacher setup: six classes, 30% of the teacher's
labels flipped, and a wide teacher trained long enough to memorize them.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from .harness import Augmentation, DistillSettings, distill, make_dataset, train_teacher
from .losses import DistillConfig, Mode


@dataclass(frozen=True)
class ExperimentConfig:
    # objective
    modes: tuple[str, ...] = ("kd_i",)
    tau: float = 4.5
    alpha: float = 0.95
    beta: float = 3.0
    sigma: float = 2.0
    augmentation: str = "mixup"
    fractions: tuple[float, ...] = (1.0,)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    irt_space: str = "probability"
    # data
    n: int = 300
    n_test: int = 2000
    d: int = 16
    c: int = 6
    overlap: float = 1.5
    label_noise: float = 0.3
    # teacher
    teacher_epochs: int = 1000
    teacher_hidden: int = 512
    teacher_lr: float = 0.1
    # student
    epochs: int = 100
    lr: float = 0.1
    batch_size: int = 32
    hidden: int = 32
    beta_a: float = 1.0

    def __post_init__(self):
        for m in self.modes:
            Mode(m)
        if self.augmentation not in Augmentation.ALL:
            raise ValueError(f"augmentation must be one of {Augmentation.ALL}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not self.fractions or any(not 0.0 <= f <= 1.0 for f in self.fractions):
            raise ValueError("fractions must be a non-empty list of values in [0, 1]")
        if min(self.n, self.n_test, self.d, self.c, self.epochs, self.teacher_epochs,
               self.hidden, self.teacher_hidden, self.batch_size) < 1:
            raise ValueError("sizes and epoch counts must be positive")
        self.distill_config()  # validates tau, alpha, beta, sigma

    def distill_config(self) -> DistillConfig:
        return DistillConfig(self.tau, self.alpha, self.beta, self.sigma)

    @classmethod
    def from_mapping(cls, raw: dict[str, str]) -> "ExperimentConfig":
        raw = dict(raw)
        if "mode" in raw:
            if "modes" in raw:
                raise ValueError("give either 'mode' or 'modes', not both")
            raw["modes"] = raw.pop("mode")
        if "seed" in raw:
            raw.setdefault("seeds", raw.pop("seed"))
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            default = known[key].default
            try:
                if isinstance(default, tuple):
                    kind = type(default[0])
                    kwargs[key] = tuple(kind(v.strip()) for v in value.split(",") if v.strip())
                else:
                    kwargs[key] = type(default)(value)
            except ValueError:
                raise ValueError(f"bad value for {key!r}: {value!r}") from None
        return cls(**kwargs)


def run_name(mode: str, fraction: Optional[float], seed: int) -> str:
    frac = "" if fraction is None else f"_f{fraction:g}"
    return f"{mode}{frac}_s{seed}"


def _mean(xs):
    return math.fsum(xs) / len(xs)


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None, progress=None) -> dict:
    """Train one teacher per seed, then every (mode, fraction) student.

    Fractions only affect kd_i; other modes run once per seed. When
    ``out_dir`` is given, each run's per-epoch metrics go to ``<run>.jsonl``
    and the aggregate to ``summary.json``.
    """
    dcfg = cfg.distill_config()
    settings = DistillSettings(epochs=cfg.epochs, lr=cfg.lr, batch_size=cfg.batch_size, hidden=cfg.hidden,
                               beta_a=cfg.beta_a, irt_space=cfg.irt_space)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    runs, teachers = [], {}
    for seed in cfg.seeds:
        ds = make_dataset(seed=seed, n=cfg.n, d=cfg.d, c=cfg.c, overlap=cfg.overlap,
                          label_noise=cfg.label_noise, n_test=cfg.n_test)
        teacher = train_teacher(ds, epochs=cfg.teacher_epochs, lr=cfg.teacher_lr, seed=seed,
                                hidden=cfg.teacher_hidden)
        teachers[seed] = teacher.accuracy(ds.X_test, ds.y_test)
        for mode in cfg.modes:
            fracs = cfg.fractions if mode == Mode.KD_I.value else (None,)
            for frac in fracs:
                st = settings if frac is None else DistillSettings(**{**asdict(settings),
                                                                      "calibrate_fraction": frac})
                _, metrics = distill(teacher, ds, mode, dcfg, cfg.augmentation, seed, st)
                name = run_name(mode, frac, seed)
                if out_dir is not None:
                    with open(out_dir / f"{name}.jsonl", "w") as fh:
                        for m in metrics:
                            fh.write(json.dumps({k: v for k, v in m.items() if k != "step_losses"}) + "\n")
                run = {"name": name, "mode": mode, "fraction": frac, "seed": seed,
                       "test_acc": metrics[-1]["test_acc"], "final_loss": metrics[-1]["loss"]}
                runs.append(run)
                if progress:
                    progress(run)

    groups: dict[tuple, list] = {}
    for r in runs:
        groups.setdefault((r["mode"], r["fraction"]), []).append(r)
    summary = {
        "config": asdict(cfg),
        "teacher_test_acc": {str(s): a for s, a in teachers.items()},
        "mean_teacher_test_acc": _mean(list(teachers.values())),
        "groups": [
            {"mode": mode, "fraction": frac,
             "mean_test_acc": _mean([r["test_acc"] for r in rs]),
             "test_acc_by_seed": {str(r["seed"]): r["test_acc"] for r in rs}}
            for (mode, frac), rs in groups.items()
        ],
        "runs": runs,
    }
    if out_dir is not None:
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def fraction_trend(summary: dict) -> list[tuple[float, float]]:
    """(fraction, mean accuracy) for the kd_i groups, sorted by fraction."""
    pts = [(g["fraction"], g["mean_test_acc"]) for g in summary["groups"] if g["mode"] == Mode.KD_I.value]
    return sorted(pts)
