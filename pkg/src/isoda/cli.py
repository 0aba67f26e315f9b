"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error (bad records, bad config,
or a failed bench scaling check).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .diagnostics import summarize, violation_report
from .experiment import ExperimentConfig, run_experiment
from .isotonic import adapted_irt, count_violations
from .losses import softmax_t
from .penalty import order_penalty
from .records import LabelRecord, RecordError, fmt_float, parse_config, read_records, write_records
from .types import LabelDistribution, MixedHardLabel, Space, build_order_tree

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(path: str) -> list[LabelRecord]:
    with open(path, encoding="utf-8") as fh:
        return list(read_records(fh))


def _hard_label(rec: LabelRecord, row: int) -> MixedHardLabel:
    try:
        return MixedHardLabel(rec.label_a, rec.label_b, rec.gamma, len(rec.soft))
    except ValueError as e:
        raise RecordError(row, str(e)) from None


def _distribution(rec: LabelRecord, row: int, space: str, tau: float) -> LabelDistribution:
    try:
        if space == "logits":
            return softmax_t(LabelDistribution(rec.soft, Space.LOGIT), tau)
        return LabelDistribution(rec.soft, Space.PROBABILITY)
    except ValueError as e:
        raise RecordError(row, str(e)) from None


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_calibrate(args) -> int:
    output = args.output or args.out
    if output is None:
        raise _UsageError("calibrate needs an output path")
    records = _load(args.input)
    lines = []
    for row, rec in enumerate(records, start=1):
        h = _hard_label(rec, row)
        if args.mode == "irt":
            soft = _distribution(rec, row, args.space, args.tau)
            cal = adapted_irt(soft, build_order_tree(h)).calibrated
            lines.append(LabelRecord(rec.id, rec.gamma, rec.label_a, rec.label_b,
                                     tuple(cal.values.tolist())).to_line() + "\n")
        else:
            scores = LabelDistribution(rec.soft, Space.LOGIT)
            pen = order_penalty(scores, h)
            lines.append(f'{{"id": {json.dumps(rec.id)}, "penalty": {fmt_float(pen)}, '
                         f'"violations": {count_violations(scores, build_order_tree(h))}}}\n')
    Path(output).write_text("".join(lines), encoding="utf-8")
    return EXIT_OK


def diagnose_records(records: list[LabelRecord], space: str = "probs", tau: float = 1.0) -> dict:
    reports = []
    for row, rec in enumerate(records, start=1):
        h = _hard_label(rec, row)
        reports.append(violation_report(_distribution(rec, row, space, tau), h))
    return summarize(reports)


def format_report(summary: dict, kind: str) -> str:
    if kind == "json":
        return json.dumps(summary, sort_keys=True) + "\n"
    if summary["n"] == 0:
        return "records: 0\n"
    return (f"records: {summary['n']}\n"
            f"mean kendall tau (known pairs): {summary['mean_kendall_tau']:.6f}\n"
            f"top-2 contains an original label: {summary['top2_ratio']:.6f}\n"
            f"mean violations per record: {summary['mean_violations']:.6f}\n")


def cmd_diagnose(args) -> int:
    summary = diagnose_records(_load(args.input), args.space, args.tau)
    _emit(format_report(summary, args.report), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        raw = parse_config(Path(args.config).read_text(encoding="utf-8"))
        cfg = ExperimentConfig.from_mapping(raw)
    except (OSError, ValueError) as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_DATA
    out_dir = Path(args.out or "experiment_out")

    def progress(run):
        print(f"{run['name']}: test_acc={run['test_acc']:.4f}", file=sys.stderr)

    summary = run_experiment(cfg, out_dir, progress=None if args.quiet else progress)
    for g in summary["groups"]:
        frac = "" if g["fraction"] is None else f" fraction={g['fraction']:g}"
        print(f"{g['mode']}{frac}: mean_test_acc={g['mean_test_acc']:.4f}")
    return EXIT_OK


def _time_per_call(fn, reps: int) -> float:
    fn()
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(c_values, reps: int, seed: int = 0, calls: int = 20) -> list[dict]:
    """Best-of-``reps`` mean time per call for both order-restriction routes."""
    rng = np.random.default_rng(seed)
    rows = []
    for c in c_values:
        if c < 2:
            raise ValueError("c values must be >= 2")
        probs = [LabelDistribution(rng.dirichlet(np.ones(c)), Space.PROBABILITY) for _ in range(calls)]
        logits = [LabelDistribution(rng.standard_normal(c), Space.LOGIT) for _ in range(calls)]
        hs = [MixedHardLabel(0, 1, float(rng.uniform(0.5, 1.0)), c) for _ in range(calls)]
        trees = [build_order_tree(h) for h in hs]

        def run_irt():
            for p, t in zip(probs, trees):
                adapted_irt(p, t)

        def run_pen():
            for s, h in zip(logits, hs):
                order_penalty(s, h)

        rows.append({"c": c, "irt_seconds": _time_per_call(run_irt, reps) / calls,
                     "penalty_seconds": _time_per_call(run_pen, reps) / calls})
    return rows


def scaling_checks(rows: list[dict]) -> list[tuple[str, float, float, bool]]:
    """Ratio checks between c=1000 and c=10000 when both were measured."""
    by_c = {r["c"]: r for r in rows}
    if 1000 not in by_c or 10000 not in by_c:
        return []
    out = []
    for key, bound in (("irt_seconds", 15.0), ("penalty_seconds", 12.0)):
        ratio = by_c[10000][key] / by_c[1000][key]
        out.append((key, ratio, bound, ratio <= bound))
    return out


def cmd_bench(args) -> int:
    c_values = [int(v) for v in args.c_values.split(",") if v.strip()]
    if any(c < 2 for c in c_values):
        raise _UsageError("c values must be >= 2")
    rows = bench(c_values, args.reps, args.seed)
    print(f"{'c':>8} {'adapted_irt (us)':>18} {'order_penalty (us)':>20}")
    for r in rows:
        print(f"{r['c']:>8} {r['irt_seconds'] * 1e6:>18.2f} {r['penalty_seconds'] * 1e6:>20.2f}")
    ok = True
    for key, ratio, bound, passed in scaling_checks(rows):
        ok &= passed
        print(f"{key[:-8]} time ratio c=10000/c=1000: {ratio:.2f} (bound {bound:g}) {'ok' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_DATA


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="isoda", description="Order-restricted soft labels for mixed-sample distillation.")
    p.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("calibrate", help="project soft labels onto the order constraints")
    c.add_argument("input")
    c.add_argument("output", nargs="?")
    c.add_argument("--space", choices=["probs", "logits"], default="probs")
    c.add_argument("--tau", type=float, default=1.0)
    c.add_argument("--mode", choices=["irt", "penalty-check"], default="irt")
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    d = sub.add_parser("diagnose", help="order-violation statistics for a record file")
    d.add_argument("input")
    d.add_argument("--report", choices=["json", "text"], default="text")
    d.add_argument("--space", choices=["probs", "logits"], default="probs")
    d.add_argument("--tau", type=float, default=1.0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    e = sub.add_parser("experiment", help="run a distillation sweep from a config file")
    e.add_argument("config")
    e.add_argument("--out")
    e.add_argument("--quiet", action="store_true")
    e.set_defaults(func=cmd_experiment)

    b = sub.add_parser("bench", help="time adapted_irt against order_penalty")
    b.add_argument("--c-values", default="100,1000,10000")
    b.add_argument("--reps", type=int, default=5)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "tau", 1.0) <= 0:
        print("--tau must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RecordError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
