"""Command-line entry point: ``moegate {thm1,thm2,rd-curve,selfcheck}``.

Exit codes: 0 success, 1 bound or invariant violation, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as mio
from ._validation import SimplexError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
DEFAULT_SEED = 42


class UsageError(ValueError):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in str(text).split(",")]
    if not any(parts):
        return ()
    try:
        return tuple(float(p) for p in parts if p)
    except ValueError as exc:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from exc


# section -> key -> parser; ``seed`` is accepted everywhere
_CONFIG_KEYS = {
    "thm1": {
        "d": int, "n_experts": int, "bank_size": int, "m": int, "n_datasets": int,
        "test_size": int, "alpha_grid": _float_list, "seed": int,
    },
    "thm2": {
        "p_true_grid": _float_list, "candidate_ps": _float_list, "m": int, "n_mc": int,
        "beta": float, "bound_order": str, "seed": int,
    },
    "rd-curve": {
        "instance": str, "lambdas": _float_list, "lambda_min": float, "lambda_max": float,
        "n_lambdas": int, "tol": float, "max_iter": int, "seed": int,
    },
}


def load_config(path: Path | None, section: str) -> dict:
    """Read ``section`` of a flat ``key = value`` file; unknown sections/keys are errors."""
    if path is None:
        return {}
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    unknown_sections = set(parser.sections()) - set(_CONFIG_KEYS)
    if unknown_sections:
        raise UsageError(f"unknown config sections: {sorted(unknown_sections)}")
    out = {}
    for name in parser.sections():
        known = _CONFIG_KEYS[name]
        for key, raw in parser.items(name):
            if key not in known:
                raise UsageError(f"unknown key {key!r} in section [{name}]")
            try:
                value = known[key](raw)
            except ValueError as exc:
                raise UsageError(f"bad value for {name}.{key}: {raw!r}") from exc
            if name == section:
                out[key] = value
    return out


def _merge(cfg: dict, args: argparse.Namespace, keys: Sequence[str]) -> dict:
    merged = dict(cfg)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if args.seed is not None:
        merged["seed"] = args.seed
    merged.setdefault("seed", DEFAULT_SEED)
    return merged


class _Run:
    """Collects artifacts and writes the manifest last."""

    def __init__(self, command: str, out_dir: Path):
        self.command = command
        self.out_dir = Path(out_dir)
        self.artifacts: list[Path] = []
        self.start = time.perf_counter()

    def write(self, name: str, text: str) -> Path:
        path = mio.write_text(self.out_dir / name, text)
        self.artifacts.append(path)
        return path

    def add(self, path: Path) -> None:
        self.artifacts.append(Path(path))

    def finish(self, config: dict, root_seed: int, violations: int, extra: dict | None = None):
        entries = {"command": self.command}
        for key, value in config.items():
            entries[f"config.{key}"] = value
        entries["root_seed"] = root_seed
        entries["artifacts"] = [str(p) for p in self.artifacts]
        entries["duration_s"] = round(time.perf_counter() - self.start, 3)
        entries["violations"] = violations
        entries.update(extra or {})
        mio.write_text(self.out_dir / "manifest.txt", mio.format_manifest(entries))


def cmd_thm1(args) -> int:
    from .thm1 import Thm1Config, run_thm1, thm1_csv

    keys = ("d", "n_experts", "bank_size", "m", "n_datasets", "test_size", "alpha_grid")
    merged = _merge(load_config(args.config, "thm1"), args, keys)
    try:
        config = Thm1Config(
            root_seed=merged.pop("seed"), **{k: merged[k] for k in keys if k in merged}
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    rows = run_thm1(config, n_jobs=args.threads)
    run = _Run("thm1", args.out_dir)
    run.write("thm1.csv", thm1_csv(rows))
    if args.plot:
        from .plotting import plot_thm1

        run.add(plot_thm1(rows, run.out_dir / "thm1.svg"))
    violations = sum(r.violation for r in rows)
    run.finish(dataclasses.asdict(config), config.root_seed, violations)
    print(f"thm1: {len(rows)} rows, {violations} bound violations -> {run.out_dir}")
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_thm2(args) -> int:
    from .thm2 import BscConfig, run_thm2, thm2_csv, thm2_samples_csv

    keys = ("p_true_grid", "candidate_ps", "m", "n_mc", "beta", "bound_order")
    merged = _merge(load_config(args.config, "thm2"), args, keys)
    try:
        config = BscConfig(
            root_seed=merged.pop("seed"), **{k: merged[k] for k in keys if k in merged}
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    rows = run_thm2(config, n_jobs=args.threads)
    run = _Run("thm2", args.out_dir)
    run.write("thm2.csv", thm2_csv(rows))
    if args.per_sample:
        run.write("thm2_samples.csv", thm2_samples_csv(rows))
    if args.plot:
        from .plotting import plot_thm2

        run.add(plot_thm2(rows, run.out_dir / "thm2.svg"))
    violations = sum(r.violation for r in rows)
    run.finish(dataclasses.asdict(config), config.root_seed, violations)
    print(f"thm2: {len(rows)} rows, {violations} violation flags -> {run.out_dir}")
    return EXIT_VIOLATION if violations else EXIT_OK


def read_instance_csv(path: Path):
    """Instance file: header ``source,d0,d1,...``; one row per input symbol."""
    from .rd import RDInstance

    try:
        with open(path, newline="", encoding="utf-8") as fh:
            table = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read instance {path}: {exc}") from exc
    if len(table) < 2 or not table[0] or table[0][0].strip() != "source":
        raise UsageError("instance CSV needs a header starting with 'source' and at least one row")
    try:
        body = np.array([[float(v) for v in row] for row in table[1:] if row], dtype=float)
        return RDInstance(body[:, 0], body[:, 1:])
    except (ValueError, IndexError, SimplexError) as exc:
        raise UsageError(f"invalid instance {path}: {exc}") from exc


def cmd_rd_curve(args) -> int:
    from .info import inv_binary_entropy, LN2
    from .rd import (DEFAULT_MAX_ITER, DEFAULT_TOL, CurveMonotonicityError, RDCurve,
                     ba_lagrangian_solve, binary_hamming_instance, geometric_lambda_grid,
                     trace_rd_curve)

    keys = ("instance", "lambdas", "lambda_min", "lambda_max", "n_lambdas", "tol", "max_iter")
    merged = _merge(load_config(args.config, "rd-curve"), args, keys)
    source = merged.get("instance", "bsc")
    if "lambdas" in merged:
        lambdas = tuple(merged["lambdas"])
    else:
        lo, hi = merged.get("lambda_min", 1e-3), merged.get("lambda_max", 1e3)
        num = merged.get("n_lambdas", 50)
        if num < 1 or not 0 < lo <= hi:
            raise UsageError("lambda grid must have positive bounds and at least one point")
        lambdas = tuple(float(v) for v in geometric_lambda_grid(lo, hi, num))
    if not lambdas:
        raise UsageError("empty lambda grid")
    if any(not v > 0 for v in lambdas):
        raise UsageError("lambdas must be positive")
    inst = binary_hamming_instance() if source == "bsc" else read_instance_csv(Path(source))
    tol = merged.get("tol", DEFAULT_TOL)
    max_iter = merged.get("max_iter", DEFAULT_MAX_ITER)

    run = _Run("rd-curve", args.out_dir)
    violations = 0
    extra_manifest = {}
    try:
        if len(lambdas) == 1:
            curve = RDCurve([ba_lagrangian_solve(inst, lambdas[0], tol=tol, max_iter=max_iter)])
        else:
            curve = trace_rd_curve(inst, lambdas, tol=tol, max_iter=max_iter, n_jobs=args.threads)
    except CurveMonotonicityError as exc:
        print(f"rd-curve: {exc}", file=sys.stderr)
        run.finish({"instance": source, "lambdas": list(lambdas)}, merged["seed"], 1)
        return EXIT_VIOLATION
    extra = None
    if source == "bsc":
        dev = [abs(p.distortion - inv_binary_entropy(LN2 - min(p.rate, LN2))) for p in curve.points]
        extra = {"analytic_deviation": dev}
        extra_manifest["max_analytic_deviation"] = max(dev)
        violations += int(max(dev) > 1e-3)
        print(f"rd-curve: max |D_BA - D_analytic| = {max(dev):.3e}")
    run.write("rd_curve.csv", curve.to_csv(extra))
    non_converged = sum(not p.converged for p in curve.points)
    extra_manifest["non_converged"] = non_converged
    resolved = {"instance": source, "lambdas": list(lambdas), "tol": tol, "max_iter": max_iter}
    run.finish(resolved, merged["seed"], violations, extra_manifest)
    print(f"rd-curve: {len(curve)} points, {non_converged} not converged -> {run.out_dir}")
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_selfcheck

    seed = DEFAULT_SEED if args.seed is None else args.seed
    failures = run_selfcheck(seed)
    if failures:
        print(f"selfcheck FAILED ({len(failures)} cases); first: {failures[0]}", file=sys.stderr)
        return EXIT_VIOLATION
    print("selfcheck: all checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value file with [section] headers")
    common.add_argument("--seed", type=int, help=f"root seed (default {DEFAULT_SEED})")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="artifact directory")
    common.add_argument("--plot", action="store_true", help="also write an SVG figure")
    common.add_argument("--threads", type=int, default=1)

    parser = argparse.ArgumentParser(prog="moegate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("thm1", parents=[common], help="alpha-mixture generalization sweep")
    p1.add_argument("--alpha-grid", type=_float_list)
    p1.add_argument("--d", type=int)
    p1.add_argument("--n-experts", type=int)
    p1.add_argument("--bank-size", type=int)
    p1.add_argument("--m", type=int)
    p1.add_argument("--n-datasets", type=int)
    p1.add_argument("--test-size", type=int)
    p1.set_defaults(func=cmd_thm1)

    p2 = sub.add_parser("thm2", parents=[common], help="BSC rate-distortion-generalization sweep")
    p2.add_argument("--p-true-grid", type=_float_list)
    p2.add_argument("--candidate-ps", type=_float_list)
    p2.add_argument("--m", type=int)
    p2.add_argument("--n-mc", type=int)
    p2.add_argument("--beta", type=float)
    p2.add_argument("--bound-order", choices=("mean-of-d", "d-of-mean"))
    p2.add_argument("--per-sample", action="store_true", help="also write thm2_samples.csv")
    p2.set_defaults(func=cmd_thm2)

    p3 = sub.add_parser("rd-curve", parents=[common], help="Blahut-Arimoto D(R) curve")
    p3.add_argument("--instance", help="'bsc' (default) or a CSV with header source,d0,d1,...")
    p3.add_argument("--lambdas", type=_float_list, help="explicit comma-separated multipliers")
    p3.add_argument("--lambda-min", type=float)
    p3.add_argument("--lambda-max", type=float)
    p3.add_argument("--n-lambdas", type=int)
    p3.add_argument("--tol", type=float)
    p3.add_argument("--max-iter", type=int)
    p3.set_defaults(func=cmd_rd_curve)

    p4 = sub.add_parser("selfcheck", parents=[common], help="randomised identity checks")
    p4.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.threads < 1:
        print("moegate: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"moegate {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
