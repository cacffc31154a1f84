"""Command-line entry point: gen, run, sweep, decompose.

Every command is a deterministic function of its inputs and seeds; outputs
are plain CSV/JSON for downstream tools. Exit codes are stable:

    0  success
    2  configuration or input error (bad flags, bad window file)
    3  livelock (step budget exhausted; indicates a policy bug)
    4  policy contract violation
    5  workload generation error
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import decomposition as decomp
from . import metrics
from .adaptive import AdaptiveGreedy
from .engine import LivelockError, PolicyContractError, run, write_events_csv, write_summary_csv
from .model import (
    ColumnClustered,
    DegreeCapped,
    GenerationError,
    ObjectUniform,
    WindowFormatError,
    generate_window,
    load_window,
    save_window,
)
from .offline import OfflineGreedy
from .online import OnlineGreedy

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_LIVELOCK = 3
EXIT_CONTRACT = 4
EXIT_GENERATION = 5

OUT_DIR_ENV = "TMGREEDY_OUT_DIR"

POLICIES = ("offline", "online", "adaptive")


class ConfigError(ValueError):
    pass


def parse_generator_spec(text: str):
    """`MxN:model:key=val,key=val` -> (m, n, model instance).

    Models: object-uniform (s, read-prob, write-prob),
    degree-capped (c-target, edge-prob),
    column-clustered (intra-prob, inter-prob).
    """
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"bad generator spec {text!r}; expected MxN:model[:k=v,...]")
    dims, model_name = parts[0], parts[1]
    kv: dict[str, str] = {}
    if len(parts) == 3 and parts[2]:
        for item in parts[2].split(","):
            if "=" not in item:
                raise ConfigError(f"bad generator parameter {item!r} in {text!r}")
            key, val = item.split("=", 1)
            kv[key.strip().replace("-", "_")] = val.strip()
    try:
        m_txt, n_txt = dims.lower().split("x")
        m, n = int(m_txt), int(n_txt)
    except ValueError:
        raise ConfigError(f"bad window dimensions {dims!r}; expected MxN") from None

    def take(name: str, conv, default=None):
        if name in kv:
            raw = kv.pop(name)
            try:
                return conv(raw)
            except ValueError:
                raise ConfigError(f"bad value {raw!r} for {name} in {text!r}") from None
        if default is None:
            raise ConfigError(f"generator spec {text!r} is missing {name}")
        return default

    name = model_name.strip().lower()
    if name == "object-uniform":
        model = ObjectUniform(
            s=take("s", int),
            read_prob=take("read_prob", float),
            write_prob=take("write_prob", float),
        )
    elif name == "degree-capped":
        model = DegreeCapped(c_target=take("c_target", int), edge_prob=take("edge_prob", float))
    elif name == "column-clustered":
        model = ColumnClustered(
            intra_prob=take("intra_prob", float), inter_prob=take("inter_prob", float)
        )
    else:
        raise ConfigError(f"unknown generator model {model_name!r}")
    if kv:
        raise ConfigError(f"unknown generator parameters {sorted(kv)} in {text!r}")
    return m, n, model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmgreedy",
        description="Windowed greedy contention-management simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a window file")
    p_gen.add_argument("--gen", required=True, help="generator spec MxN:model:k=v,...")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="output window file path")

    for name in ("run", "sweep"):
        p = sub.add_parser(name, help=f"{name} a policy on a window")
        p.add_argument("--window", help="window file path")
        p.add_argument("--gen", help="generator spec (alternative to --window)")
        p.add_argument("--policy", choices=POLICIES)
        p.add_argument("--C", type=int, default=None, dest="C",
                       help="congestion bound (required for offline/online, forbidden for adaptive)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mis-order", choices=("lex", "random"), default=None, dest="mis_order")
        p.add_argument("--out-dir", default=None, dest="out_dir")
        p.add_argument("--config", help="JSON config file; flags override its values")
        if name == "sweep":
            p.add_argument("--trials", type=int, default=None)
            p.add_argument("--envelope", action="store_true", default=None,
                           help="count trials exceeding the (slots+N)*frame_len bound")
            p.add_argument("--per-trial", action="store_true", default=None, dest="per_trial")

    p_dec = sub.add_parser("decompose", help="optimal column decomposition of a window")
    p_dec.add_argument("--window", required=True)
    p_dec.add_argument("--out-dir", default=None, dest="out_dir")

    return parser


def _resolve_config(args: argparse.Namespace, keys: list[str]) -> dict:
    """Merge config file values under CLI flags; flags win."""
    resolved: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        unknown = set(loaded) - set(keys)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        resolved.update(loaded)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _out_dir(resolved: dict) -> Path:
    out = resolved.get("out_dir") or os.environ.get(OUT_DIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _window_source(resolved: dict):
    """Returns (fixed_window_or_None, generator_tuple_or_None)."""
    window_path = resolved.get("window")
    gen_spec = resolved.get("gen")
    if bool(window_path) == bool(gen_spec):
        raise ConfigError("exactly one of --window or --gen is required")
    if window_path:
        try:
            return load_window(window_path), None
        except OSError as exc:
            raise ConfigError(f"cannot read window file: {exc}") from None
    return None, parse_generator_spec(gen_spec)


def _make_policy(resolved: dict):
    policy = resolved.get("policy")
    if policy not in POLICIES:
        raise ConfigError(f"--policy must be one of {POLICIES}")
    c = resolved.get("C")
    if policy == "adaptive":
        if c is not None:
            raise ConfigError("--C is forbidden for the adaptive policy (it guesses C itself)")
        return lambda window: AdaptiveGreedy()
    if c is None:
        raise ConfigError(f"--C is required for the {policy} policy")
    if policy == "offline":
        mis_order = resolved.get("mis_order", "lex")
        return lambda window: OfflineGreedy(congestion=c, mis_order=mis_order)
    return lambda window: OnlineGreedy(congestion=c)


def cmd_gen(args: argparse.Namespace) -> int:
    m, n, model = parse_generator_spec(args.gen)
    window = generate_window(m, n, model, args.seed)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_window(window, out)
    print(
        f"M={window.m} N={window.n} C={window.congestion} "
        f"edges={window.graph.edge_count()} -> {out}"
    )
    return EXIT_OK


RUN_KEYS = ["window", "gen", "policy", "C", "seed", "mis_order", "out_dir"]
SWEEP_KEYS = RUN_KEYS + ["trials", "envelope", "per_trial"]


def cmd_run(args: argparse.Namespace) -> int:
    resolved = _resolve_config(args, RUN_KEYS)
    resolved.setdefault("seed", 0)
    fixed, gen = _window_source(resolved)
    window = fixed if fixed is not None else generate_window(*gen, resolved["seed"])
    factory = _make_policy(resolved)
    out = _out_dir(resolved)

    trace = run(window, factory(window), resolved["seed"])
    stats = metrics.collect_stats(trace)

    write_events_csv(trace, out / "events.csv")
    write_summary_csv(trace, out / "summary.csv")
    payload = {
        "command": "run",
        "config": {k: resolved.get(k) for k in RUN_KEYS},
        "window": {"M": window.m, "N": window.n, "C": window.congestion},
        "policy_params": trace.policy_params,
        "makespan": stats.makespan,
        "aborts": stats.abort_count,
        "frame_misses": stats.frame_miss_count,
        "restarts": stats.restarts_total,
        "response_by_column": [
            sum(rt for tx, rt in stats.response_times.items() if tx.index == j + 1) / window.m
            for j in range(window.n)
        ],
        "doubling_counts": list(stats.doubling_counts),
        "warnings": trace.warnings,
    }
    with open(out / "stats.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"makespan={stats.makespan} aborts={stats.abort_count} frame_misses={stats.frame_miss_count}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    resolved = _resolve_config(args, SWEEP_KEYS)
    resolved.setdefault("seed", 0)
    resolved.setdefault("trials", 1)
    if resolved["trials"] < 1:
        raise ConfigError("--trials must be >= 1")
    fixed, gen = _window_source(resolved)
    if fixed is not None:
        source = fixed
    else:
        m, n, model = gen
        source = lambda trial_seed: generate_window(m, n, model, trial_seed)
    factory = _make_policy(resolved)
    out = _out_dir(resolved)

    envelope = "frames" if resolved.get("envelope") else None
    summary = metrics.monte_carlo(source, factory, resolved["trials"], resolved["seed"], envelope)

    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(metrics.SUMMARY_CSV_FIELDS)
        writer.writerow(summary.csv_row())
    if resolved.get("per_trial"):
        with open(out / "per_trial.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ("seed", "makespan", "aborts", "frame_misses", "C", "envelope", "violated")
            )
            for row in summary.per_trial:
                writer.writerow(
                    (
                        row.seed,
                        row.makespan,
                        row.aborts,
                        row.frame_misses,
                        row.congestion,
                        row.envelope if row.envelope is not None else "",
                        "" if row.violated is None else int(row.violated),
                    )
                )
    payload = {
        "command": "sweep",
        "config": {k: resolved.get(k) for k in SWEEP_KEYS},
        "mean_response_by_column": list(summary.mean_response_by_column),
        "run_errors": [list(e) for e in summary.run_errors],
        "seeds": list(summary.seeds),
    }
    with open(out / "sweep_stats.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"trials={summary.trials} mean_makespan={summary.mean_makespan} "
        f"max_makespan={summary.max_makespan} violation_fraction={summary.violation_fraction}"
    )
    return EXIT_OK


def _frac(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def cmd_decompose(args: argparse.Namespace) -> int:
    resolved = _resolve_config(args, ["window", "out_dir"])
    try:
        window = load_window(resolved["window"])
    except OSError as exc:
        raise ConfigError(f"cannot read window file: {exc}") from None
    out = _out_dir(resolved)

    best, r_star = decomp.optimal_decomposition(window)
    whole = decomp.subwindow_density(window, 1, window.n)
    payload = {
        "command": "decompose",
        "window": {"M": window.m, "N": window.n, "C": window.congestion},
        "cuts": list(best.cuts),
        "segments": [
            {
                "start": seg.start,
                "end": seg.end,
                "width": seg.width,
                "congestion": seg.congestion,
                "density": _frac(seg.density),
            }
            for seg in best.segments
        ],
        "optimal_density": _frac(r_star),
        "whole_window_density": _frac(whole),
    }
    with open(out / "decomposition.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"window {window.m}x{window.n}  C={window.congestion}  whole-window density {_frac(whole)}")
    print(f"optimal max density: {_frac(r_star)}  cuts after columns: {list(best.cuts)}")
    print(f"{'cols':>9}  {'width':>5}  {'C':>3}  density")
    for seg in best.segments:
        cols = f"{seg.start}-{seg.end}"
        print(f"{cols:>9}  {seg.width:>5}  {seg.congestion:>3}  {_frac(seg.density)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen": cmd_gen,
        "run": cmd_run,
        "sweep": cmd_sweep,
        "decompose": cmd_decompose,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, WindowFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GenerationError as exc:
        print(f"generation error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except LivelockError as exc:
        print(f"livelock: {exc}", file=sys.stderr)
        return EXIT_LIVELOCK
    except PolicyContractError as exc:
        print(f"policy contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
