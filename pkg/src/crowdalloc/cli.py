"""Command line front end.

Subcommands: simulate (run matrix, metrics files), capacity (membership and
boundary verdicts), compare (multi-policy summary), gen-trace (synthetic
workload CSV). Exit codes: 0 success, 2 usage or config problem,
3 intractable instance, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .capacity import boundary_scalar, capacity_member
from .errors import ConfigError, IntractableInstance
from .model import validate_config
from .processes import bundle_from_config, gamma_from_specs
from .registry import make_policy, policy_names
from .sim import run
from .traceio import (
    SYNTHETIC_KINDS,
    compile_workload,
    gen_synthetic,
    load_trace,
    pool_from_config,
    write_trace,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="system config JSON path")
    p.add_argument("--trace", help="workload trace CSV; tasks come from here")
    p.add_argument(
        "--regime", help="override the regime code (IF, FF, FI, II)", default=None
    )
    p.add_argument(
        "--horizon",
        type=int,
        default=None,
        help="epochs to simulate (default 1000, or the trace length)",
    )
    p.add_argument(
        "--seed",
        type=int,
        action="append",
        dest="seeds",
        help="simulation seed; repeat for several runs",
    )
    p.add_argument(
        "--seeds", dest="seed_list", help="comma-separated seeds, e.g. 1,2,3"
    )
    p.add_argument(
        "--load",
        type=float,
        action="append",
        dest="loads",
        help="arrival rate multiplier; repeatable",
    )
    p.add_argument(
        "--alpha",
        type=float,
        action="append",
        dest="alphas",
        help="arrival rate as a fraction of the capacity boundary; repeatable",
    )
    p.add_argument("--epsilon", type=float, default=0.05, help="flex-greedy margin")
    p.add_argument(
        "--gamma",
        default="1/x",
        help="flex-greedy averaging: '1/x' or a constant in (0, 1]",
    )
    p.add_argument(
        "--epoch-seconds", type=float, default=3600.0, help="wall seconds per epoch"
    )
    p.add_argument("--jobs", type=int, default=1, help="parallel run cells")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument(
        "--events",
        action="store_true",
        help="write per-epoch event logs (events.jsonl per cell)",
    )
    p.add_argument(
        "--check",
        action="store_true",
        help="validate every epoch's allocation against the constraint checker",
    )
    p.add_argument(
        "--grid-seconds",
        type=float,
        default=60.0,
        help="duration rounding grid for trace compilation",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdalloc",
        description="Allocation policies and capacity analysis for skill-based "
        "crowdsourcing systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one or more policies")
    _add_common(sim)
    sim.add_argument(
        "--policy",
        action="append",
        dest="policies",
        required=True,
        help=f"policy name; repeatable. Known: {', '.join(policy_names())}",
    )
    sim.set_defaults(func=cmd_simulate)

    cap = sub.add_parser("capacity", help="capacity membership or boundary")
    cap.add_argument("--config", required=True, help="system config JSON path")
    cap.add_argument(
        "--lam", help="comma-separated per-task arrival rates; default from config"
    )
    cap.add_argument("--ray", help="comma-separated direction; prints the boundary scalar")
    cap.set_defaults(func=cmd_capacity)

    cmp_ = sub.add_parser("compare", help="run several policies side by side")
    _add_common(cmp_)
    cmp_.add_argument(
        "--policy",
        action="append",
        dest="policies",
        required=True,
        help="policy name; give at least two",
    )
    cmp_.set_defaults(func=cmd_compare)

    gen = sub.add_parser("gen-trace", help="write a synthetic workload CSV")
    gen.add_argument("--kind", required=True, choices=SYNTHETIC_KINDS)
    gen.add_argument(
        "--load", type=float, required=True, help="mean tasks per hour"
    )
    gen.add_argument("--days", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.set_defaults(func=cmd_gen_trace)
    return parser


def _read_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None


def _load_setting(args):
    """Build (system, bundle, horizon) from --config and/or --trace."""
    if args.trace:
        doc = _read_config(args.config) if args.config else {}
        workers = doc.get("workers")
        if workers is None:
            raise ConfigError(
                "trace runs need a config with a workers section "
                '({"workers": {"count": N, ...}})'
            )
        system, bundle, horizon = compile_workload(
            load_trace(args.trace),
            pool_from_config(workers),
            regime=args.regime or doc.get("regime", "FF"),
            epoch_seconds=args.epoch_seconds,
            grid_seconds=args.grid_seconds,
            horizon=args.horizon,
            num_skills=doc.get("skills"),
        )
        return system, bundle, horizon
    if not args.config:
        raise ConfigError("either --config or --trace is required")
    doc = _read_config(args.config)
    if args.regime:
        doc = dict(doc, regime=args.regime)
    system = validate_config(doc)
    bundle = bundle_from_config(doc, system)
    return system, bundle, args.horizon or 1000


def _seeds(args) -> list[int]:
    seeds = list(args.seeds or [])
    if args.seed_list:
        seeds.extend(int(s) for s in args.seed_list.split(","))
    return seeds or [0]


def _gamma_arg(raw: str):
    if raw == "1/x":
        return None  # policy default
    try:
        c = float(raw)
    except ValueError:
        raise ConfigError("--gamma takes '1/x' or a constant in (0, 1]") from None
    if not 0.0 < c <= 1.0:
        raise ConfigError("constant --gamma must sit in (0, 1]")
    return lambda _k: c


def _policy_kwargs(args, name: str) -> dict:
    if name == "flex-greedy":
        out = {"epsilon": args.epsilon}
        g = _gamma_arg(args.gamma)
        if g is not None:
            out["gamma"] = g
        return out
    return {}


def _load_factors(args, system, bundle) -> list[tuple[str, float]]:
    cells = [(f"load{v:g}", v) for v in (args.loads or [])]
    if args.alphas:
        gamma = gamma_from_specs(bundle.availability)
        ray = np.array([spec.rate() for spec in bundle.arrivals])
        if not np.any(ray > 0):
            raise ConfigError("--alpha needs positive configured arrival rates")
        scale = boundary_scalar(system, gamma, ray)
        cells.extend((f"alpha{a:g}", a * scale) for a in args.alphas)
    return cells or [("load1", 1.0)]


def _run_matrix(args, policies: list[str]) -> list[dict]:
    system, bundle, horizon = _load_setting(args)
    seeds = _seeds(args)
    factors = _load_factors(args, system, bundle)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    cells = []
    for pi, policy_name in enumerate(policies):
        make_policy(policy_name, system.regime.code)  # fail fast on gating
        for tag, factor in factors:
            for seed in seeds:
                cells.append((pi, policy_name, tag, factor, seed))

    def run_cell(cell):
        pi, policy_name, tag, factor, seed = cell
        scaled = bundle if factor == 1.0 else bundle.scaled_arrivals(factor)
        policy = make_policy(
            policy_name, system.regime.code, **_policy_kwargs(args, policy_name)
        )
        cell_dir = out_dir / f"{pi:02d}_{policy_name}" / tag / f"seed{seed}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        stream = None
        try:
            if args.events:
                stream = open(cell_dir / "events.jsonl", "w")
            report = run(
                system,
                policy,
                scaled,
                horizon,
                seed,
                epoch_seconds=args.epoch_seconds,
                check=args.check,
                log_stream=stream,
            )
        finally:
            if stream is not None:
                stream.close()
        (cell_dir / "metrics.json").write_text(report.to_json() + "\n")
        report.write_trajectories(cell_dir)
        s = report.summary()
        return {
            "policy": policy_name,
            "policy_slot": pi,
            "cell": tag,
            "factor": factor,
            "seed": seed,
            "mean_tat": s["tat"].get("mean"),
            "mean_backlog": s["mean_backlog_last_half"],
            "mean_utilization": s["mean_utilization"],
            "stability": s["stability"],
        }

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    return rows


def _aggregate(rows: list[dict]) -> list[dict]:
    """Mean over seeds per (policy slot, load cell)."""
    grouped: dict[tuple, list[dict]] = {}
    for row in rows:
        grouped.setdefault((row["policy_slot"], row["policy"], row["cell"]), []).append(row)
    out = []
    for (slot, policy, tag), members in sorted(grouped.items()):
        tats = [m["mean_tat"] for m in members if m["mean_tat"] is not None]
        verdicts = {m["stability"] for m in members}
        out.append(
            {
                "policy": policy,
                "cell": tag,
                "seeds": len(members),
                "mean_tat": float(np.mean(tats)) if tats else None,
                "mean_backlog": float(np.mean([m["mean_backlog"] for m in members])),
                "mean_utilization": float(
                    np.mean([m["mean_utilization"] for m in members])
                ),
                "stability": verdicts.pop() if len(verdicts) == 1 else "mixed",
            }
        )
    return out


def _write_summary(rows: list[dict], out_dir: Path, name: str) -> None:
    agg = _aggregate(rows)
    fields = [
        "policy",
        "cell",
        "seeds",
        "mean_tat",
        "mean_backlog",
        "mean_utilization",
        "stability",
    ]
    with open(out_dir / f"{name}.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in agg:
            writer.writerow(row)
    (out_dir / f"{name}.json").write_text(
        json.dumps(agg, indent=2, sort_keys=True) + "\n"
    )


def cmd_simulate(args) -> int:
    rows = _run_matrix(args, args.policies)
    _write_summary(rows, Path(args.out), "summary")
    for row in _aggregate(rows):
        print(json.dumps(row, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    if len(args.policies) < 2:
        raise ConfigError("compare needs at least two --policy entries")
    rows = _run_matrix(args, args.policies)
    _write_summary(rows, Path(args.out), "comparison")
    for row in _aggregate(rows):
        print(json.dumps(row, sort_keys=True))
    return 0


def cmd_capacity(args) -> int:
    doc = _read_config(args.config)
    system = validate_config(doc)
    bundle = bundle_from_config(doc, system)
    gamma = gamma_from_specs(bundle.availability)
    if args.ray:
        ray = np.array([float(v) for v in args.ray.split(",")])
        scale = boundary_scalar(system, gamma, ray)
        print(json.dumps({"boundary": scale, "ray": list(map(float, ray))}))
        return 0
    if args.lam:
        lam = np.array([float(v) for v in args.lam.split(",")])
    else:
        lam = np.array([spec.rate() for spec in bundle.arrivals])
    report = capacity_member(system, gamma, lam)
    print(
        json.dumps(
            {
                "verdict": report.verdict,
                "margin": report.margin,
                "lam": list(map(float, lam)),
            }
        )
    )
    return 0


def cmd_gen_trace(args) -> int:
    workload = gen_synthetic(args.kind, args.load, args.days, args.seed)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_trace(workload, out)
    print(f"wrote {len(workload.tasks)} tasks to {out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IntractableInstance as exc:
        print(f"intractable instance: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - last-resort exit code mapping
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
