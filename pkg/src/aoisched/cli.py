"""Command-line experiment driver.

Subcommands: ``single`` (threshold learners), ``multi`` (Whittle-policy
learners), ``mobility`` (tracking experiments), ``oracle`` (brute-force
best fixed schedule), ``bounds`` (closed-form regret-bound checks).

Every run is reproducible: the config file plus the seed list fully
determine the emitted bytes.  Exit codes: 0 success, 1 validation error,
2 runtime failure, 3 enumeration budget exceeded.
"""

import argparse
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .core import EpochConfig, RngStream
from .generators import GENERATOR_NAMES, generate_cost_sequence
from .mobility import MobilityConfig, run_tracking_experiment
from .multi_source import (
    BudgetExceededError,
    ExplicitSchedule,
    enumerate_schedule_costs,
    round_robin_schedule,
    run_multi_source,
    schedule_from_index,
)
from .records import (
    emit_records,
    records_from_mobility_run,
    records_from_multi_run,
    records_from_single_run,
)
from .regret import (
    exp3_regret_bound,
    fdwl_regret_bound,
    fpwl_regret_bound,
    ftpl_regret_bound,
    variation_budget,
    whittle_gap,
)
from .single_source import run_single_source

__all__ = ["main"]

DEFAULT_BUDGET = 10_000_000

_SINGLE_ALGOS = ("ftpl", "exp3", "fixed", "oracle")
_MULTI_ALGOS = ("fpwl", "fdwl", "fixed", "max-aoi", "oracle")
_BOUND_NAMES = ("ftpl", "exp3", "fpwl", "fdwl")


class CliError(Exception):
    """Anything that should stop the run with a specific exit code."""

    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; flag problems are
    # validation errors here, so route them through CliError instead
    def error(self, message):
        raise CliError(f"{self.prog}: {message}", code=1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="aoi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("single", "single-source threshold learners (FTPL, EXP3)"),
        ("multi", "multi-source Whittle-policy learners (FPWL, FDWL)"),
        ("mobility", "mobile-node tracking experiments"),
        ("oracle", "brute-force best fixed schedule for a cost sequence"),
        ("bounds", "check closed-form regret bounds on a run"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--seed", type=int, action="append", default=None,
                       help="seed (repeatable; overrides the config seed list)")
        p.add_argument("--out", default=None, help="output file path")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="output format (default csv)")
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                       help=f"max schedule enumerations (default {DEFAULT_BUDGET})")
    return parser


# ---------------------------------------------------------------------------
# config loading and validation


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"config parse error in {path}: {exc}")


def _check_keys(mapping: dict, allowed: tuple, path: str) -> None:
    for key in mapping:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise CliError(f"unknown config key: {where}")


def _section(cfg: dict, name: str, allowed: tuple) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise CliError(f"config section [{name}] must be a table")
    _check_keys(sec, allowed, name)
    return sec


def _need(sec: dict, section: str, key: str):
    if key not in sec:
        raise CliError(f"missing config key: {section}.{key}")
    return sec[key]


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise CliError(f"{where} must be an integer, got {value!r}")
    return value


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CliError(f"{where} must be a number, got {value!r}")
    return float(value)


def _seed_list(cfg: dict, override) -> list[int]:
    if override:
        return [int(s) for s in override]
    run = cfg.get("run", {})
    seeds = run.get("seeds")
    if not seeds:
        raise CliError("no seeds given: set [run].seeds or pass --seed")
    return [_as_int(s, "run.seeds entry") for s in seeds]


@dataclass
class _CostSpec:
    generator: str
    D: float
    delta: Optional[float] = None
    period: Optional[int] = None


def _cost_spec(cfg: dict) -> _CostSpec:
    sec = _section(cfg, "costs", ("generator", "D", "delta", "period"))
    gen = sec.get("generator", "iid-random-monotone")
    if gen not in GENERATOR_NAMES:
        raise CliError(
            f"costs.generator must be one of {GENERATOR_NAMES}, got {gen!r}")
    spec = _CostSpec(generator=gen, D=_as_number(sec.get("D", 1.0), "costs.D"))
    if "delta" in sec:
        spec.delta = _as_number(sec["delta"], "costs.delta")
    if "period" in sec:
        spec.period = _as_int(sec["period"], "costs.period")
    return spec


def _make_sequence(spec: _CostSpec, n: int, M: int, T: int, rng: RngStream):
    return generate_cost_sequence(
        spec.generator, n_sources=n, M=M, T=T, D=spec.D,
        rng=rng, delta=spec.delta, period=spec.period)


# ---------------------------------------------------------------------------
# subcommands


def _run_single(cfg: dict, args) -> tuple[list, list[str]]:
    _check_keys(cfg, ("name", "epoch", "costs", "algorithms", "run"), "")
    epoch = _section(cfg, "epoch", ("M", "T", "N", "C"))
    M = _as_int(_need(epoch, "epoch", "M"), "epoch.M")
    T = _as_int(_need(epoch, "epoch", "T"), "epoch.T")
    if _as_int(epoch.get("N", 1), "epoch.N") != 1:
        raise CliError("epoch.N must be 1 for the single-source experiment")
    C = _as_number(epoch.get("C", 0.0), "epoch.C")
    costs = _cost_spec(cfg)
    algos = _section(cfg, "algorithms",
                     ("names", "eta", "epsilon", "fixed_threshold"))
    names = algos.get("names", ["ftpl", "exp3"])
    for a in names:
        if a not in _SINGLE_ALGOS:
            raise CliError(
                f"algorithms.names entry {a!r} must be one of {_SINGLE_ALGOS}")
    fixed_x = algos.get("fixed_threshold")
    if "fixed" in names and fixed_x is None:
        raise CliError("algorithms.fixed_threshold required when 'fixed' is run")
    seeds = _seed_list(cfg, args.seed)
    name = cfg.get("name", "single")

    try:
        config = EpochConfig(M=M, T=T, N=1, C=C)
    except ValueError as exc:
        raise CliError(str(exc))

    records = []
    for algorithm in names:
        for seed in seeds:
            root = RngStream(seed)
            seq = [fs[0] for fs in
                   _make_sequence(costs, 1, M, T, root.child("costs"))]
            run = run_single_source(
                config, seq, algorithm, root.child(f"alg-{algorithm}"),
                eta=algos.get("eta"), epsilon=algos.get("epsilon"),
                fixed_x=fixed_x)
            records.extend(records_from_single_run(run, name, seed))
    return records, []


def _resolve_schedule(raw, n: int, M: int) -> ExplicitSchedule:
    if raw == "round-robin":
        return round_robin_schedule(n, M)
    if isinstance(raw, list):
        return ExplicitSchedule(tuple(_as_int(s, "algorithms.fixed_schedule entry")
                                      for s in raw))
    raise CliError(
        "algorithms.fixed_schedule must be 'round-robin' or a list of sources")


def _run_multi(cfg: dict, args) -> tuple[list, list[str]]:
    _check_keys(cfg, ("name", "epoch", "costs", "algorithms", "run"), "")
    epoch = _section(cfg, "epoch", ("M", "T", "N"))
    M = _as_int(_need(epoch, "epoch", "M"), "epoch.M")
    T = _as_int(_need(epoch, "epoch", "T"), "epoch.T")
    N = _as_int(_need(epoch, "epoch", "N"), "epoch.N")
    costs = _cost_spec(cfg)
    algos = _section(cfg, "algorithms",
                     ("names", "epsilon", "fixed_schedule", "feedback"))
    names = algos.get("names", ["fpwl", "fdwl"])
    for a in names:
        if a not in _MULTI_ALGOS:
            raise CliError(
                f"algorithms.names entry {a!r} must be one of {_MULTI_ALGOS}")
    feedback = algos.get("feedback", "full")
    if feedback not in ("full", "bandit"):
        raise CliError("algorithms.feedback must be 'full' or 'bandit'")
    seeds = _seed_list(cfg, args.seed)
    name = cfg.get("name", "multi")

    try:
        config = EpochConfig(M=M, T=T, N=N)
    except ValueError as exc:
        raise CliError(str(exc))
    fixed_schedule = None
    if "fixed" in names:
        if "fixed_schedule" not in algos:
            raise CliError("algorithms.fixed_schedule required when 'fixed' is run")
        fixed_schedule = _resolve_schedule(algos["fixed_schedule"], N, M)

    records = []
    for algorithm in names:
        for seed in seeds:
            root = RngStream(seed)
            seq = _make_sequence(costs, N, M, T, root.child("costs"))
            run = run_multi_source(
                config, seq, algorithm, root.child(f"alg-{algorithm}"),
                feedback=feedback, epsilon=algos.get("epsilon"),
                fixed_schedule=fixed_schedule, budget=args.budget)
            records.extend(records_from_multi_run(run, name, seed))
    return records, []


def _run_mobility(cfg: dict, args) -> tuple[list, list[str]]:
    _check_keys(cfg, ("name", "mobility", "run"), "")
    sec = _section(cfg, "mobility", (
        "model", "nodes", "M", "T", "schedulers", "v_total",
        "fly_max", "pause_max", "epsilon", "v_max_per_node", "c_per_node"))
    model = _need(sec, "mobility", "model")
    nodes = _as_int(_need(sec, "mobility", "nodes"), "mobility.nodes")
    kwargs = {}
    if "v_total" in sec:
        kwargs["v_total"] = _as_number(sec["v_total"], "mobility.v_total")
    if "epsilon" in sec:
        kwargs["fpwl_epsilon"] = _as_number(sec["epsilon"], "mobility.epsilon")
    if "v_max_per_node" in sec:
        kwargs["v_max_per_node"] = tuple(
            _as_number(v, "mobility.v_max_per_node entry")
            for v in sec["v_max_per_node"])
    if "c_per_node" in sec:
        kwargs["c_per_node"] = tuple(
            _as_number(v, "mobility.c_per_node entry") for v in sec["c_per_node"])
    try:
        config = MobilityConfig(
            model=model,
            n_nodes=nodes,
            M=_as_int(sec.get("M", 200), "mobility.M"),
            T=_as_int(sec.get("T", 500), "mobility.T"),
            schedulers=tuple(sec.get("schedulers", ["fpwl", "fdwl", "max-aoi"])),
            fly_max=_as_int(sec.get("fly_max", 50), "mobility.fly_max"),
            pause_max=_as_int(sec.get("pause_max", 30), "mobility.pause_max"),
            **kwargs)
    except ValueError as exc:
        raise CliError(str(exc))
    seeds = _seed_list(cfg, args.seed)
    name = cfg.get("name", "mobility")

    records = []
    for seed in seeds:
        results = run_tracking_experiment(config, RngStream(seed))
        for scheduler in config.schedulers:
            records.extend(
                records_from_mobility_run(results[scheduler], name, seed))
    return records, []


def _run_oracle(cfg: dict, args) -> tuple[list, list[str]]:
    _check_keys(cfg, ("name", "epoch", "costs", "run"), "")
    epoch = _section(cfg, "epoch", ("M", "T", "N"))
    M = _as_int(_need(epoch, "epoch", "M"), "epoch.M")
    T = _as_int(_need(epoch, "epoch", "T"), "epoch.T")
    N = _as_int(_need(epoch, "epoch", "N"), "epoch.N")
    costs = _cost_spec(cfg)
    seeds = _seed_list(cfg, args.seed)
    name = cfg.get("name", "oracle")
    try:
        config = EpochConfig(M=M, T=T, N=N)
    except ValueError as exc:
        raise CliError(str(exc))

    records = []
    lines = []
    for seed in seeds:
        root = RngStream(seed)
        seq = _make_sequence(costs, N, M, T, root.child("costs"))
        totals = None
        for fs in seq:
            epoch_costs = enumerate_schedule_costs(fs, M, args.budget)
            totals = epoch_costs if totals is None else totals + epoch_costs
        best = int(np.argmin(totals))
        schedule = schedule_from_index(best, N, M)
        lines.append(
            f"seed {seed}: best fixed schedule "
            f"{'-'.join(str(s) for s in schedule.slots)} "
            f"mean epoch cost {totals[best] / T:.12g}")
        run = run_multi_source(
            config, seq, "fixed", root.child("alg-fixed"),
            fixed_schedule=schedule, budget=args.budget)
        records.extend(records_from_multi_run(run, name, seed))
    return records, lines


def _run_bounds(cfg: dict, args) -> tuple[list, list[str]]:
    _check_keys(cfg, ("name", "bounds", "epoch", "costs", "run"), "")
    sec = _section(cfg, "bounds", ("check",))
    check = _need(sec, "bounds", "check")
    if check not in _BOUND_NAMES:
        raise CliError(f"bounds.check must be one of {_BOUND_NAMES}, got {check!r}")
    epoch = _section(cfg, "epoch", ("M", "T", "N", "C"))
    M = _as_int(_need(epoch, "epoch", "M"), "epoch.M")
    T = _as_int(_need(epoch, "epoch", "T"), "epoch.T")
    costs = _cost_spec(cfg)
    seeds = _seed_list(cfg, args.seed)
    if len(seeds) < 10:
        raise CliError(
            f"bounds hold in expectation; need >= 10 seeds, got {len(seeds)}")
    name = cfg.get("name", "bounds")
    records = []
    lines = []

    if check in ("ftpl", "exp3"):
        C = _as_number(epoch.get("C", 0.0), "epoch.C")
        config = EpochConfig(M=M, T=T, N=1, C=C)
        finals = []
        for seed in seeds:
            root = RngStream(seed)
            seq = [fs[0] for fs in _make_sequence(costs, 1, M, T, root.child("costs"))]
            run = run_single_source(config, seq, check, root.child(f"alg-{check}"))
            finals.append(run.static_cum[-1])
            records.extend(records_from_single_run(run, name, seed))
        observed = float(np.mean(finals))
        bound = ftpl_regret_bound(T, M) if check == "ftpl" else exp3_regret_bound(T, M)
    else:
        N = _as_int(_need(epoch, "epoch", "N"), "epoch.N")
        config = EpochConfig(M=M, T=T, N=N)
        finals = []
        alphas = []
        variations = []
        for seed in seeds:
            root = RngStream(seed)
            seq = _make_sequence(costs, N, M, T, root.child("costs"))
            run = run_multi_source(config, seq, check, root.child(f"alg-{check}"),
                                   budget=args.budget)
            if run.comparator == "unavailable":
                raise BudgetExceededError(required=N ** (M - 1), budget=args.budget)
            final = run.static_cum[-1] if check == "fpwl" else run.dynamic_cum[-1]
            finals.append(final)
            gaps = [whittle_gap(seq[k - 1], seq[k], M, args.budget)
                    for k in range(1, T)]
            alphas.append(max(gaps) if gaps else 0.0)
            if check == "fdwl":
                matrix = np.stack([enumerate_schedule_costs(fs, M, args.budget)
                                   for fs in seq])
                variations.append(variation_budget(matrix).value)
            records.extend(records_from_multi_run(run, name, seed))
        observed = float(np.mean(finals))
        alpha = float(np.mean(alphas))
        D = costs.D
        if check == "fpwl":
            bound = fpwl_regret_bound(T, M, N, D, alpha)
        else:
            bound = fdwl_regret_bound(T, alpha, float(np.mean(variations)), D)
        lines.append(f"measured alpha-hat (seed mean): {alpha:.12g}")

    verdict = "PASS" if observed <= bound else "FAIL"
    lines.append(
        f"bound check {check}: observed {observed:.12g} vs bound {bound:.12g} "
        f"(margin {bound - observed:.12g}) {verdict}")
    return records, lines


_DISPATCH = {
    "single": _run_single,
    "multi": _run_multi,
    "mobility": _run_mobility,
    "oracle": _run_oracle,
    "bounds": _run_bounds,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_toml(args.config)
        if args.budget < 1:
            raise CliError(f"--budget must be >= 1, got {args.budget}")
        records, lines = _DISPATCH[args.command](cfg, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if args.out:
        emit_records(records, args.out, fmt=args.format)
    for line in lines:
        print(line)
    if args.out:
        print(f"wrote {len(records)} records to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
