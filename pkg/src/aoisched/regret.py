"""Regret accounting and learning-theoretic bound checks.

Static regret compares a run against the best fixed policy in hindsight;
dynamic regret against the per-epoch optimum.  The variation budget
measures how much the cost landscape itself moved, and the index gap
(alpha-hat) measures how far a Whittle policy lands from the true
optimum of the costs it was computed for; both feed the bounds for the
drifting-cost learners.
"""

import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .multi_source import (
    WhittleSchedule,
    brute_force_best_schedule,
    epoch_rollout,
    whittle_index_table,
)

__all__ = [
    "BoundCheck",
    "VariationBudget",
    "check_theorem_bounds",
    "dynamic_regret",
    "exp3_regret_bound",
    "fdwl_regret_bound",
    "fpwl_regret_bound",
    "ftpl_regret_bound",
    "static_regret",
    "variation_budget",
    "whittle_gap",
]


def static_regret(alg_costs: Sequence[float], per_option_totals) -> float:
    """Total algorithm cost minus the best fixed option's total.

    ``per_option_totals`` maps each candidate fixed policy to its summed
    cost over the same epochs (dict, or an array of totals).  Negative
    values are possible for clairvoyant algorithms.
    """
    costs = np.asarray(alg_costs, dtype=float)
    if costs.ndim != 1 or costs.size == 0:
        raise ValueError("need a nonempty 1-D cost series")
    if isinstance(per_option_totals, Mapping):
        totals = np.asarray(list(per_option_totals.values()), dtype=float)
    else:
        totals = np.asarray(per_option_totals, dtype=float)
    if totals.size == 0:
        raise ValueError("need at least one comparator option")
    return float(costs.sum() - totals.min())


def dynamic_regret(alg_costs: Sequence[float], per_epoch_minima: Sequence[float]) -> float:
    """Sum of per-epoch excess over the per-epoch optimal cost."""
    costs = np.asarray(alg_costs, dtype=float)
    minima = np.asarray(per_epoch_minima, dtype=float)
    if costs.shape != minima.shape:
        raise ValueError(
            f"cost series has shape {costs.shape}, minima {minima.shape}")
    if costs.ndim != 1 or costs.size == 0:
        raise ValueError("need a nonempty 1-D cost series")
    return float(np.sum(costs - minima))


@dataclass(frozen=True)
class VariationBudget:
    """Total drift of the cost landscape across epochs.

    When the per-option maps only cover a subset of all policies the sup
    is underestimated, so ``lower_bound_only`` flags the value as a lower
    bound rather than the exact budget.
    """

    value: float
    lower_bound_only: bool = False


def variation_budget(cost_maps, complete: bool = True) -> VariationBudget:
    """Sum over consecutive epochs of the largest per-option cost change.

    ``cost_maps`` is either a sequence of {option: cost} mappings with
    identical key sets, or a (T, n_options) array.  ``complete=False``
    marks the option set as a sample of the full policy space.
    """
    if len(cost_maps) == 0:
        raise ValueError("need at least one epoch of costs")
    if isinstance(cost_maps[0], Mapping):
        keys = sorted(cost_maps[0].keys())
        rows = []
        for k, m in enumerate(cost_maps):
            if sorted(m.keys()) != keys:
                raise ValueError(f"epoch {k + 1} has a different option set")
            rows.append([float(m[key]) for key in keys])
        table = np.asarray(rows, dtype=float)
    else:
        table = np.asarray(cost_maps, dtype=float)
        if table.ndim != 2:
            raise ValueError(f"need a (T, options) table, got shape {table.shape}")
    if table.shape[0] < 2:
        return VariationBudget(0.0, lower_bound_only=not complete)
    deltas = np.abs(np.diff(table, axis=0)).max(axis=1)
    return VariationBudget(float(deltas.sum()), lower_bound_only=not complete)


def whittle_gap(f_set, g_set, M: int, budget: int = 10_000_000) -> float:
    """Empirical suboptimality of the Whittle policy of ``f_set``.

    Evaluates both the Whittle policy computed from f and the exact
    brute-force optimum of f under the cost functions g:

        | C_g(Whittle(f)) - C_g(Opt(f)) |

    With g = f this is the plain index-policy gap; with g = the next
    epoch's costs it is the per-step term of the drifting-cost bound.
    """
    tables = np.stack([whittle_index_table(f) for f in f_set])
    policy = WhittleSchedule(tables=tables)
    opt_schedule, _ = brute_force_best_schedule(f_set, M, budget)
    whittle_cost = epoch_rollout(policy, g_set, M).cost_norm
    opt_cost = epoch_rollout(opt_schedule, g_set, M).cost_norm
    return abs(whittle_cost - opt_cost)


# ---------------------------------------------------------------------------
# closed-form expected-regret bounds


def ftpl_regret_bound(T: int, M: int) -> float:
    """Full-feedback perturbed-leader bound 2 sqrt(2 T ln M) on [0,1] costs."""
    _check_horizon(T, M)
    return 2.0 * math.sqrt(2.0 * T * math.log(M))


def exp3_regret_bound(T: int, M: int) -> float:
    """Bandit-feedback bound 2 sqrt(T M ln M) on [0,1] costs."""
    _check_horizon(T, M)
    return 2.0 * math.sqrt(T * M * math.log(M))


def fpwl_regret_bound(T: int, M: int, N: int, D: float, alpha: float) -> float:
    """Perturbed-Whittle static bound alpha T + 2 D sqrt(2 M N T)."""
    _check_horizon(T, M)
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if D < 0 or alpha < 0:
        raise ValueError(f"D and alpha must be >= 0, got D={D}, alpha={alpha}")
    return alpha * T + 2.0 * D * math.sqrt(2.0 * M * N * T)


def fdwl_regret_bound(T: int, alpha: float, variation: float, D: float) -> float:
    """Follow-the-delayed-Whittle dynamic bound alpha T + V_T + D."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if D < 0 or alpha < 0 or variation < 0:
        raise ValueError(
            f"alpha, variation and D must be >= 0, got "
            f"alpha={alpha}, variation={variation}, D={D}")
    return alpha * T + variation + D


def _check_horizon(T: int, M: int) -> None:
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of comparing seed-averaged regret against a bound."""

    name: str
    observed: float
    bound: float
    margin: float          # bound - observed; positive means inside the bound
    passed: bool


def check_theorem_bounds(
    observed: float, bound: float, *, name: str, n_seeds: int
) -> BoundCheck:
    """Compare a seed-averaged final regret against a closed-form bound.

    The bounds hold for expectations, so the observed value must be an
    average over at least 10 seeds; fewer is rejected rather than
    producing a meaningless verdict.
    """
    if n_seeds < 10:
        raise ValueError(
            f"bounds hold in expectation; need >= 10 seeds, got {n_seeds}")
    margin = bound - observed
    return BoundCheck(name=name, observed=float(observed), bound=float(bound),
                      margin=float(margin), passed=bool(observed <= bound))
