"""Multi-source scheduling: Whittle-index policies, oracles and learners.

N sources share one channel.  In every slot (except the last of an epoch,
where interference is relaxed so all AoIs reset for the next epoch) at
most one source transmits.  The epoch cost is the average per-slot,
per-source cost of age, so policies are compared in units of a single
source-slot.

The Whittle index of a source at age x,

    W(x) = x * f(x+1) - (f(1) + ... + f(x)),        with f(M+1) := f(M),

prices how much waiting one more slot hurts; scheduling the source with
the largest index is a strong heuristic that the learners below plug
their cost estimates into:

* FPWL follows the perturbed Whittle leader on cumulative estimates,
* FDWL follows the previous epoch's (estimated) costs directly.

Under bandit feedback only the sampled (age, cost) pairs of scheduled
sources are visible; the gaps are filled by monotone linear
interpolation before the estimates enter a learner.
"""

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import AoiCostFunction, EpochConfig, RngStream, as_cost_values

__all__ = [
    "BudgetExceededError",
    "CostSampleSet",
    "EpochRollout",
    "ExplicitSchedule",
    "FpwlState",
    "MultiSourceRun",
    "WhittleSchedule",
    "brute_force_best_schedule",
    "epoch_rollout",
    "evaluate_policy_epoch",
    "fdwl_select",
    "fpwl_select",
    "fpwl_update",
    "interpolate_cost_estimate",
    "round_robin_schedule",
    "run_multi_source",
    "whittle_index",
    "whittle_index_table",
    "whittle_schedule_step",
]


class BudgetExceededError(RuntimeError):
    """Raised when exhaustive schedule enumeration would exceed its budget."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"exhaustive search needs {required} schedule evaluations, "
            f"budget allows {budget}")


# ---------------------------------------------------------------------------
# Whittle indices


def _monotone_values(f, context: str) -> np.ndarray:
    v = as_cost_values(f)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{context}: need a nonempty 1-D cost vector")
    drop = np.flatnonzero(np.diff(v) < 0.0)
    if drop.size:
        raise ValueError(
            f"{context}: cost decreases from AoI {int(drop[0]) + 1} "
            f"to {int(drop[0]) + 2}")
    return v


def whittle_index_table(f) -> np.ndarray:
    """Whittle index W(x) for every age x = 1..M of one source.

    W(x) = x * f(x+1) - sum_{k<=x} f(k), with the cost clamped at the
    horizon (f(M+1) := f(M)).  Nondecreasing f gives a nondecreasing
    table.  Non-monotone inputs are rejected: the index formula prices
    marginal staleness and is meaningless when waiting gets cheaper.
    """
    v = _monotone_values(f, "whittle index")
    nxt = np.append(v[1:], v[-1])
    ages = np.arange(1, v.size + 1)
    return ages * nxt - np.cumsum(v)


def whittle_index(f, x: int) -> float:
    """Whittle index of one source at age x (1-based)."""
    v = _monotone_values(f, "whittle index")
    if not 1 <= x <= v.size:
        raise ValueError(f"age {x} outside 1..{v.size}")
    nxt = v[x] if x < v.size else v[-1]
    return float(x * nxt - np.sum(v[:x]))


def whittle_schedule_step(tables: np.ndarray, aois: Sequence[int]) -> int:
    """Source (1-based) with the largest index at the current ages.

    Ties break toward the smallest source index.
    """
    tables = np.asarray(tables, dtype=float)
    if tables.ndim != 2:
        raise ValueError(f"need an N x M index table, got shape {tables.shape}")
    n, m = tables.shape
    if len(aois) != n:
        raise ValueError(f"{len(aois)} ages for {n} sources")
    scores = np.empty(n)
    for i, age in enumerate(aois):
        if not 1 <= age <= m:
            raise ValueError(f"source {i + 1} age {age} outside 1..{m}")
        scores[i] = tables[i, age - 1]
    return int(np.argmax(scores)) + 1


# ---------------------------------------------------------------------------
# schedule policies and epoch evaluation


@dataclass(frozen=True)
class ExplicitSchedule:
    """Fixed decision per interior slot; slots[j-1] transmits in slot j.

    Length is M-1: the final slot of an epoch resets every source by
    construction, so no choice is left to make there.
    """

    slots: tuple[int, ...]


@dataclass(frozen=True)
class WhittleSchedule:
    """Index policy: per-slot argmax of tables[i, age_i] over sources."""

    tables: np.ndarray


SchedulePolicy = Union[ExplicitSchedule, WhittleSchedule]


def round_robin_schedule(n_sources: int, M: int) -> ExplicitSchedule:
    """Cycle 1, 2, ..., N over the M-1 interior slots."""
    return ExplicitSchedule(tuple((j % n_sources) + 1 for j in range(M - 1)))


class CostSampleSet:
    """Observed (age, cost) pairs of one source within one epoch.

    Within an epoch the cost function is fixed, so re-observing an age
    must produce the same value; ``add`` enforces that unless
    ``replace=True`` (used by the mobility experiments, where the
    sampled quantity drifts with the node's speed).
    """

    def __init__(self, samples: Optional[Mapping[int, float]] = None):
        self._samples: dict[int, float] = {}
        if samples:
            for age, value in samples.items():
                self.add(age, value)

    def add(self, age: int, value: float, replace: bool = False) -> None:
        age = int(age)
        if age < 1:
            raise ValueError(f"sampled age must be >= 1, got {age}")
        if value < 0:
            raise ValueError(f"sampled cost must be >= 0, got {value}")
        if not replace and age in self._samples and self._samples[age] != value:
            raise ValueError(
                f"age {age} sampled twice with different costs "
                f"({self._samples[age]} vs {value})")
        self._samples[age] = float(value)

    def items(self) -> list[tuple[int, float]]:
        return sorted(self._samples.items())

    def as_dict(self) -> dict[int, float]:
        return dict(self._samples)

    def __len__(self) -> int:
        return len(self._samples)

    def __contains__(self, age: int) -> bool:
        return age in self._samples


@dataclass
class EpochRollout:
    """Everything observable from running one policy for one epoch."""

    cost_raw: float            # sum of f over all slots and sources
    cost_norm: float           # divided by N*M: average source-slot cost
    trace: np.ndarray          # (M, N) AoI held by each source in each slot
    decisions: tuple[int, ...] # realized interior-slot choices (1-based)
    samples: list[CostSampleSet]  # bandit-visible feedback per source


def _policy_decider(policy: SchedulePolicy, n: int, M: int):
    if isinstance(policy, ExplicitSchedule):
        slots = policy.slots
        if len(slots) != M - 1:
            raise ValueError(
                f"explicit schedule has {len(slots)} decisions, need M-1={M - 1}")
        for j, s in enumerate(slots):
            if not 1 <= s <= n:
                raise ValueError(
                    f"slot {j + 1} schedules source {s}, outside 1..{n}")
        return lambda slot, ages: slots[slot - 1]
    if isinstance(policy, WhittleSchedule):
        tables = np.asarray(policy.tables, dtype=float)
        if tables.shape[0] != n or tables.shape[1] < M:
            raise ValueError(
                f"index tables shaped {tables.shape}, need ({n}, >= {M})")
        return lambda slot, ages: whittle_schedule_step(tables, ages)
    raise TypeError(f"unknown schedule policy {type(policy).__name__}")


def epoch_rollout(policy: SchedulePolicy, fs: Sequence, M: int) -> EpochRollout:
    """Run one policy through one epoch of M slots.

    All sources start at AoI 1.  The cost of a slot is charged at the
    ages held when the slot begins; a scheduling decision affects the
    next slot's ages.  The final slot needs no decision (full reset),
    but every source it delivers reveals its sampled cost, like any
    other delivery.
    """
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    fvals = [as_cost_values(f) for f in fs]
    n = len(fvals)
    if n < 1:
        raise ValueError("need at least one source")
    for i, v in enumerate(fvals):
        if v.size < M:
            raise ValueError(
                f"source {i + 1} cost function covers AoI 1..{v.size}, need 1..{M}")
    decide = _policy_decider(policy, n, M)

    ages = [1] * n
    total = 0.0
    trace = np.empty((M, n), dtype=int)
    decisions: list[int] = []
    samples = [CostSampleSet() for _ in range(n)]

    for slot in range(1, M + 1):
        trace[slot - 1] = ages
        slot_cost = 0.0
        for i in range(n):
            slot_cost += fvals[i][ages[i] - 1]
        total += slot_cost
        if slot < M:
            d = decide(slot, ages)
            samples[d - 1].add(ages[d - 1], float(fvals[d - 1][ages[d - 1] - 1]))
            ages = [1 if i == d - 1 else a + 1 for i, a in enumerate(ages)]
            decisions.append(d)
        else:
            # relaxed final slot: every source delivers and resets
            for i in range(n):
                samples[i].add(ages[i], float(fvals[i][ages[i] - 1]))

    return EpochRollout(
        cost_raw=float(total),
        cost_norm=float(total) / (n * M),
        trace=trace,
        decisions=tuple(decisions),
        samples=samples,
    )


def evaluate_policy_epoch(policy: SchedulePolicy, fs: Sequence, M: int):
    """Normalized epoch cost and AoI trace of one policy.

    Returns ``(cost, trace)`` with cost = (1 / NM) * sum over slots and
    sources of the cost of age, and trace[j-1, i-1] the AoI of source i
    in slot j.
    """
    rollout = epoch_rollout(policy, fs, M)
    return rollout.cost_norm, rollout.trace


# ---------------------------------------------------------------------------
# brute-force oracle over explicit schedules


def _chunk_costs(fvals: np.ndarray, M: int, digits: np.ndarray) -> np.ndarray:
    """Vectorized epoch cost of many explicit schedules at once.

    ``digits`` is (S, M-1) with 0-based source choices.  Accumulation
    order matches :func:`epoch_rollout` exactly (source-major within a
    slot, slots in order, one final division), so costs agree bit for
    bit with the scalar evaluator and exact ties are honest ties.
    """
    n = fvals.shape[0]
    count = digits.shape[0]
    ages = np.ones((count, n), dtype=np.int64)
    totals = np.zeros(count)
    rows = np.arange(count)
    for slot in range(1, M + 1):
        slot_cost = np.zeros(count)
        for i in range(n):
            slot_cost += fvals[i][ages[:, i] - 1]
        totals += slot_cost
        if slot < M:
            ages += 1
            ages[rows, digits[:, slot - 1]] = 1
    return totals / (n * M)


def brute_force_best_schedule(
    fs: Sequence, M: int, budget: int = 10_000_000
) -> tuple[ExplicitSchedule, float]:
    """Exact minimum-cost explicit schedule by exhaustive enumeration.

    All N^(M-1) interior-slot assignments are evaluated (the final slot
    resets everything, so it never differentiates schedules).  Exact
    cost ties resolve to the lexicographically smallest schedule.  When
    the enumeration would exceed ``budget`` evaluations the search
    refuses up front and reports how many it needed.
    """
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    fvals = np.stack([as_cost_values(f)[:M] for f in fs])
    n = fvals.shape[0]
    total_schedules = n ** (M - 1)
    if total_schedules > budget:
        raise BudgetExceededError(required=total_schedules, budget=budget)

    powers = n ** np.arange(M - 2, -1, -1, dtype=np.int64)
    best_cost = math.inf
    best_index = -1
    chunk = 1 << 16
    for start in range(0, total_schedules, chunk):
        stop = min(start + chunk, total_schedules)
        indices = np.arange(start, stop, dtype=np.int64)
        digits = (indices[:, None] // powers[None, :]) % n
        costs = _chunk_costs(fvals, M, digits)
        j = int(np.argmin(costs))
        if costs[j] < best_cost:
            best_cost = float(costs[j])
            best_index = start + j

    digits = (best_index // powers) % n
    schedule = ExplicitSchedule(tuple(int(d) + 1 for d in digits))
    return schedule, best_cost


def schedule_from_index(index: int, n_sources: int, M: int) -> ExplicitSchedule:
    """Explicit schedule at a given lexicographic position (0-based).

    Inverse of the enumeration order used by the exhaustive searches:
    index 0 is (1, 1, ..., 1), the slot-1 choice is the most significant
    digit.
    """
    total = n_sources ** (M - 1)
    if not 0 <= index < total:
        raise ValueError(f"schedule index {index} outside 0..{total - 1}")
    digits = []
    for j in range(M - 2, -1, -1):
        digits.append((index // (n_sources ** j)) % n_sources)
    return ExplicitSchedule(tuple(d + 1 for d in digits))


def enumerate_schedule_costs(fs: Sequence, M: int, budget: int = 10_000_000) -> np.ndarray:
    """Normalized epoch cost of every explicit schedule, in lexicographic order.

    Used for exact fixed-schedule comparators; same budget discipline as
    :func:`brute_force_best_schedule`.
    """
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    fvals = np.stack([as_cost_values(f)[:M] for f in fs])
    n = fvals.shape[0]
    total_schedules = n ** (M - 1)
    if total_schedules > budget:
        raise BudgetExceededError(required=total_schedules, budget=budget)
    powers = n ** np.arange(M - 2, -1, -1, dtype=np.int64)
    out = np.empty(total_schedules)
    chunk = 1 << 16
    for start in range(0, total_schedules, chunk):
        stop = min(start + chunk, total_schedules)
        indices = np.arange(start, stop, dtype=np.int64)
        digits = (indices[:, None] // powers[None, :]) % n
        out[start:stop] = _chunk_costs(fvals, M, digits)
    return out


# ---------------------------------------------------------------------------
# learners


@dataclass(frozen=True)
class FpwlState:
    """Follow-the-perturbed-Whittle-leader state.

    F accumulates per-source cost estimates starting from the identity
    F(j) = j; selection perturbs F with nondecreasing noise (prefix sums
    of i.i.d. U[0, 1/epsilon] increments) so the perturbed functions stay
    monotone, then plays their Whittle policy.
    """

    F: np.ndarray      # (N, M)
    epsilon: float     # inverse perturbation width; math.inf turns noise off
    epoch: int = 1

    @classmethod
    def fresh(cls, n_sources: int, M: int, epsilon: float) -> "FpwlState":
        if n_sources < 1 or M < 1:
            raise ValueError(f"need N >= 1 and M >= 1, got N={n_sources}, M={M}")
        if not epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {epsilon}")
        F = np.tile(np.arange(1.0, M + 1.0), (n_sources, 1))
        return cls(F=F, epsilon=float(epsilon))


def fpwl_select(state: FpwlState, rng: RngStream) -> WhittleSchedule:
    """Whittle policy of the perturbed cumulative estimates.

    Draws are consumed even at zero width (epsilon = inf) so the stream
    position does not depend on the parameter value.
    """
    n, m = state.F.shape
    width = 0.0 if math.isinf(state.epsilon) else 1.0 / state.epsilon
    deltas = rng.gen.uniform(0.0, width, size=(n, m)) if width > 0 else (
        rng.gen.uniform(0.0, 1.0, size=(n, m)) * 0.0)
    gamma = np.cumsum(deltas, axis=1)
    perturbed = state.F + gamma
    tables = np.stack([whittle_index_table(row) for row in perturbed])
    return WhittleSchedule(tables=tables)


def fpwl_update(state: FpwlState, observed: Sequence) -> FpwlState:
    """Add this epoch's (estimated) cost functions into F.

    ``observed`` holds one nondecreasing length-M cost vector per source
    (the true functions under full feedback, interpolated estimates under
    bandit feedback).  Decreasing estimates are rejected; the Whittle
    machinery downstream requires monotone inputs.
    """
    n, m = state.F.shape
    if len(observed) != n:
        raise ValueError(f"{len(observed)} cost estimates for {n} sources")
    rows = []
    for i, f in enumerate(observed):
        v = _monotone_values(f, f"source {i + 1} estimate")
        if v.size < m:
            raise ValueError(
                f"source {i + 1} estimate covers AoI 1..{v.size}, need 1..{m}")
        rows.append(v[:m])
    return FpwlState(F=state.F + np.stack(rows), epsilon=state.epsilon,
                     epoch=state.epoch + 1)


def fdwl_select(
    prev_fs: Optional[Sequence] = None,
    *,
    n_sources: Optional[int] = None,
    horizon: Optional[int] = None,
) -> WhittleSchedule:
    """Whittle policy of the previous epoch's (estimated) cost functions.

    Before anything is observed (``prev_fs=None``) the identity cost
    f(j) = j stands in, which makes the first epoch a max-AoI-style
    round robin.
    """
    if prev_fs is None:
        if n_sources is None or horizon is None:
            raise ValueError("n_sources and horizon required when prev_fs is None")
        prev_fs = [np.arange(1.0, horizon + 1.0)] * n_sources
    tables = np.stack([whittle_index_table(f) for f in prev_fs])
    return WhittleSchedule(tables=tables)


def interpolate_cost_estimate(samples, M: int, D: float) -> AoiCostFunction:
    """Fill unobserved ages of a sampled cost function by linear interpolation.

    The anchor (0, 0) is prepended, and when the largest age M was never
    observed its value defaults to the bound D (the most pessimistic
    admissible cost).  Observed ages keep their sampled values exactly;
    the result is nondecreasing and bounded by D.
    """
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if D < 0:
        raise ValueError(f"bound D must be >= 0, got {D}")
    if isinstance(samples, CostSampleSet):
        pairs = samples.items()
    else:
        pairs = sorted((int(a), float(v)) for a, v in dict(samples).items())
    xs = [0.0]
    ys = [0.0]
    prev_val = 0.0
    for age, value in pairs:
        if not 1 <= age <= M:
            raise ValueError(f"sampled age {age} outside 1..{M}")
        if not 0.0 <= value <= D:
            raise ValueError(f"sampled cost {value} at age {age} outside [0, {D}]")
        if value < prev_val:
            raise ValueError(
                f"samples decrease at age {age} ({prev_val} -> {value}); "
                "cost of age must be nondecreasing")
        xs.append(float(age))
        ys.append(value)
        prev_val = value
    if not pairs or pairs[-1][0] != M:
        xs.append(float(M))
        ys.append(float(D))
    est = np.interp(np.arange(1.0, M + 1.0), xs, ys)
    return AoiCostFunction(values=est, bound=float(D))


# ---------------------------------------------------------------------------
# experiment runner


def _schedule_digest(decisions: tuple[int, ...]) -> str:
    text = ",".join(str(d) for d in decisions)
    if len(decisions) <= 24:
        return text.replace(",", "-")
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _max_aoi_tables(n: int, M: int) -> WhittleSchedule:
    # argmax of the age itself: index table W(x) = x
    return WhittleSchedule(tables=np.tile(np.arange(1.0, M + 1.0), (n, 1)))


@dataclass
class MultiSourceRun:
    """Per-epoch series produced by :func:`run_multi_source`.

    cost_norm is the average source-slot cost (bounded by the cost bound
    D, not by 1).  Regret columns are cumulative and NaN when the
    exhaustive comparator would blow the enumeration budget.
    """

    algorithm: str
    feedback: str
    cost_raw: np.ndarray
    cost_norm: np.ndarray
    static_cum: np.ndarray
    dynamic_cum: np.ndarray
    schedule_digests: list[str]
    comparator: str


_MULTI_ALGOS = ("fpwl", "fdwl", "fixed", "max-aoi", "oracle")


def run_multi_source(
    config: EpochConfig,
    cost_sequence: Sequence[Sequence[AoiCostFunction]],
    algorithm: str,
    rng: RngStream,
    *,
    feedback: str = "full",
    epsilon: Optional[float] = None,
    fixed_schedule: Optional[ExplicitSchedule] = None,
    budget: int = 10_000_000,
) -> MultiSourceRun:
    """Drive one scheduling algorithm across a T-epoch cost sequence.

    ``cost_sequence[k][i]`` is source i+1's cost function in epoch k+1.
    Learners: "fpwl" (default epsilon sqrt(2M / (N D^2 T))) and "fdwl";
    baselines: "fixed" (explicit schedule), "max-aoi", and "oracle" (the
    clairvoyant per-epoch brute-force optimum).  Feedback is "full"
    (true cost functions revealed after the epoch) or "bandit" (only
    scheduled samples, completed by interpolation).

    Static regret compares against the best fixed explicit schedule in
    hindsight, computed exactly when N^(M-1) fits the budget.
    """
    if algorithm not in _MULTI_ALGOS:
        raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {_MULTI_ALGOS}")
    if feedback not in ("full", "bandit"):
        raise ValueError(f"unknown feedback mode {feedback!r}")
    M, T, n = config.M, config.T, config.N
    if len(cost_sequence) != T:
        raise ValueError(
            f"cost sequence has {len(cost_sequence)} epochs, config says T={T}")
    for k, fs in enumerate(cost_sequence):
        if len(fs) != n:
            raise ValueError(
                f"epoch {k + 1} has {len(fs)} cost functions, config says N={n}")

    bound = max(f.bound for fs in cost_sequence for f in fs)
    if algorithm == "fixed":
        if fixed_schedule is None:
            raise ValueError("algorithm 'fixed' needs fixed_schedule")
        _policy_decider(fixed_schedule, n, M)

    fpwl_state = None
    if algorithm == "fpwl":
        if epsilon is None:
            d2 = bound * bound
            epsilon = math.sqrt(2.0 * M / (n * d2 * T)) if d2 > 0 else math.inf
        fpwl_state = FpwlState.fresh(n, M, epsilon)
    prev_estimates: Optional[list] = None  # FDWL memory; None means identity

    total_schedules = n ** (M - 1)
    comparator_ok = total_schedules <= budget
    per_schedule_totals = np.zeros(total_schedules) if comparator_ok else None

    cost_raw = np.empty(T)
    cost_norm = np.empty(T)
    static_cum = np.full(T, np.nan)
    dynamic_cum = np.full(T, np.nan)
    digests: list[str] = []
    alg_total = 0.0
    dyn_total = 0.0

    for k, fs in enumerate(cost_sequence):
        if algorithm == "fpwl":
            policy: SchedulePolicy = fpwl_select(fpwl_state, rng)
        elif algorithm == "fdwl":
            policy = fdwl_select(prev_estimates, n_sources=n, horizon=M)
        elif algorithm == "fixed":
            policy = fixed_schedule
        elif algorithm == "max-aoi":
            policy = _max_aoi_tables(n, M)
        else:  # oracle: clairvoyant per-epoch optimum
            policy, _ = brute_force_best_schedule(fs, M, budget)

        rollout = epoch_rollout(policy, fs, M)
        cost_raw[k] = rollout.cost_raw
        cost_norm[k] = rollout.cost_norm
        digests.append(_schedule_digest(rollout.decisions))

        # feedback for the learners
        if algorithm == "fpwl":
            if feedback == "full":
                observed = [f.values[:M] for f in fs]
            else:
                observed = [
                    interpolate_cost_estimate(s, M, bound).values
                    for s in rollout.samples]
            fpwl_state = fpwl_update(fpwl_state, observed)
        elif algorithm == "fdwl":
            if feedback == "full":
                prev_estimates = [f.values[:M] for f in fs]
            else:
                prev_estimates = [
                    interpolate_cost_estimate(s, M, bound).values
                    for s in rollout.samples]

        # exact comparators when enumeration is affordable
        if comparator_ok:
            all_costs = enumerate_schedule_costs(fs, M, budget)
            per_schedule_totals += all_costs
            alg_total += rollout.cost_norm
            dyn_total += rollout.cost_norm - all_costs.min()
            static_cum[k] = alg_total - per_schedule_totals.min()
            dynamic_cum[k] = dyn_total

    return MultiSourceRun(
        algorithm=algorithm,
        feedback=feedback,
        cost_raw=cost_raw,
        cost_norm=cost_norm,
        static_cum=static_cum,
        dynamic_cum=dynamic_cum,
        schedule_digests=digests,
        comparator="exact-enumeration" if comparator_ok else "unavailable",
    )
