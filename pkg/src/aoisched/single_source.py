"""Single-source threshold scheduling and its online learners.

One source reports to a base station over an epoch of M slots.  A
threshold policy x transmits whenever the AoI reaches x (plus a mandatory
transmission in the final slot so every epoch starts fresh).  Within an
epoch the cost of age f and the transmission cost C are fixed, so the
epoch cost of each threshold has a closed form; across epochs the costs
change and a learner (FTPL with full feedback, EXP3 with bandit feedback)
competes with the best fixed threshold in hindsight.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import AoiCostFunction, EpochConfig, RngStream, as_cost_values

__all__ = [
    "Exp3State",
    "FtplState",
    "SingleSourceRun",
    "best_fixed_threshold",
    "epoch_cost_closed_form",
    "epoch_cost_closed_form_all",
    "epoch_cost_simulated",
    "exp3_select",
    "exp3_update",
    "ftpl_select",
    "ftpl_update",
    "optimal_threshold",
    "run_single_source",
]


# ---------------------------------------------------------------------------
# epoch costs of threshold policies


def _check_threshold(x: int, M: int) -> None:
    if not 1 <= x <= M:
        raise ValueError(f"threshold {x} outside 1..{M}")


def epoch_cost_closed_form(f, C: float, M: int, x: int) -> float:
    """Exact epoch cost of threshold x over M slots.

    The AoI cycles 1..x between transmissions, so the epoch splits into
    floor(M/x) full cycles plus a remainder cycle of r = M mod x slots
    that is cut short by the mandatory final transmission:

        cost = floor(M/x) * (f(1)+...+f(x) + C)  +  [r > 0] * (f(1)+...+f(r) + C)
    """
    _check_threshold(x, M)
    v = as_cost_values(f)
    if v.size < M:
        raise ValueError(f"cost function covers AoI 1..{v.size}, need 1..{M}")
    if C < 0:
        raise ValueError(f"transmission cost must be >= 0, got {C}")
    s = np.cumsum(v[:M])
    q, r = divmod(M, x)
    cost = q * (s[x - 1] + C)
    if r > 0:
        cost += s[r - 1] + C
    return float(cost)


def epoch_cost_closed_form_all(f, C: float, M: int) -> np.ndarray:
    """Epoch cost of every threshold 1..M at once (vectorized closed form)."""
    v = as_cost_values(f)
    if v.size < M:
        raise ValueError(f"cost function covers AoI 1..{v.size}, need 1..{M}")
    if C < 0:
        raise ValueError(f"transmission cost must be >= 0, got {C}")
    s = np.cumsum(v[:M])
    x = np.arange(1, M + 1)
    q = M // x
    r = M % x
    tail = np.where(r > 0, s[np.maximum(r, 1) - 1] + C, 0.0)
    return q * (s[x - 1] + C) + tail


def epoch_cost_simulated(f, C: float, M: int, x: int):
    """Slot-by-slot epoch cost of threshold x; oracle for the closed form.

    Returns ``(cost, trajectory)`` where trajectory[t-1] is the AoI held
    in slot t.  The source transmits whenever its AoI reaches the
    threshold, and unconditionally in slot M so the next epoch starts at
    AoI 1.
    """
    _check_threshold(x, M)
    v = as_cost_values(f)
    if v.size < M:
        raise ValueError(f"cost function covers AoI 1..{v.size}, need 1..{M}")
    if C < 0:
        raise ValueError(f"transmission cost must be >= 0, got {C}")
    cost = 0.0
    age = 1
    trajectory = np.empty(M, dtype=int)
    for t in range(1, M + 1):
        trajectory[t - 1] = age
        transmit = age >= x or t == M
        cost += v[age - 1]
        if transmit:
            cost += C
        age = 1 if transmit else age + 1
    return cost, trajectory


def optimal_threshold(f, C: float, horizon: Optional[int] = None) -> Optional[int]:
    """Smallest stationary threshold H whose long-run average cost is minimal.

    H is the smallest age satisfying

        f(H)  <=  (f(1)+...+f(H) + C) / H  <=  f(H+1),

    which pins the minimum of the per-cycle average cost when f is
    nondecreasing.  Returns None (never send voluntarily) when no age in
    1..horizon qualifies, e.g. a flat f with C > 0 where waiting is
    always cheaper than paying for an update.

    ``f`` may be a cost vector / :class:`AoiCostFunction` (horizon
    defaults to its length, with f(horizon+1) clamped to the last value)
    or a callable on ages 1..horizon+1 (horizon then required).
    """
    if C < 0:
        raise ValueError(f"transmission cost must be >= 0, got {C}")
    if callable(f) and not isinstance(f, AoiCostFunction):
        if horizon is None:
            raise ValueError("search horizon required for callable cost functions")
        vals = np.array([float(f(j)) for j in range(1, horizon + 2)])
    else:
        arr = as_cost_values(f)
        if horizon is None:
            horizon = arr.size
        if horizon > arr.size:
            raise ValueError(
                f"search horizon {horizon} exceeds cost function length {arr.size}")
        upper = arr[horizon] if arr.size > horizon else arr[-1]
        vals = np.append(arr[:horizon], upper)
    running = 0.0
    for h in range(1, horizon + 1):
        running += vals[h - 1]
        avg = (running + C) / h
        if vals[h - 1] <= avg <= vals[h]:
            return h
    return None


def best_fixed_threshold(cost_table) -> tuple[int, float]:
    """Best fixed threshold in hindsight for a T x M table of epoch costs.

    Returns ``(x, total)`` where x (1-based) minimizes the column sum and
    total is that sum.  Ties break toward the smaller threshold.
    """
    table = np.asarray(cost_table, dtype=float)
    if table.ndim != 2 or table.shape[0] < 1 or table.shape[1] < 1:
        raise ValueError(f"need a nonempty T x M cost table, got shape {table.shape}")
    totals = table.sum(axis=0)
    x = int(np.argmin(totals))
    return x + 1, float(totals[x])


# ---------------------------------------------------------------------------
# FTPL (full feedback)


@dataclass(frozen=True)
class FtplState:
    """Follow-the-perturbed-leader over thresholds 1..M.

    theta accumulates the observed per-threshold epoch costs; selection
    perturbs it with fresh Gaussian noise scaled by eta.
    """

    theta: np.ndarray
    eta: float
    epoch: int = 1

    @classmethod
    def fresh(cls, M: int, eta: float) -> "FtplState":
        if M < 1:
            raise ValueError(f"need at least one threshold, got M={M}")
        if eta < 0:
            raise ValueError(f"perturbation scale must be >= 0, got {eta}")
        return cls(theta=np.zeros(M), eta=float(eta))


def ftpl_select(state: FtplState, rng: RngStream) -> int:
    """Pick argmin of theta + eta * gamma with gamma ~ N(0, I).

    A fresh perturbation is drawn every call (also when eta == 0, so the
    stream advances identically regardless of eta; with eta == 0 this is
    exact follow-the-leader).  Ties break toward the smaller threshold.
    """
    gamma = rng.gen.standard_normal(state.theta.size)
    return int(np.argmin(state.theta + state.eta * gamma)) + 1


def ftpl_update(state: FtplState, observed) -> FtplState:
    """Fold the full observed cost vector into the accumulated totals."""
    obs = np.asarray(observed, dtype=float)
    if obs.shape != state.theta.shape:
        raise ValueError(
            f"observed costs have shape {obs.shape}, expected {state.theta.shape}")
    return FtplState(theta=state.theta + obs, eta=state.eta, epoch=state.epoch + 1)


# ---------------------------------------------------------------------------
# EXP3 (bandit feedback)


@dataclass(frozen=True)
class Exp3State:
    """Exponential weights over thresholds with importance-weighted losses."""

    p: np.ndarray
    epsilon: float
    epoch: int = 1

    @classmethod
    def fresh(cls, M: int, epsilon: float) -> "Exp3State":
        if M < 1:
            raise ValueError(f"need at least one threshold, got M={M}")
        if epsilon <= 0:
            raise ValueError(f"learning rate must be > 0, got {epsilon}")
        return cls(p=np.full(M, 1.0 / M), epsilon=float(epsilon))


def exp3_select(state: Exp3State, rng: RngStream) -> int:
    """Sample a threshold from p by inverse CDF on a single uniform draw."""
    u = rng.gen.random()
    cum = np.cumsum(state.p)
    idx = int(np.searchsorted(cum, u, side="left"))
    return min(idx, state.p.size - 1) + 1


def exp3_update(state: Exp3State, chosen: int, loss: float) -> Exp3State:
    """Multiplicative-weights step on the importance-weighted loss estimate.

    Only the chosen option's loss is known; the estimator
    loss / p[chosen] on that coordinate (zero elsewhere) is unbiased.
    The reweighting runs in log space so long horizons cannot underflow
    the intermediate products.
    """
    p = state.p
    if not 1 <= chosen <= p.size:
        raise ValueError(f"chosen option {chosen} outside 1..{p.size}")
    if not 0.0 <= loss <= 1.0 + 1e-9:
        raise ValueError(f"loss must lie in [0, 1], got {loss}")
    pc = p[chosen - 1]
    if pc <= 0.0:
        raise ValueError(f"chosen option {chosen} has zero probability")
    estimate = np.zeros(p.size)
    estimate[chosen - 1] = loss / pc
    with np.errstate(divide="ignore"):
        log_y = np.log(p) - state.epsilon * estimate
    log_y -= log_y.max()
    y = np.exp(log_y)
    return Exp3State(p=y / y.sum(), epsilon=state.epsilon, epoch=state.epoch + 1)


# ---------------------------------------------------------------------------
# experiment runner


@dataclass
class SingleSourceRun:
    """Per-epoch series produced by :func:`run_single_source`.

    Costs are stored raw and normalized by M * (D + C), the largest
    possible epoch cost, so normalized values lie in [0, 1] and regret
    columns are comparable with the learning-theoretic bounds.  Both
    regret columns are cumulative: static against the best fixed
    threshold for the epochs seen so far, dynamic against the per-epoch
    minimum.
    """

    algorithm: str
    chosen: np.ndarray
    cost_raw: np.ndarray
    cost_norm: np.ndarray
    static_cum: np.ndarray
    dynamic_cum: np.ndarray
    comparator: str
    norm_const: float


_SINGLE_ALGOS = ("ftpl", "exp3", "fixed", "oracle")


def run_single_source(
    config: EpochConfig,
    cost_sequence: Sequence[AoiCostFunction],
    algorithm: str,
    rng: RngStream,
    *,
    eta: Optional[float] = None,
    epsilon: Optional[float] = None,
    fixed_x: Optional[int] = None,
) -> SingleSourceRun:
    """Drive one algorithm across the whole epoch sequence.

    FTPL sees the full normalized cost vector after each epoch; EXP3 sees
    only the cost of its own choice.  "fixed" plays ``fixed_x`` every
    epoch and "oracle" plays the clairvoyant per-epoch minimizer.  Default
    learning rates are eta = sqrt(T) and epsilon = sqrt(ln M / (T M)).
    """
    if algorithm not in _SINGLE_ALGOS:
        raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {_SINGLE_ALGOS}")
    if config.N != 1:
        raise ValueError(f"single-source runner needs N=1, got N={config.N}")
    if len(cost_sequence) != config.T:
        raise ValueError(
            f"cost sequence has {len(cost_sequence)} epochs, config says T={config.T}")
    M, T, C = config.M, config.T, config.C
    for k, f in enumerate(cost_sequence):
        if f.horizon < M:
            raise ValueError(f"epoch {k + 1} cost function covers AoI 1..{f.horizon}, need 1..{M}")

    bound = max(f.bound for f in cost_sequence)
    norm = M * (bound + C)
    if norm <= 0.0:
        norm = 1.0

    if algorithm == "fixed":
        if fixed_x is None:
            raise ValueError("algorithm 'fixed' needs fixed_x")
        _check_threshold(fixed_x, M)

    ftpl_state = exp3_state = None
    if algorithm == "ftpl":
        ftpl_state = FtplState.fresh(M, math.sqrt(T) if eta is None else eta)
    elif algorithm == "exp3":
        rate = math.sqrt(math.log(M) / (T * M)) if epsilon is None else epsilon
        exp3_state = Exp3State.fresh(M, rate)

    chosen = np.empty(T, dtype=int)
    cost_raw = np.empty(T)
    cost_norm = np.empty(T)
    static_cum = np.empty(T)
    dynamic_cum = np.empty(T)

    per_option_totals = np.zeros(M)
    alg_total = 0.0
    dyn_total = 0.0

    for k, f in enumerate(cost_sequence):
        raw_vec = epoch_cost_closed_form_all(f.values, C, M)
        norm_vec = raw_vec / norm

        if algorithm == "ftpl":
            x = ftpl_select(ftpl_state, rng)
        elif algorithm == "exp3":
            x = exp3_select(exp3_state, rng)
        elif algorithm == "fixed":
            x = fixed_x
        else:  # oracle: clairvoyant per-epoch optimum
            x = int(np.argmin(norm_vec)) + 1

        if algorithm == "ftpl":
            ftpl_state = ftpl_update(ftpl_state, norm_vec)
        elif algorithm == "exp3":
            exp3_state = exp3_update(exp3_state, x, float(norm_vec[x - 1]))

        chosen[k] = x
        cost_raw[k] = raw_vec[x - 1]
        cost_norm[k] = norm_vec[x - 1]
        per_option_totals += norm_vec
        alg_total += norm_vec[x - 1]
        dyn_total += norm_vec[x - 1] - norm_vec.min()
        static_cum[k] = alg_total - per_option_totals.min()
        dynamic_cum[k] = dyn_total

    return SingleSourceRun(
        algorithm=algorithm,
        chosen=chosen,
        cost_raw=cost_raw,
        cost_norm=cost_norm,
        static_cum=static_cum,
        dynamic_cum=dynamic_cum,
        comparator="exact-enumeration",
        norm_const=norm,
    )
