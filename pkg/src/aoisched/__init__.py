"""Online learning of AoI monitoring policies under time-varying costs.

A base station tracks one or more sources whose age-of-information (AoI)
grows by one every slot and resets to one after a delivered update.  Each
epoch has a fixed but unknown nondecreasing cost-of-age function per
source; the learner picks a scheduling policy per epoch and competes with
fixed or per-epoch-optimal comparators.

Modules
-------
core            shared types, AoI dynamics, seeded RNG streams
single_source   threshold policies, FTPL and EXP3 learners, epoch costs
multi_source    Whittle-index scheduling, FPWL/FDWL learners, oracles
regret          regret accounting, variation budget, bound checks
generators      named cost-sequence generators for experiments
mobility        mobile-node tracking experiments (Levy / adversarial)
records         experiment records and deterministic CSV/JSON emission
cli             command-line experiment driver
"""

from .core import (
    AoiCostFunction,
    CostFunctionReport,
    EpochConfig,
    RngStream,
    step_aoi_multi,
    step_aoi_single,
    validate_cost_function,
)
from .single_source import (
    Exp3State,
    FtplState,
    best_fixed_threshold,
    epoch_cost_closed_form,
    epoch_cost_simulated,
    exp3_select,
    exp3_update,
    ftpl_select,
    ftpl_update,
    optimal_threshold,
    run_single_source,
)
from .multi_source import (
    BudgetExceededError,
    CostSampleSet,
    ExplicitSchedule,
    FpwlState,
    WhittleSchedule,
    brute_force_best_schedule,
    evaluate_policy_epoch,
    fdwl_select,
    fpwl_select,
    fpwl_update,
    interpolate_cost_estimate,
    run_multi_source,
    whittle_index,
    whittle_index_table,
    whittle_schedule_step,
)
from .regret import (
    BoundCheck,
    check_theorem_bounds,
    dynamic_regret,
    exp3_regret_bound,
    fdwl_regret_bound,
    fpwl_regret_bound,
    ftpl_regret_bound,
    static_regret,
    variation_budget,
    whittle_gap,
)

__all__ = [name for name in dir() if not name.startswith("_")]
