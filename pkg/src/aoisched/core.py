"""Shared domain types: AoI dynamics, cost functions, epochs, RNG streams.

Conventions used throughout the package:

* AoI values, threshold policies, source indices and epoch indices are
  1-based, matching the way monitoring systems report staleness.  Numpy
  storage is 0-based internally; conversions happen at the boundary.
* Time is slotted.  An update scheduled in slot t is delivered by the
  start of slot t+1, so the freshest possible AoI is 1, never 0.
* All ties (argmin / argmax over thresholds, sources, schedules) break
  toward the smallest index.
"""

import hashlib
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "AoiCostFunction",
    "CostFunctionReport",
    "EpochConfig",
    "RngStream",
    "as_cost_values",
    "step_aoi_single",
    "step_aoi_multi",
    "validate_cost_function",
]


def step_aoi_single(age: int, transmit: bool) -> int:
    """Advance one source's AoI by one slot.

    A delivered update resets the age to 1 at the next slot; otherwise it
    grows by one.  ``age`` must be >= 1 (an AoI of 0 never occurs because
    delivery takes one slot).
    """
    if age < 1:
        raise ValueError(f"AoI must be >= 1, got {age}")
    return 1 if transmit else age + 1


def step_aoi_multi(ages: Sequence[int], scheduled: Iterable[int]) -> list[int]:
    """Advance all sources' AoIs by one slot.

    ``scheduled`` holds the 1-based indices of sources whose update is
    delivered this slot; they reset to 1, everyone else grows by one.
    Interior slots schedule at most one source (interference), but the
    final slot of an epoch may reset all of them at once, so any subset
    is accepted here.
    """
    n = len(ages)
    chosen = set()
    for i in scheduled:
        if not 1 <= i <= n:
            raise ValueError(f"scheduled source {i} out of range 1..{n}")
        chosen.add(i)
    return [1 if (i + 1) in chosen else step_aoi_single(a, False)
            for i, a in enumerate(ages)]


@dataclass(frozen=True)
class AoiCostFunction:
    """Per-epoch cost of age for one source.

    values[j-1] is the cost of holding AoI j, for j = 1..M.  Costs are
    nonnegative, bounded by ``bound`` and (when ``monotone_required``)
    nondecreasing in the age.  Construction does not validate; call
    :func:`validate_cost_function` to get a report instead of an
    exception, so invalid inputs can be described rather than crashed on.
    """

    values: np.ndarray
    bound: float
    monotone_required: bool = True

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("cost function needs a nonempty 1-D value vector")
        object.__setattr__(self, "values", arr)

    @property
    def horizon(self) -> int:
        """Largest AoI the function is defined for (M)."""
        return self.values.size

    def value_at(self, age: int) -> float:
        """Cost of AoI ``age`` (1-based)."""
        if not 1 <= age <= self.values.size:
            raise ValueError(f"AoI {age} outside 1..{self.values.size}")
        return float(self.values[age - 1])

    def __len__(self) -> int:
        return self.values.size


CostValues = Union[AoiCostFunction, np.ndarray, Sequence[float]]


def as_cost_values(f: CostValues) -> np.ndarray:
    """Cost vector (index j-1 = cost at AoI j) from any accepted form."""
    if isinstance(f, AoiCostFunction):
        return f.values
    return np.asarray(f, dtype=float)


@dataclass(frozen=True)
class CostFunctionReport:
    """Outcome of validating an :class:`AoiCostFunction`.

    ``ok`` is False when a constraint is violated; ``violation`` names the
    failed constraint and ``index`` the first offending AoI (1-based).
    """

    ok: bool
    violation: Optional[str] = None
    index: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok


def validate_cost_function(f: AoiCostFunction) -> CostFunctionReport:
    """Check nonnegativity, the bound and (if required) monotonicity.

    Never raises; returns a report naming the first violated index so
    callers can surface a useful message.
    """
    v = f.values
    neg = np.flatnonzero(v < 0.0)
    if neg.size:
        return CostFunctionReport(False, "negative cost", int(neg[0]) + 1)
    over = np.flatnonzero(v > f.bound)
    if over.size:
        return CostFunctionReport(
            False, f"cost exceeds bound {f.bound}", int(over[0]) + 1)
    if f.monotone_required and v.size > 1:
        drop = np.flatnonzero(np.diff(v) < 0.0)
        if drop.size:
            return CostFunctionReport(
                False, "cost decreases with AoI", int(drop[0]) + 2)
    return CostFunctionReport(True)


@dataclass(frozen=True)
class EpochConfig:
    """Shape of an epoch experiment.

    M   slots per epoch (cost functions are fixed within an epoch)
    T   number of epochs
    N   number of sources (1 for the single-source setting)
    C   transmission cost per update (single-source setting only)
    """

    M: int
    T: int
    N: int = 1
    C: float = 0.0

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.C < 0:
            raise ValueError(f"C must be >= 0, got {self.C}")


def _name_entropy(name: str) -> tuple[int, ...]:
    # Stable 128-bit digest of the stream name, independent of PYTHONHASHSEED.
    digest = hashlib.sha256(name.encode("utf-8")).digest()[:16]
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


class RngStream:
    """Named, seedable, splittable random stream.

    Every experiment cell derives its own independent substream from the
    master seed via ``child(name)``; sibling streams never share state, so
    adding an algorithm to a sweep cannot perturb another algorithm's
    draws.  Identical seed and identical draw sequence give bit-identical
    outputs (PCG64 underneath).
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._path = _path
        self.gen = np.random.default_rng(
            np.random.SeedSequence((self.seed,) + _path))

    def child(self, name: str) -> "RngStream":
        """Independent substream identified by ``name``."""
        return RngStream(self.seed, self._path + _name_entropy(name))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, depth={len(self._path) // 4})"
