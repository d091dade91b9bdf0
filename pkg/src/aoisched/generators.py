"""Named cost-sequence generators for experiments.

Each generator produces a T-epoch sequence of per-source cost functions,
all nondecreasing in the age and bounded by D, drawn from a dedicated
RNG substream so the same seed always reproduces the same sequence
regardless of which algorithms consume it.

constant              one random monotone function per source, repeated
iid-random-monotone   a fresh random monotone function every epoch
drifting              a slow random walk in cost space (sup-norm step <= delta)
adversarial-switch    periodically swaps which option is best
"""

from typing import Optional

import numpy as np

from .core import AoiCostFunction, RngStream

__all__ = ["GENERATOR_NAMES", "generate_cost_sequence"]

GENERATOR_NAMES = ("constant", "iid-random-monotone", "drifting", "adversarial-switch")


def _random_monotone(rng: RngStream, M: int, D: float) -> np.ndarray:
    # sorted uniforms: continuous, nondecreasing, spread over [0, D]
    return np.sort(rng.gen.uniform(0.0, D, M))


def generate_cost_sequence(
    name: str,
    *,
    n_sources: int,
    M: int,
    T: int,
    D: float,
    rng: RngStream,
    delta: Optional[float] = None,
    period: Optional[int] = None,
) -> list[list[AoiCostFunction]]:
    """Materialize a full T x N cost sequence for one experiment cell.

    ``delta`` (drifting only) caps the per-epoch sup-norm change, default
    0.02 * D.  ``period`` (adversarial-switch only) is the phase length in
    epochs, default max(1, T // 10).
    """
    if name not in GENERATOR_NAMES:
        raise ValueError(f"unknown generator {name!r}, expected one of {GENERATOR_NAMES}")
    if n_sources < 1 or M < 1 or T < 1:
        raise ValueError(f"need N, M, T >= 1, got N={n_sources}, M={M}, T={T}")
    if D < 0:
        raise ValueError(f"cost bound D must be >= 0, got {D}")

    if name == "constant":
        per_source = [_random_monotone(rng, M, D) for _ in range(n_sources)]
        return [[AoiCostFunction(values=v.copy(), bound=D) for v in per_source]
                for _ in range(T)]

    if name == "iid-random-monotone":
        return [[AoiCostFunction(values=_random_monotone(rng, M, D), bound=D)
                 for _ in range(n_sources)]
                for _ in range(T)]

    if name == "drifting":
        step = 0.02 * D if delta is None else float(delta)
        if step < 0:
            raise ValueError(f"drift step must be >= 0, got {step}")
        current = [_random_monotone(rng, M, D) for _ in range(n_sources)]
        epochs = []
        for _ in range(T):
            epochs.append([AoiCostFunction(values=v.copy(), bound=D) for v in current])
            # sorting after the additive step keeps the function monotone and
            # cannot increase the sup-norm change beyond the raw step
            current = [
                np.sort(np.clip(v + rng.gen.uniform(-step, step, M), 0.0, D))
                for v in current]
        return epochs

    # adversarial-switch
    phase_len = max(1, T // 10) if period is None else int(period)
    if phase_len < 1:
        raise ValueError(f"switch period must be >= 1, got {phase_len}")
    ages = np.arange(1.0, M + 1.0) / M
    if n_sources == 1:
        # two profiles with different optimal thresholds: steep early rise
        # (waiting is expensive, transmit often) vs a late spike (waiting is
        # cheap, hold long)
        profiles = [D * np.minimum(1.0, 2.0 * ages), D * ages ** 6]
        return [[AoiCostFunction(values=profiles[(k // phase_len) % 2].copy(), bound=D)]
                for k in range(T)]
    base = D * ages
    scales = np.linspace(0.3, 1.0, n_sources)
    epochs = []
    for k in range(T):
        shift = (k // phase_len) % n_sources
        epochs.append([
            AoiCostFunction(values=scales[(i + shift) % n_sources] * base, bound=D)
            for i in range(n_sources)])
    return epochs
