"""Monte Carlo simulation of sequential unit-volume covering.

Each trial draws ``n_samples`` unit-volume samples from a set of volume
``n_prototypes``.  The first sample always lands on fresh ground (volume 1);
every later sample either falls entirely inside the already-covered region,
with probability equal to covered volume over total volume, or extends the
covered volume by 1.  The mean covered volume over many trials is a
statistical oracle for the closed-form effective number.

Partial overlap is deliberately not modelled; the exact covering problem
depends on sample shape and dimensionality and is out of scope.  Note that
for non-integer ``n_prototypes`` the per-trial volume can reach
``ceil(n_prototypes)``, so the simulated mean agrees with the closed form
only when ``n_prototypes`` is an integer (the grids used for verification).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from cbloss.effnum import beta_from_prototypes, effective_number

__all__ = ["CoveringConfig", "CoveringResult", "simulate_covering", "expected_volume"]

# Trials are processed in fixed-width blocks; block b of a given seed always
# consumes the same Philox stream, so a trial's randomness is a function of
# (seed, trial index) alone, independent of n_trials and parallelizable.
_TRIALS_PER_BLOCK = 8192


@dataclass(frozen=True)
class CoveringConfig:
    """Inputs of one simulation: volume N, samples per trial, trials, seed."""

    n_prototypes: float
    n_samples: int
    n_trials: int
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not float(self.n_prototypes) >= 1.0:
            raise ValueError(f"n_prototypes must be >= 1, got {self.n_prototypes}")
        if int(self.n_samples) < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if int(self.n_trials) < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "n_prototypes", float(self.n_prototypes))
        object.__setattr__(self, "n_samples", int(self.n_samples))
        object.__setattr__(self, "n_trials", int(self.n_trials))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))


@dataclass(frozen=True)
class CoveringResult:
    """Mean covered volume, its standard error, and optionally raw trials."""

    mean_volume: float
    std_error: float
    per_trial_volumes: np.ndarray | None = None


def _block_rng(seed: int, block_index: int) -> Generator:
    return Generator(Philox(SeedSequence(entropy=[seed, block_index])))


def _simulate_block(rng: Generator, rows: int, n_prototypes: float, n_samples: int) -> np.ndarray:
    # Full-width draws keep trial -> random-stream assignment independent of
    # n_trials even in a final partial block.
    volume = np.ones(_TRIALS_PER_BLOCK)
    for _ in range(n_samples - 1):
        u = rng.random(_TRIALS_PER_BLOCK)
        p_overlap = np.minimum(volume / n_prototypes, 1.0)
        volume += u >= p_overlap
    return volume[:rows]


def simulate_covering(config: CoveringConfig, keep_trials: bool = False) -> CoveringResult:
    """Run the covering process and return mean volume with standard error.

    Deterministic for a fixed ``rng_seed``: Philox streams are keyed by
    (seed, trial block), so reruns and any parallel split over blocks
    produce identical per-trial volumes.
    """
    volumes = np.empty(config.n_trials)
    for block_index, start in enumerate(range(0, config.n_trials, _TRIALS_PER_BLOCK)):
        rows = min(_TRIALS_PER_BLOCK, config.n_trials - start)
        rng = _block_rng(config.rng_seed, block_index)
        volumes[start : start + rows] = _simulate_block(
            rng, rows, config.n_prototypes, config.n_samples
        )
    mean = float(volumes.mean())
    if config.n_trials > 1:
        std_error = float(volumes.std(ddof=1) / math.sqrt(config.n_trials))
    else:
        std_error = 0.0
    return CoveringResult(
        mean_volume=mean,
        std_error=std_error,
        per_trial_volumes=volumes if keep_trials else None,
    )


def expected_volume(n_prototypes: float, n_samples: int) -> float:
    """Closed-form prediction for the mean covered volume."""
    return effective_number(beta_from_prototypes(n_prototypes), n_samples)
