"""Probability core for on/off load items.

An item ``Ber(p, s)`` contributes load ``s`` with probability ``p`` and 0
otherwise.  A set of items placed in a bin of capacity 1 is *viable* when
``P(sum of active sizes > 1) <= alpha``; loads exactly at capacity do not
overflow.  This module provides the Poisson tail primitives the packers
budget with, plus exact and Monte Carlo overflow estimators used as
verification oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._backend import kernels

__all__ = [
    "CAP_TOL",
    "EXACT_ENUM_LIMIT",
    "Item",
    "OverflowEstimate",
    "poisson_le",
    "inv_poisson_cdf",
    "ln_odds",
    "overflow_exact",
    "overflow_mc",
]

# Loads strictly above 1 + CAP_TOL count as overflow; the slack keeps
# sum-to-exactly-capacity bins (e.g. two deterministic 0.5 items) viable.
CAP_TOL = 1e-12

# Exact enumeration walks 2^n activity patterns; beyond this callers fall
# back to Monte Carlo.
EXACT_ENUM_LIMIT = 20

_MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class Item:
    """On/off load: size ``s`` with probability ``p``, zero otherwise."""

    p: float
    s: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.p) and 0.0 < self.p <= 1.0):
            raise ValueError(f"item probability must be in (0, 1], got {self.p!r}")
        if not (math.isfinite(self.s) and 0.0 < self.s <= 1.0):
            raise ValueError(f"item size must be in (0, 1], got {self.s!r}")

    @property
    def mean(self) -> float:
        return self.p * self.s


@dataclass(frozen=True)
class OverflowEstimate:
    """Overflow probability of one bin plus how it was obtained."""

    value: float
    method: str  # "exact-enum" | "lattice" | "monte-carlo"
    trials: int = 0
    stderr: float = 0.0

    def __post_init__(self) -> None:
        if self.method not in ("exact-enum", "lattice", "monte-carlo"):
            raise ValueError(f"unknown estimate method {self.method!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"overflow estimate out of [0, 1]: {self.value!r}")
        if self.method != "monte-carlo" and (self.trials != 0 or self.stderr != 0.0):
            raise ValueError("deterministic estimates carry no trials/stderr")
        if self.stderr < 0.0 or self.trials < 0:
            raise ValueError("trials and stderr must be nonnegative")


def poisson_le(m: int, lam: float) -> float:
    """P(Poisson(lam) <= m).

    Summed from the anchor term outward with compensated summation, in log
    space, so the result is stable for large rates.  For m above the rate the
    complementary tail is summed instead and subtracted from 1.
    """
    if not isinstance(m, (int, np.integer)) or m < 0:
        raise ValueError(f"m must be a nonnegative integer, got {m!r}")
    if not math.isfinite(lam) or lam < 0.0:
        raise ValueError(f"rate must be finite and >= 0, got {lam!r}")
    if lam == 0.0:
        return 1.0
    if m <= lam:
        # CDF terms j = m, m-1, ...: ratios term_{j-1}/term_j = j/lam <= 1.
        terms = [1.0]
        t = 1.0
        j = m
        while j > 0 and t > 1e-20:
            t *= j / lam
            terms.append(t)
            j -= 1
        log_anchor = -lam + m * math.log(lam) - math.lgamma(m + 1)
        value = math.exp(log_anchor) * math.fsum(terms)
        return min(1.0, max(0.0, value))
    # Upper tail terms j = m+1, m+2, ...: ratios lam/j < 1 and decreasing.
    terms = [1.0]
    t = 1.0
    j = m + 2
    while t > 1e-20:
        t *= lam / j
        terms.append(t)
        j += 1
    log_anchor = -lam + (m + 1) * math.log(lam) - math.lgamma(m + 2)
    tail = math.exp(log_anchor) * math.fsum(terms)
    return min(1.0, max(0.0, 1.0 - tail))


def inv_poisson_cdf(m: int, target: float) -> float:
    """The rate lam solving P(Poisson(lam) <= m) = target, for target in (0, 1).

    Bracketed bisection: [0, max(1, 4(m+1))] doubled until the CDF falls
    below the target, then 200 halvings or a bracket narrower than 1e-12.
    """
    if not isinstance(m, (int, np.integer)) or m < 0:
        raise ValueError(f"m must be a nonnegative integer, got {m!r}")
    if not (0.0 < target < 1.0):
        raise ValueError(f"target must be in (0, 1), got {target!r}")
    lo = 0.0
    hi = max(1.0, 4.0 * (m + 1))
    for _ in range(200):
        if poisson_le(m, hi) < target:
            break
        hi *= 2.0
    else:
        raise ArithmeticError("bracket expansion failed")
    for _ in range(200):
        if hi - lo < 1e-12:
            break
        mid = 0.5 * (lo + hi)
        if poisson_le(m, mid) >= target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ln_odds(p: float) -> float:
    """ln(1 / (1 - p)) for p in (0, 1), accurate for small p."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must be in (0, 1), got {p!r}")
    return -math.log1p(-p)


def overflow_exact(items: Sequence[Item]) -> OverflowEstimate:
    """Exact bin overflow probability by activity-pattern enumeration.

    Refuses more than EXACT_ENUM_LIMIT items; use overflow_mc beyond that.
    """
    n = len(items)
    if n > EXACT_ENUM_LIMIT:
        raise ValueError(f"exact enumeration limited to {EXACT_ENUM_LIMIT} items, got {n}")
    if n == 0:
        return OverflowEstimate(0.0, "exact-enum")
    probs = np.array([it.p for it in items], dtype=np.float64)
    sizes = np.array([it.s for it in items], dtype=np.float64)
    value = kernels.subset_overflow(probs, sizes, CAP_TOL)
    return OverflowEstimate(min(1.0, max(0.0, value)), "exact-enum")


def overflow_mc(items: Sequence[Item], trials: int, seed: int) -> OverflowEstimate:
    """Monte Carlo bin overflow estimate; deterministic for a given seed."""
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials!r}")
    if not items:
        return OverflowEstimate(0.0, "monte-carlo", trials, 0.0)
    probs = np.array([it.p for it in items], dtype=np.float64)
    sizes = np.array([it.s for it in items], dtype=np.float64)
    rng = np.random.Generator(np.random.PCG64(seed))
    hits = 0
    done = 0
    while done < trials:
        chunk = min(_MC_CHUNK, trials - done)
        active = rng.random((chunk, probs.size)) < probs
        loads = active @ sizes
        hits += int(np.count_nonzero(loads > 1.0 + CAP_TOL))
        done += chunk
    value = hits / trials
    stderr = math.sqrt(value * (1.0 - value) / trials)
    return OverflowEstimate(value, "monte-carlo", trials, stderr)
