"""Discretized bin-load distributions on a uniform grid.

A ``LatticeDist`` tracks the distribution of a bin's load on the grid
``{0, eps, 2*eps, ..., 1}`` together with the probability mass already past
capacity.  Item sizes are always rounded *up* to grid steps, so a grid
overflow <= alpha certifies true viability.  Adding an on/off item is an
O(1/eps) shifted convolution and, thanks to the cached cumulative sums,
"would this item fit" is O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .prob import OverflowEstimate

__all__ = [
    "LatticeDist",
    "lattice_new",
    "lattice_add",
    "lattice_overflow_if_added",
    "lattice_estimate",
    "steps_for_size",
    "validate_eps",
    "LatticePool",
]

# Relative slack when rounding sizes to grid steps, so s = j*eps lands on j.
_STEP_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class LatticeDist:
    """Load distribution of one bin on a uniform grid.

    mass[j] = P(load == j * eps) for j = 0..n_steps, prefix[j] = P(load <=
    j * eps), overflow = P(load > 1).  mass sums to 1 - overflow.
    """

    eps: float
    n_steps: int
    mass: np.ndarray
    overflow: float
    prefix: np.ndarray

    def __post_init__(self) -> None:
        if self.mass.shape != (self.n_steps + 1,) or self.prefix.shape != self.mass.shape:
            raise ValueError("mass/prefix must have n_steps + 1 cells")


def validate_eps(eps: float) -> int:
    """Number of grid steps per unit capacity; eps must divide 1 evenly."""
    if not (0.0 < eps <= 1.0) or not math.isfinite(eps):
        raise ValueError(f"eps must be in (0, 1], got {eps!r}")
    n = round(1.0 / eps)
    if n < 1 or abs(n * eps - 1.0) > 1e-9:
        raise ValueError(f"1/eps must be an integer, got eps={eps!r}")
    return n


def steps_for_size(s: float, eps: float, n_steps: int) -> int:
    """Size rounded up to grid steps: smallest k with k*eps >= s (fp slack)."""
    k = math.ceil(s / eps - _STEP_SLACK)
    if k < 1:
        k = 1
    if k > n_steps:
        raise ValueError(f"size {s!r} exceeds the unit grid")
    return k


def lattice_new(eps: float) -> LatticeDist:
    """Empty bin: all mass at zero load."""
    n = validate_eps(eps)
    mass = np.zeros(n + 1)
    mass[0] = 1.0
    return LatticeDist(eps, n, mass, 0.0, np.ones(n + 1))


def _check_add_args(d: LatticeDist, p: float, k_steps: int) -> None:
    if not (0.0 < p <= 1.0):
        raise ValueError(f"item probability must be in (0, 1], got {p!r}")
    if not isinstance(k_steps, (int, np.integer)) or k_steps < 1:
        raise ValueError(f"k_steps must be a positive integer, got {k_steps!r}")


def lattice_overflow_if_added(d: LatticeDist, p: float, k_steps: int) -> float:
    """Overflow probability the bin would have after adding Ber(p, k_steps*eps).

    Does not mutate d.  k_steps past the grid end is allowed: the active item
    then overflows from any load, giving overflow + p * (1 - overflow).
    """
    _check_add_args(d, p, k_steps)
    n = d.n_steps
    hi = float(d.prefix[n])
    lo = float(d.prefix[n - k_steps]) if k_steps <= n else 0.0
    return d.overflow + p * (hi - lo)


def lattice_add(d: LatticeDist, p: float, k_steps: int) -> LatticeDist:
    """New distribution after placing Ber(p, k_steps*eps) into the bin."""
    _check_add_args(d, p, k_steps)
    n = d.n_steps
    k = min(k_steps, n + 1)
    q = 1.0 - p
    mass = q * d.mass
    if k <= n:
        mass[k:] += p * d.mass[: n + 1 - k]
    overflow = lattice_overflow_if_added(d, p, k_steps)
    return LatticeDist(d.eps, n, mass, overflow, np.cumsum(mass))


def lattice_estimate(d: LatticeDist) -> OverflowEstimate:
    return OverflowEstimate(min(1.0, max(0.0, d.overflow)), "lattice")


class LatticePool:
    """Growable pool of bins sharing one grid, stored as CDF rows.

    Backs the packers' hot path: queries and in-place adds run through the
    kernel backend, and the pool-wide first-fit scan avoids building python
    objects per bin.
    """

    def __init__(self, n_steps: int, capacity: int = 8):
        if n_steps < 1:
            raise ValueError("n_steps must be positive")
        self.n_steps = n_steps
        self.n_bins = 0
        self._mat = np.empty((max(1, capacity), n_steps + 1))

    def open_bin(self) -> int:
        if self.n_bins == self._mat.shape[0]:
            grown = np.empty((2 * self._mat.shape[0], self.n_steps + 1))
            grown[: self.n_bins] = self._mat[: self.n_bins]
            self._mat = grown
        idx = self.n_bins
        self._mat[idx].fill(1.0)
        self.n_bins += 1
        return idx

    def add(self, i: int, p: float, k: int) -> None:
        kernels.prefix_add(self._mat[i], p, k)

    def overflow(self, i: int) -> float:
        return 1.0 - float(self._mat[i, self.n_steps])

    def overflow_if_added(self, i: int, p: float, k: int) -> float:
        return float(kernels.prefix_overflow_if_added(self._mat[i], p, k))

    def first_fit(self, p: float, k: int, tol: float) -> int:
        return int(kernels.lattice_first_fit(self._mat, self.n_bins, p, k, tol))

    def combined_first_fit(
        self, wsums: np.ndarray, p: float, k: int, w: float, of_tol: float, w_tol: float
    ) -> int:
        return int(
            kernels.combined_first_fit(
                self._mat, wsums, self.n_bins, p, k, w, of_tol, w_tol
            )
        )

    def as_dist(self, i: int, eps: float) -> LatticeDist:
        prefix = self._mat[i].copy()
        mass = np.diff(prefix, prepend=0.0)
        return LatticeDist(eps, self.n_steps, mass, 1.0 - float(prefix[-1]), prefix)
