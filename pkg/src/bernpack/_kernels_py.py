"""Pure-python (numpy) kernels.

Mirrors the compiled extension in `_kernels.pyx`; `bernpack._backend` picks
whichever is available.  A bin's load distribution lives on a uniform grid of
``n_steps`` cells per unit of capacity and is stored as a cumulative row:
``prefix[j] = P(load <= j * eps)``.  ``1 - prefix[n_steps]`` is the overflow
probability.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "prefix_add",
    "prefix_overflow_if_added",
    "lattice_first_fit",
    "combined_first_fit",
    "subset_overflow",
]


def prefix_add(prefix: np.ndarray, p: float, k: int) -> None:
    """Fold an on/off item (probability p, k grid steps) into a CDF row, in place."""
    n = prefix.shape[0] - 1
    q = 1.0 - p
    if k > n:
        prefix *= q
        return
    shifted = p * prefix[: n + 1 - k]
    prefix *= q
    prefix[k:] += shifted


def prefix_overflow_if_added(prefix: np.ndarray, p: float, k: int) -> float:
    n = prefix.shape[0] - 1
    pn = float(prefix[n])
    tail = pn if k > n else pn - float(prefix[n - k])
    return (1.0 - pn) + p * tail


def lattice_first_fit(
    prefix_mat: np.ndarray, n_bins: int, p: float, k: int, tol: float
) -> int:
    """Index of the first row whose overflow-if-added stays <= tol, else -1."""
    if n_bins == 0:
        return -1
    n = prefix_mat.shape[1] - 1
    pn = prefix_mat[:n_bins, n]
    tail = pn if k > n else pn - prefix_mat[:n_bins, n - k]
    of = (1.0 - pn) + p * tail
    hits = np.flatnonzero(of <= tol)
    return int(hits[0]) if hits.size else -1


def combined_first_fit(
    prefix_mat: np.ndarray,
    wsums: np.ndarray,
    n_bins: int,
    p: float,
    k: int,
    w: float,
    of_tol: float,
    w_tol: float,
) -> int:
    """First row passing the weight test or the lattice test, else -1."""
    if n_bins == 0:
        return -1
    n = prefix_mat.shape[1] - 1
    pn = prefix_mat[:n_bins, n]
    tail = pn if k > n else pn - prefix_mat[:n_bins, n - k]
    of = (1.0 - pn) + p * tail
    ok = (wsums[:n_bins] + w <= 1.0 + w_tol) | (of <= of_tol)
    hits = np.flatnonzero(ok)
    return int(hits[0]) if hits.size else -1


def subset_overflow(probs: np.ndarray, sizes: np.ndarray, cap_tol: float) -> float:
    """Exact P(sum of active sizes > 1 + cap_tol) by enumerating activity patterns."""
    sums = np.zeros(1)
    acc = np.ones(1)
    for p, s in zip(probs, sizes):
        sums = np.concatenate([sums, sums + s])
        acc = np.concatenate([acc * (1.0 - p), acc * p])
    return float(acc[sums > 1.0 + cap_tol].sum())
