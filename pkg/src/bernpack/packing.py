"""Online packers for on/off load items.

Three packers share the grid/weight machinery:

* ``pack_rpap``: items are routed to disjoint groups (confident, minor, or a
  standard subgroup per reciprocal-size class) and each group is first-fit
  packed by a scalar weight whose budget certifies ``P(bin load > 1) <=
  alpha`` analytically.
* ``pack_ffr``: first fit over a single bin list, admitting an item wherever
  the grid-rounded load distribution keeps overflow within alpha.
* ``pack_rpapc``: the grouped packer, but a bin admits an item if either its
  weight budget or its grid overflow test allows it.

All packers are deterministic and process items strictly in arrival order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import LatticeDist, LatticePool, steps_for_size, validate_eps
from .prob import Item, inv_poisson_cdf, ln_odds

__all__ = [
    "FIT_TOL",
    "GroupTag",
    "Params",
    "Bin",
    "Packing",
    "ItemSizeError",
    "derive_params",
    "classify",
    "rpap_weight",
    "FirstFitTree",
    "anyfit_pack",
    "pack_rpap",
    "pack_ffr",
    "pack_rpapc",
]

# Admission slack: a bin "fits" when the budget is met within this tolerance,
# so exact ties (two 0.5 weights in one bin) are admitted.
FIT_TOL = 1e-12

# Guard when mapping sizes to reciprocal classes, so s = 1/k lands on k.
_RECIP_SLACK = 1e-9


class ItemSizeError(ValueError):
    """An item's size exceeds the s_max the parameters were derived for."""

    def __init__(self, index: int, size: float, s_max: float):
        super().__init__(f"item {index}: size {size!r} exceeds s_max {s_max!r}")
        self.index = index
        self.size = size
        self.s_max = s_max


@dataclass(frozen=True)
class GroupTag:
    """Routing group of an item: confident, minor, or standard subgroup k."""

    kind: str
    k: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("confident", "minor", "standard"):
            raise ValueError(f"unknown group kind {self.kind!r}")
        if (self.kind == "standard") != (self.k is not None):
            raise ValueError("exactly the standard group carries a subgroup index")
        if self.k is not None and self.k < 1:
            raise ValueError(f"subgroup index must be >= 1, got {self.k!r}")

    def sort_key(self) -> tuple[int, int]:
        order = {"confident": 0, "minor": 1, "standard": 2}
        return (order[self.kind], self.k or 0)


@dataclass(frozen=True)
class Params:
    """Derived packing parameters; immutable and freely shareable.

    The rate budget of standard subgroup k is computed lazily on first use
    (k_max can be large when s_min is tiny) and memoized.
    """

    alpha: float
    s_max: float
    s_min: float
    p_max: float
    mu_0: float
    k_min: int
    k_max: int
    lambda_min: float
    _lambda_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def lambda_for(self, k: int) -> float:
        """Poisson rate budget of standard subgroup k."""
        if not self.k_min <= k <= self.k_max:
            raise ValueError(f"subgroup {k} outside [{self.k_min}, {self.k_max}]")
        lam = self._lambda_cache.get(k)
        if lam is None:
            lam = inv_poisson_cdf(k, 1.0 - self.alpha)
            self._lambda_cache[k] = lam
        return lam

    def lambda_table(self) -> dict[int, float]:
        return {k: self.lambda_for(k) for k in range(self.k_min, self.k_max + 1)}


def derive_params(
    alpha: float,
    s_max: float,
    s_min: float | None = None,
    p_max: float | None = None,
) -> Params:
    """Derive packing parameters for an overflow budget alpha and size cap s_max.

    Defaults follow the closed forms that optimize the provable approximation
    factor; s_min and p_max may be overridden (e.g. by the tuning sweep).
    s_min is always capped at s_max/2 so the standard group spans at least
    two reciprocal classes.
    """
    if not (0.0 < alpha <= 0.5) or not math.isfinite(alpha):
        raise ValueError(f"alpha must be in (0, 0.5], got {alpha!r}")
    if not (0.0 < s_max <= 1.0) or not math.isfinite(s_max):
        raise ValueError(f"s_max must be in (0, 1], got {s_max!r}")
    k_min = int(math.floor(1.0 / s_max + _RECIP_SLACK))
    lam_at_kmin = inv_poisson_cdf(k_min, 1.0 - alpha)
    lambda_min = lam_at_kmin / (k_min + 1)
    if p_max is None:
        p_max = lambda_min / (1.0 + lambda_min)
    elif not (0.0 < p_max < 1.0):
        raise ValueError(f"p_max must be in (0, 1), got {p_max!r}")
    if s_min is None:
        s_min = min(alpha * (1.0 - p_max) ** 2 / p_max, s_max / 2.0)
    elif not (0.0 < s_min <= s_max / 2.0):
        raise ValueError(f"s_min must be in (0, s_max/2], got {s_min!r}")
    # mu_0 solves s_min * mu / (1 - mu)^2 = alpha, i.e. the Chebyshev bound
    # on a minor bin with mean budget mu_0 equals alpha exactly.
    mu_0 = (2.0 * alpha + s_min - math.sqrt(s_min * s_min + 4.0 * alpha * s_min)) / (
        2.0 * alpha
    )
    k_max = int(math.ceil(1.0 / s_min - _RECIP_SLACK)) - 1
    params = Params(
        alpha=alpha,
        s_max=s_max,
        s_min=s_min,
        p_max=p_max,
        mu_0=mu_0,
        k_min=k_min,
        k_max=k_max,
        lambda_min=lambda_min,
    )
    params._lambda_cache[k_min] = lam_at_kmin
    return params


def classify(item: Item, params: Params) -> GroupTag:
    """Group an item: confident if p > p_max, else minor if s <= s_min, else
    the standard subgroup k = floor(1/s)."""
    if item.s > params.s_max:
        raise ValueError(f"size {item.s!r} exceeds s_max {params.s_max!r}")
    if item.p > params.p_max:
        return GroupTag("confident")
    if item.s <= params.s_min:
        return GroupTag("minor")
    k = int(math.floor(1.0 / item.s + _RECIP_SLACK))
    k = min(max(k, params.k_min), params.k_max)
    return GroupTag("standard", k)


def _weight_for(tag: GroupTag, item: Item, params: Params) -> float:
    if tag.kind == "confident":
        return item.s
    if tag.kind == "minor":
        return item.p * item.s / params.mu_0
    return ln_odds(item.p) / params.lambda_for(tag.k)


def rpap_weight(item: Item, params: Params) -> float:
    """The scalar weight the grouped packer budgets this item with."""
    return _weight_for(classify(item, params), item, params)


class FirstFitTree:
    """First fit over bins by remaining weight capacity, O(log m) per item.

    A max tournament tree over 2*capacity slots; unopened slots hold -1 so
    they are never matched.  Bin indices are assigned in opening order.
    """

    __slots__ = ("_cap", "_vals", "n_open")

    def __init__(self, capacity: int = 8):
        cap = 1
        while cap < capacity:
            cap <<= 1
        self._cap = cap
        self._vals = [-1.0] * (2 * cap)
        self.n_open = 0

    def find_first(self, w: float) -> int:
        """Lowest-index open bin whose remaining capacity admits w, else -1."""
        need = w - FIT_TOL
        vals = self._vals
        if vals[1] < need:
            return -1
        i = 1
        while i < self._cap:
            i <<= 1
            if vals[i] < need:
                i |= 1
        return i - self._cap

    def _lift(self, i: int) -> None:
        vals = self._vals
        i >>= 1
        while i:
            vals[i] = max(vals[2 * i], vals[2 * i + 1])
            i >>= 1

    def place(self, idx: int, w: float) -> None:
        i = self._cap + idx
        self._vals[i] -= w
        self._lift(i)

    def open_bin(self, w: float) -> int:
        if self.n_open == self._cap:
            old = self._vals[self._cap : self._cap + self.n_open]
            self._cap *= 2
            self._vals = [-1.0] * (2 * self._cap)
            self._vals[self._cap : self._cap + len(old)] = old
            for j in range(self._cap - 1, 0, -1):
                self._vals[j] = max(self._vals[2 * j], self._vals[2 * j + 1])
        idx = self.n_open
        self.n_open += 1
        i = self._cap + idx
        self._vals[i] = 1.0 - w
        self._lift(i)
        return idx


def anyfit_pack(weights: Sequence[float]) -> list[list[int]]:
    """First-fit pack scalar weights into unit bins; returns index lists."""
    tree = FirstFitTree()
    bins: list[list[int]] = []
    for i, w in enumerate(weights):
        if not (0.0 < w <= 1.0 + 1e-9):
            raise ValueError(f"weight {i} out of (0, 1]: {w!r}")
        j = tree.find_first(w)
        if j < 0:
            tree.open_bin(w)
            bins.append([i])
        else:
            tree.place(j, w)
            bins[j].append(i)
    return bins


@dataclass(frozen=True)
class Bin:
    """One packed bin: its routing group, member item ids (arrival order),
    and the accumulated scalar weight, when the packer uses weights."""

    group: GroupTag | None
    item_ids: tuple[int, ...]
    weight_sum: float = 0.0
    weight_saturated: bool = False
    lattice: LatticeDist | None = None


@dataclass(frozen=True)
class Packing:
    algorithm: str
    bins: tuple[Bin, ...]
    n_items: int
    alpha: float
    params_used: Params | None = None
    eps: float | None = None

    @property
    def bins_used(self) -> int:
        return len(self.bins)


def pack_rpap(items: Sequence[Item], params: Params) -> Packing:
    """Grouped weight packer; every bin is viable by construction."""
    groups: dict[GroupTag, dict] = {}
    for idx, item in enumerate(items):
        try:
            tag = classify(item, params)
        except ValueError:
            raise ItemSizeError(idx, item.s, params.s_max) from None
        w = _weight_for(tag, item, params)
        if w > 1.0 + 1e-9:
            raise ValueError(
                f"item {idx}: weight {w!r} exceeds 1; parameters unusable here"
            )
        state = groups.get(tag)
        if state is None:
            state = {"tree": FirstFitTree(), "bins": [], "wsums": []}
            groups[tag] = state
        tree: FirstFitTree = state["tree"]
        j = tree.find_first(w)
        if j < 0:
            tree.open_bin(w)
            state["bins"].append([idx])
            state["wsums"].append(w)
        else:
            tree.place(j, w)
            state["bins"][j].append(idx)
            state["wsums"][j] += w
    bins: list[Bin] = []
    for tag in sorted(groups, key=GroupTag.sort_key):
        state = groups[tag]
        for ids, wsum in zip(state["bins"], state["wsums"]):
            bins.append(Bin(tag, tuple(ids), wsum))
    return Packing("rpap", tuple(bins), len(items), params.alpha, params_used=params)


def pack_ffr(items: Sequence[Item], alpha: float, eps: float = 1e-4) -> Packing:
    """First fit with sizes rounded up to the eps grid.

    A bin admits an item when the grid overflow stays within alpha; since
    rounding only inflates loads, admitted bins are truly viable.
    """
    if not (0.0 < alpha <= 0.5):
        raise ValueError(f"alpha must be in (0, 0.5], got {alpha!r}")
    n_steps = validate_eps(eps)
    pool = LatticePool(n_steps)
    bins: list[list[int]] = []
    tol = alpha + FIT_TOL
    for idx, item in enumerate(items):
        k = steps_for_size(item.s, eps, n_steps)
        j = pool.first_fit(item.p, k, tol)
        if j < 0:
            j = pool.open_bin()
            bins.append([])
        pool.add(j, item.p, k)
        bins[j].append(idx)
    packed = tuple(Bin(None, tuple(ids)) for ids in bins)
    return Packing("ffr", packed, len(items), alpha, eps=eps)


class _RpapcGroup:
    __slots__ = ("pool", "wsums", "bins")

    def __init__(self, n_steps: int):
        self.pool = LatticePool(n_steps)
        self.wsums = np.zeros(self.pool._mat.shape[0])
        self.bins: list[list[int]] = []

    def open_bin(self) -> int:
        j = self.pool.open_bin()
        if j >= self.wsums.shape[0]:
            grown = np.zeros(self.pool._mat.shape[0])
            grown[: self.wsums.shape[0]] = self.wsums
            self.wsums = grown
        self.wsums[j] = 0.0
        self.bins.append([])
        return j


def pack_rpapc(items: Sequence[Item], params: Params, eps: float = 1e-4) -> Packing:
    """Grouped packer with a combined admission rule.

    Within its group a bin admits an item if the weight budget alone allows
    it, or if the grid-rounded overflow stays within alpha.  A bin whose
    weight sum was pushed past 1 by a grid admission is weight-saturated:
    only the grid test can admit further items, which the plain weight
    comparison already guarantees.
    """
    n_steps = validate_eps(eps)
    groups: dict[GroupTag, _RpapcGroup] = {}
    tol = params.alpha + FIT_TOL
    for idx, item in enumerate(items):
        try:
            tag = classify(item, params)
        except ValueError:
            raise ItemSizeError(idx, item.s, params.s_max) from None
        w = _weight_for(tag, item, params)
        k = steps_for_size(item.s, eps, n_steps)
        state = groups.get(tag)
        if state is None:
            state = _RpapcGroup(n_steps)
            groups[tag] = state
        j = state.pool.combined_first_fit(state.wsums, item.p, k, w, tol, FIT_TOL)
        if j < 0:
            j = state.open_bin()
        state.pool.add(j, item.p, k)
        state.wsums[j] += w
        state.bins[j].append(idx)
    bins: list[Bin] = []
    for tag in sorted(groups, key=GroupTag.sort_key):
        state = groups[tag]
        for j, ids in enumerate(state.bins):
            wsum = float(state.wsums[j])
            bins.append(Bin(tag, tuple(ids), wsum, wsum > 1.0 + FIT_TOL))
    return Packing(
        "rpapc", tuple(bins), len(items), params.alpha, params_used=params, eps=eps
    )
