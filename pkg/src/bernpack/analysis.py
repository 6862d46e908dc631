"""Verification oracles and performance bookkeeping for packings.

``verify_packing`` certifies every bin of a packing against the overflow
budget with an exact oracle where enumeration is feasible and Monte Carlo
beyond that.  ``check_theorem`` evaluates the provable bin-count guarantee
``M <= C * OPT + (k_max - k_min + 3)`` using the certified lower bound on
OPT, and ``adversarial_instance`` builds the interleaved sequence on which
any overflow-exact first-fit style packer is forced to open one bin per
item pair while two bins suffice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .packing import GroupTag, Packing, Params, derive_params
from .prob import (
    EXACT_ENUM_LIMIT,
    Item,
    OverflowEstimate,
    overflow_exact,
    overflow_mc,
)
from .seeding import derived_seed

__all__ = [
    "VerifyReport",
    "BoundReport",
    "GroupMeans",
    "verify_packing",
    "approx_constant",
    "mu_min",
    "opt_lower_bound",
    "group_mean_bounds",
    "check_theorem",
    "adversarial_instance",
    "metrics",
]

# A deterministic overflow estimate may exceed alpha only by float noise.
EXACT_PASS_TOL = 1e-9


@dataclass(frozen=True)
class VerifyReport:
    """Per-bin overflow estimates and pass flags for one packing."""

    alpha: float
    per_bin: tuple[tuple[int, OverflowEstimate, bool], ...]
    worst: float
    all_pass: bool


@dataclass(frozen=True)
class BoundReport:
    bins_used: int
    opt_lower_bound: int
    c_value: float
    mu_min: float
    additive_term: int
    rhs: float
    satisfied: bool
    certified_ratio: float | None
    group_count: int


@dataclass(frozen=True)
class GroupMeans:
    """Average weight and average total mean per bin of one routing group."""

    group: GroupTag
    n_bins: int
    avg_weight: float
    avg_mean: float
    mean_bound: float


def _check_partition(packing: Packing, n_items: int) -> None:
    if packing.n_items != n_items:
        raise ValueError(
            f"packing covers {packing.n_items} items, instance has {n_items}"
        )
    seen = set()
    for b in packing.bins:
        for i in b.item_ids:
            if not 0 <= i < n_items:
                raise ValueError(f"item id {i} outside the instance")
            if i in seen:
                raise ValueError(f"item id {i} appears in more than one bin")
            seen.add(i)
    if len(seen) != n_items:
        raise ValueError(f"packing places {len(seen)} of {n_items} items")


def verify_packing(
    packing: Packing,
    items: Sequence[Item],
    alpha: float,
    mc_trials: int = 100_000,
    seed: int = 0,
) -> VerifyReport:
    """Certify every bin against the overflow budget.

    Bins of up to EXACT_ENUM_LIMIT items are enumerated exactly and must stay
    within alpha + 1e-9; larger bins get a Monte Carlo estimate (per-bin seed
    derived from ``seed``) allowed up to alpha + 3 standard errors.
    """
    _check_partition(packing, len(items))
    per_bin: list[tuple[int, OverflowEstimate, bool]] = []
    worst = 0.0
    all_pass = True
    for idx, b in enumerate(packing.bins):
        members = [items[i] for i in b.item_ids]
        if len(members) <= EXACT_ENUM_LIMIT:
            est = overflow_exact(members)
            ok = est.value <= alpha + EXACT_PASS_TOL
        else:
            est = overflow_mc(members, mc_trials, derived_seed(seed, "bin", idx))
            ok = est.value <= alpha + 3.0 * est.stderr
        per_bin.append((idx, est, ok))
        worst = max(worst, est.value)
        all_pass = all_pass and ok
    return VerifyReport(alpha, tuple(per_bin), worst, all_pass)


def approx_constant(alpha: float, s_max: float) -> float:
    """Provable approximation factor of the grouped packer at the default
    parameter choice: 2 (1+alpha)/(1-alpha) * (1 + lambda_min)/lambda_min."""
    params = derive_params(alpha, s_max)
    lam = params.lambda_min
    return 2.0 * (1.0 + alpha) / (1.0 - alpha) * (1.0 + lam) / lam


def mu_min(params: Params) -> float:
    """Least guaranteed average bin mean across nonempty groups."""
    return 0.5 * min(
        params.p_max, params.mu_0, (1.0 - params.p_max) * params.lambda_min
    )


def opt_lower_bound(items: Sequence[Item], alpha: float) -> int:
    """Certified lower bound on the optimal number of viable bins:
    ceil(total mean * (1 - alpha) / (1 + alpha))."""
    total = math.fsum(it.mean for it in items)
    return int(math.ceil(total * (1.0 - alpha) / (1.0 + alpha)))


def _group_mean_bound(group: GroupTag, params: Params) -> float:
    """Guaranteed average total mean per bin for a group with >= 2 bins."""
    if group.kind == "confident":
        return params.p_max / 2.0
    if group.kind == "minor":
        return params.mu_0 / 2.0
    k = group.k
    return params.lambda_for(k) * (1.0 - params.p_max) / (2.0 * (k + 1))


def group_mean_bounds(
    packing: Packing, items: Sequence[Item], params: Params
) -> list[GroupMeans]:
    """Per-group average bin weight and average bin mean, with the proved
    lower bound on the latter (the bound binds only when n_bins >= 2)."""
    stats: dict[GroupTag, list] = {}
    for b in packing.bins:
        if b.group is None:
            raise ValueError("packing has ungrouped bins; no group bounds apply")
        rec = stats.setdefault(b.group, [0, 0.0, 0.0])
        rec[0] += 1
        rec[1] += b.weight_sum
        rec[2] += math.fsum(items[i].mean for i in b.item_ids)
    out = []
    for group in sorted(stats, key=GroupTag.sort_key):
        n_bins, wsum, mean_sum = stats[group]
        out.append(
            GroupMeans(
                group=group,
                n_bins=n_bins,
                avg_weight=wsum / n_bins,
                avg_mean=mean_sum / n_bins,
                mean_bound=_group_mean_bound(group, params),
            )
        )
    return out


def check_theorem(packing: Packing, items: Sequence[Item], params: Params) -> BoundReport:
    """Evaluate the bin-count guarantee for a grouped packing.

    The packing's bin count is deliberately taken at face value (no partition
    re-validation), so inflated or corrupted packings are scored and show up
    as unsatisfied.  Per-group average-mean bounds are re-asserted outright:
    unlike the one-sided OPT comparison, their violation is a definite bug.
    """
    if packing.params_used is None:
        raise ValueError(f"no grouped parameters on a {packing.algorithm!r} packing")
    if packing.params_used != params:
        raise ValueError("packing was produced under different parameters")
    groups = group_mean_bounds(packing, items, params)
    for g in groups:
        if g.n_bins >= 2 and g.avg_mean < g.mean_bound - 1e-9:
            raise ValueError(
                f"group {g.group} average mean {g.avg_mean!r} falls below "
                f"its guaranteed bound {g.mean_bound!r}"
            )
    mu = mu_min(params)
    c_value = (1.0 + params.alpha) / ((1.0 - params.alpha) * mu)
    opt_lb = opt_lower_bound(items, params.alpha)
    additive = params.k_max - params.k_min + 3
    rhs = c_value * opt_lb + additive
    bins_used = packing.bins_used
    ratio = bins_used / opt_lb if opt_lb > 0 else None
    return BoundReport(
        bins_used=bins_used,
        opt_lower_bound=opt_lb,
        c_value=c_value,
        mu_min=mu,
        additive_term=additive,
        rhs=rhs,
        satisfied=bins_used <= rhs,
        certified_ratio=ratio,
        group_count=len(groups),
    )


def adversarial_instance(
    alpha: float, n_pairs: int, eps_prime: float = 1e-6
) -> list[Item]:
    """Interleaved sequence X_1, Y_1, ..., X_n, Y_n that separates first-fit
    style packers from the two-bin reference packing.

    X_i activates with probability alpha + eps_prime and nearly fills a bin;
    Y_i is deterministic and just small enough to share a bin with its own
    X_i but not with any earlier pair.  Viability of the reference packing
    needs n_pairs <= 0.5 / sqrt(alpha).
    """
    if not (0.0 < alpha <= 0.5):
        raise ValueError(f"alpha must be in (0, 0.5], got {alpha!r}")
    if not isinstance(n_pairs, int) or n_pairs < 1:
        raise ValueError(f"n_pairs must be a positive integer, got {n_pairs!r}")
    if n_pairs > 0.5 / math.sqrt(alpha):
        raise ValueError(
            f"n_pairs {n_pairs} exceeds 0.5/sqrt(alpha) = {0.5 / math.sqrt(alpha):.6g}"
        )
    if not (0.0 < eps_prime <= 1.0 - alpha):
        raise ValueError(f"eps_prime must be in (0, 1 - alpha], got {eps_prime!r}")
    root = math.sqrt(alpha)
    eps = [root]
    for m in range(2, 2 * n_pairs + 1):
        eps.append(eps[-1] - root / 2 ** (m + 2))
    items: list[Item] = []
    for i in range(n_pairs):
        items.append(Item(alpha + eps_prime, 1.0 - eps[2 * i]))
        items.append(Item(1.0, eps[2 * i + 1]))
    return items


def metrics(
    packing: Packing,
    items: Sequence[Item],
    report: VerifyReport,
    normalization: str = "per-item-mean",
) -> dict:
    """Summary record for one verified packing.

    normalization selects the denominator of the normalized bin count:
    the average item mean (grows with n) or the total mean (scale-free).
    """
    if normalization not in ("per-item-mean", "total-mean"):
        raise ValueError(f"unknown normalization {normalization!r}")
    if len(report.per_bin) != packing.bins_used:
        raise ValueError("verify report does not match the packing")
    total_mean = math.fsum(it.mean for it in items)
    n = len(items)
    bins_used = packing.bins_used
    if bins_used == 0:
        normalized = 0.0
    elif normalization == "per-item-mean":
        normalized = bins_used / (total_mean / n)
    else:
        normalized = bins_used / total_mean
    overflows = [est.value for _, est, _ in report.per_bin]
    return {
        "algorithm": packing.algorithm,
        "bins_used": bins_used,
        "n_items": n,
        "total_mean": total_mean,
        "normalized": normalized,
        "norm_mode": normalization,
        "avg_overflow": math.fsum(overflows) / len(overflows) if overflows else 0.0,
        "all_pass": report.all_pass,
    }
