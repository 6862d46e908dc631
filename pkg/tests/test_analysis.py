"""Verification, bound bookkeeping, the adversarial construction, and the
experiment metrics record."""

import dataclasses
import math

import numpy as np
import pytest

from bernpack.analysis import (
    VerifyReport,
    adversarial_instance,
    approx_constant,
    check_theorem,
    group_mean_bounds,
    metrics,
    mu_min,
    opt_lower_bound,
    verify_packing,
)
from bernpack.packing import (
    Bin,
    GroupTag,
    Packing,
    derive_params,
    pack_ffr,
    pack_rpap,
    pack_rpapc,
)
from bernpack.prob import Item, OverflowEstimate, overflow_exact


def _uniform_items(n, s_max, seed):
    rng = np.random.default_rng(seed)
    return [
        Item(float(1.0 - rng.random()), float(s_max * (1.0 - rng.random())))
        for _ in range(n)
    ]


# ------------------------------------------------------------ verify_packing


def test_verify_single_good_bin():
    items = [Item(0.2, 0.6)] * 2
    packing = Packing("manual", (Bin(None, (0, 1)),), 2, 0.1)
    report = verify_packing(packing, items, 0.1)
    assert report.all_pass
    assert report.worst == pytest.approx(0.04, abs=1e-15)
    idx, est, ok = report.per_bin[0]
    assert idx == 0 and ok and est.method == "exact-enum"


def test_verify_flags_overflowing_bin():
    items = [Item(1.0, 0.6)] * 2
    packing = Packing("manual", (Bin(None, (0, 1)),), 2, 0.1)
    report = verify_packing(packing, items, 0.1)
    assert not report.all_pass
    assert report.worst == 1.0


def test_verify_empty_packing():
    report = verify_packing(Packing("manual", (), 0, 0.1), [], 0.1)
    assert report.all_pass and report.worst == 0.0 and report.per_bin == ()


def test_verify_monte_carlo_path():
    # 25 items in one bin forces the sampled estimate
    items = [Item(0.02, 0.5)] * 25
    packing = Packing("manual", (Bin(None, tuple(range(25))),), 25, 0.1)
    a = verify_packing(packing, items, 0.1, mc_trials=40_000, seed=5)
    b = verify_packing(packing, items, 0.1, mc_trials=40_000, seed=5)
    assert a == b
    est = a.per_bin[0][1]
    assert est.method == "monte-carlo" and est.trials == 40_000
    # true overflow P(>=3 of 25 active at 0.02) ~ 1.3e-2... well within 0.1
    assert a.all_pass


def test_verify_rejects_mismatched_partition():
    items = [Item(0.5, 0.5)] * 3
    for bins, n in [
        ((Bin(None, (0, 1)),), 3),            # missing an item
        ((Bin(None, (0, 1, 1)),), 3),         # duplicate
        ((Bin(None, (0, 1, 5)),), 3),         # out of range
    ]:
        packing = Packing("manual", bins, n, 0.1)
        with pytest.raises(ValueError):
            verify_packing(packing, items, 0.1)
    with pytest.raises(ValueError):
        verify_packing(Packing("manual", (), 2, 0.1), items, 0.1)


# ----------------------------------------------------- constants and bounds


def test_approx_constant_reference_points():
    for (alpha, s_max), cited in [
        ((0.1, 0.25), 7.47),
        ((0.01, 1.0), 29.52),
        ((0.001, 1.0), 90.29),
    ]:
        got = approx_constant(alpha, s_max)
        assert abs(got - cited) / cited <= 0.005


def test_approx_constant_frozen():
    assert approx_constant(0.1, 1.0) == pytest.approx(11.637340597450616, rel=1e-10)
    assert approx_constant(0.01, 0.25) == pytest.approx(10.016302490729313, rel=1e-10)


def test_mu_min_default_chain_hits_p_max_half():
    p = derive_params(0.1, 1.0)
    assert mu_min(p) == pytest.approx(p.p_max / 2.0, abs=1e-15)
    assert mu_min(p) == pytest.approx(0.10502590450003445, abs=1e-10)


def test_mu_min_picks_forced_small_mu0():
    p = derive_params(0.1, 1.0)
    forced = dataclasses.replace(p, mu_0=0.01)
    assert mu_min(forced) == pytest.approx(0.005, abs=1e-15)
    assert mu_min(p) <= p.p_max / 2.0 + 1e-15


def test_opt_lower_bound():
    assert opt_lower_bound([], 0.1) == 0
    items = [Item(1.0, 0.5)] * 100
    assert opt_lower_bound(items, 0.1) == 41  # ceil(50 * 0.9 / 1.1)
    items = _uniform_items(500, 1.0, 0)
    total = math.fsum(it.mean for it in items)
    assert opt_lower_bound(items, 0.01) == math.ceil(total * 0.99 / 1.01)


# -------------------------------------------------------------- check_theorem


def test_check_theorem_on_real_packings():
    items = _uniform_items(400, 1.0, 1)
    params = derive_params(0.1, 1.0)
    for packer in (pack_rpap, pack_rpapc):
        packing = packer(items, params)
        rep = check_theorem(packing, items, params)
        assert rep.satisfied
        assert rep.additive_term == params.k_max - params.k_min + 3
        assert rep.rhs == pytest.approx(
            rep.c_value * rep.opt_lower_bound + rep.additive_term
        )
        assert rep.bins_used == packing.bins_used
        assert rep.group_count >= 1
        assert rep.mu_min == pytest.approx(mu_min(params))
        assert rep.certified_ratio == pytest.approx(
            rep.bins_used / rep.opt_lower_bound
        )


def test_check_theorem_empty_instance():
    params = derive_params(0.1, 1.0)
    rep = check_theorem(pack_rpap([], params), [], params)
    assert rep.satisfied and rep.bins_used == 0 and rep.group_count == 0
    assert rep.certified_ratio is None


def test_check_theorem_detects_inflated_bin_count():
    items = _uniform_items(400, 1.0, 2)
    params = derive_params(0.1, 1.0)
    packing = pack_rpap(items, params)
    honest = check_theorem(packing, items, params)
    copies = math.ceil(honest.rhs / packing.bins_used) + 1
    corrupted = dataclasses.replace(packing, bins=packing.bins * copies)
    assert not check_theorem(corrupted, items, params).satisfied


def test_check_theorem_requires_matching_params():
    params = derive_params(0.1, 1.0)
    items = _uniform_items(20, 1.0, 3)
    packing = pack_rpap(items, params)
    with pytest.raises(ValueError):
        check_theorem(packing, items, derive_params(0.1, 0.5))
    with pytest.raises(ValueError):
        check_theorem(pack_ffr(items, 0.1), items, params)


def test_group_mean_bounds_hold_on_outputs():
    items = _uniform_items(600, 1.0, 4)
    params = derive_params(0.1, 1.0)
    for packer in (pack_rpap, pack_rpapc):
        for g in group_mean_bounds(packer(items, params), items, params):
            if g.n_bins >= 2:
                assert g.avg_weight > 0.5 - 1e-9
                assert g.avg_mean >= g.mean_bound - 1e-9


def test_group_mean_bounds_rejects_ungrouped():
    items = [Item(0.5, 0.5)]
    params = derive_params(0.1, 1.0)
    with pytest.raises(ValueError):
        group_mean_bounds(pack_ffr(items, 0.1), items, params)


def test_mean_cap_on_viable_bins():
    # any bin passing verification keeps its expected load under the cap
    items = _uniform_items(300, 1.0, 5)
    alpha = 0.1
    packing = pack_ffr(items, alpha)
    report = verify_packing(packing, items, alpha, seed=9)
    assert report.all_pass
    cap = (1.0 + alpha) / (1.0 - alpha)
    for b in packing.bins:
        assert math.fsum(items[i].mean for i in b.item_ids) <= cap + 1e-9


# ------------------------------------------------------ adversarial instance


def test_adversarial_recurrence_values():
    items = adversarial_instance(0.01, 2)
    # eps_1 = 0.1, eps_2 = 0.1 - 0.1/16
    assert items[0].p == pytest.approx(0.01 + 1e-6, abs=1e-18)
    assert items[0].s == pytest.approx(1.0 - 0.1, abs=1e-15)
    assert items[1] == Item(1.0, 0.09375)
    assert items[2].s == pytest.approx(1.0 - 0.090625, abs=1e-15)
    assert items[3] == Item(1.0, 0.0890625)


def test_adversarial_eps_monotone_and_bounded():
    items = adversarial_instance(0.0001, 25)
    root = math.sqrt(0.0001)
    eps = [root]
    for m in range(2, 51):
        eps.append(eps[-1] - root / 2 ** (m + 2))
    # halved geometric decrements keep the whole sequence above 3/4 of the root
    assert all(a > b for a, b in zip(eps, eps[1:]))
    assert eps[-1] > 0.75 * root
    for i in range(25):
        assert items[2 * i].s == 1.0 - eps[2 * i]
        assert items[2 * i + 1].s == eps[2 * i + 1]
        # each Y shares capacity with its own X exactly up to the step gap
        assert items[2 * i].s + items[2 * i + 1].s <= 1.0


def test_adversarial_validation():
    with pytest.raises(ValueError):
        adversarial_instance(0.01, 6)  # above 0.5/sqrt(alpha) = 5
    with pytest.raises(ValueError):
        adversarial_instance(0.01, 0)
    with pytest.raises(ValueError):
        adversarial_instance(0.7, 1)
    with pytest.raises(ValueError):
        adversarial_instance(0.01, 2, eps_prime=0.0)


def test_adversarial_small_case_under_ffr():
    # hand simulation on the 1e-4 grid: X2 cannot join {X1, Y1} because its
    # activation alone exceeds the budget; Y2 then only fits X2's bin
    items = adversarial_instance(0.01, 2)
    out = pack_ffr(items, 0.01)
    assert [list(b.item_ids) for b in out.bins] == [[0, 1], [2, 3]]


def test_adversarial_reference_packing_viable():
    items = adversarial_instance(0.01, 2)
    reference = Packing(
        "reference",
        (Bin(None, (0, 2)), Bin(None, (1, 3))),
        4,
        0.01,
    )
    report = verify_packing(reference, items, 0.01)
    assert report.all_pass
    # X-bin overflow is exactly P(both X active)
    assert report.per_bin[0][1].value == pytest.approx((0.01 + 1e-6) ** 2, rel=1e-12)
    assert report.per_bin[1][1].value == 0.0


# ------------------------------------------------------------------- metrics


def _ten_bin_packing():
    items = [Item(0.5, 0.5)] * 100
    bins = tuple(Bin(None, tuple(range(10 * j, 10 * j + 10))) for j in range(10))
    return items, Packing("manual", bins, 100, 0.5)


def test_metrics_normalizations():
    items, packing = _ten_bin_packing()
    report = verify_packing(packing, items, 0.5, seed=2)
    per_item = metrics(packing, items, report, "per-item-mean")
    assert per_item["normalized"] == pytest.approx(10.0 / 0.25)
    assert per_item["bins_used"] == 10
    assert per_item["norm_mode"] == "per-item-mean"
    total = metrics(packing, items, report, "total-mean")
    assert total["normalized"] == pytest.approx(10.0 / 25.0)


def test_metrics_average_overflow():
    items = [Item(0.2, 0.6)] * 2 + [Item(0.5, 0.3)]
    packing = Packing("manual", (Bin(None, (0, 1)), Bin(None, (2,))), 3, 0.1)
    report = verify_packing(packing, items, 0.1)
    rec = metrics(packing, items, report)
    assert rec["avg_overflow"] == pytest.approx(0.02, abs=1e-15)
    assert rec["all_pass"]


def test_metrics_empty_packing():
    report = verify_packing(Packing("manual", (), 0, 0.1), [], 0.1)
    rec = metrics(Packing("manual", (), 0, 0.1), [], report)
    assert rec["bins_used"] == 0 and rec["normalized"] == 0.0
    assert rec["avg_overflow"] == 0.0


def test_metrics_validation():
    items, packing = _ten_bin_packing()
    report = verify_packing(packing, items, 0.5, seed=2)
    with pytest.raises(ValueError):
        metrics(packing, items, report, "bogus")
    stale = VerifyReport(0.5, report.per_bin[:3], report.worst, report.all_pass)
    with pytest.raises(ValueError):
        metrics(packing, items, stale)
