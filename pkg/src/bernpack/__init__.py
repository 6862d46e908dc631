"""Online stochastic bin packing for on/off (scaled Bernoulli) loads.

Items are random loads equal to s with probability p and 0 otherwise; a bin
is viable when the probability that its total load exceeds capacity 1 stays
within a budget alpha.  The package provides three online packers (a grouped
weight packer, a lattice-rounded first fit, and their combination), exact and
Monte Carlo overflow verification, bound bookkeeping, dataset generation, and
an experiment harness.
"""

from ._backend import BACKEND
from .analysis import (
    BoundReport,
    GroupMeans,
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
from .instances import (
    FitResult,
    GoogleSurrogateConfig,
    Instance,
    fit_bernoulli,
    fit_bernoulli_batch,
    gen_google_like,
    gen_normal,
    gen_uniform,
    instance_from_trace,
    load_instance,
    save_instance,
)
from .lattice import (
    LatticeDist,
    LatticePool,
    lattice_add,
    lattice_estimate,
    lattice_new,
    lattice_overflow_if_added,
    steps_for_size,
    validate_eps,
)
from .packing import (
    Bin,
    GroupTag,
    ItemSizeError,
    Packing,
    Params,
    anyfit_pack,
    classify,
    derive_params,
    pack_ffr,
    pack_rpap,
    pack_rpapc,
    rpap_weight,
)
from .prob import (
    Item,
    OverflowEstimate,
    inv_poisson_cdf,
    ln_odds,
    overflow_exact,
    overflow_mc,
    poisson_le,
)
from .seeding import derived_seed

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Bin",
    "BoundReport",
    "FitResult",
    "GoogleSurrogateConfig",
    "GroupTag",
    "Instance",
    "Item",
    "ItemSizeError",
    "LatticeDist",
    "LatticePool",
    "OverflowEstimate",
    "Packing",
    "Params",
    "VerifyReport",
    "adversarial_instance",
    "anyfit_pack",
    "approx_constant",
    "check_theorem",
    "classify",
    "derive_params",
    "derived_seed",
    "fit_bernoulli",
    "fit_bernoulli_batch",
    "gen_google_like",
    "gen_normal",
    "gen_uniform",
    "group_mean_bounds",
    "GroupMeans",
    "instance_from_trace",
    "inv_poisson_cdf",
    "lattice_add",
    "lattice_estimate",
    "lattice_new",
    "lattice_overflow_if_added",
    "ln_odds",
    "load_instance",
    "metrics",
    "mu_min",
    "opt_lower_bound",
    "overflow_exact",
    "overflow_mc",
    "pack_ffr",
    "pack_rpap",
    "pack_rpapc",
    "poisson_le",
    "rpap_weight",
    "save_instance",
    "steps_for_size",
    "validate_eps",
    "verify_packing",
    "__version__",
]
