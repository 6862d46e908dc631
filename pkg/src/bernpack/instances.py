"""Instance generation, trace fitting, and instance serialization.

Generators draw reproducibly from a seeded PCG64 stream.  ``fit_bernoulli``
reduces a nonnegative usage sample to the on/off item minimizing the L1
distance between the empirical CDF and the two-step item CDF; batches keep
the best-fitting 90 percent.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .prob import Item

__all__ = [
    "Instance",
    "FitResult",
    "GoogleSurrogateConfig",
    "gen_uniform",
    "gen_normal",
    "gen_google_like",
    "fit_bernoulli",
    "fit_bernoulli_batch",
    "save_instance",
    "load_instance",
    "read_trace",
    "instance_from_trace",
]

SCHEMA_VERSION = 1


@dataclass
class Instance:
    """A labeled item sequence with the size cap its generator honored."""

    items: list[Item]
    s_max: float
    label: str
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0.0 < self.s_max <= 1.0):
            raise ValueError(f"s_max must be in (0, 1], got {self.s_max!r}")
        for i, it in enumerate(self.items):
            if it.s > self.s_max:
                raise ValueError(
                    f"items[{i}].s: {it.s!r} exceeds instance s_max {self.s_max!r}"
                )


@dataclass(frozen=True)
class FitResult:
    """Best on/off approximation of one usage sample and its L1 distance."""

    p: float
    s: float
    l1: float
    kept: bool = True


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _open_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    # 1 - U[0, 1) lies in (0, 1].
    return 1.0 - rng.random(n)


def gen_uniform(n: int, s_max: float, seed: int) -> Instance:
    """Sizes uniform on (0, s_max], activation probabilities uniform on (0, 1]."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n!r}")
    if not (0.0 < s_max <= 1.0):
        raise ValueError(f"s_max must be in (0, 1], got {s_max!r}")
    rng = _rng(seed)
    ps = _open_unit(rng, n)
    ss = s_max * _open_unit(rng, n)
    items = [Item(float(p), float(s)) for p, s in zip(ps, ss)]
    return Instance(
        items,
        s_max,
        f"uniform-n{n}-smax{s_max!r}-seed{seed}",
        seed,
        {"dataset": "uniform"},
    )


def gen_normal(n: int, s_max: float, seed: int) -> Instance:
    """Sizes from N(0.1, 1) rejection-sampled into (0, s_max]; p uniform."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n!r}")
    if not (0.0 < s_max <= 1.0):
        raise ValueError(f"s_max must be in (0, 1], got {s_max!r}")
    rng = _rng(seed)
    sizes: list[float] = []
    while len(sizes) < n:
        draw = rng.normal(0.1, 1.0, max(64, 4 * (n - len(sizes))))
        good = draw[(draw > 0.0) & (draw <= s_max)]
        sizes.extend(float(s) for s in good[: n - len(sizes)])
    ps = _open_unit(rng, n)
    items = [Item(float(p), s) for p, s in zip(ps, sizes)]
    return Instance(
        items,
        s_max,
        f"normal-n{n}-smax{s_max!r}-seed{seed}",
        seed,
        {"dataset": "normal", "size_mean": 0.1, "size_sd": 1.0},
    )


@dataclass(frozen=True)
class GoogleSurrogateConfig:
    """Lognormal surrogate for the public cluster-trace footprint shape.

    mean_size matches the average task footprint of the original trace and
    max_size its largest one; sizes above max_size are clipped to it.
    """

    sigma: float = 1.0
    mean_size: float = 0.0445
    max_size: float = 0.773


def gen_google_like(
    n: int, seed: int, config: GoogleSurrogateConfig = GoogleSurrogateConfig()
) -> Instance:
    """Heavy-tailed small-item surrogate; p uniform on (0, 1].

    The source trace records footprints but no activation probabilities, so
    uniform p is an explicit modeling assumption (kept in meta).
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n!r}")
    mu = math.log(config.mean_size) - config.sigma**2 / 2.0
    rng = _rng(seed)
    sizes = np.minimum(rng.lognormal(mu, config.sigma, n), config.max_size)
    ps = _open_unit(rng, n)
    items = [Item(float(p), float(s)) for p, s in zip(ps, sizes)]
    return Instance(
        items,
        config.max_size,
        f"google-like-n{n}-seed{seed}",
        seed,
        {
            "dataset": "google-like",
            "sigma": config.sigma,
            "mean_size": config.mean_size,
            "max_size": config.max_size,
            "assumption": "activation probabilities uniform; trace has none",
        },
    )


def _l1_profile(samples: np.ndarray):
    """Breakpoints, CDF levels and max of the empirical CDF."""
    uniq, counts = np.unique(samples, return_counts=True)
    levels = np.cumsum(counts) / samples.size
    if uniq[0] > 0.0:
        uniq = np.concatenate([[0.0], uniq])
        levels = np.concatenate([[0.0], levels])
    return uniq, levels


def _fit_at(uniq: np.ndarray, levels: np.ndarray, s: float) -> tuple[float, float]:
    """Optimal (p, l1) for a fixed step position s.

    On [0, s) the best constant for the lower level 1-p is a weighted median
    of the empirical CDF levels; past s the model CDF is 1.
    """
    top = uniq[-1]
    cut = int(np.searchsorted(uniq, s, side="left"))
    starts = uniq[:cut]
    ends = np.append(uniq[1:cut], s)
    lens = ends - starts
    vals = levels[:cut]
    half = lens.sum() / 2.0
    acc = 0.0
    c = vals[-1]
    for v, ln in zip(vals, lens):
        acc += ln
        if acc >= half:
            c = v
            break
    left = float(np.sum(np.abs(vals - c) * lens))
    right = 0.0
    if s < top:
        j = cut - 1 if cut > 0 and uniq[cut - 1] <= s else cut
        starts_r = np.maximum(uniq[j:-1], s)
        lens_r = uniq[j + 1 :] - starts_r
        right = float(np.sum((1.0 - levels[j:-1]) * np.maximum(lens_r, 0.0)))
    return 1.0 - c, left + right


def fit_bernoulli(samples: Sequence[float]) -> FitResult:
    """Best-L1 on/off approximation of a nonnegative usage sample.

    The optimal step position is always one of the positive sample values;
    a few inter-quantile candidates are included as well (they can only
    tie).  Requires at least one positive sample.
    """
    arr = np.asarray(list(samples), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no samples")
    if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite and >= 0")
    positives = np.unique(arr[arr > 0.0])
    if positives.size == 0:
        raise ValueError("all samples are zero; no positive size to fit")
    quantiles = np.quantile(positives, np.linspace(0.0, 1.0, 22)[1:-1])
    candidates = np.unique(np.concatenate([positives, quantiles]))
    candidates = candidates[candidates > 0.0]
    uniq, levels = _l1_profile(arr)
    best: tuple[float, float, float] | None = None
    for s in candidates:
        p, l1 = _fit_at(uniq, levels, float(s))
        if best is None or l1 < best[0] - 1e-15 or (abs(l1 - best[0]) <= 1e-15 and s < best[2]):
            best = (l1, p, float(s))
    l1, p, s = best
    return FitResult(p=p, s=s, l1=l1, kept=True)


def fit_bernoulli_batch(sample_sets: Sequence[Sequence[float]]) -> list[FitResult]:
    """Fit every sample set and keep the best-fitting 90 percent.

    Exactly ceil(0.9 * batch) results carry kept=True, and every kept L1 is
    <= every dropped L1 (ties broken by position).
    """
    fits = [fit_bernoulli(s) for s in sample_sets]
    if not fits:
        return []
    keep = math.ceil(0.9 * len(fits))
    order = sorted(range(len(fits)), key=lambda i: (fits[i].l1, i))
    kept_ids = set(order[:keep])
    return [
        FitResult(f.p, f.s, f.l1, kept=(i in kept_ids)) for i, f in enumerate(fits)
    ]


def _fmt17(x: float) -> str:
    # 17 significant digits round-trip any double exactly.
    return format(float(x), ".17g")


def save_instance(inst: Instance, path: str) -> None:
    rows = ",\n".join(
        f'  {{"p": {_fmt17(it.p)}, "s": {_fmt17(it.s)}}}' for it in inst.items
    )
    fields = [
        f'"version": {SCHEMA_VERSION}',
        f'"label": {json.dumps(inst.label)}',
        f'"s_max": {_fmt17(inst.s_max)}',
        f'"seed": {inst.seed:d}',
        '"items": [\n' + rows + "\n ]",
    ]
    if inst.meta:
        fields.append(f'"meta": {json.dumps(inst.meta)}')
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("{\n " + ",\n ".join(fields) + "\n}\n")


def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ValueError(f"{path}: {msg}")


def load_instance(path: str) -> Instance:
    """Load and validate an instance file; errors name the offending field."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    _expect(isinstance(doc, dict), "$", "instance document must be an object")
    _expect(doc.get("version") == SCHEMA_VERSION, "version", f"expected {SCHEMA_VERSION}")
    _expect(isinstance(doc.get("label"), str), "label", "expected a string")
    s_max = doc.get("s_max")
    _expect(isinstance(s_max, (int, float)) and not isinstance(s_max, bool), "s_max", "expected a number")
    _expect(0.0 < s_max <= 1.0, "s_max", f"must be in (0, 1], got {s_max!r}")
    seed = doc.get("seed")
    _expect(isinstance(seed, int) and not isinstance(seed, bool), "seed", "expected an integer")
    raw_items = doc.get("items")
    _expect(isinstance(raw_items, list), "items", "expected a list")
    meta = doc.get("meta", {})
    _expect(isinstance(meta, dict), "meta", "expected an object")
    items: list[Item] = []
    for i, raw in enumerate(raw_items):
        where = f"items[{i}]"
        _expect(isinstance(raw, dict), where, "expected an object")
        for key in ("p", "s"):
            v = raw.get(key)
            _expect(
                isinstance(v, (int, float)) and not isinstance(v, bool),
                f"{where}.{key}",
                "expected a number",
            )
        try:
            item = Item(float(raw["p"]), float(raw["s"]))
        except ValueError as e:
            raise ValueError(f"{where}: {e}") from None
        _expect(item.s <= s_max, f"{where}.s", f"{item.s!r} exceeds s_max {s_max!r}")
        items.append(item)
    return Instance(items, float(s_max), doc["label"], seed, meta)


def read_trace(path: str) -> dict[str, list[float]]:
    """Read a usage trace CSV (columns task_id, usage) grouped by task."""
    groups: dict[str, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"task_id", "usage"} <= set(reader.fieldnames):
            raise ValueError("trace must have columns task_id, usage")
        for row_no, row in enumerate(reader, start=2):
            try:
                usage = float(row["usage"])
            except (TypeError, ValueError):
                raise ValueError(f"row {row_no}: usage is not a number") from None
            if not math.isfinite(usage) or usage < 0.0:
                raise ValueError(f"row {row_no}: usage must be finite and >= 0")
            groups.setdefault(row["task_id"], []).append(usage)
    if not groups:
        raise ValueError("trace contains no rows")
    return groups


def instance_from_trace(path: str, label: str | None = None) -> Instance:
    """Fit one item per task, drop the worst-fitting 10 percent, and drop
    all-zero tasks (they contribute no load)."""
    groups = read_trace(path)
    task_ids = list(groups)
    usable = [t for t in task_ids if any(u > 0.0 for u in groups[t])]
    fits = fit_bernoulli_batch([groups[t] for t in usable])
    items = [Item(f.p, f.s) for f in fits if f.kept]
    if not items:
        raise ValueError("no usable tasks in trace")
    s_max = max(it.s for it in items)
    return Instance(
        items,
        s_max,
        label or "trace",
        0,
        {
            "dataset": "trace",
            "source": path,
            "tasks": len(task_ids),
            "all_zero_tasks": len(task_ids) - len(usable),
            "kept": len(items),
        },
    )
