"""Command line front end and experiment harness.

Subcommands: params, gen, pack, verify, adversarial, experiment.  Exit codes
are part of the interface: 2 bad arguments or config, 3 oversized item,
4 instance/packing mismatch, 5 viability failure.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from dataclasses import dataclass, fields

from .analysis import adversarial_instance, approx_constant, metrics, mu_min, verify_packing
from .instances import (
    GoogleSurrogateConfig,
    Instance,
    gen_google_like,
    gen_normal,
    gen_uniform,
    instance_from_trace,
    load_instance,
    save_instance,
)
from .lattice import validate_eps
from .packing import (
    Bin,
    GroupTag,
    ItemSizeError,
    Packing,
    Params,
    derive_params,
    pack_ffr,
    pack_rpap,
    pack_rpapc,
)
from .seeding import derived_seed

EXIT_USAGE = 2
EXIT_OVERSIZED = 3
EXIT_MISMATCH = 4
EXIT_VIABILITY = 5

PACKING_VERSION = 1

ALGORITHMS = ("rpap", "rpapc", "ffr")
DATASETS = ("uniform", "normal", "google-like")
NORM_MODES = ("per-item-mean", "total-mean")


class CliError(Exception):
    """Carries the exit code alongside the message."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- packing IO


def save_packing(packing: Packing, path: str) -> None:
    bins = []
    for b in packing.bins:
        bins.append(
            {
                "group": None if b.group is None else b.group.kind,
                "k": None if b.group is None else b.group.k,
                "items": list(b.item_ids),
                "weight_sum": b.weight_sum,
                "weight_saturated": b.weight_saturated,
            }
        )
    doc = {
        "version": PACKING_VERSION,
        "algorithm": packing.algorithm,
        "alpha": packing.alpha,
        "n_items": packing.n_items,
        "eps": packing.eps,
        "bins": bins,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ValueError(f"{path}: {msg}")


def load_packing(path: str) -> Packing:
    """Load a packing file; errors name the offending field.

    Pool state is not serialized, so reloaded bins carry no lattice and the
    packing cannot be extended, only inspected or verified.
    """
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    _expect(isinstance(doc, dict), "$", "packing document must be an object")
    _expect(doc.get("version") == PACKING_VERSION, "version", f"expected {PACKING_VERSION}")
    _expect(isinstance(doc.get("algorithm"), str), "algorithm", "expected a string")
    alpha = doc.get("alpha")
    _expect(
        isinstance(alpha, (int, float)) and not isinstance(alpha, bool),
        "alpha",
        "expected a number",
    )
    n_items = doc.get("n_items")
    _expect(
        isinstance(n_items, int) and not isinstance(n_items, bool) and n_items >= 0,
        "n_items",
        "expected a nonnegative integer",
    )
    eps = doc.get("eps")
    _expect(
        eps is None or (isinstance(eps, (int, float)) and not isinstance(eps, bool)),
        "eps",
        "expected a number or null",
    )
    raw_bins = doc.get("bins")
    _expect(isinstance(raw_bins, list), "bins", "expected a list")
    bins: list[Bin] = []
    for i, raw in enumerate(raw_bins):
        where = f"bins[{i}]"
        _expect(isinstance(raw, dict), where, "expected an object")
        kind = raw.get("group")
        k = raw.get("k")
        if kind is None:
            _expect(k is None, f"{where}.k", "must be null when group is null")
            group = None
        else:
            _expect(isinstance(kind, str), f"{where}.group", "expected a string or null")
            try:
                group = GroupTag(kind, k)
            except ValueError as e:
                raise ValueError(f"{where}: {e}") from None
        ids = raw.get("items")
        _expect(isinstance(ids, list), f"{where}.items", "expected a list")
        for j, v in enumerate(ids):
            _expect(
                isinstance(v, int) and not isinstance(v, bool),
                f"{where}.items[{j}]",
                "expected an integer",
            )
        wsum = raw.get("weight_sum", 0.0)
        _expect(
            isinstance(wsum, (int, float)) and not isinstance(wsum, bool),
            f"{where}.weight_sum",
            "expected a number",
        )
        bins.append(Bin(group, tuple(ids), float(wsum), bool(raw.get("weight_saturated", False))))
    return Packing(
        doc["algorithm"],
        tuple(bins),
        n_items,
        float(alpha),
        eps=None if eps is None else float(eps),
    )


# ---------------------------------------------------------------- subcommands


def _load_instance_or_fail(path: str) -> Instance:
    try:
        return load_instance(path)
    except (OSError, ValueError) as e:
        raise CliError(EXIT_USAGE, f"cannot load instance {path}: {e}") from None


def cmd_params(args: argparse.Namespace) -> int:
    try:
        params = derive_params(args.alpha, args.s_max)
    except ValueError as e:
        raise CliError(EXIT_USAGE, str(e)) from None
    doc = {
        "alpha": params.alpha,
        "s_max": params.s_max,
        "s_min": params.s_min,
        "p_max": params.p_max,
        "mu_0": params.mu_0,
        "k_min": params.k_min,
        "k_max": params.k_max,
        "lambda_min": params.lambda_min,
        "lambda_k_min": params.lambda_for(params.k_min),
        "mu_min": mu_min(params),
        "c": approx_constant(params.alpha, params.s_max),
    }
    print(json.dumps(doc, indent=1))
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    try:
        if args.dataset == "trace":
            if args.trace is None:
                raise ValueError("dataset 'trace' needs --trace PATH")
            inst = instance_from_trace(args.trace)
        elif args.dataset == "google-like":
            if args.s_max is not None:
                raise ValueError("google-like sizes have a fixed cap; drop --s-max")
            inst = gen_google_like(args.n, args.seed)
        else:
            s_max = 1.0 if args.s_max is None else args.s_max
            gen = gen_uniform if args.dataset == "uniform" else gen_normal
            inst = gen(args.n, s_max, args.seed)
    except (OSError, ValueError) as e:
        raise CliError(EXIT_USAGE, str(e)) from None
    save_instance(inst, args.out)
    print(f"wrote {args.out}: {len(inst.items)} items, s_max {inst.s_max!r}")
    return 0


def _pack_with(
    algorithm: str, inst: Instance, alpha: float, s_max: float, eps: float
) -> Packing:
    for i, it in enumerate(inst.items):
        if it.s > s_max:
            raise ItemSizeError(i, it.s, s_max)
    if algorithm == "ffr":
        return pack_ffr(inst.items, alpha, eps)
    params = derive_params(alpha, s_max)
    if algorithm == "rpap":
        return pack_rpap(inst.items, params)
    return pack_rpapc(inst.items, params, eps)


def cmd_pack(args: argparse.Namespace) -> int:
    inst = _load_instance_or_fail(args.instance)
    s_max = inst.s_max if args.s_max is None else args.s_max
    try:
        validate_eps(args.eps)
        packing = _pack_with(args.algorithm, inst, args.alpha, s_max, args.eps)
    except ItemSizeError as e:
        raise CliError(EXIT_OVERSIZED, str(e)) from None
    except ValueError as e:
        raise CliError(EXIT_USAGE, str(e)) from None
    if args.out:
        save_packing(packing, args.out)
    print(f"bins_used {packing.bins_used}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    inst = _load_instance_or_fail(args.instance)
    try:
        packing = load_packing(args.packing)
    except (OSError, ValueError) as e:
        raise CliError(EXIT_MISMATCH, f"cannot load packing {args.packing}: {e}") from None
    alpha = packing.alpha if args.alpha is None else args.alpha
    try:
        report = verify_packing(packing, inst.items, alpha, args.trials, args.seed)
    except ValueError as e:
        raise CliError(EXIT_MISMATCH, str(e)) from None
    lines = ["bin,overflow,method,stderr,pass"]
    for idx, est, ok in report.per_bin:
        lines.append(f"{idx},{est.value!r},{est.method},{est.stderr!r},{str(ok).lower()}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}: worst {report.worst!r}, all_pass {str(report.all_pass).lower()}")
    else:
        sys.stdout.write(text)
    return 0 if report.all_pass else EXIT_VIABILITY


def cmd_adversarial(args: argparse.Namespace) -> int:
    try:
        validate_eps(args.eps)
        items = adversarial_instance(args.alpha, args.n_pairs, args.eps_prime)
    except ValueError as e:
        raise CliError(EXIT_USAGE, str(e)) from None
    ffr = pack_ffr(items, args.alpha, args.eps)
    reference = Packing(
        "reference",
        (
            Bin(None, tuple(range(0, len(items), 2))),
            Bin(None, tuple(range(1, len(items), 2))),
        ),
        len(items),
        args.alpha,
    )
    report = verify_packing(reference, items, args.alpha, args.trials, args.seed)
    doc = {
        "alpha": args.alpha,
        "n_pairs": args.n_pairs,
        "ffr_bins": ffr.bins_used,
        "reference_bins": reference.bins_used,
        "ratio": ffr.bins_used / reference.bins_used,
        "reference_viable": report.all_pass,
        "reference_worst_overflow": report.worst,
    }
    print(json.dumps(doc, indent=1))
    if not report.all_pass:
        raise CliError(EXIT_VIABILITY, "reference packing failed viability checks")
    return 0


# ---------------------------------------------------------------- experiment


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition; defaults reproduce the reported grid."""

    datasets: tuple[str, ...] = DATASETS
    alphas: tuple[float, ...] = (0.1, 0.01, 0.001)
    s_maxes: tuple[float, ...] = (1.0, 0.75, 0.5, 0.33, 0.25)
    n: int = 5000
    replicates: int = 10
    algorithms: tuple[str, ...] = ALGORITHMS
    eps: float = 1e-4
    mc_trials: int = 100_000
    base_seed: int = 0
    norm_mode: str = "per-item-mean"
    tune: str | None = None

    def __post_init__(self) -> None:
        for d in self.datasets:
            if d not in DATASETS:
                raise ValueError(f"unknown dataset {d!r}")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        for alpha in self.alphas:
            if not (0.0 < alpha <= 0.5):
                raise ValueError(f"alpha must be in (0, 0.5], got {alpha!r}")
        for s in self.s_maxes:
            if not (0.0 < s <= 1.0):
                raise ValueError(f"s_max must be in (0, 1], got {s!r}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates!r}")
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n!r}")
        if self.mc_trials < 1:
            raise ValueError(f"mc_trials must be >= 1, got {self.mc_trials!r}")
        validate_eps(self.eps)
        if self.norm_mode not in NORM_MODES:
            raise ValueError(f"norm_mode must be one of {NORM_MODES}, got {self.norm_mode!r}")
        if self.tune is not None:
            parse_tune(self.tune)


def parse_tune(text: str) -> int:
    """``grid`` or ``grid:STEPS`` -> grid steps per axis."""
    if text == "grid":
        return 8
    if text.startswith("grid:"):
        try:
            steps = int(text[5:])
        except ValueError:
            steps = 0
        if steps >= 1:
            return steps
    raise ValueError(f"tune must be 'grid' or 'grid:STEPS', got {text!r}")


def load_experiment_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("datasets", "alphas", "s_maxes", "algorithms"):
        if key in doc:
            if not isinstance(doc[key], list):
                raise ValueError(f"{key}: expected a list")
            doc[key] = tuple(doc[key])
    return ExperimentConfig(**doc)


def _gen_dataset(dataset: str, n: int, s_max: float, seed: int) -> Instance:
    if dataset == "uniform":
        return gen_uniform(n, s_max, seed)
    if dataset == "normal":
        return gen_normal(n, s_max, seed)
    return gen_google_like(n, seed)


def tune_rpapc(
    dataset: str,
    alpha: float,
    s_max: float,
    cfg: ExperimentConfig,
    steps: int,
) -> Params:
    """Grid-search (s_min, p_max) on a fresh tuning instance.

    The equation defaults compete as a candidate, so tuning never loses to
    them on the tuning instance.  Ties keep the earlier candidate.
    """
    seed = derived_seed(cfg.base_seed, dataset, alpha, s_max, "tune")
    inst = _gen_dataset(dataset, min(cfg.n, 1000), s_max, seed)
    candidates: list[tuple[float | None, float | None]] = [(None, None)]
    for i in range(1, steps + 1):
        for j in range(1, steps + 1):
            candidates.append((s_max / 2.0 * i / steps, j / (steps + 1.0)))
    best_params: Params | None = None
    best_bins = -1
    for s_min, p_max in candidates:
        params = derive_params(alpha, s_max, s_min=s_min, p_max=p_max)
        bins = pack_rpapc(inst.items, params, cfg.eps).bins_used
        if best_params is None or bins < best_bins:
            best_params, best_bins = params, bins
    return best_params


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Pack, verify, and aggregate every cell; returns one row per
    (dataset, alpha, s_max, algorithm).

    Instances are seeded per (dataset, alpha, s_max, replicate) only, so all
    algorithms see identical instances.  Any verification failure aborts the
    sweep: an unviable packing is a bug, not a data point.
    """
    steps = parse_tune(cfg.tune) if cfg.tune is not None else 0
    google_cap = GoogleSurrogateConfig().max_size
    rows: list[dict] = []
    for dataset in cfg.datasets:
        s_grid = (google_cap,) if dataset == "google-like" else cfg.s_maxes
        for alpha in cfg.alphas:
            for s_max in s_grid:
                params = derive_params(alpha, s_max)
                tuned = params
                if steps and "rpapc" in cfg.algorithms:
                    tuned = tune_rpapc(dataset, alpha, s_max, cfg, steps)
                per_alg: dict[str, list[dict]] = {a: [] for a in cfg.algorithms}
                for rep in range(cfg.replicates):
                    seed = derived_seed(cfg.base_seed, dataset, alpha, s_max, rep)
                    inst = _gen_dataset(dataset, cfg.n, s_max, seed)
                    for alg in cfg.algorithms:
                        if alg == "rpap":
                            packing = pack_rpap(inst.items, params)
                        elif alg == "rpapc":
                            packing = pack_rpapc(inst.items, tuned, cfg.eps)
                        else:
                            packing = pack_ffr(inst.items, alpha, cfg.eps)
                        report = verify_packing(
                            packing,
                            inst.items,
                            alpha,
                            cfg.mc_trials,
                            derived_seed(seed, alg, "verify"),
                        )
                        if not report.all_pass:
                            raise CliError(
                                EXIT_VIABILITY,
                                "viability failure in cell "
                                f"dataset={dataset} alpha={alpha!r} s_max={s_max!r} "
                                f"algorithm={alg} replicate={rep}",
                            )
                        per_alg[alg].append(
                            metrics(packing, inst.items, report, cfg.norm_mode)
                        )
                for alg in cfg.algorithms:
                    ms = per_alg[alg]
                    bins = [m["bins_used"] for m in ms]
                    rows.append(
                        {
                            "dataset": dataset,
                            "alpha": alpha,
                            "s_max": s_max,
                            "algorithm": alg,
                            "n": cfg.n,
                            "median_bins": statistics.median(bins),
                            "min_bins": min(bins),
                            "max_bins": max(bins),
                            "median_norm": statistics.median(
                                m["normalized"] for m in ms
                            ),
                            "norm_mode": cfg.norm_mode,
                            "median_avg_overflow": statistics.median(
                                m["avg_overflow"] for m in ms
                            ),
                        }
                    )
    return rows


CSV_COLUMNS = (
    "dataset",
    "alpha",
    "s_max",
    "algorithm",
    "n",
    "median_bins",
    "min_bins",
    "max_bins",
    "median_norm",
    "norm_mode",
    "median_avg_overflow",
)


def _csv_cell(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def cmd_experiment(args: argparse.Namespace) -> int:
    try:
        cfg = load_experiment_config(args.config)
        if args.tune is not None:
            parse_tune(args.tune)
            cfg = ExperimentConfig(**{**cfg.__dict__, "tune": args.tune})
    except (OSError, ValueError) as e:
        raise CliError(EXIT_USAGE, f"bad config: {e}") from None
    rows = run_experiment(cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(rows_to_csv(rows))
    print(f"wrote {args.out}: {len(rows)} rows")
    return 0


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bernpack",
        description="Online stochastic bin packing for on/off loads",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="derive and print packing parameters")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--s-max", type=float, required=True)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("gen", help="generate or fit an instance file")
    p.add_argument("--dataset", choices=DATASETS + ("trace",), required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--s-max", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None, help="usage CSV for --dataset trace")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("pack", help="pack an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--s-max", type=float, default=None, help="default: instance s_max")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--out", default=None, help="write the packing JSON here")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("verify", help="check every bin of a packing file")
    p.add_argument("--instance", required=True)
    p.add_argument("--packing", required=True)
    p.add_argument("--alpha", type=float, default=None, help="default: packing alpha")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the per-bin CSV here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("adversarial", help="first-fit separation demo")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n-pairs", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--eps-prime", type=float, default=1e-6)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("experiment", help="run a sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--tune", default=None, help="grid or grid:STEPS (rpapc only)")
    p.set_defaults(func=cmd_experiment)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
