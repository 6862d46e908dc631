"""Time the hot kernels against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--reps 5]

Reports per-kernel medians and an end-to-end packing comparison.  The
compiled block is skipped when the extension is not built.
"""

import argparse
import statistics
import time

import numpy as np

from bernpack import _kernels_py
from bernpack.packing import pack_ffr
from bernpack.prob import Item

try:
    from bernpack import _kernels
except ImportError:
    _kernels = None

EPS = 1e-4
CAP = round(1.0 / EPS)


def _median_time(fn, reps):
    out = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def bench_prefix_add(kernels, reps):
    rng = np.random.default_rng(0)
    base = np.minimum(np.add.accumulate(rng.random(CAP + 1) * 1e-4), 1.0)

    def run():
        prefix = base.copy()
        for _ in range(200):
            kernels.prefix_add(prefix, 0.3, 1234)

    return _median_time(run, reps)


def bench_first_fit(kernels, reps):
    rng = np.random.default_rng(1)
    pools = []
    for _ in range(300):
        prefix = np.minimum(np.add.accumulate(rng.random(CAP + 1) * 2e-5), 1.0)
        pools.append(prefix)
    stack = np.stack(pools)

    def run():
        for _ in range(50):
            kernels.lattice_first_fit(stack, 300, 0.4, 2500, 0.01)

    return _median_time(run, reps)


def bench_subset_overflow(kernels, reps):
    rng = np.random.default_rng(2)
    probs = rng.random(18)
    sizes = rng.random(18) * 0.2

    def run():
        for _ in range(20):
            kernels.subset_overflow(probs, sizes, 1e-12)

    return _median_time(run, reps)


def bench_pack_ffr(reps):
    rng = np.random.default_rng(3)
    items = [Item(float(p), float(s)) for p, s in zip(1 - rng.random(2000), 1 - rng.random(2000))]

    def run():
        pack_ffr(items, 0.1, EPS)

    return _median_time(run, reps)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()

    backends = [("pure", _kernels_py)]
    if _kernels is not None:
        backends.append(("compiled", _kernels))
    else:
        print("compiled extension not available; timing the fallback only")

    rows = []
    for name, mod in backends:
        rows.append((name, "prefix_add x200", bench_prefix_add(mod, args.reps)))
        rows.append((name, "first_fit x50", bench_first_fit(mod, args.reps)))
        rows.append((name, "subset_overflow(18) x20", bench_subset_overflow(mod, args.reps)))

    print(f"{'backend':<10} {'kernel':<26} {'median s':>10}")
    for name, label, sec in rows:
        print(f"{name:<10} {label:<26} {sec:>10.4f}")

    if _kernels is not None:
        by_label = {}
        for name, label, sec in rows:
            by_label.setdefault(label, {})[name] = sec
        for label, d in by_label.items():
            print(f"speedup {label}: {d['pure'] / d['compiled']:.1f}x")

    print(f"pack_ffr n=2000 (active backend): {bench_pack_ffr(args.reps):.3f} s median")


if __name__ == "__main__":
    main()
