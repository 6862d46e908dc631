"""The compiled extension and the pure fallback must be interchangeable:
same results on the same inputs, bit-for-bit where the op is a plain sum."""

import numpy as np
import pytest

from bernpack import _kernels_py as pure

compiled = pytest.importorskip(
    "bernpack._kernels", reason="compiled extension not built"
)


def _random_prefix(rng, n_steps):
    # a genuine reachable state: grind a few items through the pure kernel
    prefix = np.zeros(n_steps + 1)
    prefix[:] = 1.0
    for _ in range(int(rng.integers(0, 8))):
        pure.prefix_add(prefix, float(rng.uniform(0.05, 1.0)), int(rng.integers(1, n_steps + 1)))
    return prefix


def test_prefix_add_equivalent():
    rng = np.random.default_rng(31)
    for _ in range(40):
        n_steps = int(rng.integers(1, 64))
        a = _random_prefix(rng, n_steps)
        b = a.copy()
        p = float(rng.uniform(0.01, 1.0))
        k = int(rng.integers(1, n_steps + 1))
        pure.prefix_add(a, p, k)
        compiled.prefix_add(b, p, k)
        assert np.allclose(a, b, atol=1e-14, rtol=0.0)


def test_prefix_overflow_if_added_equivalent():
    rng = np.random.default_rng(32)
    for _ in range(60):
        n_steps = int(rng.integers(1, 64))
        prefix = _random_prefix(rng, n_steps)
        p = float(rng.uniform(0.01, 1.0))
        k = int(rng.integers(1, 2 * n_steps + 1))
        assert compiled.prefix_overflow_if_added(prefix, p, k) == pytest.approx(
            pure.prefix_overflow_if_added(prefix, p, k), abs=1e-14
        )


def test_first_fit_equivalent():
    rng = np.random.default_rng(33)
    for _ in range(40):
        n_steps = int(rng.integers(1, 32))
        n_bins = int(rng.integers(0, 6))
        mat = np.vstack(
            [_random_prefix(rng, n_steps) for _ in range(n_bins)]
        ) if n_bins else np.zeros((0, n_steps + 1))
        p = float(rng.uniform(0.01, 1.0))
        k = int(rng.integers(1, n_steps + 1))
        tol = float(rng.uniform(0.0, 0.5))
        assert pure.lattice_first_fit(mat, n_bins, p, k, tol) == compiled.lattice_first_fit(
            mat, n_bins, p, k, tol
        )


def test_combined_first_fit_equivalent():
    rng = np.random.default_rng(34)
    for _ in range(40):
        n_steps = int(rng.integers(1, 32))
        n_bins = int(rng.integers(0, 6))
        mat = np.vstack(
            [_random_prefix(rng, n_steps) for _ in range(n_bins)]
        ) if n_bins else np.zeros((0, n_steps + 1))
        wsums = rng.uniform(0.0, 1.2, max(n_bins, 1))[:n_bins]
        p = float(rng.uniform(0.01, 1.0))
        k = int(rng.integers(1, n_steps + 1))
        w = float(rng.uniform(0.0, 1.3))
        tol = float(rng.uniform(0.0, 0.5))
        assert pure.combined_first_fit(
            mat, wsums, n_bins, p, k, w, tol, 1e-12
        ) == compiled.combined_first_fit(mat, wsums, n_bins, p, k, w, tol, 1e-12)


def test_subset_overflow_equivalent():
    rng = np.random.default_rng(35)
    for _ in range(40):
        n = int(rng.integers(0, 13))
        probs = rng.uniform(0.05, 1.0, n)
        sizes = rng.uniform(0.05, 0.8, n)
        a = pure.subset_overflow(probs, sizes, 1e-12)
        b = compiled.subset_overflow(probs, sizes, 1e-12)
        assert a == pytest.approx(b, abs=1e-12)


def test_subset_overflow_brute_force():
    # independent reference: iterate activation patterns directly
    rng = np.random.default_rng(36)
    for _ in range(20):
        n = int(rng.integers(1, 10))
        probs = rng.uniform(0.05, 1.0, n)
        sizes = rng.uniform(0.05, 0.9, n)
        expect = 0.0
        for mask in range(1 << n):
            load, q = 0.0, 1.0
            for i in range(n):
                if mask >> i & 1:
                    load += sizes[i]
                    q *= probs[i]
                else:
                    q *= 1.0 - probs[i]
            if load > 1.0 + 1e-12:
                expect += q
        assert pure.subset_overflow(probs, sizes, 1e-12) == pytest.approx(
            expect, abs=1e-12
        )
        assert compiled.subset_overflow(probs, sizes, 1e-12) == pytest.approx(
            expect, abs=1e-12
        )


def test_backend_selection_env(tmp_path):
    import os
    import subprocess
    import sys

    code = "import bernpack; print(bernpack.BACKEND)"
    for want in ("pure", "compiled"):
        env = dict(os.environ, BERNPACK_BACKEND=want)
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == want
