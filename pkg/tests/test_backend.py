"""Parity between the compiled kernels and the pure NumPy fallback."""

import numpy as np
import pytest

from wassmix import _backend
from wassmix import _kernels as py_kernels

c_kernels = pytest.importorskip(
    "wassmix._kernels_c", reason="compiled kernel extension not built"
)


def random_rows(rng, n_rows=7, n_cols=40, n_comp=3):
    w = rng.dirichlet(np.ones(n_comp), size=n_rows)
    mu = np.sort(rng.uniform(-4, 4, (n_rows, n_comp)), axis=1)
    sd = rng.uniform(0.2, 2.5, (n_rows, n_comp))
    return w, mu, sd


def test_backend_flags():
    assert py_kernels.BACKEND == "numpy"
    assert c_kernels.BACKEND == "compiled"
    assert _backend.BACKEND in ("numpy", "compiled")


def test_mixture_cdf_rows_parity():
    rng = np.random.default_rng(501)
    w, mu, sd = random_rows(rng)
    x = rng.uniform(-10, 10, (7, 40))
    np.testing.assert_allclose(
        c_kernels.mixture_cdf_rows(x, w, mu, sd),
        py_kernels.mixture_cdf_rows(x, w, mu, sd),
        atol=1e-13,
    )


def test_mixture_quantiles_rows_parity():
    rng = np.random.default_rng(503)
    w, mu, sd = random_rows(rng)
    levels = np.sort(rng.uniform(0.005, 0.995, (7, 40)), axis=1)
    qc = c_kernels.mixture_quantiles_rows(levels, w, mu, sd)
    qp = py_kernels.mixture_quantiles_rows(levels, w, mu, sd)
    assert np.all(np.diff(qc, axis=1) >= 0.0)
    np.testing.assert_allclose(qc, qp, atol=1e-9)


def test_mixture_quantiles_rows_parity_with_xtol():
    rng = np.random.default_rng(509)
    w, mu, sd = random_rows(rng, n_rows=4, n_cols=20)
    levels = np.sort(rng.uniform(0.01, 0.99, (4, 20)), axis=1)
    qc = c_kernels.mixture_quantiles_rows(levels, w, mu, sd, 1e-9)
    qp = py_kernels.mixture_quantiles_rows(levels, w, mu, sd, 1e-9)
    np.testing.assert_allclose(qc, qp, atol=1e-7)


def test_responsibilities_rows_parity():
    rng = np.random.default_rng(521)
    w, mu, sd = random_rows(rng)
    t = rng.uniform(-8, 8, (7, 40))
    np.testing.assert_allclose(
        c_kernels.responsibilities_rows(t, w, mu, sd),
        py_kernels.responsibilities_rows(t, w, mu, sd),
        atol=1e-12,
    )


def test_responsibilities_handle_zero_weights():
    w = np.array([[0.0, 1.0]])
    mu = np.array([[0.0, 1.0]])
    sd = np.array([[1.0, 1.0]])
    t = np.array([[0.0, 3.0]])
    for impl in (c_kernels, py_kernels):
        r = impl.responsibilities_rows(t, w, mu, sd)
        np.testing.assert_array_equal(r[0, :, 0], [0.0, 0.0])
        np.testing.assert_array_equal(r[0, :, 1], [1.0, 1.0])


def test_weighted_quantiles_parity():
    rng = np.random.default_rng(523)
    for _ in range(10):
        n = int(rng.integers(2, 200))
        vals = np.sort(rng.normal(size=n))
        w = rng.dirichlet(np.ones(n))
        cw = np.cumsum(w)
        cw[-1] = 1.0
        levels = np.sort(rng.uniform(0, 1, 31))
        np.testing.assert_array_equal(
            c_kernels.weighted_quantiles(vals, cw, levels),
            py_kernels.weighted_quantiles(vals, cw, levels),
        )


def test_best_split_column_parity():
    rng = np.random.default_rng(541)
    for _ in range(20):
        n = int(rng.integers(4, 120))
        xs = np.sort(rng.choice(np.linspace(-2, 2, 17), size=n))
        ys = rng.normal(size=n)
        min_leaf = int(rng.integers(1, 4))
        gc, pc = c_kernels.best_split_column(xs, ys, min_leaf)
        gp, pp = py_kernels.best_split_column(xs, ys, min_leaf)
        assert pc == pp
        if np.isfinite(gp):
            assert gc == pytest.approx(gp, abs=1e-9)
        else:
            assert not np.isfinite(gc)
