"""Kernel backend selection.

Prefers the compiled extension and falls back to the pure NumPy kernels when
it is not built.  Set WASSMIX_PURE=1 in the environment to force the
fallback (useful for benchmarking and debugging).
"""

import os

import numpy as np

from . import _kernels as _py

if os.environ.get("WASSMIX_PURE"):
    _impl = _py
else:
    try:
        from . import _kernels_c as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _py

BACKEND = _impl.BACKEND
HAVE_COMPILED = BACKEND == "compiled"

mixture_cdf_rows = _impl.mixture_cdf_rows
mixture_quantiles_rows = _impl.mixture_quantiles_rows
responsibilities_rows = _impl.responsibilities_rows
weighted_quantiles = _impl.weighted_quantiles
best_split_column = _impl.best_split_column


def _as_rows(a):
    return np.ascontiguousarray(a, dtype=np.float64)[None, :]


def mixture_cdf(x, w, mu, sd):
    """Mixture CDF for a single parameter set; x may be scalar or 1-D."""
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = mixture_cdf_rows(xs[None, :], _as_rows(w), _as_rows(mu), _as_rows(sd))[0]
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out


def mixture_quantiles(levels, w, mu, sd, xtol=0.0):
    """Mixture quantiles for a single parameter set over a 1-D level array."""
    lv = np.ascontiguousarray(levels, dtype=np.float64)
    return mixture_quantiles_rows(lv[None, :], _as_rows(w), _as_rows(mu), _as_rows(sd), xtol)[0]


def responsibilities(t, w, mu, sd):
    """Posterior component probabilities for a single parameter set."""
    ts = np.ascontiguousarray(t, dtype=np.float64)
    return responsibilities_rows(ts[None, :], _as_rows(w), _as_rows(mu), _as_rows(sd))[0]
