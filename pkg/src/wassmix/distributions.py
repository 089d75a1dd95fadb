"""Distribution representations and the 1-D 2-Wasserstein metric.

Distributions are carried around in quantile form: a monotone vector of
quantile values on a fixed grid of probability levels.  The squared
2-Wasserstein distance between two such vectors on a shared L-point grid is
approximated by the Riemann sum (1/(L+1)) * sum of squared differences,
which on the default 99-level grid is the familiar (1/100) * sum.

All types here are immutable after construction and all operations are pure
functions, so everything is safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import _backend
from .errors import InvalidInputError

SIGMA_FLOOR = 1e-6
SIGMA_CEIL = 1e6


def _readonly(a, dtype=np.float64):
    out = np.ascontiguousarray(a, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LevelGrid:
    """Strictly increasing probability levels in the open interval (0, 1)."""

    levels: np.ndarray

    def __post_init__(self):
        levels = np.atleast_1d(np.asarray(self.levels, dtype=np.float64))
        if levels.ndim != 1 or levels.size < 1:
            raise InvalidInputError("level grid must be a non-empty 1-D array")
        if not np.all(np.isfinite(levels)):
            raise InvalidInputError("level grid contains non-finite values")
        if levels[0] <= 0.0 or levels[-1] >= 1.0 or np.any(np.diff(levels) <= 0.0):
            raise InvalidInputError(
                "levels must be strictly increasing and inside (0, 1)"
            )
        object.__setattr__(self, "levels", _readonly(levels))

    @classmethod
    def default(cls) -> "LevelGrid":
        """The 99 equally spaced levels 0.01, 0.02, ..., 0.99."""
        return cls(np.arange(1, 100) / 100.0)

    def __len__(self):
        return self.levels.size

    def __eq__(self, other):
        return isinstance(other, LevelGrid) and np.array_equal(self.levels, other.levels)


@dataclass(frozen=True)
class QuantileFunction:
    """A non-decreasing vector of quantile values on a level grid."""

    grid: LevelGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.grid),):
            raise InvalidInputError("quantile values must match the grid length")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("quantile values must be finite")
        if np.any(np.diff(values) < 0.0):
            raise InvalidInputError("quantile values must be non-decreasing")
        object.__setattr__(self, "values", _readonly(values))


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Raw draws with optional normalized weights.

    Weights default to uniform.  Sorted points, their weights and the
    cumulative weight profile are precomputed once (stable sort, so ties
    keep their input order).
    """

    points: np.ndarray
    weights: np.ndarray | None = None
    sorted_points: np.ndarray = field(init=False, repr=False, compare=False)
    sorted_weights: np.ndarray = field(init=False, repr=False, compare=False)
    cum_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidInputError("an empirical distribution needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("points must be finite")
        if self.weights is None:
            w = np.full(pts.size, 1.0 / pts.size)
        else:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != pts.shape:
                raise InvalidInputError("weights must match points")
            if np.any(w < 0.0) or not np.all(np.isfinite(w)):
                raise InvalidInputError("weights must be non-negative and finite")
            if abs(w.sum() - 1.0) > 1e-12:
                raise InvalidInputError("weights must sum to 1 (within 1e-12)")
            w = w / w.sum()
        order = np.argsort(pts, kind="stable")
        sp = pts[order]
        sw = w[order]
        cw = np.cumsum(sw)
        cw[-1] = 1.0
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "sorted_points", _readonly(sp))
        object.__setattr__(self, "sorted_weights", _readonly(sw))
        object.__setattr__(self, "cum_weights", _readonly(cw))

    def __len__(self):
        return self.points.size

    def midpoint_cdf_levels(self) -> np.ndarray:
        """Empirical CDF at the sorted points under the midpoint convention.

        G(x_(j)) = (cumulative weight through j) - w_(j)/2, which for uniform
        weights is (rank - 0.5)/n and never touches 0 or 1.
        """
        return self.cum_weights - 0.5 * self.sorted_weights


@dataclass(frozen=True)
class GaussianMixtureParams:
    """One Gaussian mixture: component weights, means and standard deviations.

    Invariants: weights on the simplex, sds positive, means non-decreasing
    (the identifiability ordering).  Use :meth:`from_arrays` to build from
    raw numbers; it floors sds at SIGMA_FLOOR and sorts components by mean.
    """

    weights: np.ndarray
    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        m = np.atleast_1d(np.asarray(self.means, dtype=np.float64))
        s = np.atleast_1d(np.asarray(self.sds, dtype=np.float64))
        if not (w.shape == m.shape == s.shape) or w.ndim != 1 or w.size < 1:
            raise InvalidInputError("weights, means and sds must be 1-D and equal length")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
            raise InvalidInputError("mixture parameters must be finite")
        if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError("mixture weights must be non-negative and sum to 1")
        if np.any(s <= 0.0):
            raise InvalidInputError("mixture sds must be positive")
        if np.any(np.diff(m) < 0.0):
            raise InvalidInputError("mixture means must be non-decreasing")
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "means", _readonly(m))
        object.__setattr__(self, "sds", _readonly(s))

    @classmethod
    def from_arrays(cls, weights, means, sds) -> "GaussianMixtureParams":
        w = np.atleast_1d(np.asarray(weights, dtype=np.float64)).copy()
        m = np.atleast_1d(np.asarray(means, dtype=np.float64))
        s = np.maximum(np.atleast_1d(np.asarray(sds, dtype=np.float64)), SIGMA_FLOOR)
        total = w.sum()
        if not np.isfinite(total) or abs(total - 1.0) > 1e-8:
            raise InvalidInputError("mixture weights must sum to 1")
        w /= total
        order = np.argsort(m, kind="stable")
        return cls(w[order], m[order], s[order])

    @property
    def n_components(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class MixtureDecomposition:
    """A split of an empirical measure into per-component reweighted measures.

    Holds the parent's sorted atoms, their parent weights, the (n, K)
    responsibility matrix (each row on the simplex) and the realized
    component masses S_k = sum_j w_j r_jk, which sum to 1 and serve as the
    decomposition's mixture weights.  Component k's measure puts weight
    w_j r_jk / S_k on atom j, so sum_k S_k g_k(x_j) = w_j exactly.
    """

    points: np.ndarray
    parent_weights: np.ndarray
    responsibilities: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        pw = np.asarray(self.parent_weights, dtype=np.float64)
        r = np.asarray(self.responsibilities, dtype=np.float64)
        wk = np.asarray(self.weights, dtype=np.float64)
        if r.ndim != 2 or r.shape[0] != pts.size or pw.shape != pts.shape:
            raise InvalidInputError("responsibilities must be (n_points, K)")
        if wk.shape != (r.shape[1],):
            raise InvalidInputError("component weights must have length K")
        if np.any(r < 0.0) or np.max(np.abs(r.sum(axis=1) - 1.0)) > 1e-10:
            raise InvalidInputError("each point's responsibilities must sum to 1")
        if np.any(wk < 0.0) or abs(wk.sum() - 1.0) > 1e-10:
            raise InvalidInputError("component weights must lie on the simplex")
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "parent_weights", _readonly(pw))
        object.__setattr__(self, "responsibilities", _readonly(r))
        object.__setattr__(self, "weights", _readonly(wk))

    @property
    def n_components(self) -> int:
        return self.weights.size

    def component(self, k: int) -> EmpiricalDistribution:
        """Component k as a weighted empirical distribution (weights sum to 1)."""
        mass = self.weights[k]
        if mass <= 0.0:
            raise InvalidInputError(f"component {k} carries no mass")
        w = self.parent_weights * self.responsibilities[:, k] / mass
        return EmpiricalDistribution(self.points, w / w.sum())


def empirical_quantiles(dist: EmpiricalDistribution, grid: LevelGrid) -> QuantileFunction:
    """Left-continuous weighted empirical quantiles on a level grid."""
    vals = _backend.weighted_quantiles(dist.sorted_points, dist.cum_weights, grid.levels)
    return QuantileFunction(grid, vals)


def gmm_cdf(theta: GaussianMixtureParams, x):
    """Mixture CDF at x (scalar or array); values lie in [0, 1]."""
    out = _backend.mixture_cdf(x, theta.weights, theta.means, theta.sds)
    return float(np.clip(out, 0.0, 1.0)) if np.ndim(x) == 0 else np.clip(out, 0.0, 1.0)


def gmm_quantile(theta: GaussianMixtureParams, s: float) -> float:
    """Mixture quantile at level s in (0, 1), by bracketed bisection."""
    if not (0.0 < s < 1.0):
        raise InvalidInputError(f"quantile level must be inside (0, 1), got {s}")
    out = _backend.mixture_quantiles(np.array([s]), theta.weights, theta.means, theta.sds)
    return float(out[0])


def gmm_quantile_function(theta: GaussianMixtureParams, grid: LevelGrid) -> QuantileFunction:
    """Mixture quantiles on a whole grid; output is monotone."""
    vals = _backend.mixture_quantiles(grid.levels, theta.weights, theta.means, theta.sds)
    return QuantileFunction(grid, vals)


def w2_squared(q1: QuantileFunction, q2: QuantileFunction) -> float:
    """Squared 2-Wasserstein distance between quantile functions on one grid.

    (1/(L+1)) * sum of squared level-wise differences; 1/100 * sum on the
    default 99-level grid.
    """
    if q1.grid != q2.grid:
        raise InvalidInputError("quantile functions live on different grids")
    diff = q1.values - q2.values
    return float(diff @ diff) / (len(q1.grid) + 1)


def w2_squared_values(v1: np.ndarray, v2: np.ndarray) -> float:
    """Grid-free variant of :func:`w2_squared` for trusted aligned vectors."""
    diff = np.asarray(v1, dtype=np.float64) - np.asarray(v2, dtype=np.float64)
    return float(diff @ diff) / (diff.size + 1)


def gaussian_w2(mu1: float, sd1: float, mu2: float, sd2: float) -> float:
    """Closed-form W2 distance between two Gaussians: sqrt(dmu^2 + dsd^2)."""
    if sd1 <= 0.0 or sd2 <= 0.0:
        raise InvalidInputError("standard deviations must be positive")
    return float(np.hypot(mu1 - mu2, sd1 - sd2))


def standard_normal_quantiles(grid: LevelGrid) -> np.ndarray:
    """Phi^{-1} evaluated on the grid levels."""
    return ndtri(grid.levels)
