"""Minimum-Wasserstein Gaussian mixture fitting without covariates.

The loss L(theta) = W2^2(g, f_theta) is driven down by alternating three
sub-steps: a closed-form location-scale refit of each component against its
share of the data, a mixture-weight update (an EM-style approximation by
default, projected gradient descent as an alternative), and a refresh of the
data decomposition that makes the weighted per-component surrogate
R(nu, theta) = sum_k pi_k W2^2(g_k, f_k) touch the loss again.  R upper
bounds L for any decomposition sharing theta's weights, so each accepted
step can only lower the loss; updates that would raise the grid loss are
rejected outright, which keeps the recorded trace monotone even under
quadrature error.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .distributions import (
    SIGMA_FLOOR,
    EmpiricalDistribution,
    GaussianMixtureParams,
    LevelGrid,
    MixtureDecomposition,
    QuantileFunction,
    empirical_quantiles,
    gmm_quantile_function,
    standard_normal_quantiles,
    w2_squared,
    w2_squared_values,
)
from .errors import DegenerateBaseError, InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

_MASS_TOL = 1e-12


class PiUpdate(enum.Enum):
    """Strategy for the mixture-weight sub-step."""

    EM_APPROX = "em"
    PROJECTED_GRADIENT = "gradient"


@dataclass
class MmConfig:
    max_iters: int = 200
    rel_tol: float = 1e-6
    pi_update: PiUpdate = PiUpdate.EM_APPROX
    gradient_step: float = 0.05
    gradient_iters: int = 20

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be at least 1")
        if self.rel_tol <= 0.0:
            raise InvalidInputError("rel_tol must be positive")
        if self.gradient_step <= 0.0:
            raise InvalidInputError("gradient_step must be positive")
        if self.gradient_iters < 1:
            raise InvalidInputError("gradient_iters must be at least 1")


@dataclass
class MmTrace:
    """Per-iteration loss and surrogate values recorded by fit_gmm_mm."""

    loss: list[float] = field(default_factory=list)
    surrogate: list[float] = field(default_factory=list)

    def record(self, loss: float, surrogate: float):
        self.loss.append(float(loss))
        self.surrogate.append(float(surrogate))


def fit_location_scale(target_q: QuantileFunction, base_q: QuantileFunction) -> tuple[float, float]:
    """Best (mu, sigma) matching mu + sigma * base to target in grid W2.

    Ordinary least squares in quantile space: sigma = Cov(base, target) /
    Var(base), mu the intercept through the means.  sigma is floored at
    SIGMA_FLOOR.
    """
    if target_q.grid != base_q.grid:
        raise InvalidInputError("quantile functions live on different grids")
    mus, sds = location_scale_rows(target_q.values[None, :], base_q.values)
    return float(mus[0]), float(sds[0])


def location_scale_rows(targets: np.ndarray, base: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise location-scale fit of many targets against one base vector."""
    base = np.asarray(base, dtype=np.float64)
    bc = base - base.mean()
    var = bc @ bc
    if var <= 0.0:
        raise DegenerateBaseError("base quantile function is constant")
    targets = np.asarray(targets, dtype=np.float64)
    sds = np.maximum(targets @ bc / var, SIGMA_FLOOR)
    mus = targets.mean(axis=-1) - sds * base.mean()
    return mus, sds


def decompose(g: EmpiricalDistribution, theta: GaussianMixtureParams,
              grid: LevelGrid) -> MixtureDecomposition:
    """Split g into per-component measures via the mixture's transport map.

    Each sorted atom x_j is pushed to t_j, the theta-quantile at the atom's
    midpoint empirical CDF level; responsibilities are the posterior
    component probabilities at t_j.  Component k receives atom weight
    w_j r_jk / S_k with S_k the realized mass, so the component measures
    are proper distributions and mix back to g exactly.
    """
    u = g.midpoint_cdf_levels()
    t = _backend.mixture_quantiles(u, theta.weights, theta.means, theta.sds)
    r = _backend.responsibilities(t, theta.weights, theta.means, theta.sds)
    bad = ~np.all(np.isfinite(r), axis=1)
    if bad.any():
        logger.warning(
            "responsibilities underflowed at %d of %d atoms; using uniform fallback",
            int(bad.sum()), r.shape[0],
        )
        r[bad] = 1.0 / theta.n_components
    masses = g.sorted_weights @ r
    masses = np.maximum(masses, 0.0)
    masses /= masses.sum()
    return MixtureDecomposition(g.sorted_points, g.sorted_weights, r, masses)


def surrogate_loss(nu: MixtureDecomposition, theta: GaussianMixtureParams,
                   grid: LevelGrid) -> float:
    """Weighted sum of per-component squared W2 gaps, an upper bound on the loss."""
    if nu.n_components != theta.n_components:
        raise InvalidInputError("decomposition and mixture have different component counts")
    base = standard_normal_quantiles(grid)
    total = 0.0
    for k in range(theta.n_components):
        if nu.weights[k] <= _MASS_TOL:
            logger.debug("component %d is empty; its surrogate term contributes 0", k)
            continue
        qk = empirical_quantiles(nu.component(k), grid).values
        gauss_k = theta.means[k] + theta.sds[k] * base
        total += theta.weights[k] * w2_squared_values(qk, gauss_k)
    return total


def update_weights_em(nu: MixtureDecomposition, theta: GaussianMixtureParams) -> np.ndarray:
    """EM-style weight update: average responsibility over the parent atoms.

    Responsibilities are evaluated at the atoms themselves (not their
    transported images), matching the M-step of a classical Gaussian-mixture
    EM pass discretized over the data.
    """
    r = _backend.responsibilities(nu.points, theta.weights, theta.means, theta.sds)
    bad = ~np.all(np.isfinite(r), axis=1)
    if bad.any():
        logger.warning("EM weight update hit underflow at %d atoms", int(bad.sum()))
        r[bad] = 1.0 / theta.n_components
    pi = nu.parent_weights @ r
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort algorithm)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0.0)[0][-1]
    out = np.maximum(v - css[rho] / (rho + 1.0), 0.0)
    return out / out.sum()


def _grid_loss(q_obs: np.ndarray, theta: GaussianMixtureParams, grid: LevelGrid) -> float:
    qt = _backend.mixture_quantiles(grid.levels, theta.weights, theta.means, theta.sds)
    return w2_squared_values(q_obs, qt)


def update_weights_gradient(g: EmpiricalDistribution, theta: GaussianMixtureParams,
                            cfg: MmConfig, grid: LevelGrid) -> np.ndarray:
    """Projected gradient descent on the mixture weights.

    The partial derivative of the loss in pi_k is the integral of
    (G^{-1}(F_theta(t)) - t) * F_k(t) over t, approximated by a 512-node
    midpoint Riemann sum on [min_k(mu_k - 6 sd_k), max_k(mu_k + 6 sd_k)].
    The gradient is centered (constant shifts are annihilated by the simplex
    projection anyway) and scaled to unit max-norm so the step size is
    scale-free.  Returns the iterate with the lowest grid loss, the starting
    point included.
    """
    lo = float(np.min(theta.means - 6.0 * theta.sds))
    hi = float(np.max(theta.means + 6.0 * theta.sds))
    nodes = 512
    dt = (hi - lo) / nodes
    t = lo + dt * (np.arange(nodes) + 0.5)
    q_obs = empirical_quantiles(g, grid).values

    pi = theta.weights.copy()
    best_pi = pi
    best_loss = _grid_loss(q_obs, theta, grid)
    comp_cdf = _ndtr_outer(t, theta.means, theta.sds)

    for it in range(cfg.gradient_iters):
        f_theta = comp_cdf @ pi
        g_inv = _backend.weighted_quantiles(g.sorted_points, g.cum_weights, f_theta)
        grad = dt * ((g_inv - t) @ comp_cdf)
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite gradient in weight update", iteration=it)
        tangent = grad - grad.mean()
        scale = np.max(np.abs(tangent))
        if scale == 0.0:
            break
        pi = project_simplex(pi - cfg.gradient_step * tangent / scale)
        cand = GaussianMixtureParams(pi, theta.means, theta.sds)
        loss = _grid_loss(q_obs, cand, grid)
        if loss < best_loss:
            best_loss = loss
            best_pi = pi
    return best_pi


def _ndtr_outer(t, means, sds):
    from scipy.special import ndtr

    return ndtr((t[:, None] - means[None, :]) / sds[None, :])


def update_components(nu: MixtureDecomposition, grid: LevelGrid,
                      previous: GaussianMixtureParams) -> GaussianMixtureParams:
    """Location-scale refit of every component against its decomposition share.

    Components whose share is empty or collapses onto a single atom keep
    their previous parameters.  The result is re-sorted by mean together
    with the previous weights (identifiability ordering).
    """
    if nu.n_components != previous.n_components:
        raise InvalidInputError("decomposition and mixture have different component counts")
    base = standard_normal_quantiles(grid)
    base_q = QuantileFunction(grid, base)
    means = previous.means.copy()
    sds = previous.sds.copy()
    for k in range(nu.n_components):
        if nu.weights[k] <= _MASS_TOL:
            continue
        qk = empirical_quantiles(nu.component(k), grid)
        if np.ptp(qk.values) == 0.0:
            continue
        means[k], sds[k] = fit_location_scale(qk, base_q)
    return GaussianMixtureParams.from_arrays(previous.weights, means, sds)


def _init_theta(g: EmpiricalDistribution, n_components: int) -> GaussianMixtureParams:
    """Equal-mass slicing of the sorted sample: per-slice mean/sd, uniform weights."""
    edges = np.searchsorted(g.cum_weights, np.arange(1, n_components) / n_components, side="left") + 1
    slices = np.split(g.sorted_points, edges)
    means = np.array([s.mean() if s.size else 0.0 for s in slices])
    sds = np.array([s.std() if s.size else 0.0 for s in slices])
    # empty slices (possible under extreme weight concentration) borrow the pooled stats
    empty = np.array([s.size == 0 for s in slices])
    if empty.any():
        means[empty] = g.sorted_points.mean()
        sds[empty] = g.sorted_points.std()
    weights = np.full(n_components, 1.0 / n_components)
    return GaussianMixtureParams.from_arrays(weights, means, sds)


def fit_gmm_mm(g: EmpiricalDistribution, n_components: int, cfg: MmConfig,
               grid: LevelGrid) -> tuple[GaussianMixtureParams, MmTrace]:
    """Fit a K-component Gaussian mixture to g by monotone alternating descent.

    Initializes from equal-mass slices of the sorted sample, then iterates
    component refit, weight update and decomposition refresh until the
    relative loss change drops below cfg.rel_tol or cfg.max_iters is hit.
    Sub-step results that would increase the grid loss are rejected, so the
    recorded loss sequence is non-increasing by construction.
    """
    if n_components < 1:
        raise InvalidInputError("n_components must be at least 1")
    if np.unique(g.points).size < n_components:
        raise InvalidInputError("more components than distinct sample points")

    q_obs = empirical_quantiles(g, grid).values
    theta = _init_theta(g, n_components)
    loss = _grid_loss(q_obs, theta, grid)
    nu = decompose(g, theta, grid)
    trace = MmTrace()
    trace.record(loss, surrogate_loss(nu, theta, grid))

    for _ in range(cfg.max_iters):
        prev_loss = loss

        cand = update_components(nu, grid, theta)
        cand_loss = _grid_loss(q_obs, cand, grid)
        if cand_loss <= loss:
            theta, loss = cand, cand_loss

        if cfg.pi_update is PiUpdate.EM_APPROX:
            pi = update_weights_em(nu, theta)
        else:
            pi = update_weights_gradient(g, theta, cfg, grid)
        cand = GaussianMixtureParams(pi, theta.means, theta.sds)
        cand_loss = _grid_loss(q_obs, cand, grid)
        if cand_loss <= loss:
            theta, loss = cand, cand_loss

        nu = decompose(g, theta, grid)
        trace.record(loss, surrogate_loss(nu, theta, grid))
        if abs(prev_loss - loss) < cfg.rel_tol * max(prev_loss, 1e-12):
            break
    return theta, trace
