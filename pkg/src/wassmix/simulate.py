"""Synthetic data generators, sparse-quantile helpers and the CV protocol.

Two scenarios are wired in.  The mixture scenario draws covariates
uniformly on [-1, 1]^3 and samples each outcome from a two-component
Gaussian mixture whose weight follows a logistic in x3, whose means are
x1 + eps and 2 x2^2 + 2 + eps (one shared noise draw per sample), and whose
sds are |x2| + 0.5 and |x1| + 0.5.  The linear scenario emits analytic
Gaussian quantile functions whose location and scale are noisy linear
functions of the covariates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from .distributions import (
    EmpiricalDistribution,
    LevelGrid,
    QuantileFunction,
)
from .errors import InvalidInputError
from .model import DistributionalDataset, ScgmmConfig, ScgmmModel, train

DEFAULT_ETA_GRID = (0.05, 0.1, 0.2)


class Scenario(enum.Enum):
    MIXTURE = "eq7"
    LINEAR = "linear"


@dataclass
class SimConfig:
    n_samples: int
    n_points: int
    omega: float = 0.1
    seed: int = 0
    scenario: Scenario = Scenario.MIXTURE
    # linear-scenario parameters
    mu0: float = 0.0
    sigma0: float = 3.0
    v1: float = 0.25
    v2: float = 1.0
    beta: tuple = (1.0, -1.0, 3.0)
    gamma: tuple = (0.1, 0.2, 0.3)
    grid: LevelGrid = field(default_factory=LevelGrid.default)

    def __post_init__(self):
        if self.n_samples < 2:
            raise InvalidInputError("n_samples must be at least 2")
        if self.n_points < 2:
            raise InvalidInputError("n_points must be at least 2")
        if self.omega < 0.0:
            raise InvalidInputError("omega must be non-negative")
        if self.v1 < 0.0 or self.v2 < 0.0:
            raise InvalidInputError("v1 and v2 must be non-negative")


@dataclass(frozen=True)
class SparseLevels:
    """A sparse subset of quantile levels, default 0.1, ..., 0.9."""

    levels: np.ndarray = None

    def __post_init__(self):
        levels = self.levels
        if levels is None:
            levels = np.arange(1, 10) / 10.0
        levels = np.atleast_1d(np.asarray(levels, dtype=np.float64))
        if levels.size < 1 or np.any(np.diff(levels) <= 0.0):
            raise InvalidInputError("sparse levels must be strictly increasing")
        if levels[0] <= 0.0 or levels[-1] >= 1.0:
            raise InvalidInputError("sparse levels must be inside (0, 1)")
        object.__setattr__(self, "levels", levels)


def mixture_weight_low(x3: np.ndarray) -> np.ndarray:
    """Weight of the low-mean component: 1 / (1 + exp(x3))."""
    return 1.0 / (1.0 + np.exp(x3))


def mixture_truth_params(x: np.ndarray, eps: float = 0.0):
    """Ground-truth (weights, means, sds) of the mixture scenario at x."""
    x = np.asarray(x, dtype=np.float64)
    w1 = float(mixture_weight_low(x[2]))
    means = np.array([x[0] + eps, 2.0 * x[1] ** 2 + 2.0 + eps])
    sds = np.array([abs(x[1]) + 0.5, abs(x[0]) + 0.5])
    return np.array([w1, 1.0 - w1]), means, sds


def mixture_draws(rng: np.random.Generator, X: np.ndarray, eps: np.ndarray, n_points: int):
    """Outcome draws of the mixture scenario at given covariates and noise.

    Returns (y, high) where y is (N, n_points) and high marks draws from the
    high-mean component.
    """
    X = np.asarray(X, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    u = rng.random(size=(X.shape[0], n_points))
    z = rng.standard_normal(size=(X.shape[0], n_points))
    w_low = mixture_weight_low(X[:, 2])[:, None]
    high = u >= w_low
    mean_low = (X[:, 0] + eps)[:, None]
    mean_high = (2.0 * X[:, 1] ** 2 + 2.0 + eps)[:, None]
    sd_low = (np.abs(X[:, 1]) + 0.5)[:, None]
    sd_high = (np.abs(X[:, 0]) + 0.5)[:, None]
    y = np.where(high, mean_high + sd_high * z, mean_low + sd_low * z)
    return y, high


def simulate_mixture(cfg: SimConfig, return_labels: bool = False):
    """Draw the mixture-scenario dataset; seed-deterministic.

    With return_labels=True additionally returns the (N, n) matrix of
    component indicators (1 where the draw came from the high-mean
    component), a diagnostic used by calibration checks.
    """
    if cfg.scenario is not Scenario.MIXTURE:
        raise InvalidInputError("config scenario is not the mixture scenario")
    rng = np.random.default_rng(cfg.seed)
    X = rng.uniform(-1.0, 1.0, size=(cfg.n_samples, 3))
    eps = rng.normal(0.0, cfg.omega, size=cfg.n_samples)
    y, high = mixture_draws(rng, X, eps, cfg.n_points)

    outcomes = tuple(EmpiricalDistribution(row) for row in y)
    data = DistributionalDataset(X, outcomes)
    if return_labels:
        return data, high.astype(np.int64)
    return data


def simulate_linear(cfg: SimConfig) -> DistributionalDataset:
    """Draw the linear-scenario dataset of analytic Gaussian quantile rows."""
    if cfg.scenario is not Scenario.LINEAR:
        raise InvalidInputError("config scenario is not the linear scenario")
    rng = np.random.default_rng(cfg.seed)
    N = cfg.n_samples
    beta = np.asarray(cfg.beta, dtype=np.float64)
    gamma = np.asarray(cfg.gamma, dtype=np.float64)
    X = rng.uniform(-1.0, 1.0, size=(N, beta.size))
    mu, sd = linear_row_params(rng, X, cfg)
    base = ndtri(cfg.grid.levels)
    outcomes = tuple(
        QuantileFunction(cfg.grid, mu[i] + sd[i] * base) for i in range(N)
    )
    return DistributionalDataset(X, outcomes)


def linear_row_params(rng: np.random.Generator, X: np.ndarray, cfg: SimConfig):
    """Sample per-row (mu, sigma) for the linear scenario at given covariates."""
    X = np.asarray(X, dtype=np.float64)
    beta = np.asarray(cfg.beta, dtype=np.float64)
    gamma = np.asarray(cfg.gamma, dtype=np.float64)
    loc = cfg.mu0 + X @ beta
    scale_mean = cfg.sigma0 + X @ gamma
    if np.any(scale_mean <= 0.0):
        raise InvalidInputError("sigma0 + gamma'x must stay positive on the data")
    mu = loc + np.sqrt(cfg.v1) * rng.standard_normal(X.shape[0]) if cfg.v1 > 0 else loc.copy()
    if cfg.v2 > 0:
        shape = scale_mean**2 / cfg.v2
        scale = cfg.v2 / scale_mean
        sd = rng.gamma(shape, scale)
        for _ in range(100):
            bad = sd <= 0.0
            if not bad.any():
                break
            sd[bad] = rng.gamma(shape[bad], scale[bad])
    else:
        sd = scale_mean.copy()
    return mu, sd


def sparsify(q: QuantileFunction, levels: SparseLevels) -> QuantileFunction:
    """Restrict a quantile function to a sparse subset of its levels."""
    idx = np.searchsorted(q.grid.levels, levels.levels)
    idx = np.minimum(idx, len(q.grid) - 1)
    if not np.allclose(q.grid.levels[idx], levels.levels, rtol=0.0, atol=1e-12):
        raise InvalidInputError("requested levels are not on the source grid")
    return QuantileFunction(LevelGrid(levels.levels), q.values[idx])


def densify(q_sparse: QuantileFunction, target: LevelGrid) -> QuantileFunction:
    """Linear interpolation in (level, value) space, clamped flat at the ends."""
    vals = np.interp(target.levels, q_sparse.grid.levels, q_sparse.values)
    return QuantileFunction(target, vals)


def quasi_w2(q1_sparse: QuantileFunction, q2_sparse: QuantileFunction) -> float:
    """Squared W2 Riemann sum restricted to shared sparse levels.

    Identical in form to the dense approximation: (1/(L+1)) * sum of
    squared differences, so (1/10) * sum over the default 9 levels.
    """
    if q1_sparse.grid != q2_sparse.grid:
        raise InvalidInputError("sparse quantile functions live on different grids")
    diff = q1_sparse.values - q2_sparse.values
    return float(diff @ diff) / (len(q1_sparse.grid) + 1)


@dataclass(frozen=True)
class FoldResult:
    train_idx: np.ndarray
    test_idx: np.ndarray
    config: ScgmmConfig
    model: ScgmmModel
    validation_loss: float


def nested_cv(data: DistributionalDataset, base_cfg: ScgmmConfig, folds: int = 5,
              inner_validation_fraction: float = 0.2, seed: int = 0,
              etas: tuple = DEFAULT_ETA_GRID) -> list[FoldResult]:
    """Outer k-fold split with an inner train/validation hyperparameter search.

    The outer folds are a seed-deterministic partition covering every row
    exactly once.  Within each outer training set, one validation carve
    drives the learning-rate choice (the boosting length is tuned
    implicitly by early stopping); the winning model itself is kept and
    used for test-fold prediction.
    """
    n = data.n
    if folds > n:
        raise InvalidInputError(f"cannot make {folds} folds from {n} rows")
    if folds < 2:
        raise InvalidInputError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    results = []
    for f, test_idx in enumerate(np.array_split(perm, folds)):
        test_idx = np.sort(test_idx)
        test_mask = np.zeros(n, dtype=bool)
        test_mask[test_idx] = True
        train_idx = np.nonzero(~test_mask)[0]
        sub = data.subset(train_idx)

        n_sub = train_idx.size
        n_val = min(max(int(round(inner_validation_fraction * n_sub)), 1), n_sub - 1)
        val_mask = np.zeros(n_sub, dtype=bool)
        fold_rng = np.random.default_rng(seed + 7919 * (f + 1))
        val_mask[fold_rng.permutation(n_sub)[:n_val]] = True

        best = None
        for eta in etas:
            cfg = replace(base_cfg, learning_rate=float(eta))
            model = train(sub, cfg, validation_mask=val_mask)
            val_loss = model.trace[model.best_iteration][2]
            if best is None or val_loss < best.validation_loss:
                tuned = replace(cfg, max_boost_iters=max(model.best_iteration, 1))
                best = FoldResult(train_idx, test_idx, tuned, model, float(val_loss))
        results.append(best)
    return results


def cross_validated_quantiles(data: DistributionalDataset, base_cfg: ScgmmConfig,
                              folds: int = 5, inner_validation_fraction: float = 0.2,
                              seed: int = 0, etas: tuple = DEFAULT_ETA_GRID,
                              grid: LevelGrid | None = None):
    """Out-of-fold quantile predictions for every row, via :func:`nested_cv`.

    Returns (predictions, fold_results) where predictions[i] is the
    QuantileFunction predicted for row i by the model of the fold that held
    row i out.
    """
    grid = grid or base_cfg.grid
    fold_results = nested_cv(data, base_cfg, folds, inner_validation_fraction, seed, etas)
    predictions: list = [None] * data.n
    for fr in fold_results:
        q = fr.model.predict_quantiles_batch(data.X[fr.test_idx], grid)
        for row, i in enumerate(fr.test_idx):
            predictions[i] = QuantileFunction(grid, q[row])
    return predictions, fold_results
