"""Prediction metrics and interpretation curves.

The headline metric is the mean squared Wasserstein prediction loss and its
R-squared analogue: one minus the mean loss over the Wasserstein variance
of the observed outcomes around their pointwise-mean quantile function.
Interpretation outputs are Monte Carlo partial dependence objects: the
population average over the remaining covariates is replaced by the average
over supplied rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .distributions import LevelGrid, QuantileFunction, w2_squared, w2_squared_values
from .errors import DegenerateVarianceError, InvalidInputError
from .model import ScgmmModel

__all__ = [
    "EvalReport",
    "PdpCurve",
    "ParamCurves",
    "prediction_loss",
    "functional_pdp",
    "marginal_param_curve",
    "ice_curves",
]


@dataclass(frozen=True)
class EvalReport:
    per_sample: np.ndarray
    mean_loss: float
    r_squared: float
    variance: float


@dataclass(frozen=True)
class PdpCurve:
    feature: int
    feature_values: np.ndarray
    rho: float
    values: np.ndarray


@dataclass(frozen=True)
class ParamCurves:
    """Averaged mixture parameters along one feature's value grid."""

    feature: int
    feature_values: np.ndarray
    weights: np.ndarray  # (grid, K)
    means: np.ndarray
    sds: np.ndarray


def prediction_loss(observed: list[QuantileFunction],
                    predicted: list[QuantileFunction]) -> EvalReport:
    """Per-pair squared W2 loss, its mean, and the R-squared analogue.

    The variance term is the mean squared W2 distance of the observed
    quantile functions to their pointwise mean.  Raises
    DegenerateVarianceError (carrying the loss figures) when all observed
    outcomes are identical.
    """
    if len(observed) == 0 or len(observed) != len(predicted):
        raise InvalidInputError("observed and predicted must be equal-length, non-empty")
    grid = observed[0].grid
    for q in (*observed, *predicted):
        if q.grid != grid:
            raise InvalidInputError("all quantile functions must share one grid")
    per_sample = np.array([w2_squared(o, p) for o, p in zip(observed, predicted)])
    mean_loss = float(per_sample.mean())
    obs = np.stack([q.values for q in observed])
    q_bar = obs.mean(axis=0)
    variance = float(np.mean([w2_squared_values(row, q_bar) for row in obs]))
    if variance <= 0.0:
        raise DegenerateVarianceError(
            "observed outcomes are identical: Wasserstein variance is 0, R^2 undefined",
            per_sample=per_sample,
            mean_loss=mean_loss,
        )
    return EvalReport(per_sample, mean_loss, 1.0 - mean_loss / variance, variance)


def _validate_curve_args(model, data_X, feature, value_grid):
    data_X = np.asarray(data_X, dtype=np.float64)
    if data_X.ndim != 2 or data_X.shape[0] == 0:
        raise InvalidInputError("data_X must be a non-empty 2-D matrix")
    if data_X.shape[1] != model.n_features:
        raise InvalidInputError(
            f"expected {model.n_features} features, got {data_X.shape[1]}"
        )
    if not (0 <= feature < model.n_features):
        raise InvalidInputError(f"feature index {feature} out of range")
    value_grid = np.atleast_1d(np.asarray(value_grid, dtype=np.float64))
    if value_grid.size == 0 or np.any(np.diff(value_grid) <= 0.0):
        raise InvalidInputError("value_grid must be non-empty and increasing")
    return data_X, value_grid


def ice_curves(model: ScgmmModel, data_X: np.ndarray, feature: int,
               value_grid: np.ndarray, rho: float) -> np.ndarray:
    """Per-row conditional quantile curves at level rho.

    Returns an (n_rows, n_grid) matrix: entry (i, j) is the model's
    rho-quantile at row i with the chosen feature overwritten by
    value_grid[j].
    """
    data_X, value_grid = _validate_curve_args(model, data_X, feature, value_grid)
    if not (0.0 < rho < 1.0):
        raise InvalidInputError(f"rho must be inside (0, 1), got {rho}")
    out = np.empty((data_X.shape[0], value_grid.size))
    for j, v in enumerate(value_grid):
        X_mod = data_X.copy()
        X_mod[:, feature] = v
        pi, mu, sd = model.predict_params_batch(X_mod)
        levels = np.full((X_mod.shape[0], 1), rho)
        out[:, j] = _backend.mixture_quantiles_rows(levels, pi, mu, sd)[:, 0]
    return out


def functional_pdp(model: ScgmmModel, data_X: np.ndarray, feature: int,
                   value_grid: np.ndarray, rho: float) -> PdpCurve:
    """Partial dependence of the rho-quantile on one feature.

    The average over the other covariates is taken over the supplied rows,
    so this equals the mean of :func:`ice_curves` exactly.
    """
    curves = ice_curves(model, data_X, feature, value_grid, rho)
    value_grid = np.atleast_1d(np.asarray(value_grid, dtype=np.float64))
    return PdpCurve(feature, value_grid, rho, curves.mean(axis=0))


def marginal_param_curve(model: ScgmmModel, data_X: np.ndarray, feature: int,
                         value_grid: np.ndarray) -> ParamCurves:
    """Averaged mixture parameters along one feature (same averaging scheme)."""
    data_X, value_grid = _validate_curve_args(model, data_X, feature, value_grid)
    K = model.config.n_components
    w = np.empty((value_grid.size, K))
    m = np.empty((value_grid.size, K))
    s = np.empty((value_grid.size, K))
    for j, v in enumerate(value_grid):
        X_mod = data_X.copy()
        X_mod[:, feature] = v
        pi, mu, sd = model.predict_params_batch(X_mod)
        w[j] = pi.mean(axis=0)
        m[j] = mu.mean(axis=0)
        s[j] = sd.mean(axis=0)
    return ParamCurves(feature, value_grid, w, m, s)
