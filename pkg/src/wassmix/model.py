"""The conditional mixture model: reparameterized boosted-tree training.

Every mixture parameter is an additive tree ensemble over the covariates,
living on an unconstrained "natural" scale: softmax logits alpha_k for the
weights, raw means mu_k, and log standard deviations z_k.  Training
alternates, once per boosting iteration, the same three sub-steps as the
no-covariate fit in :mod:`wassmix.mm`, but per sample: each sample's
decomposition yields its own optimal component parameters, one regression
tree per parameter per component is fitted to the natural-scale residuals
and appended with the learning rate, and the decompositions are refreshed.
Early stopping watches the Wasserstein loss on a held-out validation split
and the returned model is the state at the best validation iteration.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from . import _backend
from .distributions import (
    SIGMA_FLOOR,
    SIGMA_CEIL,
    EmpiricalDistribution,
    GaussianMixtureParams,
    LevelGrid,
    QuantileFunction,
    gmm_quantile_function,
)
from .errors import InvalidInputError, ModelFormatError, NumericalError
from .mm import MmConfig, PiUpdate, update_weights_gradient
from .trees import RegressionTree, TreeEnsemble, TreeParams, fit_tree

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_PARAM_NAMES = ("alpha", "mu", "z")
# loss quantiles stay tight so reported losses match full-precision
# re-evaluation; the transport map only feeds density ratios and tolerates a
# much looser solve
_TRAIN_XTOL = 1e-9
_TRANSPORT_XTOL = 1e-6
_PI_FLOOR = 1e-12


@dataclass(frozen=True)
class NaturalParams:
    """Unconstrained mixture parameters: softmax logits, means, log sds."""

    alpha: np.ndarray
    mu: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        m = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        z = np.atleast_1d(np.asarray(self.z, dtype=np.float64))
        if not (a.shape == m.shape == z.shape) or a.ndim != 1:
            raise InvalidInputError("alpha, mu, z must be 1-D and equal length")
        if not all(np.all(np.isfinite(v)) for v in (a, m, z)):
            raise InvalidInputError("natural parameters must be finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "mu", m)
        object.__setattr__(self, "z", z)


@dataclass
class ScgmmConfig:
    n_components: int
    learning_rate: float = 0.1
    max_boost_iters: int = 100
    early_stop_patience: int = 5
    validation_fraction: float = 0.2
    tree: TreeParams = field(default_factory=TreeParams)
    grid: LevelGrid = field(default_factory=LevelGrid.default)
    seed: int = 0
    pi_update: PiUpdate = PiUpdate.EM_APPROX
    strict_zero_init: bool = False

    def __post_init__(self):
        if self.n_components < 1:
            raise InvalidInputError("n_components must be at least 1")
        if self.learning_rate <= 0.0:
            raise InvalidInputError("learning_rate must be positive")
        if self.max_boost_iters < 1:
            raise InvalidInputError("max_boost_iters must be at least 1")
        if self.early_stop_patience < 1:
            raise InvalidInputError("early_stop_patience must be at least 1")
        if not (0.0 < self.validation_fraction < 1.0):
            raise InvalidInputError("validation_fraction must be inside (0, 1)")


@dataclass(frozen=True)
class DistributionalDataset:
    """Covariate rows paired with distribution-valued outcomes.

    Outcomes may be raw samples (EmpiricalDistribution) or quantile
    functions on a shared grid; quantile outcomes are treated during
    training as pseudo-samples with one equally weighted atom per grid
    value.
    """

    X: np.ndarray
    outcomes: tuple

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise InvalidInputError("X must be a 2-D matrix")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("X contains non-finite values")
        outcomes = tuple(self.outcomes)
        if len(outcomes) != X.shape[0]:
            raise InvalidInputError("X rows and outcomes disagree in length")
        for i, o in enumerate(outcomes):
            if not isinstance(o, (EmpiricalDistribution, QuantileFunction)):
                raise InvalidInputError(f"outcome {i} has unsupported type {type(o)!r}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "DistributionalDataset":
        idx = np.asarray(idx)
        return DistributionalDataset(self.X[idx], tuple(self.outcomes[i] for i in idx))


def as_empirical(outcome) -> EmpiricalDistribution:
    """Outcome as an empirical measure (grid values become equal atoms)."""
    if isinstance(outcome, EmpiricalDistribution):
        return outcome
    return EmpiricalDistribution(outcome.values)


def link_rows(alpha: np.ndarray, mu: np.ndarray, z: np.ndarray):
    """Vectorized link for (n, K) natural matrices; components sorted by mean."""
    a = alpha - alpha.max(axis=1, keepdims=True)
    e = np.exp(a)
    pi = e / e.sum(axis=1, keepdims=True)
    sd = np.clip(np.exp(z), SIGMA_FLOOR, SIGMA_CEIL)
    order = np.argsort(mu, axis=1, kind="stable")
    return (
        np.take_along_axis(pi, order, axis=1),
        np.take_along_axis(mu, order, axis=1),
        np.take_along_axis(sd, order, axis=1),
    )


def link(natural: NaturalParams) -> GaussianMixtureParams:
    """Natural parameters to a valid mixture: softmax, exp, sort by mean."""
    pi, mu, sd = link_rows(natural.alpha[None, :], natural.mu[None, :], natural.z[None, :])
    return GaussianMixtureParams(pi[0], mu[0], sd[0])


def unlink(theta: GaussianMixtureParams) -> NaturalParams:
    """Mixture to natural parameters: centered log weights, log sds.

    Softmax logits are only defined up to an additive constant; centering
    fixes the gauge.  Zero weights are floored at 1e-12 before the log.
    """
    w = theta.weights
    if np.any(w < _PI_FLOOR):
        logger.debug("flooring %d tiny mixture weights before log", int((w < _PI_FLOOR).sum()))
        w = np.maximum(w, _PI_FLOOR)
    alpha = np.log(w)
    alpha = alpha - alpha.mean()
    return NaturalParams(alpha, theta.means.copy(), np.log(theta.sds))


@dataclass
class ScgmmModel:
    """A trained conditional mixture: 3K tree ensembles plus metadata."""

    config: ScgmmConfig
    n_features: int
    ensembles: dict
    trace: list
    best_iteration: int

    def _naturals_at(self, X: np.ndarray):
        K = self.config.n_components
        n = X.shape[0]
        mats = {}
        for name in _PARAM_NAMES:
            out = np.empty((n, K))
            for k in range(K):
                out[:, k] = self.ensembles[(name, k)].predict(X)
            mats[name] = out
        return mats["alpha"], mats["mu"], mats["z"]

    def predict_params_batch(self, X: np.ndarray):
        """Sorted (weights, means, sds) arrays of shape (n, K) for rows of X."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InvalidInputError(
                f"expected {self.n_features} features, got shape {X.shape}"
            )
        return link_rows(*self._naturals_at(X))

    def predict_params(self, x: np.ndarray) -> GaussianMixtureParams:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise InvalidInputError(
                f"expected a vector of {self.n_features} features, got shape {x.shape}"
            )
        pi, mu, sd = self.predict_params_batch(x[None, :])
        return GaussianMixtureParams(pi[0], mu[0], sd[0])

    def predict_quantiles(self, x: np.ndarray, grid: LevelGrid | None = None) -> QuantileFunction:
        grid = grid or self.config.grid
        return gmm_quantile_function(self.predict_params(x), grid)

    def predict_quantiles_batch(self, X: np.ndarray, grid: LevelGrid | None = None) -> np.ndarray:
        grid = grid or self.config.grid
        pi, mu, sd = self.predict_params_batch(X)
        levels = np.broadcast_to(grid.levels, (pi.shape[0], len(grid)))
        return _backend.mixture_quantiles_rows(levels, pi, mu, sd)


def predict_params(model: ScgmmModel, x: np.ndarray) -> GaussianMixtureParams:
    return model.predict_params(x)


def predict_quantiles(model: ScgmmModel, x: np.ndarray, grid: LevelGrid | None = None) -> QuantileFunction:
    return model.predict_quantiles(x, grid)


def _fit_tree_or_leaf(X, residuals, params):
    # boosting should degrade to a constant correction, not fail, when a
    # node cannot legally split
    if X.shape[0] < 2 * params.min_samples_leaf:
        return RegressionTree([-1], [0.0], [-1], [-1], [float(residuals.mean())], X.shape[1])
    return fit_tree(X, residuals, params)


def _clean_responsibilities(r, context):
    bad = ~np.all(np.isfinite(r), axis=-1)
    if bad.any():
        logger.warning("%s: uniform fallback at %d atoms", context, int(bad.sum()))
        r[bad] = 1.0 / r.shape[-1]
    return r


def train(data: DistributionalDataset, cfg: ScgmmConfig,
          validation_mask: np.ndarray | None = None) -> ScgmmModel:
    """Fit the conditional mixture by boosted alternating minimization.

    A seed-controlled validation split (or an explicit boolean mask) is
    carved from the data; after every boosting iteration the validation
    Wasserstein loss is recorded and training stops once it has failed to
    improve for ``early_stop_patience`` consecutive iterations.  The
    returned ensembles are truncated to the best validation iteration,
    which may be the constant initialization.

    Per-sample sub-step computations are independent and vectorized across
    samples; nothing here mutates shared state concurrently.
    """
    n, p = data.X.shape
    if n < 20:
        raise InvalidInputError(f"need at least 20 samples to train, got {n}")
    if p < 1:
        raise InvalidInputError("need at least one covariate")
    K = cfg.n_components
    eta = cfg.learning_rate
    grid = cfg.grid
    levels = grid.levels
    L = levels.size

    samples = [as_empirical(o) for o in data.outcomes]
    for i, s in enumerate(samples):
        if np.ptp(s.points) == 0.0:
            raise InvalidInputError(f"outcome {i} is degenerate (all values equal)")

    X = data.X
    rng = np.random.default_rng(cfg.seed)
    if validation_mask is None:
        n_val = min(max(int(round(cfg.validation_fraction * n)), 1), n - 1)
        mask = np.zeros(n, dtype=bool)
        mask[rng.permutation(n)[:n_val]] = True
    else:
        mask = np.asarray(validation_mask, dtype=bool)
        if mask.shape != (n,) or not 0 < mask.sum() < n:
            raise InvalidInputError("validation_mask must select a proper nonempty subset")
    tr = ~mask
    Xtr = X[tr]
    n_tr = int(tr.sum())

    # padded atom matrices (padding atoms carry zero weight and a harmless
    # midpoint level, so they never influence any computation)
    max_atoms = max(len(s) for s in samples)
    atoms = np.empty((n, max_atoms))
    a_w = np.zeros((n, max_atoms))
    a_u = np.full((n, max_atoms), 0.5)
    for i, s in enumerate(samples):
        m = len(s)
        atoms[i, :m] = s.sorted_points
        atoms[i, m:] = s.sorted_points[-1]
        a_w[i, :m] = s.sorted_weights
        a_u[i, :m] = s.midpoint_cdf_levels()

    q_obs = np.stack(
        [_backend.weighted_quantiles(s.sorted_points, s.cum_weights, levels) for s in samples]
    )

    if cfg.strict_zero_init:
        mu_base = np.zeros(K)
        z_base = np.zeros(K)
    else:
        pooled = np.sort(np.concatenate([samples[i].points for i in np.nonzero(tr)[0]]))
        mu_base = np.array([sl.mean() for sl in np.array_split(pooled, K)])
        z_base = np.full(K, np.log(max(pooled.std(), SIGMA_FLOOR)))
    ensembles = {}
    for k in range(K):
        ensembles[("alpha", k)] = TreeEnsemble(0.0, eta)
        ensembles[("mu", k)] = TreeEnsemble(float(mu_base[k]), eta)
        ensembles[("z", k)] = TreeEnsemble(float(z_base[k]), eta)

    nat_alpha = np.zeros((n, K))
    nat_mu = np.tile(mu_base, (n, 1))
    nat_z = np.tile(z_base, (n, 1))

    levels_all = np.broadcast_to(levels, (n, L))
    base_nq = ndtri(levels)
    base_c = base_nq - base_nq.mean()
    base_var = base_c @ base_c
    base_mean = base_nq.mean()

    def current_losses():
        pi, mu_s, sd_s = link_rows(nat_alpha, nat_mu, nat_z)
        q_hat = _backend.mixture_quantiles_rows(levels_all, pi, mu_s, sd_s, xtol=_TRAIN_XTOL)
        w2 = ((q_obs - q_hat) ** 2).sum(axis=1) / (L + 1)
        return float(w2[tr].mean()), float(w2[mask].mean()), (pi, mu_s, sd_s)

    train_loss, val_loss, state = current_losses()
    trace = [(0, train_loss, val_loss)]
    best_iter, best_val = 0, val_loss
    mm_cfg = MmConfig()

    for it in range(1, cfg.max_boost_iters + 1):
        pi_s, mu_s, sd_s = state

        # decomposition of every training sample at the current parameters
        t = _backend.mixture_quantiles_rows(a_u[tr], pi_s[tr], mu_s[tr], sd_s[tr],
                                            xtol=_TRANSPORT_XTOL)
        resp = _clean_responsibilities(
            _backend.responsibilities_rows(t, pi_s[tr], mu_s[tr], sd_s[tr]),
            f"iteration {it} decomposition",
        )
        w_resp = a_w[tr][:, :, None] * resp
        comp_mass = w_resp.sum(axis=1)

        # per-sample optimal location/scale per component
        mu_tgt = mu_s[tr].copy()
        sd_tgt = sd_s[tr].copy()
        rows = np.nonzero(tr)[0]
        for j, i in enumerate(rows):
            for k in range(K):
                if comp_mass[j, k] <= _PI_FLOOR:
                    continue
                cw = np.cumsum(w_resp[j, :, k])
                cw /= cw[-1]
                qk = _backend.weighted_quantiles(atoms[i], cw, levels)
                if qk[-1] == qk[0]:
                    continue
                sd_hat = max((qk - qk.mean()) @ base_c / base_var, SIGMA_FLOOR)
                mu_tgt[j, k] = qk.mean() - sd_hat * base_mean
                sd_tgt[j, k] = sd_hat
        order = np.argsort(mu_tgt, axis=1, kind="stable")
        mu_tgt = np.take_along_axis(mu_tgt, order, axis=1)
        z_tgt = np.log(np.take_along_axis(sd_tgt, order, axis=1))

        if not (np.all(np.isfinite(mu_tgt)) and np.all(np.isfinite(z_tgt))):
            raise NumericalError("non-finite component targets", iteration=it)

        for k in range(K):
            tree = _fit_tree_or_leaf(Xtr, mu_tgt[:, k] - nat_mu[tr, k], cfg.tree)
            ensembles[("mu", k)].append(tree)
            nat_mu[:, k] += eta * tree.predict(X)
            tree = _fit_tree_or_leaf(Xtr, z_tgt[:, k] - nat_z[tr, k], cfg.tree)
            ensembles[("z", k)].append(tree)
            nat_z[:, k] += eta * tree.predict(X)

        # weight targets at the post-update component parameters
        pi2, mu2, sd2 = link_rows(nat_alpha, nat_mu, nat_z)
        if cfg.pi_update is PiUpdate.EM_APPROX:
            r2 = _clean_responsibilities(
                _backend.responsibilities_rows(atoms[tr], pi2[tr], mu2[tr], sd2[tr]),
                f"iteration {it} weight update",
            )
            pi_tgt = np.einsum("na,nak->nk", a_w[tr], r2)
            pi_tgt = np.maximum(pi_tgt, 0.0)
            pi_tgt /= pi_tgt.sum(axis=1, keepdims=True)
        else:
            pi_tgt = np.empty((n_tr, K))
            for j, i in enumerate(rows):
                theta_i = GaussianMixtureParams(pi2[i], mu2[i], sd2[i])
                pi_tgt[j] = update_weights_gradient(samples[i], theta_i, mm_cfg, grid)
        alpha_tgt = np.log(np.maximum(pi_tgt, _PI_FLOOR))
        alpha_tgt -= alpha_tgt.mean(axis=1, keepdims=True)
        if not np.all(np.isfinite(alpha_tgt)):
            raise NumericalError("non-finite weight targets", iteration=it)

        for k in range(K):
            tree = _fit_tree_or_leaf(Xtr, alpha_tgt[:, k] - nat_alpha[tr, k], cfg.tree)
            ensembles[("alpha", k)].append(tree)
            nat_alpha[:, k] += eta * tree.predict(X)

        train_loss, val_loss, state = current_losses()
        trace.append((it, train_loss, val_loss))
        if val_loss < best_val:
            best_val, best_iter = val_loss, it
        elif it - best_iter >= cfg.early_stop_patience:
            break

    for ens in ensembles.values():
        ens.truncate(best_iter)
    return ScgmmModel(
        config=cfg,
        n_features=p,
        ensembles=ensembles,
        trace=trace,
        best_iteration=best_iter,
    )


def _tree_params_to_dict(tp: TreeParams) -> dict:
    return {
        "max_depth": tp.max_depth,
        "min_samples_leaf": tp.min_samples_leaf,
        "min_split_improvement": tp.min_split_improvement,
    }


def serialize(model: ScgmmModel) -> bytes:
    """Lossless, versioned JSON encoding of a trained model."""
    cfg = model.config
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "wassmix-scgmm",
        "n_components": cfg.n_components,
        "n_features": model.n_features,
        "levels": [float(v) for v in cfg.grid.levels],
        "config": {
            "learning_rate": cfg.learning_rate,
            "max_boost_iters": cfg.max_boost_iters,
            "early_stop_patience": cfg.early_stop_patience,
            "validation_fraction": cfg.validation_fraction,
            "seed": cfg.seed,
            "pi_update": cfg.pi_update.value,
            "strict_zero_init": cfg.strict_zero_init,
            "tree": _tree_params_to_dict(cfg.tree),
        },
        "best_iteration": model.best_iteration,
        "trace": [[int(m), float(a), float(b)] for m, a, b in model.trace],
        "ensembles": [
            {
                "param": name,
                "component": k,
                "base_value": model.ensembles[(name, k)].base_value,
                "learning_rate": model.ensembles[(name, k)].learning_rate,
                "trees": [t.to_dict() for t in model.ensembles[(name, k)].trees],
            }
            for name in _PARAM_NAMES
            for k in range(cfg.n_components)
        ],
    }
    return json.dumps(doc, indent=1).encode("utf-8")


def deserialize(payload: bytes) -> ScgmmModel:
    """Rebuild a model from :func:`serialize` output.

    Raises ModelFormatError on malformed payloads or unknown schema
    versions; a successful round trip predicts bit-identically.
    """
    try:
        doc = json.loads(payload.decode("utf-8") if isinstance(payload, bytes) else payload)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot parse model payload: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "wassmix-scgmm":
        raise ModelFormatError("payload is not a serialized model")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ModelFormatError(
            f"unsupported schema version {doc.get('schema_version')!r}"
        )
    try:
        c = doc["config"]
        cfg = ScgmmConfig(
            n_components=int(doc["n_components"]),
            learning_rate=float(c["learning_rate"]),
            max_boost_iters=int(c["max_boost_iters"]),
            early_stop_patience=int(c["early_stop_patience"]),
            validation_fraction=float(c["validation_fraction"]),
            tree=TreeParams(**c["tree"]),
            grid=LevelGrid(np.asarray(doc["levels"], dtype=np.float64)),
            seed=int(c["seed"]),
            pi_update=PiUpdate(c["pi_update"]),
            strict_zero_init=bool(c["strict_zero_init"]),
        )
        n_features = int(doc["n_features"])
        ensembles = {}
        for entry in doc["ensembles"]:
            key = (entry["param"], int(entry["component"]))
            if entry["param"] not in _PARAM_NAMES:
                raise ModelFormatError(f"unknown parameter name {entry['param']!r}")
            ens = TreeEnsemble(float(entry["base_value"]), float(entry["learning_rate"]))
            for tdoc in entry["trees"]:
                ens.append(RegressionTree.from_dict(tdoc, n_features))
            ensembles[key] = ens
        expected = {(name, k) for name in _PARAM_NAMES for k in range(cfg.n_components)}
        if set(ensembles) != expected:
            raise ModelFormatError("ensemble set does not cover 3K parameters")
        trace = [(int(m), float(a), float(b)) for m, a, b in doc["trace"]]
        best = int(doc["best_iteration"])
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc
    return ScgmmModel(cfg, n_features, ensembles, trace, best)
