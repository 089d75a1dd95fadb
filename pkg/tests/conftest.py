import numpy as np
import pytest

from wassmix import GaussianMixtureParams, LevelGrid


@pytest.fixture(scope="session")
def default_grid():
    return LevelGrid.default()


def random_mixture(rng, n_components=None, mean_range=(-4.0, 4.0), sd_range=(0.3, 2.5)):
    """A moderate random mixture with sorted means."""
    K = int(n_components if n_components is not None else rng.integers(1, 4))
    w = rng.dirichlet(np.full(K, 2.0))
    mu = np.sort(rng.uniform(*mean_range, K))
    sd = rng.uniform(*sd_range, K)
    return GaussianMixtureParams.from_arrays(w, mu, sd)


def random_mixture_sample(rng, n, n_components=None, mean_range=(-4.0, 4.0), sd_range=(0.3, 2.0)):
    """Draws from a random mixture; returns (points, truth params)."""
    theta = random_mixture(rng, n_components, mean_range, sd_range)
    comp = rng.choice(theta.n_components, size=n, p=theta.weights)
    return rng.normal(theta.means[comp], theta.sds[comp]), theta
