"""wassmix: conditional Gaussian mixture regression under the 2-Wasserstein loss.

Distribution-valued outcomes are represented by quantile functions on a
fixed level grid; a K-component Gaussian mixture with covariate-dependent
weights, means and scales is fitted by boosted trees through a monotone
alternating-minimization scheme.  Heavy numerical kernels run through a
compiled extension when available (see wassmix._backend.BACKEND) and a pure
NumPy fallback otherwise.
"""

from ._backend import BACKEND, HAVE_COMPILED
from .distributions import (
    EmpiricalDistribution,
    GaussianMixtureParams,
    LevelGrid,
    MixtureDecomposition,
    QuantileFunction,
    empirical_quantiles,
    gaussian_w2,
    gmm_cdf,
    gmm_quantile,
    gmm_quantile_function,
    standard_normal_quantiles,
    w2_squared,
)
from .errors import (
    DegenerateBaseError,
    DegenerateVarianceError,
    InvalidInputError,
    ModelFormatError,
    NumericalError,
    WassmixError,
)
from .evaluate import (
    EvalReport,
    ParamCurves,
    PdpCurve,
    functional_pdp,
    ice_curves,
    marginal_param_curve,
    prediction_loss,
)
from .mm import (
    MmConfig,
    MmTrace,
    PiUpdate,
    decompose,
    fit_gmm_mm,
    fit_location_scale,
    project_simplex,
    surrogate_loss,
    update_components,
    update_weights_em,
    update_weights_gradient,
)
from .model import (
    DistributionalDataset,
    NaturalParams,
    ScgmmConfig,
    ScgmmModel,
    deserialize,
    link,
    predict_params,
    predict_quantiles,
    serialize,
    train,
    unlink,
)
from .simulate import (
    FoldResult,
    Scenario,
    SimConfig,
    SparseLevels,
    cross_validated_quantiles,
    densify,
    mixture_truth_params,
    mixture_weight_low,
    nested_cv,
    quasi_w2,
    simulate_linear,
    simulate_mixture,
    sparsify,
)
from .trees import (
    RegressionTree,
    TreeEnsemble,
    TreeParams,
    ensemble_predict,
    fit_tree,
    predict_tree,
)

__version__ = "0.1.0"
