"""Pure NumPy reference implementations of the numerical hot kernels.

The compiled extension (``wassmix._kernels_c``) mirrors every public
function here with identical semantics; ``wassmix._backend`` picks one of
the two at import time.  Keep the two files in sync.

Conventions shared by both backends:

* all arrays are float64 and C-contiguous,
* "rows" functions operate on a batch of N independent mixtures, one per
  row, with component parameters of shape (N, K),
* mixtures are given by weights w (nonnegative, summing to 1 per row),
  means mu and standard deviations sd > 0.
"""

import numpy as np
from scipy.special import ndtr

BACKEND = "numpy"

_MAX_BISECT = 200
_MAX_WIDEN = 200


def mixture_cdf_rows(x, w, mu, sd):
    """Mixture CDF evaluated elementwise: rows of x against rows of params.

    x: (N, L); w, mu, sd: (N, K).  Returns (N, L).
    """
    z = (x[:, :, None] - mu[:, None, :]) / sd[:, None, :]
    return np.einsum("nk,nlk->nl", w, ndtr(z))


def mixture_quantiles_rows(levels, w, mu, sd, xtol=0.0):
    """Mixture quantiles by bracketed bisection, one row of levels per mixture.

    levels: (N, L) targets in (0, 1), ascending within each row; w, mu, sd:
    (N, K).  The bracket starts at [min_k(mu - 10 sd), max_k(mu + 10 sd)] and
    is widened (doubling) until it contains every target.  Bisection keeps
    the invariant cdf(lo) < s <= cdf(hi) and therefore converges to
    inf{x : cdf(x) >= s}, which is nondecreasing in s.  With xtol == 0
    iteration continues until the bracket collapses to adjacent floats.
    (This implementation does not exploit the ascending order; the compiled
    one does.)
    """
    levels = np.ascontiguousarray(levels, dtype=np.float64)
    lo = np.broadcast_to((mu - 10.0 * sd).min(axis=1, keepdims=True), levels.shape).copy()
    hi = np.broadcast_to((mu + 10.0 * sd).max(axis=1, keepdims=True), levels.shape).copy()
    width = np.maximum(hi - lo, 1.0)

    for _ in range(_MAX_WIDEN):
        need_lo = mixture_cdf_rows(lo, w, mu, sd) > levels
        need_hi = mixture_cdf_rows(hi, w, mu, sd) < levels
        if not (need_lo.any() or need_hi.any()):
            break
        lo = np.where(need_lo, lo - width, lo)
        hi = np.where(need_hi, hi + width, hi)
        width = width * 2.0

    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        interior = (lo < mid) & (mid < hi)
        if not interior.any():
            break
        ge = mixture_cdf_rows(mid, w, mu, sd) >= levels
        hi = np.where(interior & ge, mid, hi)
        lo = np.where(interior & ~ge, mid, lo)
        if xtol > 0.0 and (hi - lo).max() <= xtol:
            break
    return 0.5 * (lo + hi)


def responsibilities_rows(t, w, mu, sd):
    """Per-point posterior component probabilities for a batch of mixtures.

    t: (N, n) evaluation points; w, mu, sd: (N, K).  Returns (N, n, K)
    computed in log space with max subtraction, so a row only degrades to
    NaN when the inputs themselves are non-finite; zero weights are handled
    exactly (they never receive responsibility).
    """
    with np.errstate(divide="ignore"):
        logw = np.log(w) - np.log(sd)
    z = (t[:, :, None] - mu[:, None, :]) / sd[:, None, :]
    logp = logw[:, None, :] - 0.5 * z * z
    logp -= logp.max(axis=2, keepdims=True)
    r = np.exp(logp)
    return r / r.sum(axis=2, keepdims=True)


def weighted_quantiles(values, cum_weights, levels):
    """Left-continuous weighted empirical quantiles.

    values must be sorted ascending with cum_weights its cumulative weight
    profile ending at 1; levels must be ascending.  Returns, per level s,
    the smallest value whose cumulative weight is >= s.  Levels are nudged
    down by 1e-9 so that cumulative sums landing within rounding error of a
    level resolve to the left atom, as exact arithmetic would.
    """
    idx = np.searchsorted(cum_weights, np.asarray(levels) - 1e-9, side="left")
    return values[np.minimum(idx, values.size - 1)]


def best_split_column(xs, ys, min_leaf):
    """Best squared-error split of one sorted feature column.

    xs sorted ascending, ys aligned.  Returns (gain, pos) where the split
    sends rows [0..pos] left and [pos+1..] right; gain is the reduction in
    total squared error.  Candidate positions lie between distinct feature
    values only, with at least min_leaf rows on each side.  Ties keep the
    lowest position.  Returns (-inf, -1) when no candidate exists.
    """
    n = xs.size
    if n < 2 * min_leaf:
        return -np.inf, -1
    csum = np.cumsum(ys)
    total = csum[-1]
    pos = np.arange(min_leaf - 1, n - min_leaf)
    pos = pos[xs[pos] < xs[pos + 1]]
    if pos.size == 0:
        return -np.inf, -1
    n_left = pos + 1.0
    s_left = csum[pos]
    s_right = total - s_left
    gain = s_left * s_left / n_left + s_right * s_right / (n - n_left) - total * total / n
    j = int(np.argmax(gain))
    return float(gain[j]), int(pos[j])
