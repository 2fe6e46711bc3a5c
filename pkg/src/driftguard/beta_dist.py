"""Beta-distribution density evaluation and maximum-likelihood fitting.

Classifier confidences live in [0, 1] and softmax saturates at the ends,
so raw values are clamped into the open interval before any density math.
All logarithms are natural.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from .errors import (
    DegenerateSampleError,
    InputDomainError,
    InsufficientDataError,
    ParameterDomainError,
)

CLAMP_EPS = 1e-6

_NEWTON_MAX_ITER = 50
_NEWTON_TOL = 1e-10
_MIN_SHAPE = 1e-3


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of a Beta distribution; both must be positive."""

    alpha: float
    beta: float

    def __post_init__(self):
        a, b = self.alpha, self.beta
        if not (np.isfinite(a) and np.isfinite(b)) or a <= 0.0 or b <= 0.0:
            raise ParameterDomainError(
                f"shape parameters must be positive and finite, got alpha={a!r}, beta={b!r}"
            )
        object.__setattr__(self, "alpha", float(a))
        object.__setattr__(self, "beta", float(b))


def clamp(q, eps: float = CLAMP_EPS):
    """Clamp confidences from [0, 1] into [eps, 1 - eps].

    Accepts a scalar or array; rejects non-finite values and anything
    outside [0, 1]. Idempotent: clamping a clamped value is a no-op.
    """
    arr = np.asarray(q, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InputDomainError("confidence values must be finite and within [0, 1]")
    out = np.clip(arr, eps, 1.0 - eps)
    return out if arr.ndim else float(out)


def log_beta(alpha: float, beta: float) -> float:
    """ln B(alpha, beta) via the log-gamma function."""
    return float(gammaln(alpha) + gammaln(beta) - gammaln(alpha + beta))


def log_pdf(params: BetaParams, q):
    """Log density of Beta(alpha, beta) at q, for scalar or array q in (0, 1)."""
    arr = np.asarray(q, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise InputDomainError("q must lie strictly inside (0, 1)")
    out = (
        (params.alpha - 1.0) * np.log(arr)
        + (params.beta - 1.0) * np.log1p(-arr)
        - log_beta(params.alpha, params.beta)
    )
    return out if arr.ndim else float(out)


def _avg_loglik(alpha: float, beta: float, mean_log: float, mean_log1m: float) -> float:
    return (alpha - 1.0) * mean_log + (beta - 1.0) * mean_log1m - log_beta(alpha, beta)


def _newton_refine(alpha, beta, mean_log, mean_log1m):
    """Newton iterations on the two score equations; None when the walk fails."""
    for _ in range(_NEWTON_MAX_ITER):
        psi = digamma((alpha, beta, alpha + beta))
        g1 = psi[2] - psi[0] + mean_log
        g2 = psi[2] - psi[1] + mean_log1m
        tri = polygamma(1, (alpha, beta, alpha + beta))
        j11 = tri[2] - tri[0]
        j22 = tri[2] - tri[1]
        j12 = tri[2]
        det = j11 * j22 - j12 * j12
        if det == 0.0 or not np.isfinite(det):
            return None
        da = -(g1 * j22 - g2 * j12) / det
        db = -(g2 * j11 - g1 * j12) / det
        alpha, beta = alpha + da, beta + db
        if not (np.isfinite(alpha) and np.isfinite(beta)) or alpha <= 0.0 or beta <= 0.0:
            return None
        if abs(da) < _NEWTON_TOL and abs(db) < _NEWTON_TOL:
            return alpha, beta
    return None


def moments_estimate(samples) -> tuple[float, float]:
    """Method-of-moments starting point (alpha0, beta0) for the MLE."""
    q = clamp(np.asarray(samples, dtype=np.float64).ravel())
    m = float(np.mean(q))
    v = float(np.var(q))
    if v <= 0.0:
        raise DegenerateSampleError("zero sample variance after clamping")
    scale = m * (1.0 - m) / v - 1.0
    if scale <= 0.0:
        # variance at or past the Bernoulli bound; the moments formula leaves
        # the domain, so start from a tiny symmetric U-shape instead
        return _MIN_SHAPE, _MIN_SHAPE
    return max(m * scale, _MIN_SHAPE), max((1.0 - m) * scale, _MIN_SHAPE)


def fit_mle(samples) -> BetaParams:
    """Maximum-likelihood Beta fit for a sequence of confidences.

    Raw samples are clamped first. The fit starts from the method-of-moments
    estimate and is refined by Newton iterations on the score equations
    (digamma terms); if Newton fails to converge within 50 iterations or
    leaves the positive quadrant, the moments estimate is returned. The
    refinement never worsens the sample log-likelihood.

    Raises InsufficientDataError below 4 samples and DegenerateSampleError
    when the clamped sample variance is zero.
    """
    q = clamp(np.asarray(samples, dtype=np.float64).ravel())
    if q.size < 4:
        raise InsufficientDataError(f"need at least 4 samples, got {q.size}")
    a0, b0 = moments_estimate(q)
    mean_log = float(np.mean(np.log(q)))
    mean_log1m = float(np.mean(np.log1p(-q)))
    refined = _newton_refine(a0, b0, mean_log, mean_log1m)
    if refined is None:
        return BetaParams(a0, b0)
    a1, b1 = refined
    if _avg_loglik(a1, b1, mean_log, mean_log1m) >= _avg_loglik(a0, b0, mean_log, mean_log1m):
        return BetaParams(a1, b1)
    return BetaParams(a0, b0)
