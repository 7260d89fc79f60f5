"""Weighted Cox proportional-hazards fitting for a single binary covariate.

The model is h(t | z) = h0(t) exp(beta z) with per-row case weights
entering both the event terms and the risk-set sums of the partial
likelihood (Breslow convention for ties). Two variances are provided:
the naive inverse observed information, and the sandwich built from
cluster-summed score residuals, which stays valid when weighting makes
rows of one subject correlated.
"""

from dataclasses import dataclass

import numpy as np


class MonotoneLikelihoodError(RuntimeError):
    """Partial likelihood has no interior maximum (no event contrast)."""


class CoxConvergenceError(RuntimeError):
    """Newton-Raphson failed to converge within the iteration cap."""


@dataclass
class SurvivalSample:
    """Rows for one Cox fit.

    time : strictly positive gap times.
    event : 1 for an observed event, 0 for a censored row.
    treatment : binary z.
    weight : nonnegative case weights (stabilized weights in practice).
    cluster : subject ids; rows sharing an id form one cluster for the
        robust variance. Per-event fits use singleton clusters.
    """

    time: np.ndarray
    event: np.ndarray
    treatment: np.ndarray
    weight: np.ndarray
    cluster: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.event = np.asarray(self.event, dtype=float)
        self.treatment = np.asarray(self.treatment, dtype=float)
        self.weight = np.asarray(self.weight, dtype=float)
        self.cluster = np.asarray(self.cluster)
        n = self.time.shape[0]
        for name in ("event", "treatment", "weight", "cluster"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} length does not match time")
        if np.any(self.time <= 0.0):
            raise ValueError("times must be strictly positive")
        if np.any(~np.isfinite(self.weight)) or np.any(self.weight < 0.0):
            raise ValueError("weights must be finite and nonnegative")


@dataclass
class CoxFit:
    log_hr: float
    naive_se: float
    robust_se: float
    n_iter: int
    converged: bool


_MAX_ITER = 50
_MAX_HALVINGS = 10
_SCORE_TOL = 1e-9
_STEP_TOL = 1e-10
_BETA_BOUND = 20.0


def _sorted_arrays(sample):
    # zero-weight rows contribute nothing to the likelihood, the score,
    # or any residual; dropping them up front also keeps suffix risk
    # sums strictly positive
    keep = np.flatnonzero(sample.weight > 0.0)
    order = keep[np.argsort(sample.time[keep], kind="stable")]
    t = sample.time[order]
    d = sample.event[order]
    z = sample.treatment[order]
    w = sample.weight[order]
    # index of the first row in each tie group; risk sets are suffixes
    first = np.searchsorted(t, t, side="left")
    return order, t, d, z, w, first


def _risk_sums(beta, z, w, first):
    r = w * np.exp(beta * z)
    s0 = np.cumsum(r[::-1])[::-1][first]
    s1 = np.cumsum((r * z)[::-1])[::-1][first]
    return s0, s1


def partial_loglik(beta, sample):
    """Weighted log partial likelihood at beta (Breslow ties)."""
    _, _, d, z, w, first = _sorted_arrays(sample)
    s0, _ = _risk_sums(beta, z, w, first)
    return float(np.sum(w * d * (beta * z - np.log(s0))))


def fit_weighted_cox(sample):
    """Newton-Raphson maximizer of the weighted partial likelihood.

    Step-halving keeps the likelihood nondecreasing; convergence is
    declared when |score| < 1e-9 or the step falls below 1e-10.

    Raises MonotoneLikelihoodError if either treatment arm has no
    weighted event, or the iterate escapes |beta| > 20. Raises
    CoxConvergenceError at the 50-iteration cap.
    """
    _, _, d, z, w, first = _sorted_arrays(sample)
    events = (d > 0) & (w > 0)
    if not (np.any(events & (z > 0)) and np.any(events & (z <= 0))):
        raise MonotoneLikelihoodError("need a weighted event in each arm")

    beta = 0.0
    loglik = None
    converged = False
    it = 0
    for it in range(1, _MAX_ITER + 1):
        s0, s1 = _risk_sums(beta, z, w, first)
        m = s1 / s0
        score = np.sum(w * d * (z - m))
        # for binary z the second risk moment equals the first
        info = np.sum(w * d * (m - m * m))
        step = score / info
        if loglik is None:
            loglik = np.sum(w * d * (beta * z - np.log(s0)))
        new_beta = beta + step
        new_loglik = _loglik_at(new_beta, d, z, w, first)
        for _ in range(_MAX_HALVINGS):
            if new_loglik >= loglik - 1e-12:
                break
            step *= 0.5
            new_beta = beta + step
            new_loglik = _loglik_at(new_beta, d, z, w, first)
        beta, loglik = new_beta, new_loglik
        if abs(beta) > _BETA_BOUND:
            raise MonotoneLikelihoodError(
                f"estimate escaped |beta| > {_BETA_BOUND}: monotone likelihood"
            )
        if abs(score) < _SCORE_TOL or abs(step) < _STEP_TOL:
            converged = True
            break
    if not converged:
        raise CoxConvergenceError(f"no convergence in {_MAX_ITER} iterations")

    s0, s1 = _risk_sums(beta, z, w, first)
    m = s1 / s0
    info = np.sum(w * d * (m - m * m))
    if info <= 0.0:
        raise MonotoneLikelihoodError("nonpositive information at the optimum")
    naive_se = 1.0 / np.sqrt(info)
    robust_se = float(np.sqrt(robust_variance(sample, beta)))
    return CoxFit(
        log_hr=float(beta),
        naive_se=float(naive_se),
        robust_se=robust_se,
        n_iter=it,
        converged=converged,
    )


def _loglik_at(beta, d, z, w, first):
    s0, _ = _risk_sums(beta, z, w, first)
    return np.sum(w * d * (beta * z - np.log(s0)))


def robust_variance(sample, log_hr):
    """Sandwich variance I^-1 (sum_g s_g^2) I^-1 at the fitted log_hr.

    s_g sums the weighted score residuals of cluster g:

        s_i = w_i [ d_i (z_i - m(t_i)) - e^{beta z_i} (z_i A(t_i) - B(t_i)) ]

    with m = S1/S0, A(t) = sum_{event times u <= t} w d / S0(u) and
    B(t) the same sum of w d m / S0(u). Each s_i equals w_i times the
    derivative of the total score with respect to w_i.
    """
    order, t, d, z, w, first = _sorted_arrays(sample)
    beta = float(log_hr)
    s0, s1 = _risk_sums(beta, z, w, first)
    m = s1 / s0
    info = np.sum(w * d * (m - m * m))
    if info <= 0.0:
        raise MonotoneLikelihoodError("singular information in sandwich")
    last = np.searchsorted(t, t, side="right") - 1
    a = np.cumsum(w * d / s0)[last]
    b = np.cumsum(w * d * m / s0)[last]
    resid = w * (d * (z - m) - np.exp(beta * z) * (z * a - b))

    cl = sample.cluster[order]
    _, inverse = np.unique(cl, return_inverse=True)
    cluster_sums = np.bincount(inverse, weights=resid)
    meat = np.sum(cluster_sums * cluster_sums)
    return float(meat / (info * info))
