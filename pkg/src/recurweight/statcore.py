"""Deterministic random number streams and logistic model fitting.

Everything downstream (data generation, propensity models, censoring
models) draws its randomness and its fitted probabilities from here, so
this module pins down the two reproducibility contracts of the package:
identical (seed, stream_id) pairs always yield identical draws, and
fitting is a pure function of its inputs.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as _expit


class SeparationError(RuntimeError):
    """Logistic MLE is divergent (separated data or constant response)."""


def expit(x):
    """Numerically stable inverse logit, 1 / (1 + exp(-x)).

    Accepts scalars or arrays; saturates smoothly at extreme inputs
    instead of overflowing.
    """
    return _expit(x)


@dataclass
class RngStream:
    """One independently seeded PCG64 substream.

    seed selects the experiment, stream_id the substream within it
    (one per replicate). Distinct stream_ids give statistically
    independent sequences; the same pair replays the same sequence.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))


def draw_uniform(stream, size=None):
    """Uniform draws on the open interval (0, 1).

    numpy's generator returns values in [0, 1); exact zeros (probability
    2^-53 per draw) are redrawn so that downstream -log(u) transforms
    stay finite.
    """
    u = stream._gen.random(size)
    if size is None:
        while u == 0.0:
            u = stream._gen.random()
        return u
    zero = u == 0.0
    while np.any(zero):
        u[zero] = stream._gen.random(int(zero.sum()))
        zero = u == 0.0
    return u


def draw_normal(stream, mean=0.0, sd=1.0, size=None):
    """Gaussian draws with the given mean and standard deviation."""
    if sd <= 0:
        raise ValueError(f"sd must be positive, got {sd}")
    return stream._gen.normal(mean, sd, size)


@dataclass
class LogisticFit:
    """Result of a logistic regression fit.

    coefficients has the intercept first, matching the design matrix
    column order. fitted_probabilities are expit(X @ coefficients),
    strictly inside (0, 1).
    """

    coefficients: np.ndarray
    converged: bool
    n_iter: int
    fitted_probabilities: np.ndarray


# IRLS defaults: standard GLM tolerances.
_IRLS_TOL = 1e-8
_IRLS_MAX_ITER = 25
_SEPARATION_BOUND = 30.0


def fit_logistic(design, response, case_weights=None):
    """Maximum-likelihood logistic regression via IRLS.

    Parameters
    ----------
    design : (n, p) array with an explicit intercept column.
    response : (n,) binary array.
    case_weights : optional nonnegative (n,) array; rows with weight w
        count as w copies.

    Returns
    -------
    LogisticFit. converged is False if the coefficient step never fell
    below 1e-8 within 25 iterations.

    Raises
    ------
    SeparationError if the response is constant or any coefficient
    exceeds 30 in absolute value during iteration (divergent MLE).
    numpy.linalg.LinAlgError if the information matrix is singular.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    n, p = X.shape
    if n < p:
        raise ValueError(f"need n >= p, got n={n}, p={p}")
    w = np.ones(n) if case_weights is None else np.asarray(case_weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("case_weights must be nonnegative")

    ybar = np.average(y, weights=w)
    if ybar <= 0.0 or ybar >= 1.0:
        raise SeparationError("constant response: logistic MLE is divergent")

    beta = np.zeros(p)
    converged = False
    it = 0
    for it in range(1, _IRLS_MAX_ITER + 1):
        prob = _expit(X @ beta)
        wls = w * prob * (1.0 - prob)
        info = X.T @ (X * wls[:, None])
        score = X.T @ (w * (y - prob))
        step = np.linalg.solve(info, score)
        beta += step
        if np.max(np.abs(beta)) > _SEPARATION_BOUND:
            raise SeparationError(
                f"coefficient magnitude exceeded {_SEPARATION_BOUND}: separated data"
            )
        if np.max(np.abs(step)) < _IRLS_TOL:
            converged = True
            break

    return LogisticFit(
        coefficients=beta,
        converged=converged,
        n_iter=it,
        fitted_probabilities=_expit(X @ beta),
    )
