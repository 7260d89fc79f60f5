"""Mapping between conditional and marginal treatment effects.

Hazard ratios do not collapse over covariates: the conditional log HR
beta_c put into the generator is not the population-level marginal log
HR an unconfounded analysis recovers. The mapping has no closed form,
so we measure it on a large synthetic population of potential outcomes
(both arms per subject, common draws) and solve for the beta_c whose
induced marginal effect hits a requested target by bisection.

One fixed oracle seed per calibration makes the bracketing function a
deterministic monotone function of beta_c, so plain bisection applies;
the Monte Carlo error of the oracle population is folded into the
solver tolerance, which must dominate it.

The module ships the calibrated table for the five standard targets
(marginal HR 1 to 3) so simulation runs do not pay the solve; passing
a flag recomputes it from scratch.
"""

from dataclasses import dataclass

import numpy as np

from .coxfit import SurvivalSample, fit_weighted_cox
from .simgen import Scenario, ScenarioConfig, gen_potential_outcomes
from .statcore import RngStream

DEFAULT_ORACLE_SEED = 12345
DEFAULT_ORACLE_N = 1_000_000
DEFAULT_TOLERANCE = 0.005
_MIN_ORACLE_N = 100_000
_MAX_BISECT_ITER = 60


@dataclass
class CalibrationEntry:
    """One row of the target-to-conditional mapping.

    beta_m1 is the requested first-event marginal log HR, beta_c the
    conditional value that induces it, beta_m2 the second-event
    marginal log HR implied under covariate drift, achieved_beta_m1
    the oracle value actually reached at beta_c.
    """

    beta_m1: float
    beta_c: float
    beta_m2: float
    oracle_n: int
    achieved_beta_m1: float
    tolerance: float

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if abs(self.achieved_beta_m1 - self.beta_m1) > self.tolerance:
            raise ValueError("achieved marginal effect misses the target")
        if self.beta_m1 == 0.0 and (self.beta_c != 0.0 or self.beta_m2 != 0.0):
            raise ValueError("null target must map to null effects")


# published mapping for marginal HR targets 1, 1.5, 2, 2.5, 3 at the
# default drift (x2 = x1 + N(0, 16)); regenerate with calibrate_table
CALIBRATION_TABLE = (
    CalibrationEntry(0.0, 0.0, 0.0, DEFAULT_ORACLE_N, 0.0, DEFAULT_TOLERANCE),
    CalibrationEntry(0.4055, 0.4599, 0.2085, DEFAULT_ORACLE_N, 0.4055, DEFAULT_TOLERANCE),
    CalibrationEntry(0.6931, 0.7830, 0.3551, DEFAULT_ORACLE_N, 0.6931, DEFAULT_TOLERANCE),
    CalibrationEntry(0.9163, 1.0313, 0.4686, DEFAULT_ORACLE_N, 0.9163, DEFAULT_TOLERANCE),
    CalibrationEntry(1.0986, 1.2331, 0.5616, DEFAULT_ORACLE_N, 1.0986, DEFAULT_TOLERANCE),
)


def lookup_calibration(target_hr):
    """Published entry for a marginal HR target, or None if off-table."""
    for hr, entry in zip((1.0, 1.5, 2.0, 2.5, 3.0), CALIBRATION_TABLE):
        if abs(target_hr - hr) < 1e-9:
            return entry
    return None


def marginal_hr_oracle(
    beta_c,
    event,
    scenario=Scenario.TVTreatmentCovariates,
    oracle_n=DEFAULT_ORACLE_N,
    seed=DEFAULT_ORACLE_SEED,
):
    """Marginal log HR induced by beta_c, from a potential-outcome census.

    Stacks the treated and control outcomes of every subject and fits
    an unweighted Cox model on the arm indicator. Every comparison of
    a subject with themselves is exact, so no weighting is needed.
    """
    if oracle_n < _MIN_ORACLE_N:
        raise ValueError(f"oracle population must be at least {_MIN_ORACLE_N}")
    if event not in (1, 2):
        raise ValueError("event must be 1 or 2")
    cfg = ScenarioConfig(scenario=scenario, n_subjects=oracle_n, beta_c=beta_c)
    po = gen_potential_outcomes(cfg, RngStream(seed))
    treated = po[f"w{event}_treated"]
    control = po[f"w{event}_control"]
    n = len(po)
    sample = SurvivalSample(
        time=np.concatenate([treated, control]),
        event=np.ones(2 * n),
        treatment=np.concatenate([np.ones(n), np.zeros(n)]),
        weight=np.ones(2 * n),
        cluster=np.concatenate([np.arange(n), np.arange(n)]),
    )
    return fit_weighted_cox(sample).log_hr


def _bisect(func, lo, hi, tolerance, max_iter=_MAX_BISECT_ITER):
    """Root of a monotone increasing func, to |func(mid)| <= tolerance."""
    f_lo = func(lo)
    if abs(f_lo) <= tolerance:
        return lo, f_lo
    f_hi = func(hi)
    if f_lo > 0 or f_hi < 0:
        raise ValueError(
            f"bracket [{lo}, {hi}] does not straddle the root "
            f"(f(lo)={f_lo:.4g}, f(hi)={f_hi:.4g})"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = func(mid)
        if abs(f_mid) <= tolerance:
            return mid, f_mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(
        "bisection exhausted; tolerance is probably below the oracle's "
        "Monte Carlo error"
    )


def calibrate_beta_c(
    target_beta_m1,
    tolerance=DEFAULT_TOLERANCE,
    oracle_n=DEFAULT_ORACLE_N,
    seed=DEFAULT_ORACLE_SEED,
):
    """Solve for the conditional log HR hitting a marginal target.

    Marginal effects are attenuated relative to conditional ones here,
    so the root lies in [target, 2 target + 0.5]; the oracle at fixed
    seed is monotone increasing in beta_c over that range.
    """
    if target_beta_m1 < 0:
        raise ValueError("target must be nonnegative")
    if target_beta_m1 == 0.0:
        return CalibrationEntry(0.0, 0.0, 0.0, oracle_n, 0.0, tolerance)

    def gap(beta_c):
        return marginal_hr_oracle(beta_c, 1, oracle_n=oracle_n, seed=seed) - target_beta_m1

    lo, hi = target_beta_m1, 2.0 * target_beta_m1 + 0.5
    beta_c, residual = _bisect(gap, lo, hi, tolerance)
    beta_m2 = marginal_hr_oracle(beta_c, 2, oracle_n=oracle_n, seed=seed)
    return CalibrationEntry(
        beta_m1=target_beta_m1,
        beta_c=beta_c,
        beta_m2=beta_m2,
        oracle_n=oracle_n,
        achieved_beta_m1=target_beta_m1 + residual,
        tolerance=tolerance,
    )


def calibrate_table(
    target_hrs=(1.0, 1.5, 2.0, 2.5, 3.0),
    tolerance=DEFAULT_TOLERANCE,
    oracle_n=DEFAULT_ORACLE_N,
    seed=DEFAULT_ORACLE_SEED,
):
    """Calibrate a list of marginal HR targets (fresh solve, no cache)."""
    return tuple(
        calibrate_beta_c(float(np.log(hr)), tolerance, oracle_n, seed)
        for hr in target_hrs
    )
