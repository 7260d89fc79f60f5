"""Administrative censoring at tau: three analyses of the second event.

Once follow-up stops at a fixed tau, the second gap time is only fully
observed for subjects whose events both fit inside the window, and
those subjects systematically have short first gaps. Three ways to
analyse the second event, all built from the same library primitives:

  risk-set     keep every subject still under observation after their
               first event, put them on the total-time scale
               min(w1 + w2, tau), let delta2 mark the events, weight by
               the stabilized treatment weights. This is what the
               simulation harness does.

  complete     keep only subjects with delta2 = 1 and fit the observed
               gap w2 directly. The selection is outcome-dependent, so
               this is biased low, badly.

  complete+icw complete-case again, but multiplied by inverse-of-
               censoring ratio weights fit on the observed covariates.
               The censoring model involves the drifted covariate,
               whose tails are heavy, so a handful of subjects get
               enormous weights and the estimate destabilises.

All three inherit the upward bias that censoring itself induces (the
risk sets get thinner exactly where the drift matters most); the point
of the comparison is which analysis keeps that bias bounded and
tau-monotone without blowing up the variance.

Run time: about a minute.
"""

import numpy as np

from recurweight.coxfit import (
    CoxConvergenceError,
    MonotoneLikelihoodError,
    SurvivalSample,
    fit_weighted_cox,
)
from recurweight.iptw import (
    WeightModelError,
    build_censoring_weights,
    build_treatment_weights,
)
from recurweight.simgen import config_for, gen_dataset
from recurweight.statcore import RngStream, SeparationError

REPS = 40
N = 6_000
SEED = 424
TRUTH = 0.2085  # marginal event-2 log hr for beta_c = 0.4599

FAILURES = (SeparationError, WeightModelError,
            MonotoneLikelihoodError, CoxConvergenceError)


def one_replicate(tau, rep):
    cfg = config_for(3, prevalence=0.25, n_subjects=N, beta_c=0.4599, tau=tau)
    ds = gen_dataset(cfg, RngStream(SEED, rep))
    wts = build_treatment_weights(ds, cfg.scenario)
    cwts = build_censoring_weights(ds, tau)
    subjects = np.arange(N)
    z2 = ds["z2"].astype(float)

    out = {}

    # risk-set: everyone past their first event, total-time scale
    obs = ds["delta1"] == 1
    out["risk-set"] = SurvivalSample(
        time=np.minimum(ds["w1"] + ds["w2"], tau)[obs],
        event=ds["delta2"][obs].astype(float),
        treatment=z2[obs],
        weight=wts.sw2[obs],
        cluster=subjects[obs],
    )

    # complete-case: fully observed second gaps only
    cc = ds["delta2"] == 1
    out["complete"] = SurvivalSample(
        time=ds["w2"][cc],
        event=np.ones(cc.sum()),
        treatment=z2[cc],
        weight=wts.sw2[cc],
        cluster=subjects[cc],
    )

    # complete-case with inverse-of-censoring ratio weights folded in
    # (sw2_dag is zero off the complete cases, and zero-weight rows are
    # dropped by the fitter, so no explicit subsetting needed)
    out["complete+icw"] = SurvivalSample(
        time=ds["w2"],
        event=np.ones(N),
        treatment=z2,
        weight=wts.sw2 * cwts.sw2_dag,
        cluster=subjects,
    )
    return out


def main():
    print(f"event-2 truth: {TRUTH:+.4f}  ({REPS} replicates of n = {N})")
    print()
    for tau in (1.0, 0.25):
        ests = {"risk-set": [], "complete": [], "complete+icw": []}
        max_icw = 0.0
        for rep in range(REPS):
            samples = one_replicate(tau, rep)
            max_icw = max(max_icw, samples["complete+icw"].weight.max())
            for name, sample in samples.items():
                try:
                    ests[name].append(fit_weighted_cox(sample).log_hr)
                except FAILURES:
                    pass
        print(f"tau = {tau}  (largest composed icw weight seen: {max_icw:.0f})")
        for name, vals in ests.items():
            vals = np.asarray(vals)
            bias = (vals.mean() - TRUTH) / TRUTH * 100.0
            print(f"  {name:<13} mean {vals.mean():+.4f}  bias {bias:+7.1f}%  "
                  f"sd {vals.std(ddof=1):.4f}  fits {len(vals)}/{REPS}")
        print()
    print("complete-case sits 40-50% below the truth at both cutoffs. the")
    print("icw repair buys back some location at the long cutoff but at")
    print("double the spread, and at the short cutoff it fixes nothing")
    print("while tripling it. the risk-set analysis keeps a moderate,")
    print("tau-monotone upward bias with stable variance, which is why")
    print("the harness uses it.")


if __name__ == "__main__":
    main()
