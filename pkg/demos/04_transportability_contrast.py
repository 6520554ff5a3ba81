"""When the transportability baseline cries wolf and this test does not.

The baseline falsification strategy checks whether the outcome mechanism is
invariant across environments (a nested-model F-test here). That implication
fails whenever outcome mechanisms genuinely differ between environments --
even with no confounding at all. The mechanism-independence test only needs
the changes to be independent, so it stays quiet on the same data.

Runtime: ~1 minute (40 repetitions per cell).
"""

import numpy as np

import mechindep as mi

REPS = 40
K, N = 50, 100
PSI, PHI = mi.treatment_spec(1), mi.outcome_spec(1)


def rates(resample_beta_intercept):
    config = mi.PolynomialConfig(
        K, N, n_covariates=1, degree=1, confounded=False,
        resample_beta_intercept=resample_beta_intercept,
    )
    transp, mint = [], []
    for r in range(REPS):
        dataset, _ = mi.generate_polynomial(config, np.random.default_rng([40, r]))
        transp.append(mi.transportability_test(dataset, PHI).reject)
        mint.append(mi.mint_test(dataset, PSI, PHI, M=300, seed=r).reject)
    return float(np.mean(transp)), float(np.mean(mint))


print(f"No unmeasured confounding anywhere; K={K}, N={N}, {REPS} repetitions.")
print()
print("Outcome mechanism shared across environments (transportability holds):")
t, m = rates(resample_beta_intercept=False)
print(f"  transportability test rejects {t:.2f}   mechanism-independence rejects {m:.2f}")
print()
print("Outcome intercept redrawn per environment (transportability violated,")
print("still no confounding -- think unmeasured effect modifiers):")
t, m = rates(resample_beta_intercept=True)
print(f"  transportability test rejects {t:.2f}   mechanism-independence rejects {m:.2f}")
print()
print("The baseline attributes any outcome-mechanism shift to broken")
print("assumptions; the independence test tolerates shifts as long as the")
print("treatment- and outcome-side changes carry no shared information.")
