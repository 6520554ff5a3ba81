"""Falsifying no-unmeasured-confounding on multi-environment data.

Walks through the core workflow: draw a multi-environment dataset, fit the
two working models per environment, look at the fitted-parameter
cross-covariance statistic, and run the calibrated test -- once on clean
data and once with a hidden common cause of treatment and outcome.

Runtime: ~15 seconds.
"""

import numpy as np

import mechindep as mi

SEED = 7

# Working models for the linear example: treatment is linear in X, the
# outcome model carries the interaction and squared-treatment columns that
# make it well-specified even under confounding.
PSI = mi.treatment_spec(degree=1)
PHI = mi.outcome_spec(degree=1, interactions=True, square=True)


def describe(result: mi.TestResult, label: str) -> None:
    verdict = "REJECT: mechanisms look dependent" if result.reject else "no rejection"
    print(f"  {label:<28} T = {result.statistic:.4f}  "
          f"threshold = {result.threshold:.4f}  p = {result.p_value:.4f}  -> {verdict}")


print("1. A clean world: treatment policies differ across environments,")
print("   but nothing unmeasured drives both treatment and outcome.")
clean = mi.LinearExampleConfig(
    n_envs=40, n_per_env=500, varying=frozenset({"alpha0"})
)
dataset, truth = mi.generate_linear_example(clean, np.random.default_rng(SEED))
print(f"   dataset: K={dataset.n_envs} environments, n_s={dataset.sizes[0]} each, "
      f"confounded={truth.confounded}")

fit = mi.fit_mechanisms(dataset, PSI, PHI)
print(f"   per-environment coefficient spreads: omega sd ~ "
      f"{fit.omegas.std(axis=0).round(3)}, gamma sd ~ {fit.gammas.std(axis=0).round(3)}")

result = mi.mint_test(dataset, PSI, PHI, alpha=0.05, M=500, seed=SEED)
describe(result, "clean data:")

print()
print("2. Same world plus an unmeasured variable feeding both A and Y.")
confounded = clean.confounded()  # switches the hidden-path coefficients on
dataset_c, truth_c = mi.generate_linear_example(confounded, np.random.default_rng(SEED))
result_c = mi.mint_test(dataset_c, PSI, PHI, alpha=0.05, M=500, seed=SEED)
describe(result_c, "confounded data:")

print()
print("3. Why this works: the hidden variable pushes shared quantities into")
print("   both fitted parameter vectors, so they co-vary across environments.")
print("   The closed-form oracle shows the population-level dependence:")
for alpha0 in (0.2, 1.0, 2.5):
    params = mi.OracleParams(
        alpha0=alpha0, alpha_x=1 / 3, alpha_u=0.25, mu_u=1.0, sigma_u=1.0,
        sigma_a=np.sqrt(0.125), beta=(0.5, 1 / 3, 0.5, 1 / 3),
        beta_u=0.25, beta_au=0.25,
    )
    omega, gamma = mi.lemma1_closed_form(params)
    print(f"   alpha0={alpha0:<4} ->  omega[0]={omega[0]:+.3f}   gamma[0]={gamma[0]:+.3f} "
          f"  gamma[A]={gamma[2]:+.3f}")
print("   (all three coefficients move together as the treatment intercept moves)")
