"""Working-model specification: misspecification bites, flexibility costs power.

The data-generating process uses degree-2 polynomials. We test with working
models of degree 1 (misspecified), 2 (well-specified), and higher degrees
(well-specified but increasingly flexible), with and without a hidden
confounder. Also shown: the bootstrap stage of the calibration is what keeps
the flexible-model false-positive rate down.

Runtime: ~3 minutes (20 repetitions per cell).
"""

import numpy as np

import mechindep as mi

REPS = 20
K, N = 40, 150


def rate(degree, confounded, use_bootstrap=True, n_envs=K, n_per_env=N, reps=REPS):
    rejects = []
    psi = mi.treatment_spec(degree)
    phi = mi.outcome_spec(degree)
    config = mi.PolynomialConfig(
        n_envs, n_per_env, n_covariates=1, degree=2, confounded=confounded
    )
    for r in range(reps):
        dataset, _ = mi.generate_polynomial(config, np.random.default_rng([30, degree, r]))
        result = mi.mint_test(
            dataset, psi, phi, alpha=0.05, M=500, seed=r, use_bootstrap=use_bootstrap
        )
        rejects.append(result.reject)
    return float(np.mean(rejects))


print(f"True process: degree-2 polynomials, K={K} environments, N={N} samples.")
print(f"{'working degree':<16} {'no confounder':>15} {'confounder':>12}")
for degree in (1, 2, 4, 6):
    null_rate = rate(degree, confounded=False)
    power = rate(degree, confounded=True)
    note = "  <- misspecified" if degree < 2 else ""
    print(f"{degree:<16} {null_rate:>15.2f} {power:>12.2f}{note}")

print()
print("Degree 1 cannot represent the true mechanisms, so leftover structure")
print("masquerades as dependence (false positives). From degree 2 upward the")
print("test is calibrated; extra flexibility only trades away some power.")
print(f"(rates over {REPS} repetitions are noisy; the acceptance suite pins")
print("these behaviors at 200 repetitions)")

print()
print("Bootstrap ablation at a flexible degree (10), no confounder,")
print("smaller environments (K=20, N=100) where estimation noise bites:")
with_boot = rate(10, confounded=False, use_bootstrap=True,
                 n_envs=20, n_per_env=100, reps=40)
without_boot = rate(10, confounded=False, use_bootstrap=False,
                    n_envs=20, n_per_env=100, reps=40)
print(f"  with bootstrap refits:    false-positive rate {with_boot:.2f}")
print(f"  permutation only:         false-positive rate {without_boot:.2f}")
print("Refitting on resampled rows widens the null to cover estimation noise;")
print("skipping it makes the threshold too tight for noisy flexible fits.")
