"""Which cross-environment changes make hidden confounding detectable?

Theory says: with a confounder present, dependence between the fitted
treatment and outcome parameters appears when a treatment-side quantity
(treatment intercept/slope, confounder loading, confounder mean) varies
across environments -- and stays invisible when only outcome-side
coefficients vary. This script sweeps which parameter varies and reports
the falsification rate for each.

Runtime: ~2 minutes (25 repetitions per condition).
"""

import mechindep as mi

REPS = 25
PARAMS = ["alpha0", "alpha_x", "alpha_u", "mu_u", "beta0", "beta_a", "beta_u"]

config = mi.experiment_config_from_dict(
    {
        "schema_version": 1,
        "generator": "linear_example",
        "generator_params": {
            "n_envs": 50,
            "n_per_env": 1000,
            "alpha_u": 0.25,
            "beta_u": 0.25,
            "beta_au": 0.25,
        },
        "method": "mint",
        "method_params": {"alpha": 0.05, "resamples": 300},
        "sweep": {"axis": "varying_parameter", "values": PARAMS},
        "repetitions": REPS,
        "seed": 20,
    }
)

print(f"Confounder present in every environment; {REPS} repetitions per row.")
print(f"{'varying parameter':<20} {'falsification rate':>20}")
for row in mi.run_benchmark(config, threads=2):
    bar = "#" * int(round(20 * row.falsification_rate))
    side = "treatment-side" if row.value in ("alpha0", "alpha_x", "alpha_u", "mu_u") else "outcome-side"
    print(f"{row.value:<20} {row.falsification_rate:>8.2f}  {bar:<20} ({side})")

print()
print("Treatment-side variation exposes the confounder; outcome-side-only")
print("variation leaves the fitted treatment parameters constant, so the")
print("cross-covariance stays at zero and the test correctly stays quiet.")
