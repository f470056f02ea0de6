"""Deciding between two architectures with the pooled t-test.

Cross-validation MAE fluctuates fold to fold, so "config A scored lower
than config B" is meaningless without asking whether the difference exceeds
the noise.  The test pools the two runs' fold variances,

    S_P = sqrt(((N-1) Var_1 + (N-1) Var_2) / (2N - 2)),
    T   = (<MAE_1> - <MAE_2>) / (S_P sqrt(2/N)),

and rejects equal means when T > t_0.05(2N-2).  When the test does not
reject, the cheaper architecture wins by Occam's razor.

Run:  python demos/04_hyperparameter_ttest.py
"""

import numpy as np

from olivenet import compare_configs, pooled_sd, t_critical, t_statistic
from olivenet.stats import report_text

rng = np.random.default_rng(42)
n_oil = 22

# Per-fold validation MAE of two hypothetical configurations.  The second
# one is 10% better on average, but fold-to-fold noise is of comparable size.
run_a = np.abs(rng.normal(0.12, 0.035, n_oil))
run_b = np.abs(rng.normal(0.108, 0.035, n_oil))

report = compare_configs(run_a, run_b, alpha=0.05)
print(report_text(report))

crit = t_critical(0.05, 2 * n_oil - 2)
print(f"one-sided 5% critical value at dof {2*n_oil - 2}: {crit:.6f}")
if report.reject_equal_means:
    print("verdict: the runs differ; keep the lower-MAE configuration")
else:
    print("verdict: statistically indistinguishable; Occam's razor keeps the\n"
          "smaller network (fewer filters / parameters)")

# The ingredients are exposed separately for scripting:
sp = pooled_sd(run_a.var(ddof=1), run_b.var(ddof=1), n_oil)
t = t_statistic(run_a.mean(), run_b.mean(), sp, n_oil)
print(f"\nrecomputed by hand: S_P = {sp:.5f}, T = {t:.4f}")

# And an honestly large effect, for contrast:
run_c = run_a + 10.0 * run_a.std(ddof=1)
print("\nafter shifting one run by 10 standard deviations:")
print(report_text(compare_configs(run_c, run_a)).splitlines()[-1])
