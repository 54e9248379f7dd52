# %% [markdown]
# # Closed-form score statistics
#
# `h(x, q, m, alpha)` is the probability that a tested worker's slot test
# is positive when `x` other unreliable workers are present. It drives
# the expected totals `mu_f` (reliable) and `mu_m` (unreliable).

# %%
from probgt import analysis
from probgt.gt_core import ExperimentParams
from probgt.harness import run_theory_comparison

params = ExperimentParams(n=200, L=10, alpha=0.3, theta=0.15, m=50, Z=200)
print(analysis.expected_scores(params), params.d)

# %% [markdown]
# `h` grows with the number of other unreliable workers and with the
# attack probability.

# %%
for x in (0, 2, 5, 9):
    print(x, round(analysis.h(x, params.q, params.m, params.alpha), 4))

# %% [markdown]
# The bound grid checks the inequalities on `h` at 160 parameter points.

# %%
reports = [rep for *_, rep in analysis.bound_grid()]
print(sum(rep.ok for rep in reports), "of", len(reports), "points satisfy every bound")

# %% [markdown]
# Monte Carlo agrees with the closed forms to within a few standard errors.

# %%
for row in run_theory_comparison(params, 500, seed=3):
    print(f"{row['quantity']:>18}  theory {row['theory']:.4f}  z {row['z_score']:+.2f}")
