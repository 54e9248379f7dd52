# %% [markdown]
# # Error rate along a parameter axis
#
# Each sweep point runs independent seeded trials and reports the error
# rate with a 95% Wilson interval. Output is the same CSV the CLI writes.

# %%
from probgt.gt_core import ExperimentParams
from probgt.harness import SWEEP_COLUMNS, SweepSpec, format_csv, run_grouptest_sweep

base = ExperimentParams(n=200, L=3, alpha=0.5, theta=0.15, m=20, Z=40)
rows = run_grouptest_sweep(SweepSpec("Z", (10, 40, 160), 40, base), seed=4)
print(format_csv(rows, SWEEP_COLUMNS))

# %% [markdown]
# More tested slots drive the error rate down.

# %%
for row in rows:
    print(row["point"], row["error_rate"], (round(row["wilson_ci_low"], 3), round(row["wilson_ci_high"], 3)))
