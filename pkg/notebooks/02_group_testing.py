# %% [markdown]
# # Noisy group testing for unreliable workers
#
# Every slot runs `m` Bernoulli tests. A test is positive when it contains
# a worker that is attacked in that slot. Scores reward a worker for being
# in positive tests, and a fixed threshold on the total flags it.

# %%
import warnings

import numpy as np

from probgt.gt_core import (
    choose_unreliable,
    derive_sampling_matrix,
    evaluate_tests,
    generate_contact_matrix,
    sample_attacks,
    score_slots,
    select_parameters,
    threshold_decode,
)

# pure group testing needs no code, so the M >= n warning does not apply
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    params = select_parameters(200, 3, 0.5)
print(params.m, params.Z, params.M, round(params.d, 3))

# %%
rng = np.random.default_rng(1)
unreliable = choose_unreliable(params, rng)
contact = generate_contact_matrix(params, rng)
schedule = sample_attacks(params, unreliable, rng)
y = evaluate_tests(derive_sampling_matrix(contact, schedule), schedule.indicator(params.n))
scores = score_slots(contact, y, params.epsilon)
flagged = threshold_decode(scores, params.d)
print("unreliable", sorted(unreliable.tolist()), "flagged", sorted(flagged.tolist()))

# %% [markdown]
# Total scores separate the two groups: unreliable workers collect a
# score of one in most slots where they are tested.

# %%
totals = scores.totals
mask = np.zeros(params.n, dtype=bool)
mask[unreliable] = True
print("reliable max", totals[~mask].max().round(2), "unreliable min", totals[mask].min().round(2))
