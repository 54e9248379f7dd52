# %% [markdown]
# # Sparse parity code from the test matrix
#
# The parity matrix keeps the contact matrix's support and draws
# nonzero field values. Its nullspace gives a systematic generator;
# each worker stores a linear combination of row blocks of `B`.

# %%
import numpy as np

from probgt.coding import build_code, encode
from probgt.field import PrimeField, matmul_mod
from probgt.gt_core import ExperimentParams, generate_contact_matrix

rng = np.random.default_rng(2)
F = PrimeField(65537)
params = ExperimentParams(n=60, L=2, alpha=0.5, theta=0.15, m=5, Z=4, prime=F.p)
parity, generator = build_code(generate_contact_matrix(params, rng), F, rng)
print("M", parity.M, "k", generator.k, "standard layout", generator.standard)
print("H G^T == 0:", not matmul_mod(parity.to_field_dense(), generator.entries.T, F.p).any())

# %% [markdown]
# Correct results `W^(w) v` satisfy every parity row.

# %%
B = F.random_array(rng, (2 * generator.k, 4))
shares = encode(B, generator)
v = F.random_array(rng, 4)
results = np.stack([matmul_mod(shares[w], v[:, None], F.p)[:, 0] for w in range(params.n)])
print("all checks zero:", not matmul_mod(parity.to_field_dense(), results, F.p).any())
