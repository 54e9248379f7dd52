# %% [markdown]
# # Prime-field arithmetic
#
# Scalars live in `PrimeField`; bulk work uses plain `int64` arrays with
# an exact modular matrix product. The default modulus is `2**31 - 1`.

# %%
import numpy as np

from probgt.field import PrimeField, matmul_mod
from probgt.linalg import nullspace, rank, rref

F = PrimeField(257)
a, b = F(200), F(100)
print(a + b, a * b, a / b, a.inverse())

# %% [markdown]
# Arrays are reduced residues. `matmul_mod` stays exact even for the
# default 31-bit prime, where products overflow `int64`.

# %%
rng = np.random.default_rng(0)
big = PrimeField()
A = big.random_array(rng, (4, 6))
B = big.random_array(rng, (6, 3))
exact = [[sum(int(A[i, k]) * int(B[k, j]) for k in range(6)) % big.p for j in range(3)] for i in range(4)]
print(np.array_equal(matmul_mod(A, B, big.p), np.array(exact)))

# %% [markdown]
# Row reduction gives rank and a nullspace basis.

# %%
H = F.random_array(rng, (3, 7))
R, pivots = rref(H, F)
basis, free = nullspace(H, F)
print("rank", rank(H, F), "pivots", pivots, "nullity", basis.shape[0])
print("H @ basis.T == 0:", not matmul_mod(H, basis.T, F.p).any())
