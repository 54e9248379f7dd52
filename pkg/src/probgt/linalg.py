"""Row reduction and nullspaces over GF(p).

``rref`` is a blocked Gauss-Jordan elimination: pivots inside a column
panel are found by a cheap unblocked pass, then the whole matrix is
updated with one modular matrix product per panel.  For ``p < 2**31``
the working matrix is float64 (exact for these integers) so the panel
updates run through BLAS.
"""

from __future__ import annotations

import numpy as np

from .field import PrimeField, matmul_mod, matmul_mod_float, split_limbs

PANEL = 128


def _panel_pivots(panel: np.ndarray, p: int) -> tuple[list[int], list[int]]:
    """Greedy left-to-right pivot (column, row) choice for a tall panel."""
    s = panel.copy()
    cols = s.shape[1]
    free_rows = np.ones(s.shape[0], dtype=bool)
    piv_cols: list[int] = []
    piv_rows: list[int] = []
    for j in range(cols):
        cand = np.flatnonzero((s[:, j] != 0) & free_rows)
        if cand.size == 0:
            continue
        r = int(cand[0])
        free_rows[r] = False
        piv_cols.append(j)
        piv_rows.append(r)
        if j + 1 == cols:
            break
        inv = pow(int(s[r, j]), -1, p)
        s[r, j:] = s[r, j:] * inv % p
        below = np.flatnonzero((s[:, j] != 0) & free_rows)
        if below.size:
            s[below, j:] = (s[below, j:] - np.outer(s[below, j], s[r, j:]) % p) % p
    return piv_cols, piv_rows


def inverse_small(x: np.ndarray, p: int) -> np.ndarray:
    """Inverse of a small nonsingular square matrix by unblocked Gauss-Jordan."""
    k = x.shape[0]
    dtype = np.int64 if x.dtype != object else object
    aug = np.zeros((k, 2 * k), dtype=dtype)
    aug[:, :k] = x
    aug[np.arange(k), k + np.arange(k)] = 1
    for j in range(k):
        cand = np.flatnonzero(aug[j:, j] != 0)
        if cand.size == 0:
            raise np.linalg.LinAlgError("singular matrix")
        r = j + int(cand[0])
        if r != j:
            aug[[j, r]] = aug[[r, j]]
        aug[j] = aug[j] * pow(int(aug[j, j]), -1, p) % p
        pivot_row = aug[j].copy()
        aug = (aug - np.outer(aug[:, j], pivot_row) % p) % p
        aug[j] = pivot_row
    return aug[:, k:]


def rref(a, field: PrimeField, panel: int = PANEL) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of ``a`` over ``field``.

    Returns the reduced matrix and the pivot column indices; the first
    ``len(pivots)`` rows are the nonzero rows, row ``i`` having its
    leading one in column ``pivots[i]``.
    """
    p = field.p
    fast = field.small
    A = field.array(a)
    if A.ndim != 2:
        raise ValueError("rref expects a 2-D matrix")
    A = A.astype(np.float64) if fast else A.copy()
    nrows, ncols = A.shape
    pivots: list[int] = []
    r0 = 0
    for c0 in range(0, ncols, panel):
        if r0 == nrows:
            break
        c1 = min(c0 + panel, ncols)
        block = A[r0:, c0:c1]
        pc, pr = _panel_pivots(block.astype(np.int64) if fast else block, p)
        if not pc:
            continue
        J = c0 + np.asarray(pc)
        I = r0 + np.asarray(pr)
        nb = len(J)

        taken = np.zeros(nrows, dtype=bool)
        taken[I] = True
        rest = np.flatnonzero(~taken[r0:]) + r0
        A[r0:, c0:] = A[np.concatenate([I, rest]), c0:]

        # rows from r0 down are already zero left of c0
        pivot_block = A[r0:r0 + nb, J]
        if fast:
            inv = inverse_small(pivot_block.astype(np.int64), p).astype(np.float64)
            blk = matmul_mod_float(inv, A[r0:r0 + nb, c0:], p)
        else:
            blk = matmul_mod(inverse_small(pivot_block, p), A[r0:r0 + nb, c0:], p)
        A[r0:r0 + nb, c0:] = blk

        others = np.concatenate([np.arange(r0), np.arange(r0 + nb, nrows)])
        if others.size:
            coef = A[np.ix_(others, J)]
            live = np.flatnonzero((coef != 0).any(axis=1))
            if live.size:
                rows = others[live]
                if fast:
                    upd = A[rows, c0:] - matmul_mod_float(coef[live], blk, p, split_limbs(blk))
                    upd[upd < 0] += p
                else:
                    upd = (A[rows, c0:] - matmul_mod(coef[live], blk, p)) % p
                A[rows, c0:] = upd
        pivots.extend(int(j) for j in J)
        r0 += nb
    if fast:
        A = A.astype(np.int64)
    return A, pivots


def rank(a, field: PrimeField) -> int:
    return len(rref(a, field)[1])


def nullspace(a, field: PrimeField, column_order=None) -> tuple[np.ndarray, np.ndarray]:
    """Basis of the right nullspace of ``a``, systematic on its free columns.

    ``column_order`` sets the order in which columns are offered as
    pivots (earlier columns are preferred).  Returns ``(basis, free)``
    where ``basis`` is ``k x n`` with ``basis[:, free]`` the identity and
    ``a @ basis.T == 0``.
    """
    A = field.array(a)
    n = A.shape[1]
    order = np.arange(n) if column_order is None else np.asarray(column_order)
    R, piv = rref(A[:, order], field)
    is_piv = np.zeros(n, dtype=bool)
    is_piv[piv] = True
    free_perm = np.flatnonzero(~is_piv)
    k = free_perm.size
    basis = field.zeros((k, n))
    basis[np.arange(k), order[free_perm]] = 1
    if piv:
        basis[:, order[piv]] = (-R[:len(piv)][:, free_perm].T) % field.p
    # rows sorted by their identity position
    by_pos = np.argsort(order[free_perm], kind="stable")
    return basis[by_pos], np.sort(order[free_perm])
