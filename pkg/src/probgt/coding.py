"""Sparse parity-check codes built from a group-testing contact matrix.

The parity matrix keeps the contact matrix's support and puts an
independent uniform nonzero field element on every one.  The generator
is systematic: ``G[:, S]`` is the identity for the systematic positions
``S``, and ``parity @ G.T == 0``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field import PrimeField, matmul_mod
from .gt_core import ContactMatrix, TestMatrix
from .linalg import nullspace

MAX_RESAMPLES = 16

MAGIC = b"PGTM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")


class ParityMatrix(TestMatrix):
    """Field-valued ``M x n`` matrix sharing the support of a contact matrix.

    ``values[e]`` is the entry at row ``entry_rows()[e]``, column ``indices[e]``.
    """

    def __init__(self, indptr, indices, values, n: int, m: int, field: PrimeField):
        super().__init__(indptr, indices, n, m)
        self.values = np.asarray(values, dtype=field.dtype)
        self.field = field
        if self.values.shape != self.indices.shape:
            raise ValueError("one value per support entry")

    @property
    def p(self) -> int:
        return self.field.p

    def row_values(self, i: int) -> np.ndarray:
        return self.values[self.indptr[i]:self.indptr[i + 1]]

    def entry(self, i: int, j: int) -> int:
        sup = self.row_support(i)
        k = np.searchsorted(sup, j)
        if k < sup.size and sup[k] == j:
            return int(self.row_values(i)[k])
        return 0

    def to_field_dense(self) -> np.ndarray:
        out = self.field.zeros(self.shape)
        out[self.entry_rows(), self.indices] = self.values
        return out

    def support_matrix(self) -> ContactMatrix:
        return ContactMatrix(self.indptr, self.indices, self.n, self.m)

    @classmethod
    def from_field_dense(cls, entries, field: PrimeField, m: int | None = None) -> ParityMatrix:
        entries = field.array(entries)
        rows, cols = np.nonzero(entries != 0)
        indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=entries.shape[0]))])
        return cls(indptr, cols, entries[rows, cols], entries.shape[1],
                   entries.shape[0] if m is None else m, field)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    entries: np.ndarray  # (k, n)
    systematic_positions: np.ndarray  # (k,), increasing
    field: PrimeField

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def standard(self) -> bool:
        """True when the layout is ``[I | R]`` (systematic on the first k workers)."""
        return np.array_equal(self.systematic_positions, np.arange(self.k))


@dataclass(frozen=True, eq=False)
class EncodedShares:
    shares: np.ndarray  # (n, s, c)
    r: int  # rows of the original data matrix, before padding

    @property
    def s(self) -> int:
        return self.shares.shape[1]

    @property
    def c(self) -> int:
        return self.shares.shape[2]

    def __getitem__(self, w: int) -> np.ndarray:
        return self.shares[w]

    def __len__(self):
        return self.shares.shape[0]


def build_parity_matrix(contact: ContactMatrix, field: PrimeField, rng: np.random.Generator) -> ParityMatrix:
    values = field.random_array(rng, contact.nnz, nonzero=True)
    return ParityMatrix(contact.indptr, contact.indices, values, contact.n, contact.m, field)


def _parity_column_order(n: int, M: int) -> np.ndarray:
    # offer the last M columns as pivots first so that an invertible
    # trailing block yields the [I | R] layout
    split = max(n - M, 0)
    return np.concatenate([np.arange(split, n), np.arange(0, split)])


def build_generator(parity: ParityMatrix) -> GeneratorMatrix:
    """Systematic generator of the code whose parity checks are the rows of ``parity``.

    ``k = n - rank(parity)``.  When the trailing ``M x M`` block ``H2`` of
    ``parity = [H1 | H2]`` is invertible the result is ``[I | -(H2^-1 H1)^T]``;
    otherwise the identity sits on the non-pivot columns of a row reduction.
    """
    if parity.M < 1:
        raise ValueError("parity matrix has no rows")
    basis, free = nullspace(parity.to_field_dense(), parity.field,
                            column_order=_parity_column_order(parity.n, parity.M))
    if basis.shape[0] == 0:
        raise ValueError("parity matrix has full column rank; the code is empty")
    return GeneratorMatrix(basis, free, parity.field)


def _structurally_singular(contact: TestMatrix) -> bool:
    """True when the trailing block has an all-zero row or column for any choice of values."""
    M, n = contact.M, contact.n
    if M > n:
        return True
    split = n - M
    rows = contact.entry_rows()
    tail = contact.indices >= split
    row_hit = np.bincount(rows[tail], minlength=M) > 0
    col_hit = np.bincount(contact.indices[tail] - split, minlength=M) > 0
    return not (row_hit.all() and col_hit.all())


def build_code(contact: ContactMatrix, field: PrimeField, rng: np.random.Generator,
               max_resamples: int = MAX_RESAMPLES) -> tuple[ParityMatrix, GeneratorMatrix]:
    """Parity matrix and generator, resampling the nonzero values when the trailing block is singular.

    A singular trailing block that the support itself forces is not
    resampled; the generator then uses non-standard systematic positions.
    """
    forced = _structurally_singular(contact)
    attempts = 1 if forced else 1 + max_resamples
    for _ in range(attempts):
        parity = build_parity_matrix(contact, field, rng)
        gen = build_generator(parity)
        if gen.standard and gen.k == contact.n - contact.M:
            break
    return parity, gen


def encode(B, generator: GeneratorMatrix) -> EncodedShares:
    """Split ``B`` into ``k`` row blocks and give worker ``w`` the combination ``sum_j G[j, w] B_j``.

    ``B`` is zero-padded to a multiple of ``k`` rows when needed.
    """
    field = generator.field
    B = field.array(B)
    if B.ndim != 2:
        raise ValueError("B must be a matrix")
    r, c = B.shape
    k, n = generator.k, generator.n
    s = -(-r // k)
    if s * k != r:
        B = np.concatenate([B, field.zeros((s * k - r, c))])
    blocks = B.reshape(k, s * c)
    shares = field.zeros((n, s * c))
    S = generator.systematic_positions
    shares[S] = blocks
    rest = np.setdiff1d(np.arange(n), S)
    if rest.size:
        shares[rest] = matmul_mod(generator.entries[:, rest].T, blocks, field.p)
    return EncodedShares(shares.reshape(n, s, c), r)


# flat binary matrix files: header then row-major little-endian 8-byte values

def write_matrix(target, matrix, p: int) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("only 2-D matrices are serialised")
    rows, cols = matrix.shape
    payload = np.ascontiguousarray(matrix.astype(np.uint64)).astype("<u8").tobytes()
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, p, rows, cols)
    if isinstance(target, (str, Path)):
        Path(target).write_bytes(header + payload)
    else:
        target.write(header + payload)


def read_matrix(source) -> tuple[np.ndarray, int]:
    """Inverse of :func:`write_matrix`; returns ``(matrix, p)``."""
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    magic, version, p, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not a matrix file")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported matrix file version {version}")
    body = np.frombuffer(data, dtype="<u8", offset=_HEADER.size, count=rows * cols)
    values = body.astype(np.int64) if p < 2**63 else body
    return values.reshape(rows, cols), p


def dump_code(directory, parity: ParityMatrix, generator: GeneratorMatrix, shares: EncodedShares) -> None:
    """Write ``parity.bin``, ``generator.bin`` and ``shares.bin`` (worker ``w`` in rows ``w*s..(w+1)*s-1``)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    p = parity.p
    write_matrix(directory / "parity.bin", parity.to_field_dense(), p)
    write_matrix(directory / "generator.bin", generator.entries, p)
    sh = shares.shares
    write_matrix(directory / "shares.bin", sh.reshape(sh.shape[0] * sh.shape[1], sh.shape[2]), p)
    (directory / "systematic_positions.txt").write_text(
        "\n".join(str(int(w)) for w in generator.systematic_positions) + "\n")


def matrix_bytes(matrix, p: int) -> bytes:
    buf = io.BytesIO()
    write_matrix(buf, matrix, p)
    return buf.getvalue()
