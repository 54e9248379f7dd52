"""Exact arithmetic in a prime field GF(p).

Scalars are :class:`FieldElement` values; bulk work goes through the
array helpers on :class:`PrimeField`, which keep numpy ``int64`` arrays
with canonical entries in ``[0, p)``.

For ``p < 2**31`` every product of two canonical values fits in a signed
64-bit integer, so array kernels stay in ``int64``.  Larger moduli (up to
``2**62``) fall back to object arrays of Python ints: exact, but slow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_PRIME = 2147483647  # 2**31 - 1
MAX_PRIME = 2**62
INT64_LIMIT = 2**31

_LIMB = 16
_LIMB_BASE = 1 << _LIMB
# exact float64 accumulation of K products of (2**17)-bounded limbs
_MAX_INNER = 2**18


class FieldMismatchError(ValueError):
    """Operands belong to different prime fields."""


def is_prime(p: int) -> bool:
    from sympy import isprime

    return bool(isprime(int(p)))


@dataclass(frozen=True)
class FieldElement:
    value: int
    p: int

    def __post_init__(self):
        if not 0 <= self.value < self.p:
            raise ValueError(f"{self.value} is not a canonical residue mod {self.p}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.p != self.p:
                raise FieldMismatchError(f"modulus {other.p} != {self.p}")
            return other.value
        if isinstance(other, (int, np.integer)):
            return int(other) % self.p
        return NotImplemented

    def __add__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((self.value + v) % self.p, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((self.value - v) % self.p, self.p)

    def __rsub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((v - self.value) % self.p, self.p)

    def __mul__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement(self.value * v % self.p, self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value % self.p, self.p)

    def inverse(self) -> FieldElement:
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse")
        # CPython computes modular inverses with the extended Euclidean algorithm
        return FieldElement(pow(self.value, -1, self.p), self.p)

    def __truediv__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return self * FieldElement(v, self.p).inverse()

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.p == other.p and self.value == other.value
        if isinstance(other, (int, np.integer)):
            return self.value == int(other) % self.p
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.p))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"FieldElement({self.value} mod {self.p})"


class PrimeField:
    """The prime field GF(p) with scalar and numpy-array operations."""

    def __init__(self, p: int = DEFAULT_PRIME):
        p = int(p)
        if p < 3:
            raise ValueError(f"field modulus must be an odd prime >= 3, got {p}")
        if p >= MAX_PRIME:
            raise ValueError(f"field modulus must be < 2**62, got {p}")
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        self.p = p
        self.small = p < INT64_LIMIT

    def __repr__(self):
        return f"PrimeField({self.p})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self):
        return hash(("PrimeField", self.p))

    def __call__(self, value) -> FieldElement:
        return FieldElement(int(value) % self.p, self.p)

    # scalar operations

    def _check(self, a) -> FieldElement:
        if isinstance(a, FieldElement):
            if a.p != self.p:
                raise FieldMismatchError(f"modulus {a.p} != {self.p}")
            return a
        return self(a)

    def add(self, a, b) -> FieldElement:
        return self._check(a) + self._check(b)

    def sub(self, a, b) -> FieldElement:
        return self._check(a) - self._check(b)

    def mul(self, a, b) -> FieldElement:
        return self._check(a) * self._check(b)

    def neg(self, a) -> FieldElement:
        return -self._check(a)

    def inv(self, a) -> FieldElement:
        return self._check(a).inverse()

    def rand(self, rng: np.random.Generator) -> FieldElement:
        return FieldElement(int(rng.integers(0, self.p)), self.p)

    def rand_nonzero(self, rng: np.random.Generator) -> FieldElement:
        while True:
            v = int(rng.integers(0, self.p))
            if v:
                return FieldElement(v, self.p)

    # array operations

    @property
    def dtype(self):
        return np.int64 if self.small else object

    def array(self, values) -> np.ndarray:
        """Canonical field array from integers (any sign)."""
        if self.small:
            return np.mod(np.asarray(values, dtype=np.int64), self.p)
        a = np.asarray(values, dtype=object)
        return np.vectorize(lambda v: int(v) % self.p, otypes=[object])(a) if a.size else a

    def zeros(self, shape) -> np.ndarray:
        if self.small:
            return np.zeros(shape, dtype=np.int64)
        out = np.empty(shape, dtype=object)
        out.fill(0)
        return out

    def random_array(self, rng: np.random.Generator, shape, nonzero: bool = False) -> np.ndarray:
        """Uniform entries over GF(p), or over GF(p) minus zero when ``nonzero``."""
        if self.small:
            lo = 1 if nonzero else 0
            return rng.integers(lo, self.p, size=shape, dtype=np.int64)
        # rng.integers is limited to int64, which covers p < 2**62
        lo = 1 if nonzero else 0
        return rng.integers(lo, self.p, size=shape, dtype=np.int64).astype(object)

    def mul_arrays(self, a, b) -> np.ndarray:
        if self.small:
            return (np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)) % self.p
        return (np.asarray(a, dtype=object) * np.asarray(b, dtype=object)) % self.p

    def add_arrays(self, a, b) -> np.ndarray:
        if self.small:
            return (np.asarray(a, dtype=np.int64) + np.asarray(b, dtype=np.int64)) % self.p
        return (np.asarray(a, dtype=object) + np.asarray(b, dtype=object)) % self.p

    def sub_arrays(self, a, b) -> np.ndarray:
        if self.small:
            return (np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)) % self.p
        return (np.asarray(a, dtype=object) - np.asarray(b, dtype=object)) % self.p

    def matmul(self, a, b) -> np.ndarray:
        return matmul_mod(a, b, self.p)

    def inv_array(self, a) -> np.ndarray:
        flat = [pow(int(v), -1, self.p) for v in np.ravel(a)]
        return np.asarray(flat, dtype=self.dtype).reshape(np.shape(a))


def reduce_float(x: np.ndarray, p: int) -> np.ndarray:
    """``x mod p`` for float64 arrays holding exact non-negative integers below ``2**53``."""
    r = x - np.floor(x * (1.0 / p)) * p
    r[r < 0] += p
    r[r >= p] -= p
    return r


def split_limbs(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """High and low 16-bit halves of a float64 array of integers below ``2**31``."""
    hi = np.floor(a * (1.0 / _LIMB_BASE))
    return hi, a - hi * _LIMB_BASE


def matmul_mod_float(a: np.ndarray, b: np.ndarray, p: int, b_limbs=None) -> np.ndarray:
    """Exact ``a @ b mod p`` on float64 arrays of canonical residues, ``p < 2**31``.

    Operands are split into 16-bit limbs and multiplied with three
    Karatsuba products; every partial sum stays below ``2**53``.
    """
    inner = a.shape[-1]
    if inner > _MAX_INNER:
        out = None
        for start in range(0, inner, _MAX_INNER):
            part = matmul_mod_float(a[..., start:start + _MAX_INNER], b[start:start + _MAX_INNER], p)
            out = part if out is None else reduce_float(out + part, p)
        return out
    ah, al = split_limbs(a)
    bh, bl = split_limbs(b) if b_limbs is None else b_limbs
    hh = ah @ bh
    ll = al @ bl
    mid = (ah + al) @ (bh + bl)
    mid -= hh
    mid -= ll
    # ((hh * 2**16 + mid) * 2**16 + ll) mod p, reducing before each shift
    out = reduce_float(hh, p)
    out *= _LIMB_BASE
    out += mid
    out = reduce_float(out, p)
    out *= _LIMB_BASE
    out += ll
    return reduce_float(out, p)


def matmul_mod(a, b, p: int) -> np.ndarray:
    """Exact ``a @ b mod p`` for canonical operands."""
    if p >= INT64_LIMIT:
        a = np.asarray(a, dtype=object)
        b = np.asarray(b, dtype=object)
        return np.dot(a, b) % p
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1] + b.shape[1:], dtype=np.int64)
    out = matmul_mod_float(a.astype(np.float64), b.astype(np.float64), p)
    return out.astype(np.int64)
