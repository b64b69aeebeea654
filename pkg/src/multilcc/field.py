"""Prime field arithmetic, seeded randomness and small dense linear algebra mod q."""

from __future__ import annotations

import zlib
from functools import lru_cache

import numpy as np

MERSENNE31 = 2147483647


class ZeroInverse(ZeroDivisionError):
    pass


class FieldTooSmall(ValueError):
    pass


@lru_cache(maxsize=None)
def _is_prime(q: int) -> bool:
    from sympy import isprime

    return bool(isprime(q))


class PrimeField:
    """The field F_q. Elements are plain Python ints in ``[0, q)``.

    Matrices over the field are numpy arrays. Storage is int64 when q < 2**31,
    which keeps every product of two residues inside int64; larger moduli fall
    back to object arrays of Python ints.
    """

    __slots__ = ("q", "dtype")

    def __init__(self, q: int):
        q = int(q)
        if q < 2 or not _is_prime(q):
            raise ValueError(f"modulus {q} is not prime")
        if q >= 2**63:
            raise ValueError("modulus must be below 2**63")
        self.q = q
        self.dtype = np.int64 if q < 2**31 else object

    def __repr__(self):
        return f"PrimeField({self.q})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self):
        return hash(("PrimeField", self.q))

    def __reduce__(self):
        return (PrimeField, (self.q,))

    # scalar arithmetic

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise ZeroInverse("0 has no multiplicative inverse")
        return pow(a, -1, self.q)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        return pow(a % self.q, e, self.q)

    def __call__(self, a: int) -> int:
        return int(a) % self.q

    # randomness

    def random_element(self, rng: np.random.Generator) -> int:
        return int(rng.integers(0, self.q))

    def random_nonzero(self, rng: np.random.Generator) -> int:
        return int(rng.integers(1, self.q))

    def random_matrix(self, rng: np.random.Generator, shape) -> np.ndarray:
        out = rng.integers(0, self.q, size=shape, dtype=np.int64)
        return out if self.dtype is np.int64 else out.astype(object)

    def random_nonzero_matrix(self, rng: np.random.Generator, shape) -> np.ndarray:
        while True:
            out = self.random_matrix(rng, shape)
            if np.any(out != 0):
                return out

    def random_nonzero_vector(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.random_nonzero_matrix(rng, (n,))

    # array helpers

    def array(self, values) -> np.ndarray:
        arr = np.array(values, dtype=object) % self.q
        return arr.astype(self.dtype)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=self.dtype)

    def dot(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``a @ b mod q`` for residue arrays, overflow-safe for int64 storage."""
        q = self.q
        if self.dtype is not np.int64:
            return np.matmul(a, b) % q
        inner = a.shape[-1]
        if inner * (q - 1) ** 2 < 2**63:
            return np.matmul(a, b) % q
        # Split b into 16-bit limbs so each partial sum stays below 2**63.
        if inner >= 2**16:
            raise OverflowError("inner dimension too large for int64 limb split")
        lo = b & 0xFFFF
        hi = b >> 16
        part_hi = (np.matmul(a, hi) % q) << 16
        return (part_hi % q + np.matmul(a, lo) % q) % q


def role_rng(seed: int, role: str) -> np.random.Generator:
    """Independent, replayable stream for one role (shares, keys, adversary...)."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFF, zlib.crc32(role.encode())])


# Dense linear algebra over F_q on lists of ints. Systems here are tiny
# (at most a few dozen unknowns) so plain Python is adequate.


def row_reduce(field: PrimeField, rows: list[list[int]], ncols: int) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form of the first ``ncols`` columns; returns (rows, pivot columns)."""
    q = field.q
    m = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, len(m)) if m[i][c] % q), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = pow(m[r][c], -1, q)
        m[r] = [(x * inv) % q for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] % q:
                f = m[i][c]
                m[i] = [(x - f * y) % q for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(field: PrimeField, rows: list[list[int]]) -> int:
    if not rows or not rows[0]:
        return 0
    _, pivots = row_reduce(field, rows, len(rows[0]))
    return len(pivots)


def solve(field: PrimeField, matrix: list[list[int]], rhs: list[int]) -> list[int] | None:
    """One solution of ``matrix @ x = rhs`` (free variables set to 0), or None if inconsistent."""
    ncols = len(matrix[0]) if matrix else 0
    aug = [list(row) + [b] for row, b in zip(matrix, rhs)]
    red, pivots = row_reduce(field, aug, ncols)
    for row in red[len(pivots):]:
        if row[-1] % field.q:
            return None
    x = [0] * ncols
    for row, c in zip(red, pivots):
        x[c] = row[-1]
    return x


@lru_cache(maxsize=4096)
def vandermonde_inverse(q: int, points: tuple[int, ...]) -> np.ndarray:
    """Inverse of the Vandermonde matrix V[i][k] = points[i]**k over F_q."""
    field = PrimeField(q)
    k = len(points)
    aug = [[pow(x, e, q) for e in range(k)] + [1 if i == j else 0 for j in range(k)] for i, x in enumerate(points)]
    red, pivots = row_reduce(field, aug, k)
    if len(pivots) != k:
        raise ValueError("evaluation points are not distinct")
    out = field.array([row[k:] for row in red])
    out.setflags(write=False)
    return out
