"""Arithmetic over GF(2^m) and bit-packed linear algebra over GF(2)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

# Primitive polynomials, bit i = coefficient of x^i.
DEFAULT_PRIMITIVE_POLYS = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,  # x^6 + x + 1
    7: 0b10001001,  # x^7 + x^3 + 1
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
    13: 0b10000000011011,
    14: 0b100010001000011,
    15: 0b1000000000000011,
    16: 0b10001000000001011,
}


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class Gf2mField:
    """GF(2^m) with log/antilog tables built from a primitive polynomial.

    Elements are ints in ``[0, 2^m)``; bit i is the coefficient of alpha^i in
    the polynomial basis.
    """

    m: int
    primitive_polynomial: int
    exp: np.ndarray = field(repr=False, compare=False)
    log: np.ndarray = field(repr=False, compare=False)

    @property
    def order(self) -> int:
        """Number of nonzero elements, 2^m - 1."""
        return (1 << self.m) - 1

    def alpha(self, i: int) -> int:
        return int(self.exp[i % self.order])

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[(int(self.log[a]) + int(self.log[b])) % self.order])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse in GF(2^m)")
        return int(self.exp[(-int(self.log[a])) % self.order])

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            if e == 0:
                return 1
            if e < 0:
                raise ZeroDivisionError("zero to a negative power")
            return 0
        return int(self.exp[(int(self.log[a]) * e) % self.order])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))


def make_field(m: int, primitive_poly: int | None = None) -> Gf2mField:
    """Build GF(2^m). Raises :class:`FieldError` unless the polynomial is primitive."""
    if not 2 <= m <= 16:
        raise FieldError(f"extension degree must be in [2, 16], got {m}")
    poly = DEFAULT_PRIMITIVE_POLYS[m] if primitive_poly is None else int(primitive_poly)
    if poly.bit_length() - 1 != m:
        raise FieldError(f"polynomial {poly:#b} does not have degree {m}")
    if not poly & 1:
        raise FieldError(f"polynomial {poly:#b} has zero constant term (divisible by x)")
    order = (1 << m) - 1
    exp = np.zeros(order, dtype=np.int64)
    log = np.full(order + 1, -1, dtype=np.int64)
    x = 1
    for i in range(order):
        if log[x] != -1:
            # x already seen: alpha has order i < 2^m - 1
            if poly_is_irreducible(poly):
                raise FieldError(f"polynomial {poly:#b} is irreducible but not primitive")
            raise FieldError(f"polynomial {poly:#b} is reducible over GF(2)")
        exp[i] = x
        log[x] = i
        x <<= 1
        if x >> m:
            x ^= poly
    if x != 1:
        raise FieldError(f"polynomial {poly:#b} is reducible over GF(2)")
    exp.setflags(write=False)
    log.setflags(write=False)
    return Gf2mField(m, poly, exp, log)


# --- binary polynomials packed into Python ints (bit i = coeff of x^i) ---

def poly_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_divmod(a: int, b: int) -> tuple[int, int]:
    if b == 0:
        raise ZeroDivisionError("polynomial division by zero")
    db = b.bit_length() - 1
    q = 0
    while a and a.bit_length() - 1 >= db:
        shift = a.bit_length() - 1 - db
        q |= 1 << shift
        a ^= b << shift
    return q, a


def poly_mod(a: int, b: int) -> int:
    return poly_divmod(a, b)[1]


def poly_is_irreducible(p: int) -> bool:
    deg = p.bit_length() - 1
    if deg < 1:
        return False
    for d in range(1, deg // 2 + 1):
        for q in range(1 << d, 1 << (d + 1)):
            if poly_mod(p, q) == 0:
                return False
    return True


def minimal_polynomial(fld: Gf2mField, elem: int) -> int:
    """Lowest-degree monic binary polynomial with ``elem`` as a root."""
    if elem == 0:
        raise FieldError("the zero element has minimal polynomial x; only nonzero elements allowed")
    conj = []
    c = elem
    while c not in conj:
        conj.append(c)
        c = fld.mul(c, c)
    # product of (x + c) over the conjugacy class, coefficients in GF(2^m)
    coeffs = [1]
    for r in conj:
        nxt = [0] * (len(coeffs) + 1)
        for i, a in enumerate(coeffs):
            nxt[i + 1] ^= a
            nxt[i] ^= fld.mul(a, r)
        coeffs = nxt
    out = 0
    for i, a in enumerate(coeffs):
        if a not in (0, 1):
            raise AssertionError("minimal polynomial has a non-binary coefficient")
        out |= a << i
    return out


def poly_eval(fld: Gf2mField, poly: int, x: int) -> int:
    """Evaluate a binary polynomial at a field element (Horner)."""
    acc = 0
    for i in range(poly.bit_length() - 1, -1, -1):
        acc = fld.mul(acc, x) ^ ((poly >> i) & 1)
    return acc


def cyclotomic_coset(s: int, n: int) -> list[int]:
    out = []
    c = s % n
    while c not in out:
        out.append(c)
        c = (2 * c) % n
    return out


# --- bit-packed GF(2) matrices ---

@njit(cache=True)
def _rref_packed(rows, ncols, order):
    nr = rows.shape[0]
    pivots = np.empty(min(nr, ncols), dtype=np.int64)
    rank = 0
    for c in order:
        if rank == nr:
            break
        w = c >> 6
        b = np.uint64(1) << np.uint64(c & 63)
        p = -1
        for r in range(rank, nr):
            if rows[r, w] & b:
                p = r
                break
        if p < 0:
            continue
        if p != rank:
            for j in range(rows.shape[1]):
                t = rows[p, j]
                rows[p, j] = rows[rank, j]
                rows[rank, j] = t
        for r in range(nr):
            if r != rank and rows[r, w] & b:
                for j in range(rows.shape[1]):
                    rows[r, j] ^= rows[rank, j]
        pivots[rank] = c
        rank += 1
    return rank, pivots[:rank]


def pack_bits(dense: np.ndarray) -> np.ndarray:
    """Pack a 2-D 0/1 array into little-endian uint64 words per row."""
    dense = np.atleast_2d(np.asarray(dense, dtype=np.uint8))
    r, c = dense.shape
    words = max(1, (c + 63) // 64)
    padded = np.zeros((r, words * 64), dtype=np.uint8)
    padded[:, :c] = dense
    by = np.packbits(padded.reshape(r, words * 8, 8), axis=2, bitorder="little")
    return by.reshape(r, words * 8).view("<u8").astype(np.uint64).reshape(r, words)


def unpack_bits(packed: np.ndarray, ncols: int) -> np.ndarray:
    packed = np.ascontiguousarray(packed, dtype=np.uint64)
    r = packed.shape[0]
    by = packed.astype("<u8").view(np.uint8).reshape(r, -1)
    return np.unpackbits(by, axis=1, bitorder="little")[:, :ncols]


class Gf2Matrix:
    """Dense GF(2) matrix with rows packed into uint64 words."""

    __slots__ = ("rows", "cols", "_data")

    def __init__(self, data: np.ndarray, cols: int):
        data = np.ascontiguousarray(data, dtype=np.uint64)
        if data.ndim != 2 or data.shape[0] < 1 or cols < 1:
            raise ValueError("Gf2Matrix needs at least one row and one column")
        if data.shape[1] != (cols + 63) // 64:
            raise ValueError("packed width does not match column count")
        self._data = data
        self.rows = data.shape[0]
        self.cols = cols
        data.setflags(write=False)

    @classmethod
    def from_dense(cls, dense) -> Gf2Matrix:
        dense = np.atleast_2d(np.asarray(dense, dtype=np.uint8) & 1)
        return cls(pack_bits(dense), dense.shape[1])

    @property
    def packed(self) -> np.ndarray:
        return self._data

    def to_dense(self) -> np.ndarray:
        return unpack_bits(self._data, self.cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, rc):
        r, c = rc
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexError(f"({r}, {c}) out of bounds for {self.rows}x{self.cols}")
        return int((int(self._data[r, c >> 6]) >> (c & 63)) & 1)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Gf2Matrix)
            and self.cols == other.cols
            and np.array_equal(self._data, other._data)
        )

    def __repr__(self) -> str:
        return f"Gf2Matrix({self.rows}x{self.cols})"

    def transpose(self) -> Gf2Matrix:
        return Gf2Matrix.from_dense(self.to_dense().T)

    def __matmul__(self, other: Gf2Matrix) -> Gf2Matrix:
        a = self.to_dense().astype(np.int64)
        b = other.to_dense().astype(np.int64)
        return Gf2Matrix.from_dense((a @ b) & 1)

    def rank(self) -> int:
        return rref(self)[1]


def rref(mat: Gf2Matrix, column_order=None) -> tuple[Gf2Matrix, int, list[int]]:
    """Reduced row-echelon form over GF(2).

    Columns are visited in ``column_order`` (default 0..cols-1); a column
    with no available pivot is skipped. Returns ``(reduced, rank, pivots)``
    with pivots listed in visiting order. Zero rows of a rank-deficient input
    end up at the bottom.
    """
    if column_order is None:
        order = np.arange(mat.cols, dtype=np.int64)
    else:
        order = np.asarray(column_order, dtype=np.int64)
        if order.ndim != 1 or np.any(order < 0) or np.any(order >= mat.cols):
            raise ValueError("column_order entries must be column indices")
    rows = mat.packed.copy()
    rank, piv = _rref_packed(rows, mat.cols, order)
    return Gf2Matrix(rows, mat.cols), int(rank), [int(p) for p in piv]


def gf2_rank(dense) -> int:
    return Gf2Matrix.from_dense(dense).rank()


def nullspace(dense) -> np.ndarray:
    """Basis of the right null space of a dense 0/1 matrix, one vector per row."""
    dense = np.atleast_2d(np.asarray(dense, dtype=np.uint8) & 1)
    r, c = dense.shape
    red, rank, piv = rref(Gf2Matrix.from_dense(dense))
    R = red.to_dense()[:rank]
    free = [j for j in range(c) if j not in set(piv)]
    basis = np.zeros((len(free), c), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in enumerate(piv):
            basis[i, p] = R[row, f]
    return basis
