"""BCH / extended BCH construction, encoding, hard decoding and weight spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .gf import (
    Gf2Matrix,
    Gf2mField,
    cyclotomic_coset,
    make_field,
    minimal_polynomial,
    poly_divmod,
    poly_mod,
    poly_mul,
)

SUCCESS = "success"
DETECTED_FAILURE = "detected_failure"

VARIANTS = ("plain", "expurgated", "extended")

# x^7 + x^6 + x^2 + 1, the generator of the telecommand BCH(63,56) code.
TC_BCH_GENERATOR = 0b11000101


class CodeError(ValueError):
    pass


@dataclass(frozen=True)
class BchInfo:
    field: Gf2mField
    generator: int
    t: int
    variant: str
    core_n: int  # length of the underlying cyclic code


@dataclass(frozen=True, eq=False)
class BinaryLinearCode:
    n: int
    k: int
    G: Gf2Matrix
    H: Gf2Matrix
    name: str = ""
    algebraic: BchInfo | None = None
    info_positions: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.info_positions is None:
            object.__setattr__(self, "info_positions", tuple(range(self.k)))

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def generator_dense(self) -> np.ndarray:
        return _cached_dense(self, "G")

    @property
    def parity_dense(self) -> np.ndarray:
        return _cached_dense(self, "H")

    def syndrome(self, words: np.ndarray) -> np.ndarray:
        words = np.asarray(words, dtype=np.int64)
        return (words @ self.parity_dense.T.astype(np.int64)) & 1

    def is_codeword(self, words: np.ndarray) -> np.ndarray:
        return ~np.any(self.syndrome(words), axis=-1)


def _cached_dense(code: BinaryLinearCode, which: str) -> np.ndarray:
    attr = "_dense_" + which
    arr = code.__dict__.get(attr)
    if arr is None:
        arr = getattr(code, which).to_dense()
        arr.setflags(write=False)
        object.__setattr__(code, attr, arr)
    return arr


@dataclass
class DecodeOutcome:
    """Result of decoding one frame.

    ``status`` is ``"success"`` when the decoder emitted a codeword and
    ``"detected_failure"`` when it gave up; a wrong codeword with
    ``"success"`` is an undetected error.
    """

    info_bits: np.ndarray
    codeword: np.ndarray | None
    status: str = SUCCESS
    iterations_used: int = 0
    soft_metric: float | None = None
    llr: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status == SUCCESS


def code_from_generator(G_dense, name: str = "", algebraic=None) -> BinaryLinearCode:
    """Wrap a full-rank systematic generator ``[I | P]`` as a code object."""
    G_dense = np.asarray(G_dense, dtype=np.uint8) & 1
    k, n = G_dense.shape
    if not np.array_equal(G_dense[:, :k], np.eye(k, dtype=np.uint8)):
        raise CodeError("generator is not in [I | P] form")
    P = G_dense[:, k:]
    H = np.concatenate([P.T, np.eye(n - k, dtype=np.uint8)], axis=1)
    return BinaryLinearCode(
        n, k, Gf2Matrix.from_dense(G_dense), Gf2Matrix.from_dense(H), name, algebraic
    )


def cyclic_systematic_generator(g: int, n: int) -> np.ndarray:
    """Systematic generator of the cyclic code with generator polynomial ``g``.

    Bit i of a codeword is the coefficient of x^(n-1-i), so information bits
    come first and the remainder (parity) last.
    """
    r = g.bit_length() - 1
    k = n - r
    if k <= 0:
        raise CodeError(f"generator degree {r} leaves no information bits at n={n}")
    G = np.zeros((k, n), dtype=np.uint8)
    for i in range(k):
        deg = n - 1 - i
        rem = poly_mod(1 << deg, g)
        G[i, i] = 1
        for d in range(r):
            if (rem >> d) & 1:
                G[i, n - 1 - d] = 1
    return G


def bch_generator_polynomial(fld: Gf2mField, designed_t: int) -> int:
    """Narrow-sense BCH generator: lcm of minimal polynomials of alpha^1..alpha^(2t)."""
    n = fld.order
    seen: set[int] = set()
    g = 1
    for j in range(1, 2 * designed_t + 1):
        if j % n in seen:
            continue
        seen.update(cyclotomic_coset(j, n))
        g = poly_mul(g, minimal_polynomial(fld, fld.alpha(j)))
    return g


def build_bch(m: int, designed_t: int, variant: str = "plain", primitive_poly: int | None = None) -> BinaryLinearCode:
    """Narrow-sense primitive BCH code of length 2^m - 1 (2^m if extended).

    ``expurgated`` multiplies the generator by (x+1); ``extended`` appends
    an overall even-parity bit as the last coordinate.
    """
    if variant not in VARIANTS:
        raise CodeError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if designed_t < 1:
        raise CodeError("designed_t must be at least 1")
    fld = make_field(m, primitive_poly)
    n = fld.order
    g = bch_generator_polynomial(fld, designed_t)
    if variant == "expurgated" and poly_mod(g, 0b11) != 0:
        g = poly_mul(g, 0b11)
    if g.bit_length() - 1 >= n:
        raise CodeError(f"BCH(m={m}, t={designed_t}, {variant}) has no information bits")
    G = cyclic_systematic_generator(g, n)
    k = G.shape[0]
    if variant == "extended":
        G = np.concatenate([G, (G.sum(axis=1, keepdims=True) & 1).astype(np.uint8)], axis=1)
    tag = {"plain": "BCH", "expurgated": "BCH", "extended": "eBCH"}[variant]
    info = BchInfo(fld, g, designed_t, variant, n)
    return code_from_generator(G, f"{tag}({G.shape[1]},{k})", info)


def find_bch(n: int, k: int) -> BinaryLinearCode:
    """Locate a primitive BCH code (plain, expurgated or extended) with the given (n, k)."""
    if n + 1 & n == 0 and n >= 3:
        m, variants = (n + 1).bit_length() - 1, ("plain", "expurgated")
    elif n & (n - 1) == 0 and n >= 4:
        m, variants = n.bit_length() - 1, ("extended",)
    else:
        raise CodeError(f"no primitive BCH code has length {n}")
    if not 2 <= m <= 16:
        raise CodeError(f"length {n} outside supported field sizes")
    fld = make_field(m)
    for t in range(1, (1 << m) // 2):
        g = bch_generator_polynomial(fld, t)
        kk = fld.order - (g.bit_length() - 1)
        if kk <= 0 or kk < k - 1:
            break
        for v in variants:
            kv = kk - 1 if (v == "expurgated" and poly_mod(g, 0b11) != 0) else kk
            if kv == k and (v != "expurgated" or poly_mod(g, 0b11) != 0):
                return build_bch(m, t, v)
    raise CodeError(f"no primitive BCH code with (n, k) = ({n}, {k})")


def encode_systematic(code: BinaryLinearCode, info) -> np.ndarray:
    """Encode one info vector (length k) or a batch (shape (..., k))."""
    info = np.asarray(info, dtype=np.int64)
    if info.shape[-1] != code.k:
        raise CodeError(f"expected {code.k} information bits, got {info.shape[-1]}")
    return ((info @ code.generator_dense.astype(np.int64)) & 1).astype(np.uint8)


# --- algebraic hard decoding ---

def berlekamp_massey(fld: Gf2mField, syndromes: list[int]) -> list[int]:
    """Error-locator polynomial (lowest degree first) from S_1..S_2t."""
    C = [1]
    B = [1]
    L, shift, b = 0, 1, 1
    for r, s in enumerate(syndromes):
        d = s
        for i in range(1, L + 1):
            if i < len(C):
                d ^= fld.mul(C[i], syndromes[r - i])
        if d == 0:
            shift += 1
            continue
        coef = fld.div(d, b)
        T = C[:]
        need = len(B) + shift
        if len(C) < need:
            C = C + [0] * (need - len(C))
        for i, bi in enumerate(B):
            C[i + shift] ^= fld.mul(coef, bi)
        if 2 * L <= r:
            L = r + 1 - L
            B, b, shift = T, d, 1
        else:
            shift += 1
    while len(C) > 1 and C[-1] == 0:
        C.pop()
    return C


def _chien_roots(fld: Gf2mField, locator: list[int], n: int) -> list[int]:
    """Degrees d in [0, n) with locator(alpha^-d) == 0."""
    order = fld.order
    d = np.arange(n)
    acc = np.zeros(n, dtype=np.int64)
    for j, c in enumerate(locator):
        if c == 0:
            continue
        e = (int(fld.log[c]) - j * d) % order
        acc ^= fld.exp[e]
    return [int(x) for x in np.flatnonzero(acc == 0)]


def hard_decode_bch(code: BinaryLinearCode, received) -> DecodeOutcome:
    """Berlekamp-Massey + Chien decoding up to the designed t.

    Bit i of the core word is the coefficient of x^(core_n-1-i). On
    failure the received hard decisions are returned unchanged.
    """
    info_ = code.algebraic
    if info_ is None:
        raise CodeError(f"{code.name or 'code'} carries no algebraic structure")
    r = np.asarray(received, dtype=np.uint8) & 1
    if r.shape != (code.n,):
        raise CodeError(f"expected {code.n} received bits, got shape {r.shape}")
    fld, t, nc = info_.field, info_.t, info_.core_n
    word = r.copy()
    if not code.syndrome(word).any():
        return DecodeOutcome(word[: code.k].copy(), word, SUCCESS)
    core = word[:nc]
    ones = np.flatnonzero(core)
    degs = nc - 1 - ones
    synd = []
    for j in range(1, 2 * t + 1):
        s = 0
        for e in (j * degs) % fld.order:
            s ^= int(fld.exp[e])
        synd.append(s)
    nu = 0
    if any(synd):
        loc = berlekamp_massey(fld, synd)
        nu = len(loc) - 1
        if nu > t:
            return DecodeOutcome(r[: code.k].copy(), None, DETECTED_FAILURE)
        roots = _chien_roots(fld, loc, nc)
        if len(roots) != nu:
            return DecodeOutcome(r[: code.k].copy(), None, DETECTED_FAILURE)
        for dg in roots:
            core[nc - 1 - dg] ^= 1
    if info_.variant == "extended" and int(word.sum()) & 1:
        if nu >= t:
            return DecodeOutcome(r[: code.k].copy(), None, DETECTED_FAILURE)
        word[-1] ^= 1
    if code.syndrome(word).any():
        return DecodeOutcome(r[: code.k].copy(), None, DETECTED_FAILURE)
    return DecodeOutcome(word[: code.k].copy(), word, SUCCESS)


# --- weight spectra ---

@dataclass(frozen=True)
class WeightSpectrum:
    """(weight, multiplicity) pairs with exact integer multiplicities.

    A truncated spectrum is known for every weight up to ``max_weight``
    (weights not listed below it have multiplicity zero).
    """

    n: int
    k: int
    entries: tuple[tuple[int, int], ...]
    complete: bool = True
    max_weight: int = field(default=-1)

    def __post_init__(self):
        ents = tuple((int(w), int(a)) for w, a in self.entries)
        object.__setattr__(self, "entries", ents)
        if not ents or ents[0] != (0, 1):
            raise CodeError("weight spectrum must start with A_0 = 1")
        prev = -1
        for w, a in ents:
            if w <= prev:
                raise CodeError(f"weights must be strictly increasing (at weight {w})")
            if not 0 <= w <= self.n:
                raise CodeError(f"weight {w} outside [0, {self.n}]")
            if a < 0:
                raise CodeError(f"negative multiplicity at weight {w}")
            prev = w
        if self.max_weight < 0:
            object.__setattr__(self, "max_weight", self.n if self.complete else ents[-1][0])
        if self.complete and sum(a for _, a in ents) != 1 << self.k:
            raise CodeError(f"complete spectrum does not sum to 2^{self.k}")

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)

    def multiplicity(self, w: int) -> int:
        if w > self.max_weight:
            raise CodeError(f"weight {w} beyond the known part of the spectrum (<= {self.max_weight})")
        return self.as_dict().get(w, 0)

    @property
    def min_distance(self) -> int | None:
        for w, a in self.entries[1:]:
            if a:
                return w
        return None

    def total(self) -> int:
        return sum(a for _, a in self.entries)


@njit(cache=True)
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def _gray_enumerate(rows, n):
    d, W = rows.shape
    counts = np.zeros(n + 1, dtype=np.int64)
    cur = np.zeros(W, dtype=np.uint64)
    counts[0] = 1
    total = np.int64(1) << np.int64(d)
    for g in range(1, total):
        # bit flipped between Gray codes g-1 and g = trailing zeros of g
        j = 0
        v = g
        while (v & 1) == 0:
            v >>= 1
            j += 1
        w = 0
        for q in range(W):
            cur[q] ^= rows[j, q]
            w += _popcount64(cur[q])
        counts[w] += 1
    return counts


def enumerate_weights(generator_dense) -> np.ndarray:
    """Weight histogram (length n+1) of the row space of a full-rank generator."""
    Gd = np.atleast_2d(np.asarray(generator_dense, dtype=np.uint8))
    n = Gd.shape[1]
    return _gray_enumerate(Gf2Matrix.from_dense(Gd).packed.copy(), n)


def spectrum_bruteforce(code: BinaryLinearCode, limit: int = 28) -> WeightSpectrum:
    """Exact spectrum by enumerating the smaller of the code and its dual."""
    small = min(code.k, code.n - code.k)
    if small > limit:
        raise CodeError(
            f"enumeration needs 2^{small} words (min(k, n-k) = {small} > {limit}); "
            "use a literature spectrum instead"
        )
    if code.k <= code.n - code.k:
        counts = enumerate_weights(code.generator_dense)
        return WeightSpectrum(code.n, code.k, tuple((w, int(a)) for w, a in enumerate(counts) if a))
    counts = enumerate_weights(code.parity_dense)
    dual = WeightSpectrum(
        code.n, code.n - code.k, tuple((w, int(a)) for w, a in enumerate(counts) if a)
    )
    return macwilliams(dual)


def krawtchouk(n: int, j: int, i: int) -> int:
    return sum((-1) ** s * math.comb(i, s) * math.comb(n - i, j - s) for s in range(0, j + 1))


def macwilliams(dual_spectrum: WeightSpectrum) -> WeightSpectrum:
    """Spectrum of the dual code via the MacWilliams identity (exact)."""
    if not dual_spectrum.complete or dual_spectrum.total() != 1 << dual_spectrum.k:
        raise CodeError("MacWilliams transform needs a complete spectrum")
    n, kd = dual_spectrum.n, dual_spectrum.k
    B = dual_spectrum.as_dict()
    out = []
    for j in range(n + 1):
        s = sum(b * krawtchouk(n, j, i) for i, b in B.items())
        q, rem = divmod(s, 1 << kd)
        if rem:
            raise CodeError("MacWilliams transform produced a non-integer multiplicity")
        if q:
            out.append((j, q))
    return WeightSpectrum(n, n - kd, tuple(out))


class SpectrumParseError(CodeError):
    pass


def parse_spectrum(text: str, source: str = "<string>") -> WeightSpectrum:
    """Parse the weight-spectrum text format.

    Header ``n k [complete|truncated]`` then ``weight multiplicity`` lines;
    ``#`` starts a comment. A header without the flag means truncated.
    """
    header = None
    entries: list[tuple[int, int]] = []
    seen: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] not in ("complete", "truncated")):
                raise SpectrumParseError(f"{source}:{lineno}: header must be 'n k complete|truncated'")
            try:
                n, k = int(parts[0]), int(parts[1])
            except ValueError:
                raise SpectrumParseError(f"{source}:{lineno}: n and k must be integers") from None
            header = (n, k, len(parts) == 3 and parts[2] == "complete")
            continue
        if len(parts) != 2:
            raise SpectrumParseError(f"{source}:{lineno}: expected '<weight> <multiplicity>'")
        try:
            w, a = int(parts[0]), int(parts[1])
        except ValueError:
            raise SpectrumParseError(f"{source}:{lineno}: non-integer field") from None
        if w in seen:
            raise SpectrumParseError(f"{source}:{lineno}: duplicate weight {w}")
        if entries and w < entries[-1][0]:
            raise SpectrumParseError(f"{source}:{lineno}: weights must be increasing")
        if not entries and (w, a) != (0, 1):
            raise SpectrumParseError(f"{source}:{lineno}: first entry must be '0 1' (A_0 = 1)")
        seen.add(w)
        entries.append((w, a))
    if header is None:
        raise SpectrumParseError(f"{source}: empty spectrum file")
    if not entries:
        raise SpectrumParseError(f"{source}: no spectrum entries")
    n, k, complete = header
    try:
        return WeightSpectrum(n, k, tuple(entries), complete)
    except SpectrumParseError:
        raise
    except CodeError as exc:
        raise SpectrumParseError(f"{source}: {exc}") from None


def load_spectrum(path) -> WeightSpectrum:
    path = Path(path)
    return parse_spectrum(path.read_text(), str(path))


def format_spectrum(spec: WeightSpectrum) -> str:
    lines = [f"{spec.n} {spec.k} {'complete' if spec.complete else 'truncated'}"]
    lines += [f"{w} {a}" for w, a in spec.entries]
    return "\n".join(lines) + "\n"


def data_path(name: str) -> Path:
    return Path(__file__).with_name("data") / name


def ebch128_spectrum() -> WeightSpectrum:
    return load_spectrum(data_path("ebch128_64.ws"))


def generator_remainder_check(code: BinaryLinearCode) -> bool:
    """True when the generator polynomial divides x^core_n - 1."""
    info_ = code.algebraic
    if info_ is None:
        raise CodeError("code has no generator polynomial")
    return poly_divmod((1 << info_.core_n) | 1, info_.generator)[1] == 0
