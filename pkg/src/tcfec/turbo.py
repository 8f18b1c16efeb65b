"""Parallel turbo code built from two 16-state recursive systematic
convolutional encoders, with interleaver families, periodic puncturing,
iterative log-MAP decoding and a bounded-input-weight distance search.

Unpunctured frame (rate-1/2 multiplexing of the telemetry standard): for
each time step t = 0..k+3 two bits are sent, the systematic bit of
encoder 1 (its tail input bits for t >= k) followed by one parity bit,
taken from encoder 1 at even t and from encoder 2 at odd t. This gives
n = 2(k + 4). Encoder 2's tail input bits are not transmitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .block_codes import SUCCESS, DecodeOutcome, _popcount64
from .gf import pack_bits


class TurboError(ValueError):
    pass


# --- constituent encoder ---

@dataclass(frozen=True)
class RscSpec:
    """Polynomials as integers, bit i = coefficient of D^i."""

    feedback: int = 0b11001  # 1 + D^3 + D^4
    feedforward: int = 0b11011  # 1 + D + D^3 + D^4

    def __post_init__(self):
        if not self.feedback & 1:
            raise TurboError("feedback polynomial needs a constant term (recursive encoder)")
        if self.feedforward <= 0:
            raise TurboError("feedforward polynomial must be nonzero")

    @property
    def memory(self) -> int:
        return max(self.feedback.bit_length(), self.feedforward.bit_length()) - 1

    @property
    def states(self) -> int:
        return 1 << self.memory

    def tables(self):
        """(next_state[s, u], parity[s, u], tail_input[s]); bit i-1 of s holds a_{t-i}."""
        nu, S = self.memory, self.states
        nxt = np.zeros((S, 2), dtype=np.int64)
        par = np.zeros((S, 2), dtype=np.uint8)
        tail = np.zeros(S, dtype=np.uint8)
        for s in range(S):
            fb = 0
            ff = 0
            for i in range(1, nu + 1):
                bit = (s >> (i - 1)) & 1
                fb ^= ((self.feedback >> i) & 1) & bit
                ff ^= ((self.feedforward >> i) & 1) & bit
            tail[s] = fb
            for u in (0, 1):
                a = u ^ fb
                nxt[s, u] = ((s << 1) | a) & (S - 1)
                par[s, u] = ((self.feedforward & 1) & a) ^ ff
        return nxt, par, tail


# --- interleavers ---

INTERLEAVER_KINDS = ("random", "spread", "qpp", "drp")


@dataclass(frozen=True, eq=False)
class Interleaver:
    """Encoder 2 reads u[perm[i]] at time i."""

    kind: str
    perm: np.ndarray
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        p = np.asarray(self.perm, dtype=np.int64)
        if p.ndim != 1 or p.size < 2:
            raise TurboError("interleaver length must be at least 2")
        if not np.array_equal(np.sort(p), np.arange(p.size)):
            raise TurboError(f"{self.kind} interleaver is not a bijection")
        p.setflags(write=False)
        object.__setattr__(self, "perm", p)

    @property
    def K(self) -> int:
        return int(self.perm.size)

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.K)
        return inv

    def spread(self) -> int:
        """Largest S with |i-j| <= S implying |pi(i)-pi(j)| >= S for all i != j."""
        best = 0
        for S in range(1, self.K):
            if not spread_ok(self.perm, S):
                break
            best = S
        return best

    def __eq__(self, other):
        return isinstance(other, Interleaver) and np.array_equal(self.perm, other.perm)

    __hash__ = None


def spread_ok(perm, S: int) -> bool:
    perm = np.asarray(perm)
    for d in range(1, S + 1):
        if np.any(np.abs(perm[d:] - perm[:-d]) < S):
            return False
    return True


def qpp_permutation(K: int, f1: int, f2: int) -> np.ndarray:
    i = np.arange(K, dtype=np.int64)
    return (f1 * i + f2 * i * i) % K


def _prime_factors(K: int) -> list[int]:
    out, p = [], 2
    while p * p <= K:
        if K % p == 0:
            out.append(p)
            while K % p == 0:
                K //= p
        p += 1
    if K > 1:
        out.append(K)
    return out


def qpp_condition(K: int, f1: int, f2: int) -> bool:
    """Sufficient condition: gcd(f1, K) = 1 and every prime factor of K divides f2."""
    return math.gcd(f1, K) == 1 and all(f2 % p == 0 for p in _prime_factors(K))


def drp_permutation(K: int, p: int, s: int = 0, read_dither=(0, 1, 2, 3), write_dither=(0, 1, 2, 3)) -> np.ndarray:
    """Read dither, relative-prime linear pass, write dither (window = dither length)."""
    r = np.asarray(read_dither, dtype=np.int64)
    w = np.asarray(write_dither, dtype=np.int64)
    if K % r.size or K % w.size:
        raise TurboError(f"K = {K} must be a multiple of the dither windows")
    if math.gcd(p, K) != 1:
        raise TurboError(f"p = {p} is not relatively prime to K = {K}")
    i = np.arange(K, dtype=np.int64)
    a = r.size * (i // r.size) + r[i % r.size]
    b = (s + a * p) % K
    return w.size * (b // w.size) + w[b % w.size]


def _spread_permutation(K: int, S: int, rng, tries: int) -> np.ndarray | None:
    for _ in range(tries):
        pool = list(rng.permutation(K))
        out = []
        ok = True
        while pool:
            for j, cand in enumerate(pool):
                if all(abs(cand - out[-d]) >= S for d in range(1, min(S, len(out)) + 1)):
                    out.append(pool.pop(j))
                    break
            else:
                ok = False
                break
        if ok:
            return np.array(out, dtype=np.int64)
    return None


def make_interleaver(kind: str, K: int, params: dict | None = None, seed: int | None = None) -> Interleaver:
    params = dict(params or {})
    if K < 2:
        raise TurboError("K must be at least 2")
    rng = np.random.default_rng(seed)
    if kind == "random":
        perm = rng.permutation(K)
    elif kind == "spread":
        S = int(params.get("S", max(1, int(math.sqrt(K / 2)))))
        tries = int(params.get("tries", 200))
        perm = _spread_permutation(K, S, rng, tries)
        if perm is None:
            raise TurboError(f"no spread interleaver with S = {S} found in {tries} attempts")
        params["S"] = S
    elif kind == "qpp":
        f1, f2 = int(params["f1"]), int(params["f2"])
        if math.gcd(f1, K) != 1:
            raise TurboError(f"QPP needs gcd(f1, K) = 1, got f1 = {f1}, K = {K}")
        perm = qpp_permutation(K, f1, f2)
        if np.unique(perm).size != K:
            raise TurboError(f"QPP (f1={f1}, f2={f2}) is not a permutation polynomial modulo {K}")
    elif kind == "drp":
        if "p" not in params:
            W = 4
            cands = [p for p in range(2, K) if math.gcd(p, K) == 1]
            params = {
                "p": int(rng.choice(cands)),
                "s": int(rng.integers(K)),
                "read_dither": [int(x) for x in rng.permutation(W)],
                "write_dither": [int(x) for x in rng.permutation(W)],
            }
        perm = drp_permutation(K, int(params["p"]), int(params.get("s", 0)),
                               params.get("read_dither", (0, 1, 2, 3)), params.get("write_dither", (0, 1, 2, 3)))
    else:
        raise TurboError(f"unknown interleaver kind {kind!r}; expected one of {INTERLEAVER_KINDS}")
    return Interleaver(kind, perm, params, seed)


def format_interleaver(il: Interleaver) -> str:
    head = [il.kind, str(il.K), str(il.seed if il.seed is not None else -1)]
    for key, val in sorted(il.params.items()):
        v = ",".join(map(str, val)) if isinstance(val, (list, tuple)) else str(val)
        head.append(f"{key}={v}")
    return " ".join(head) + "\n" + "\n".join(map(str, il.perm)) + "\n"


def parse_interleaver(text: str, source: str = "<string>") -> Interleaver:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise TurboError(f"{source}: empty interleaver file")
    head = lines[0].split()
    if len(head) < 3 or head[0] not in INTERLEAVER_KINDS:
        raise TurboError(f"{source}: header must be 'kind K seed params...'")
    try:
        K, seed = int(head[1]), int(head[2])
        params = {}
        for tok in head[3:]:
            key, val = tok.split("=", 1)
            params[key] = [int(x) for x in val.split(",")] if "," in val else int(val)
        perm = np.array([int(x) for x in lines[1:]], dtype=np.int64)
    except ValueError as exc:
        raise TurboError(f"{source}: {exc}") from None
    if perm.size != K:
        raise TurboError(f"{source}: header says K = {K} but {perm.size} indices follow")
    return Interleaver(head[0], perm, params, None if seed < 0 else seed)


def save_interleaver(il: Interleaver, path) -> None:
    Path(path).write_text(format_interleaver(il))


def load_interleaver(path) -> Interleaver:
    return parse_interleaver(Path(path).read_text(), str(path))


# --- frame layout and puncturing ---

def frame_layout(k: int):
    """Per-position (role, t): role 0 = systematic/tail input of encoder 1,
    1 = parity of encoder 1, 2 = parity of encoder 2."""
    T = k + 4
    role = np.zeros(2 * T, dtype=np.int64)
    time = np.repeat(np.arange(T), 2)
    role[1::2] = np.where(np.arange(T) % 2 == 0, 1, 2)
    return role, time


@dataclass(frozen=True)
class PuncturingPattern:
    """Periodic mask over the k+4 parity slots plus a mask over the 4 tail
    systematic bits. Information bits are always kept."""

    period: int
    parity_mask: tuple[int, ...]
    tail_mask: tuple[int, ...] = (1, 1, 1, 1)

    def __post_init__(self):
        object.__setattr__(self, "parity_mask", tuple(int(b) for b in self.parity_mask))
        object.__setattr__(self, "tail_mask", tuple(int(b) for b in self.tail_mask))
        if self.period < 1 or len(self.parity_mask) != self.period:
            raise TurboError("parity mask length must equal the period")
        if len(self.tail_mask) != 4:
            raise TurboError("tail mask needs 4 entries")
        if any(b not in (0, 1) for b in self.parity_mask + self.tail_mask):
            raise TurboError("mask entries must be 0 or 1")

    def keep_mask(self, k: int) -> np.ndarray:
        T = k + 4
        keep = np.ones(2 * T, dtype=bool)
        keep[1::2] = np.array(self.parity_mask, dtype=bool)[np.arange(T) % self.period]
        keep[2 * k :: 2] = np.array(self.tail_mask, dtype=bool)
        return keep

    def kept(self, k: int) -> int:
        return int(self.keep_mask(k).sum())

    @classmethod
    def keep_all(cls) -> PuncturingPattern:
        return cls(1, (1,))


def format_pattern(p: PuncturingPattern) -> str:
    return (f"period {p.period}\nparity {''.join(map(str, p.parity_mask))}\n"
            f"tail {''.join(map(str, p.tail_mask))}\n")


def parse_pattern(text: str, source: str = "<string>") -> PuncturingPattern:
    fields = {}
    for lineno, ln in enumerate(text.splitlines(), start=1):
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 2 or parts[0] not in ("period", "parity", "tail"):
            raise TurboError(f"{source}:{lineno}: expected 'period N', 'parity bits' or 'tail bits'")
        fields[parts[0]] = parts[1]
    if "period" not in fields or "parity" not in fields:
        raise TurboError(f"{source}: pattern needs 'period' and 'parity' lines")
    try:
        return PuncturingPattern(
            int(fields["period"]), tuple(int(c) for c in fields["parity"]),
            tuple(int(c) for c in fields.get("tail", "1111")),
        )
    except ValueError as exc:
        raise TurboError(f"{source}: {exc}") from None


def save_pattern(p: PuncturingPattern, path) -> None:
    Path(path).write_text(format_pattern(p))


def load_pattern(path) -> PuncturingPattern:
    return parse_pattern(Path(path).read_text(), str(path))


def periodic_patterns(k: int, period: int, zeros: int, count: int | None = None, seed: int = 0,
                      tail_mask=(1, 1, 1, 1)) -> list[PuncturingPattern]:
    """Parity masks of the given period with ``zeros`` punctured slots per period.

    All C(period, zeros) masks in lexicographic order, or ``count`` distinct
    ones drawn with ``seed`` when that is smaller.
    """
    from itertools import combinations

    if (k + 4) % period:
        raise TurboError(f"period {period} does not divide the {k + 4} parity slots")
    total = math.comb(period, zeros)
    if count is None or count >= total:
        sets = list(combinations(range(period), zeros))
    else:
        rng = np.random.default_rng(seed)
        seen: set = set()
        sets = []
        while len(sets) < count:
            c = tuple(sorted(int(x) for x in rng.choice(period, zeros, replace=False)))
            if c not in seen:
                seen.add(c)
                sets.append(c)
    out = []
    for zs in sets:
        mask = [1] * period
        for z in zs:
            mask[z] = 0
        out.append(PuncturingPattern(period, tuple(mask), tuple(tail_mask)))
    return out


# --- code spec and encoding ---

@dataclass(frozen=True, eq=False)
class TurboCodeSpec:
    k: int
    interleaver: Interleaver
    puncturing: PuncturingPattern = field(default_factory=PuncturingPattern.keep_all)
    rsc: RscSpec = field(default_factory=RscSpec)

    def __post_init__(self):
        if self.interleaver.K != self.k:
            raise TurboError(f"interleaver length {self.interleaver.K} differs from k = {self.k}")
        if self.rsc.memory != 4:
            raise TurboError("the frame layout assumes 16-state constituents (4 tail bits)")
        tables = self.rsc.tables()
        object.__setattr__(self, "_tables", tables)
        object.__setattr__(self, "_keep", self.puncturing.keep_mask(self.k))

    @property
    def n_unpunctured(self) -> int:
        return 2 * (self.k + 4)

    @property
    def n_punctured(self) -> int:
        return int(self._keep.sum())

    @property
    def n(self) -> int:
        return self.n_punctured

    @property
    def rate(self) -> float:
        return self.k / self.n_punctured

    @property
    def keep(self) -> np.ndarray:
        return self._keep

    def with_puncturing(self, p: PuncturingPattern) -> TurboCodeSpec:
        return TurboCodeSpec(self.k, self.interleaver, p, self.rsc)


@njit(cache=True)
def _rsc_run(nxt, par, tail, u, out_par, out_tail):
    s = 0
    k = u.shape[0]
    for t in range(k):
        out_par[t] = par[s, u[t]]
        s = nxt[s, u[t]]
    for j in range(out_tail.shape[0]):
        b = tail[s]
        out_tail[j] = b
        out_par[k + j] = par[s, b]
        s = nxt[s, b]
    return s


@njit(cache=True)
def _encode_batch(nxt, par, tail, perm, info, out):
    N, k = info.shape
    T = k + 4
    p1 = np.empty(T, dtype=np.uint8)
    p2 = np.empty(T, dtype=np.uint8)
    t1 = np.empty(4, dtype=np.uint8)
    t2 = np.empty(4, dtype=np.uint8)
    u2 = np.empty(k, dtype=np.uint8)
    bad = 0
    for f in range(N):
        for i in range(k):
            u2[i] = info[f, perm[i]]
        if _rsc_run(nxt, par, tail, info[f], p1, t1) != 0:
            bad += 1
        if _rsc_run(nxt, par, tail, u2, p2, t2) != 0:
            bad += 1
        for t in range(T):
            out[f, 2 * t] = info[f, t] if t < k else t1[t - k]
            out[f, 2 * t + 1] = p1[t] if t % 2 == 0 else p2[t]
    return bad


def encode_unpunctured(spec: TurboCodeSpec, info) -> np.ndarray:
    info = np.asarray(info, dtype=np.uint8)
    if info.shape[-1] != spec.k:
        raise TurboError(f"expected {spec.k} information bits, got {info.shape[-1]}")
    batch = np.ascontiguousarray(info.reshape(-1, spec.k))
    out = np.zeros((batch.shape[0], spec.n_unpunctured), dtype=np.uint8)
    nxt, par, tail = spec._tables
    if _encode_batch(nxt, par, tail, spec.interleaver.perm, batch, out):
        raise TurboError("constituent encoder failed to terminate")  # cannot happen for recursive codes
    return out.reshape(info.shape[:-1] + (spec.n_unpunctured,))


def puncture(frame, pattern: PuncturingPattern | TurboCodeSpec, k: int | None = None) -> np.ndarray:
    keep = pattern.keep if isinstance(pattern, TurboCodeSpec) else pattern.keep_mask(k)
    frame = np.asarray(frame)
    if frame.shape[-1] != keep.size:
        raise TurboError(f"frame length {frame.shape[-1]} does not match pattern length {keep.size}")
    return frame[..., keep]


def depuncture(llr, pattern: PuncturingPattern | TurboCodeSpec, k: int | None = None) -> np.ndarray:
    keep = pattern.keep if isinstance(pattern, TurboCodeSpec) else pattern.keep_mask(k)
    llr = np.asarray(llr, dtype=np.float64)
    if llr.shape[-1] != int(keep.sum()):
        raise TurboError(f"expected {int(keep.sum())} LLRs, got {llr.shape[-1]}")
    out = np.zeros(llr.shape[:-1] + (keep.size,))
    out[..., keep] = llr
    return out


def turbo_encode(spec: TurboCodeSpec, info) -> np.ndarray:
    return puncture(encode_unpunctured(spec, info), spec)


# --- iterative decoding ---

@njit(cache=True)
def _ms(a, b, exact):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if exact:
        if a > b:
            return a + np.log1p(np.exp(b - a))
        return b + np.log1p(np.exp(a - b))
    return a if a > b else b


@njit(cache=True)
def _rsc_bcjr(nxt, par, Ls, Lp, La, exact, alpha, beta, post):
    """Posterior input LLRs over a zero-terminated trellis of len(Ls) steps."""
    T = Ls.shape[0]
    S = nxt.shape[0]
    for s in range(S):
        alpha[0, s] = -np.inf
        beta[T, s] = -np.inf
    alpha[0, 0] = 0.0
    beta[T, 0] = 0.0
    for t in range(T):
        for s in range(S):
            alpha[t + 1, s] = -np.inf
        for s in range(S):
            a = alpha[t, s]
            if a == -np.inf:
                continue
            for u in range(2):
                g = 0.5 * (1 - 2 * u) * (Ls[t] + La[t]) + 0.5 * (1 - 2 * par[s, u]) * Lp[t]
                d = nxt[s, u]
                alpha[t + 1, d] = _ms(alpha[t + 1, d], a + g, exact)
        m = -np.inf
        for s in range(S):
            if alpha[t + 1, s] > m:
                m = alpha[t + 1, s]
        for s in range(S):
            alpha[t + 1, s] -= m
    for t in range(T - 1, -1, -1):
        m = -np.inf
        for s in range(S):
            b = -np.inf
            for u in range(2):
                g = 0.5 * (1 - 2 * u) * (Ls[t] + La[t]) + 0.5 * (1 - 2 * par[s, u]) * Lp[t]
                b = _ms(b, g + beta[t + 1, nxt[s, u]], exact)
            beta[t, s] = b
            if b > m:
                m = b
        for s in range(S):
            beta[t, s] -= m
        l0 = -np.inf
        l1 = -np.inf
        for s in range(S):
            a = alpha[t, s]
            if a == -np.inf:
                continue
            for u in range(2):
                g = 0.5 * (1 - 2 * u) * (Ls[t] + La[t]) + 0.5 * (1 - 2 * par[s, u]) * Lp[t]
                v = a + g + beta[t + 1, nxt[s, u]]
                if u == 0:
                    l0 = _ms(l0, v, exact)
                else:
                    l1 = _ms(l1, v, exact)
        post[t] = l0 - l1


@njit(cache=True)
def _turbo_frame(nxt, par, perm, full, k, iterations, exact, early_stop, out_llr):
    T = k + 4
    S = nxt.shape[0]
    Ls1 = np.zeros(T)
    Lp1 = np.zeros(T)
    Ls2 = np.zeros(T)
    Lp2 = np.zeros(T)
    for t in range(T):
        Ls1[t] = full[2 * t]
        if t % 2 == 0:
            Lp1[t] = full[2 * t + 1]
        else:
            Lp2[t] = full[2 * t + 1]
    for i in range(k):
        Ls2[i] = Ls1[perm[i]]
    La1 = np.zeros(T)
    La2 = np.zeros(T)
    Le1 = np.zeros(T)
    post1 = np.zeros(T)
    post2 = np.zeros(T)
    alpha = np.empty((T + 1, S))
    beta = np.empty((T + 1, S))
    used = 0
    for it in range(iterations):
        used = it + 1
        _rsc_bcjr(nxt, par, Ls1, Lp1, La1, exact, alpha, beta, post1)
        for t in range(k):
            Le1[t] = post1[t] - Ls1[t] - La1[t]
        for i in range(k):
            La2[i] = Le1[perm[i]]
        _rsc_bcjr(nxt, par, Ls2, Lp2, La2, exact, alpha, beta, post2)
        # stop once both decoders agree and the decisions held for a full iteration
        agree = it > 0
        for i in range(k):
            e2 = post2[i] - Ls2[i] - La2[i]
            j = perm[i]
            La1[j] = e2
            total = Ls1[j] + Le1[j] + e2
            if (total < 0) != (post1[j] < 0) or (total < 0) != (out_llr[j] < 0):
                agree = False
            out_llr[j] = total
        if early_stop and agree:
            break
    return used


@njit(cache=True)
def _turbo_batch(nxt, par, perm, full, k, iterations, exact, early_stop, out_llr, iters):
    for f in range(full.shape[0]):
        iters[f] = _turbo_frame(nxt, par, perm, full[f], k, iterations, exact, early_stop, out_llr[f])


TURBO_ALGOS = ("log_map", "max_log_map")


def _decode_args(spec, iterations, algo):
    if algo not in TURBO_ALGOS:
        raise TurboError(f"unknown turbo algorithm {algo!r}")
    if iterations < 1:
        raise TurboError("iterations must be >= 1")
    nxt, par, _ = spec._tables
    return nxt, par, spec.interleaver.perm, spec.k, int(iterations), algo == "log_map"


def turbo_decode_batch(spec: TurboCodeSpec, llr, iterations: int = 10, algo: str = "log_map",
                       early_stop: bool = True):
    """Returns (info decisions, posterior info LLRs, iterations used)."""
    llr = np.atleast_2d(np.asarray(llr, dtype=np.float64))
    full = np.ascontiguousarray(depuncture(llr, spec))
    nxt, par, perm, k, its, exact = _decode_args(spec, iterations, algo)
    post = np.zeros((full.shape[0], k))
    iters = np.zeros(full.shape[0], dtype=np.int64)
    _turbo_batch(nxt, par, perm, full, k, its, exact, bool(early_stop), post, iters)
    return (post < 0).astype(np.uint8), post, iters


def turbo_decode(spec: TurboCodeSpec, llr, iterations: int = 10, algo: str = "log_map",
                 early_stop: bool = True) -> DecodeOutcome:
    """Iterative decoding; always emits a codeword (complete decoder).

    soft_metric is the correlation between the re-encoded punctured
    codeword and the channel LLRs.
    """
    llr = np.asarray(llr, dtype=np.float64)
    if llr.shape != (spec.n_punctured,):
        raise TurboError(f"expected {spec.n_punctured} LLRs, got shape {llr.shape}")
    info, post, iters = turbo_decode_batch(spec, llr, iterations, algo, early_stop)
    cw = turbo_encode(spec, info[0])
    metric = float(np.dot(1.0 - 2.0 * cw, llr))
    return DecodeOutcome(info[0], cw, SUCCESS, int(iters[0]), metric, post[0])


# --- distance search ---

DISTANCE_GUARD = 10**8


@dataclass(frozen=True)
class DistanceReport:
    d_min_upper: int
    A_at_d: int
    w_max_searched: int
    exhaustive_flag: bool

    def __post_init__(self):
        if self.d_min_upper < 1:
            raise TurboError("d_min_upper must be >= 1")

    def rank_key(self):
        return (-self.d_min_upper, self.A_at_d)


def generator_rows(spec: TurboCodeSpec) -> np.ndarray:
    """Unpunctured encodings of the unit vectors, bit-packed (k x words)."""
    return pack_bits(encode_unpunctured(spec, np.eye(spec.k, dtype=np.uint8)))


def _check_guard(k: int, w_max: int) -> int:
    if w_max < 1:
        raise TurboError("w_max must be >= 1")
    w_max = min(w_max, k)
    total = sum(math.comb(k, w) for w in range(1, w_max + 1))
    if total > DISTANCE_GUARD:
        raise TurboError(f"{total} input patterns exceed the enumeration guard of {DISTANCE_GUARD}")
    return w_max


@njit(cache=True)
def _scan(G, w_max, keep, thresh, store, out_words):
    """Enumerate all inputs of weight 1..w_max. Without ``store``: return the
    minimum punctured weight and its multiplicity. With ``store``: write the
    codewords whose unpunctured weight is <= thresh into out_words."""
    k, W = G.shape
    acc = np.zeros((w_max + 1, W), dtype=np.uint64)
    idx = np.zeros(w_max, dtype=np.int64)
    best = 1 << 30
    mult = 0
    nstore = 0
    for w in range(1, w_max + 1):
        for l in range(w):
            idx[l] = l
        start = 0
        while True:
            for l in range(start, w):
                for q in range(W):
                    acc[l + 1, q] = acc[l, q] ^ G[idx[l], q]
            if store:
                s = 0
                for q in range(W):
                    s += _popcount64(acc[w, q])
                if s <= thresh:
                    if nstore < out_words.shape[0]:
                        for q in range(W):
                            out_words[nstore, q] = acc[w, q]
                    nstore += 1
            else:
                s = 0
                for q in range(W):
                    s += _popcount64(acc[w, q] & keep[q])
                if s < best:
                    best = s
                    mult = 1
                elif s == best:
                    mult += 1
            l = w - 1
            while l >= 0 and idx[l] == k - w + l:
                l -= 1
            if l < 0:
                break
            idx[l] += 1
            for j in range(l + 1, w):
                idx[j] = idx[j - 1] + 1
            start = l
    if store:
        return nstore, 0
    return best, mult


@njit(cache=True)
def _best_over_patterns(words, keeps, out):
    for p in range(keeps.shape[0]):
        best = 1 << 30
        mult = 0
        for c in range(words.shape[0]):
            s = 0
            for q in range(words.shape[1]):
                s += _popcount64(words[c, q] & keeps[p, q])
            if s < best:
                best = s
                mult = 1
            elif s == best:
                mult += 1
        out[p, 0] = best
        out[p, 1] = mult


def distance_search(spec: TurboCodeSpec, w_max: int = 4) -> DistanceReport:
    """Minimum punctured weight over all inputs of weight <= w_max.

    An upper bound on d_min unless every input was enumerated.
    """
    w_max = _check_guard(spec.k, w_max)
    G = generator_rows(spec)
    keep = pack_bits(spec.keep.astype(np.uint8)[None, :])[0]
    best, mult = _scan(G, w_max, keep, 0, False, np.zeros((0, G.shape[1]), dtype=np.uint64))
    return DistanceReport(int(best), int(mult), w_max, w_max >= spec.k)


def distance_over_patterns(spec: TurboCodeSpec, patterns, w_max: int = 4, thresh: int | None = None):
    """distance_search for one interleaver under many puncturing patterns.

    Low-weight unpunctured codewords are collected once; a pattern that
    deletes P bits cannot lower a weight by more than P, so collecting
    every codeword of unpunctured weight <= d + P is exact. The threshold
    grows until that holds for every pattern.
    """
    w_max = _check_guard(spec.k, w_max)
    G = generator_rows(spec)
    keeps = np.stack([pack_bits(p.keep_mask(spec.k).astype(np.uint8)[None, :])[0] for p in patterns])
    dropped = max(spec.n_unpunctured - p.kept(spec.k) for p in patterns)
    thresh = thresh if thresh is not None else dropped + 10
    while True:
        cnt, _ = _scan(G, w_max, keeps[0], thresh, True, np.zeros((0, G.shape[1]), dtype=np.uint64))
        words = np.zeros((cnt, G.shape[1]), dtype=np.uint64)
        _scan(G, w_max, keeps[0], thresh, True, words)
        res = np.zeros((len(keeps), 2), dtype=np.int64)
        _best_over_patterns(words, keeps, res)
        if cnt and res[:, 0].max() + dropped <= thresh or thresh >= spec.n_unpunctured:
            break
        thresh = min(spec.n_unpunctured, int(res[:, 0].max()) + dropped if cnt else thresh + 8)
    return [DistanceReport(int(d), int(a), w_max, w_max >= spec.k) for d, a in res]


@dataclass(frozen=True)
class DesignResult:
    interleaver: Interleaver
    puncturing: PuncturingPattern
    report: DistanceReport
    candidate_index: int


def generate_interleavers(kind: str, K: int, count: int, seed: int = 0, params: dict | None = None):
    """``count`` interleavers with per-candidate seeds derived from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(count, np.uint32)
    return [make_interleaver(kind, K, params, int(s)) for s in seeds]


def _evaluate_candidate(args):
    idx, il, k, patterns, w_max, rsc = args
    spec = TurboCodeSpec(k, il, patterns[0], rsc)
    reps = distance_over_patterns(spec, patterns, w_max)
    j = min(range(len(reps)), key=lambda q: (reps[q].rank_key(), q))
    return DesignResult(il, patterns[j], reps[j], idx)


def rank_results(results):
    return sorted(results, key=lambda r: (r.report.rank_key(), r.candidate_index))


def refinement_patterns(k: int, count: int = 3000, seed: int = 3) -> list[PuncturingPattern]:
    """Wider pattern pool for the second search stage.

    Period-(2 P) masks (P = (k + 4) / 2 slots per half frame) with 4 zeros,
    sampled; period-P masks with one zero plus all four tail bits dropped;
    and period-2P masks with 3 zeros plus two tail bits dropped. All of them
    remove 8 bits from the unpunctured frame.
    """
    from itertools import combinations

    T = k + 4
    out = periodic_patterns(k, T // 2, 4, count=count, seed=seed)
    out += periodic_patterns(k, T // 4, 1, tail_mask=(0, 0, 0, 0))
    for zs in combinations(range(4), 2):
        tm = tuple(0 if i in zs else 1 for i in range(4))
        out += periodic_patterns(k, T // 2, 3, tail_mask=tm)
    return out


def _run_jobs(jobs, workers):
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_evaluate_candidate, jobs, chunksize=8))
    return [_evaluate_candidate(j) for j in jobs]


def design_search(interleavers, patterns, w_max: int = 4, budget: int | None = None, k: int | None = None,
                  rsc: RscSpec = RscSpec(), workers: int = 1, top: int | None = None,
                  refine_patterns=None, refine_top: int = 60) -> list[DesignResult]:
    """Joint interleaver / puncturing search.

    Every interleaver (up to ``budget`` of them) is scored under every
    pattern; each keeps its best pattern. With ``refine_patterns`` the
    ``refine_top`` best candidates are scored again over both pattern sets.
    Results are ranked by largest d_min_upper, then smallest multiplicity,
    then candidate order.
    """
    interleavers = list(interleavers)
    patterns = list(patterns)
    if not interleavers or not patterns:
        raise TurboError("design search needs at least one interleaver and one pattern")
    if budget is not None:
        if budget < 1:
            raise TurboError("budget must be >= 1")
        interleavers = interleavers[:budget]
    k = k or interleavers[0].K
    jobs = [(i, il, k, patterns, w_max, rsc) for i, il in enumerate(interleavers)]
    ranked = rank_results(_run_jobs(jobs, workers))
    if refine_patterns:
        both = patterns + list(refine_patterns)
        head = [(r.candidate_index, r.interleaver, k, both, w_max, rsc) for r in ranked[:refine_top]]
        ranked = rank_results(_run_jobs(head, workers) + ranked[refine_top:])
    return ranked[:top] if top else ranked
