"""Syndrome (Wolf) trellis of a binary linear block code, with Viterbi and
log-domain BCJR decoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .block_codes import DETECTED_FAILURE, SUCCESS, BinaryLinearCode, DecodeOutcome

MAX_LOG2_STATES = 24


class TrellisError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Trellis:
    """Time-variant trellis; states at depth t are partial syndromes.

    ``states[state_off[t]:state_off[t+1]]`` lists the active syndromes at
    depth t (t = 0..n). Edges of section t occupy
    ``edge_off[t]:edge_off[t+1]`` and index into the state lists of depths
    t and t+1.
    """

    n: int
    k: int
    states: np.ndarray
    state_off: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_bit: np.ndarray
    edge_off: np.ndarray

    def state_count(self, t: int) -> int:
        return int(self.state_off[t + 1] - self.state_off[t])

    @property
    def state_profile(self) -> list[int]:
        return [self.state_count(t) for t in range(self.n + 1)]

    @property
    def max_states(self) -> int:
        return max(self.state_profile)

    def section_states(self, t: int) -> np.ndarray:
        return self.states[self.state_off[t] : self.state_off[t + 1]]

    def count_paths(self) -> int:
        counts = [1]
        for t in range(self.n):
            nxt = [0] * self.state_count(t + 1)
            for e in range(self.edge_off[t], self.edge_off[t + 1]):
                nxt[self.edge_dst[e]] += counts[self.edge_src[e]]
            counts = nxt
        return counts[0]

    def iter_paths(self):
        """Yield every start-to-end label sequence (exponential; small codes only)."""
        out = [[] for _ in range(self.n)]
        for t in range(self.n):
            for e in range(self.edge_off[t], self.edge_off[t + 1]):
                out[t].append((int(self.edge_src[e]), int(self.edge_dst[e]), int(self.edge_bit[e])))
        path = np.zeros(self.n, dtype=np.uint8)

        def walk(t, s):
            if t == self.n:
                yield path.copy()
                return
            for src, dst, bit in out[t]:
                if src == s:
                    path[t] = bit
                    yield from walk(t + 1, dst)

        yield from walk(0, 0)


def build_wolf_trellis(code: BinaryLinearCode) -> Trellis:
    """Prune the syndrome trellis to states both reachable and co-reachable."""
    n, k = code.n, code.k
    x = min(k, n - k)
    if x > MAX_LOG2_STATES:
        raise TrellisError(
            f"trellis would need up to 2^{x} states; refusing above 2^{MAX_LOG2_STATES} "
            "(a (128,64) code would reach 2^64, which is infeasible)"
        )
    r = n - k
    if r > 63:
        raise TrellisError("syndromes wider than 63 bits are not supported")
    H = code.parity_dense
    weights = (np.uint64(1) << np.arange(r, dtype=np.uint64)).astype(np.uint64)
    cols = np.array([int((H[:, j].astype(np.uint64) * weights).sum()) for j in range(n)], dtype=np.uint64)

    fwd = [np.zeros(1, dtype=np.uint64)]
    for t in range(n):
        s = fwd[-1]
        fwd.append(np.unique(np.concatenate([s, s ^ cols[t]])))
    bwd = [None] * (n + 1)
    bwd[n] = np.zeros(1, dtype=np.uint64)
    for t in range(n - 1, -1, -1):
        s = bwd[t + 1]
        bwd[t] = np.unique(np.concatenate([s, s ^ cols[t]]))
    active = [np.intersect1d(fwd[t], bwd[t], assume_unique=True) for t in range(n + 1)]
    if active[n].size != 1 or active[n][0] != 0:
        raise TrellisError("zero syndrome not reachable at the end")

    state_off = np.zeros(n + 2, dtype=np.int64)
    for t in range(n + 1):
        state_off[t + 1] = state_off[t] + active[t].size
    src_l, dst_l, bit_l = [], [], []
    edge_off = np.zeros(n + 1, dtype=np.int64)
    for t in range(n):
        cur, nxt = active[t], active[t + 1]
        for bit in (0, 1):
            target = cur ^ cols[t] if bit else cur
            pos = np.searchsorted(nxt, target)
            pos_c = np.minimum(pos, nxt.size - 1)
            ok = nxt[pos_c] == target
            src_l.append(np.flatnonzero(ok))
            dst_l.append(pos_c[ok])
            bit_l.append(np.full(int(ok.sum()), bit, dtype=np.uint8))
        edge_off[t + 1] = edge_off[t] + sum(a.size for a in src_l[-2:])
    return Trellis(
        n,
        k,
        np.concatenate(active),
        state_off,
        np.concatenate(src_l).astype(np.int64),
        np.concatenate(dst_l).astype(np.int64),
        np.concatenate(bit_l),
        edge_off,
    )


@njit(cache=True)
def _viterbi(state_off, e_src, e_dst, e_bit, e_off, llr, out):
    n = llr.shape[0]
    maxs = 0
    for t in range(n + 1):
        c = state_off[t + 1] - state_off[t]
        if c > maxs:
            maxs = c
    metric = np.empty(maxs)
    new = np.empty(maxs)
    surv = np.empty(state_off[n + 1], dtype=np.int64)
    metric[0] = 0.0
    for t in range(n):
        nd = state_off[t + 2] - state_off[t + 1]
        for j in range(nd):
            new[j] = np.inf
        for e in range(e_off[t], e_off[t + 1]):
            cand = metric[e_src[e]] + (llr[t] if e_bit[e] else 0.0)
            d = e_dst[e]
            if cand < new[d]:
                new[d] = cand
                surv[state_off[t + 1] + d] = e
        for j in range(nd):
            metric[j] = new[j]
    s = 0
    for t in range(n - 1, -1, -1):
        e = surv[state_off[t + 1] + s]
        out[t] = e_bit[e]
        s = e_src[e]
    return metric[0]


@njit(cache=True)
def _viterbi_batch(state_off, e_src, e_dst, e_bit, e_off, llr, out):
    for f in range(llr.shape[0]):
        _viterbi(state_off, e_src, e_dst, e_bit, e_off, llr[f], out[f])


@njit(cache=True)
def _maxstar(a, b, exact):
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
def _bcjr(state_off, e_src, e_dst, e_bit, e_off, llr, exact, post, state_post):
    n = llr.shape[0]
    ns = state_off[n + 1]
    alpha = np.full(ns, -np.inf)
    beta = np.full(ns, -np.inf)
    alpha[0] = 0.0
    for t in range(n):
        base0 = state_off[t]
        base1 = state_off[t + 1]
        for e in range(e_off[t], e_off[t + 1]):
            g = 0.5 * llr[t] * (1.0 - 2.0 * e_bit[e])
            d = base1 + e_dst[e]
            alpha[d] = _maxstar(alpha[d], alpha[base0 + e_src[e]] + g, exact)
        # normalise so that the section's state metrics form a distribution
        m = -np.inf
        for j in range(base1, state_off[t + 2]):
            m = _maxstar(m, alpha[j], True)
        for j in range(base1, state_off[t + 2]):
            alpha[j] -= m
    beta[state_off[n]] = 0.0
    for t in range(n - 1, -1, -1):
        base0 = state_off[t]
        base1 = state_off[t + 1]
        for e in range(e_off[t], e_off[t + 1]):
            g = 0.5 * llr[t] * (1.0 - 2.0 * e_bit[e])
            s = base0 + e_src[e]
            beta[s] = _maxstar(beta[s], beta[base1 + e_dst[e]] + g, exact)
        m = -np.inf
        for j in range(base0, base1):
            m = _maxstar(m, beta[j], True)
        for j in range(base0, base1):
            beta[j] -= m
    for t in range(n):
        base0 = state_off[t]
        base1 = state_off[t + 1]
        l0 = -np.inf
        l1 = -np.inf
        for e in range(e_off[t], e_off[t + 1]):
            g = 0.5 * llr[t] * (1.0 - 2.0 * e_bit[e])
            v = alpha[base0 + e_src[e]] + g + beta[base1 + e_dst[e]]
            if e_bit[e]:
                l1 = _maxstar(l1, v, exact)
            else:
                l0 = _maxstar(l0, v, exact)
        post[t] = l0 - l1
    for t in range(n + 1):
        m = -np.inf
        for j in range(state_off[t], state_off[t + 1]):
            m = _maxstar(m, alpha[j] + beta[j], True)
        for j in range(state_off[t], state_off[t + 1]):
            state_post[j] = alpha[j] + beta[j] - m


def _args(tr: Trellis):
    return tr.state_off, tr.edge_src, tr.edge_dst, tr.edge_bit, tr.edge_off


def _check_llr(tr: Trellis, llr) -> np.ndarray:
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.shape[-1] != tr.n:
        raise TrellisError(f"expected {tr.n} LLRs, got {llr.shape[-1]}")
    if not np.all(np.isfinite(llr)):
        raise TrellisError("LLRs must be finite")
    return llr


def viterbi_decode(trellis: Trellis, llr) -> DecodeOutcome:
    """Maximum-likelihood codeword: maximises sum_j (1 - 2 c_j) llr_j."""
    llr = _check_llr(trellis, llr)
    cw = np.zeros(trellis.n, dtype=np.uint8)
    _viterbi(*_args(trellis), llr, cw)
    corr = float(np.dot(1.0 - 2.0 * cw, llr))
    return DecodeOutcome(cw[: trellis.k].copy(), cw, SUCCESS, 0, corr)


def viterbi_batch(trellis: Trellis, llr) -> np.ndarray:
    llr = _check_llr(trellis, np.atleast_2d(llr))
    out = np.zeros(llr.shape, dtype=np.uint8)
    _viterbi_batch(*_args(trellis), llr, out)
    return out


def bcjr_posteriors(trellis: Trellis, llr, exact: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Per-bit posterior LLRs and log state posteriors (normalised per depth)."""
    llr = _check_llr(trellis, llr)
    post = np.zeros(trellis.n)
    state_post = np.zeros(trellis.state_off[-1])
    _bcjr(*_args(trellis), llr, exact, post, state_post)
    return post, state_post


def bcjr_decode(trellis: Trellis, llr, exact: bool = True, code: BinaryLinearCode | None = None):
    """Forward-backward MAP decoding; ``exact=False`` gives max-log-MAP.

    The hard decision is the sign of each posterior. It is checked against
    the trellis (or ``code`` if given) and flagged as a detected failure
    when it is not a codeword.
    """
    post, _ = bcjr_posteriors(trellis, llr, exact)
    cw = (post < 0).astype(np.uint8)
    valid = _is_path(trellis, cw) if code is None else bool(code.is_codeword(cw))
    status = SUCCESS if valid else DETECTED_FAILURE
    return post, DecodeOutcome(cw[: trellis.k].copy(), cw if valid else None, status, 0, None, post)


def _is_path(tr: Trellis, word) -> bool:
    s = 0
    for t in range(tr.n):
        nxt = -1
        for e in range(tr.edge_off[t], tr.edge_off[t + 1]):
            if tr.edge_src[e] == s and tr.edge_bit[e] == word[t]:
                nxt = int(tr.edge_dst[e])
                break
        if nxt < 0:
            return False
        s = nxt
    return True
