"""Most-reliable-basis (ordered statistics) decoding of binary linear codes.

Per frame: sort positions by reliability, row-reduce G visiting columns in
that order (dependent columns are skipped), hard-decide the k basis bits
and re-encode every test pattern of weight <= order on the basis. The
winner minimises the correlation discrepancy, i.e. the sum of |LLR| over
positions where the candidate disagrees with the hard decision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .block_codes import SUCCESS, BinaryLinearCode, DecodeOutcome
from .gf import _rref_packed


class MrbError(ValueError):
    pass


@dataclass(frozen=True)
class MrbConfig:
    """``early_termination`` stops once the best candidate is provably ML;
    it needs ``d_min`` (a lower bound on the minimum distance is enough)."""

    order: int = 2
    candidate_limit: int | None = None
    early_termination: bool = False
    d_min: int | None = None

    def __post_init__(self):
        if self.order < 0:
            raise MrbError("order must be non-negative")
        if self.candidate_limit is not None and self.candidate_limit < 1:
            raise MrbError("candidate_limit must be positive")
        if self.early_termination and not self.d_min:
            raise MrbError("early termination needs d_min")

    @property
    def label(self) -> str:
        return f"mrb{self.order}"


@njit(cache=True)
def _ctz(v):
    c = 0
    while (v & 1) == 0:
        v >>= 1
        c += 1
    return c


@njit(cache=True)
def _wcost(vec, table, nbytes):
    s = 0.0
    for b in range(nbytes):
        s += table[b, (vec[b >> 3] >> np.uint64(8 * (b & 7))) & np.uint64(255)]
    return s


@njit(cache=True)
def _ml_bound(a, ordr, diff, dmin):
    """Smallest discrepancy any other codeword could have (sufficient ML test)."""
    need = dmin - diff.sum()
    if need <= 0:
        return 0.0
    s = 0.0
    for q in range(ordr.shape[0] - 1, -1, -1):
        p = ordr[q]
        if not diff[p]:
            s += a[p]
            need -= 1
            if need == 0:
                break
    return s


@njit(cache=True)
def _mrb_frame(G, n, k, llr, order, limit, dmin, out):
    a = np.abs(llr)
    ordr = np.argsort(-a, kind="mergesort")
    rows = G.copy()
    rank, piv = _rref_packed(rows, n, ordr)
    if rank < k:
        return -1.0, 0
    is_piv = np.zeros(n, dtype=np.bool_)
    for r in range(k):
        is_piv[piv[r]] = True
    m = n - k
    nb = np.empty(m, dtype=np.int64)
    t = 0
    for q in range(n):
        if not is_piv[ordr[q]]:
            nb[t] = ordr[q]
            t += 1
    Wm = max((m + 63) >> 6, 1)
    nbytes = (m + 7) >> 3
    P = np.zeros((k, Wm), dtype=np.uint64)
    for r in range(k):
        for t in range(m):
            c = nb[t]
            if (rows[r, c >> 6] >> np.uint64(c & 63)) & np.uint64(1):
                P[r, t >> 6] |= np.uint64(1) << np.uint64(t & 63)
    z = np.empty(n, dtype=np.uint8)
    for p in range(n):
        z[p] = 1 if llr[p] < 0 else 0
    r0 = np.zeros(Wm, dtype=np.uint64)
    for t in range(m):
        if z[nb[t]]:
            r0[t >> 6] |= np.uint64(1) << np.uint64(t & 63)
    for r in range(k):
        if z[piv[r]]:
            for q in range(Wm):
                r0[q] ^= P[r, q]
    # per-byte weighted popcount tables over the non-basis positions
    table = np.zeros((max(nbytes, 1), 256))
    for b in range(nbytes):
        for v in range(1, 256):
            j = _ctz(v)
            pos = 8 * b + j
            table[b, v] = table[b, v & (v - 1)] + (a[nb[pos]] if pos < m else 0.0)
    # lb[w]: cheapest possible basis part of any weight-w pattern
    lb = np.zeros(order + 2)
    for w in range(1, order + 2):
        lb[w] = lb[w - 1] + (a[piv[k - w]] if w <= k else np.inf)

    best = _wcost(r0, table, nbytes)
    best_w = 0
    best_idx = np.zeros(max(order, 1), dtype=np.int64)
    count = 1
    diff = np.zeros(n, dtype=np.uint8)
    done = False
    if dmin > 0:
        for t in range(m):
            diff[nb[t]] = (r0[t >> 6] >> np.uint64(t & 63)) & np.uint64(1)
        if best <= _ml_bound(a, ordr, diff, dmin):
            done = True

    idx = np.zeros(max(order, 1), dtype=np.int64)
    acc = np.zeros((order + 1, Wm), dtype=np.uint64)
    pc = np.zeros(order + 1)
    for q in range(Wm):
        acc[0, q] = r0[q]
    w = 1
    while not done and w <= min(order, k):
        if lb[w] >= best:
            break
        for l in range(w):
            idx[l] = l
        start = 0
        while True:
            for l in range(start, w):
                r = idx[l]
                for q in range(Wm):
                    acc[l + 1, q] = acc[l, q] ^ P[r, q]
                pc[l + 1] = pc[l] + a[piv[r]]
            if pc[w] < best:
                c = pc[w] + _wcost(acc[w], table, nbytes)
                if c < best:
                    best = c
                    best_w = w
                    for l in range(w):
                        best_idx[l] = idx[l]
                    if dmin > 0:
                        diff[:] = 0
                        for t in range(m):
                            diff[nb[t]] = (acc[w, t >> 6] >> np.uint64(t & 63)) & np.uint64(1)
                        for l in range(w):
                            diff[piv[idx[l]]] = 1
                        if best <= _ml_bound(a, ordr, diff, dmin):
                            done = True
                            break
            count += 1
            if limit > 0 and count >= limit:
                done = True
                break
            l = w - 1
            while l >= 0 and idx[l] == k - w + l:
                l -= 1
            if l < 0:
                break
            idx[l] += 1
            for j in range(l + 1, w):
                idx[j] = idx[j - 1] + 1
            start = l
        w += 1

    # re-encode the winner from the full reduced rows
    u = np.empty(k, dtype=np.uint8)
    for r in range(k):
        u[r] = z[piv[r]]
    for l in range(best_w):
        u[best_idx[l]] ^= 1
    W = rows.shape[1]
    cw = np.zeros(W, dtype=np.uint64)
    for r in range(k):
        if u[r]:
            for q in range(W):
                cw[q] ^= rows[r, q]
    for p in range(n):
        out[p] = (cw[p >> 6] >> np.uint64(p & 63)) & np.uint64(1)
    return best, count


@njit(cache=True)
def _mrb_batch(G, n, k, llr, order, limit, dmin, out, metric, counts):
    for f in range(llr.shape[0]):
        mt, c = _mrb_frame(G, n, k, llr[f], order, limit, dmin, out[f])
        metric[f] = mt
        counts[f] = c


def _kernel_args(code: BinaryLinearCode, cfg: MrbConfig):
    if cfg.order > code.k:
        raise MrbError(f"order {cfg.order} exceeds k = {code.k}")
    limit = cfg.candidate_limit or 0
    dmin = int(cfg.d_min) if cfg.early_termination else 0
    return np.ascontiguousarray(code.G.packed), code.n, code.k, cfg.order, limit, dmin


def _check(code, llr, batch: bool) -> np.ndarray:
    llr = np.ascontiguousarray(np.atleast_2d(llr) if batch else llr, dtype=np.float64)
    if llr.shape[-1] != code.n or (not batch and llr.ndim != 1):
        raise MrbError(f"expected {code.n} LLRs, got shape {llr.shape}")
    if not np.all(np.isfinite(llr)):
        raise MrbError("LLRs must be finite")
    return llr


def mrb_decode(code: BinaryLinearCode, llr, cfg: MrbConfig = MrbConfig()) -> DecodeOutcome:
    """Order-``cfg.order`` MRB decoding; soft_metric is the winning discrepancy,
    iterations_used the number of candidates scored."""
    llr = _check(code, llr, False)
    G, n, k, order, limit, dmin = _kernel_args(code, cfg)
    out = np.zeros(n, dtype=np.uint8)
    metric, count = _mrb_frame(G, n, k, llr, order, limit, dmin, out)
    if metric < 0:
        raise MrbError("generator matrix is rank deficient")
    info = out[list(code.info_positions)].copy()
    return DecodeOutcome(info, out, SUCCESS, int(count), float(metric))


def mrb_batch(code: BinaryLinearCode, llr, cfg: MrbConfig = MrbConfig()):
    """Decode frames row by row; returns (codewords, discrepancies, candidate counts)."""
    llr = _check(code, llr, True)
    G, n, k, order, limit, dmin = _kernel_args(code, cfg)
    out = np.zeros(llr.shape, dtype=np.uint8)
    metric = np.zeros(llr.shape[0])
    counts = np.zeros(llr.shape[0], dtype=np.int64)
    _mrb_batch(G, n, k, llr, order, limit, dmin, out, metric, counts)
    if np.any(metric < 0):
        raise MrbError("generator matrix is rank deficient")
    return out, metric, counts


def mrb_on_ldpc(code, llr, cfg: MrbConfig = MrbConfig()) -> DecodeOutcome:
    """MRB decoding of an LDPC code through its dense generator."""
    return mrb_decode(code.as_linear_code(), llr, cfg)
