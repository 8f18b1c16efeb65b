"""Binary LDPC codes: alist I/O, M-SC-MPC construction, encoding and
flooding-schedule belief propagation (sum-product or normalised min-sum)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .block_codes import DETECTED_FAILURE, SUCCESS, BinaryLinearCode, DecodeOutcome
from .gf import Gf2Matrix, rref


class AlistError(ValueError):
    pass


class LdpcError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Sparse parity-check code with a derived systematic encoder.

    ``parity_positions[r]`` is determined by row r of ``encoder``:
    ``c[parity_positions] = encoder @ c[info_positions] (mod 2)``.
    """

    n: int
    k: int
    H: np.ndarray
    construction: str
    info_positions: np.ndarray
    parity_positions: np.ndarray
    encoder: np.ndarray
    name: str = ""
    # edge-indexed adjacency (edges sorted by check)
    check_ptr: np.ndarray = field(init=False, repr=False)
    edge_var: np.ndarray = field(init=False, repr=False)
    var_ptr: np.ndarray = field(init=False, repr=False)
    var_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rows, cols = np.nonzero(self.H)
        m = self.H.shape[0]
        check_ptr = np.zeros(m + 1, dtype=np.int64)
        np.add.at(check_ptr, rows + 1, 1)
        check_ptr = np.cumsum(check_ptr)
        order = np.argsort(cols, kind="stable")
        var_ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(var_ptr, cols + 1, 1)
        object.__setattr__(self, "check_ptr", check_ptr)
        object.__setattr__(self, "edge_var", cols.astype(np.int64))
        object.__setattr__(self, "var_ptr", np.cumsum(var_ptr))
        object.__setattr__(self, "var_edges", order.astype(np.int64))

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def column_degrees(self) -> np.ndarray:
        return self.H.sum(axis=0)

    @property
    def row_degrees(self) -> np.ndarray:
        return self.H.sum(axis=1)

    def check_lists(self) -> list[list[int]]:
        return [list(np.flatnonzero(r)) for r in self.H]

    def as_linear_code(self) -> BinaryLinearCode:
        """Dense generator/parity-check view (original coordinates) for MRB decoding."""
        cached = self.__dict__.get("_linear")
        if cached is None:
            G = ldpc_encode(self, np.eye(self.k, dtype=np.uint8))
            H = self.H[_independent_rows(self.H)]
            cached = BinaryLinearCode(
                self.n, self.k, Gf2Matrix.from_dense(G), Gf2Matrix.from_dense(H),
                self.name, None, tuple(int(i) for i in self.info_positions),
            )
            object.__setattr__(self, "_linear", cached)
        return cached


def _independent_rows(H) -> np.ndarray:
    _, rank, piv = rref(Gf2Matrix.from_dense(np.asarray(H).T))
    return np.array(sorted(piv), dtype=np.int64)


def code_from_parity_check(H, construction: str = "alist", name: str = "") -> LdpcCode:
    """Derive a systematic encoder; pivots are taken from the rightmost columns."""
    H = (np.asarray(H, dtype=np.uint8) & 1).copy()
    m, n = H.shape
    red, rank, piv = rref(Gf2Matrix.from_dense(H), column_order=np.arange(n - 1, -1, -1))
    R = red.to_dense()[:rank]
    parity = np.array(piv, dtype=np.int64)
    pset = set(piv)
    info = np.array([j for j in range(n) if j not in pset], dtype=np.int64)
    A = R[:, info].astype(np.uint8)
    H.setflags(write=False)
    return LdpcCode(n, n - rank, H, construction, info, parity, A, name)


def ldpc_encode(code: LdpcCode, info) -> np.ndarray:
    info = np.asarray(info, dtype=np.uint8)
    if info.shape[-1] != code.k:
        raise LdpcError(f"expected {code.k} information bits, got {info.shape[-1]}")
    batch = info.reshape(-1, code.k)
    out = np.zeros((batch.shape[0], code.n), dtype=np.uint8)
    out[:, code.info_positions] = batch
    out[:, code.parity_positions] = (batch.astype(np.int64) @ code.encoder.T.astype(np.int64)) & 1
    return out.reshape(info.shape[:-1] + (code.n,))


# --- alist ---

def _ints(line: str, lineno: int, path: str) -> list[int]:
    try:
        return [int(x) for x in line.split()]
    except ValueError:
        raise AlistError(f"{path}:{lineno}: non-integer entry") from None


def parse_alist(text: str, path: str = "<string>") -> np.ndarray:
    """Parity-check matrix from alist text (1-based indices; zero padding ignored)."""
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if len(lines) < 4:
        raise AlistError(f"{path}: truncated alist header")
    it = iter(lines)

    def take(expect=None):
        try:
            lineno, ln = next(it)
        except StopIteration:
            raise AlistError(f"{path}: unexpected end of file") from None
        vals = _ints(ln, lineno, path)
        if expect is not None and len(vals) != expect:
            raise AlistError(f"{path}:{lineno}: expected {expect} entries, found {len(vals)}")
        return lineno, vals

    ln1, (n, m) = take(2)
    if n < 1 or m < 1:
        raise AlistError(f"{path}:{ln1}: dimensions must be positive")
    _, (max_col, max_row) = take(2)
    lnc, col_deg = take(n)
    lnr, row_deg = take(m)
    if max(col_deg) > max_col:
        raise AlistError(f"{path}:{lnc}: column degree exceeds declared maximum {max_col}")
    if max(row_deg) > max_row:
        raise AlistError(f"{path}:{lnr}: row degree exceeds declared maximum {max_row}")
    H = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        lineno, vals = take()
        idx = [v for v in vals if v != 0]
        if len(idx) != col_deg[j]:
            raise AlistError(f"{path}:{lineno}: column {j + 1} lists {len(idx)} rows, degree says {col_deg[j]}")
        for v in idx:
            if not 1 <= v <= m:
                raise AlistError(f"{path}:{lineno}: row index {v} out of range 1..{m}")
            H[v - 1, j] = 1
    Hr = np.zeros_like(H)
    for i in range(m):
        lineno, vals = take()
        idx = [v for v in vals if v != 0]
        if len(idx) != row_deg[i]:
            raise AlistError(f"{path}:{lineno}: row {i + 1} lists {len(idx)} columns, degree says {row_deg[i]}")
        for v in idx:
            if not 1 <= v <= n:
                raise AlistError(f"{path}:{lineno}: column index {v} out of range 1..{n}")
            Hr[i, v - 1] = 1
    if not np.array_equal(H, Hr):
        raise AlistError(f"{path}: column and row lists describe different matrices")
    return H


def load_alist(path, name: str | None = None) -> LdpcCode:
    path = Path(path)
    H = parse_alist(path.read_text(), str(path))
    return code_from_parity_check(H, "alist", name or path.stem)


def format_alist(H) -> str:
    H = np.asarray(H, dtype=np.uint8)
    m, n = H.shape
    cd, rd = H.sum(axis=0), H.sum(axis=1)
    out = [f"{n} {m}", f"{cd.max()} {rd.max()}", " ".join(map(str, cd)), " ".join(map(str, rd))]
    for j in range(n):
        idx = list(np.flatnonzero(H[:, j]) + 1) + [0] * (cd.max() - cd[j])
        out.append(" ".join(map(str, idx)))
    for i in range(m):
        idx = list(np.flatnonzero(H[i]) + 1) + [0] * (rd.max() - rd[i])
        out.append(" ".join(map(str, idx)))
    return "\n".join(out) + "\n"


def ccsds_tc_ldpc() -> LdpcCode:
    """The (128,64) protograph/circulant telecommand LDPC code shipped as an alist."""
    from .block_codes import data_path

    return load_alist(data_path("ccsds_tc_128_64.alist"), "LDPC(128,64) CCSDS-TC")


# --- M-SC-MPC construction ---

def _tanner_connected(H: np.ndarray) -> bool:
    m, n = H.shape
    seen_v = np.zeros(n, dtype=bool)
    seen_c = np.zeros(m, dtype=bool)
    stack = [0]
    seen_v[0] = True
    while stack:
        v = stack.pop()
        for c in np.flatnonzero(H[:, v]):
            if not seen_c[c]:
                seen_c[c] = True
                for u in np.flatnonzero(H[c]):
                    if not seen_v[u]:
                        seen_v[u] = True
                        stack.append(u)
    return bool(seen_v.all() and seen_c.all())


def _four_cycles(H: np.ndarray) -> int:
    A = H.astype(np.int64)
    O = A @ A.T
    np.fill_diagonal(O, 0)
    return int((O * (O - 1) // 2).sum() // 2)


def build_mscmpc(n: int, k: int, component_parity_counts, permutation_seed: int = 0,
                 max_draws: int = 200) -> LdpcCode:
    """Serial concatenation of multiple-parity-check component codes.

    Component i takes the info bits plus all earlier parity bits, permutes
    them with a seeded random permutation, splits them into r_i groups of
    (nearly) equal size and appends one parity bit per group. The parity
    part of H is lower triangular with a unit diagonal, so rank is n - k.
    Draws are repeated until the Tanner graph is connected, keeping the
    draw with the fewest 4-cycles.
    """
    counts = [int(c) for c in component_parity_counts]
    if sum(counts) != n - k:
        raise LdpcError(f"component parity counts sum to {sum(counts)}, need n - k = {n - k}")
    if any(c < 2 for c in counts):
        raise LdpcError("every component must contribute at least 2 parity bits")
    if k < 1:
        raise LdpcError("k must be positive")
    rng = np.random.default_rng(permutation_seed)
    best, best_cycles = None, None
    for _ in range(max_draws):
        H = np.zeros((n - k, n), dtype=np.uint8)
        row, width = 0, k
        for r in counts:
            perm = rng.permutation(width)
            for g, grp in enumerate(np.array_split(perm, r)):
                H[row + g, grp] = 1
                H[row + g, width + g] = 1
            row += r
            width += r
        if not _tanner_connected(H):
            continue
        cyc = _four_cycles(H)
        if best is None or cyc < best_cycles:
            best, best_cycles = H, cyc
        if cyc == 0:
            break
    if best is None:
        raise LdpcError(
            f"components {counts} never give a connected Tanner graph "
            f"(groups too small); rejected after {max_draws} draws"
        )
    return code_from_parity_check(best, "mscmpc", f"M-SC-MPC({n},{k})")


# --- belief propagation ---

@dataclass(frozen=True)
class SpaConfig:
    max_iterations: int = 100
    variant: str = "sum_product"
    min_sum_scale: float = 0.75
    early_stop: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise LdpcError("max_iterations must be >= 1")
        if self.variant not in ("sum_product", "min_sum"):
            raise LdpcError(f"unknown BP variant {self.variant!r}")
        if not 0.0 < self.min_sum_scale <= 1.0:
            raise LdpcError("min_sum_scale must be in (0, 1]")


_TANH_CLIP = 1.0 - 1e-15


@njit(cache=True)
def _syndrome_ok(check_ptr, edge_var, hard):
    for c in range(check_ptr.shape[0] - 1):
        s = 0
        for e in range(check_ptr[c], check_ptr[c + 1]):
            s ^= hard[edge_var[e]]
        if s:
            return False
    return True


@njit(cache=True)
def _bp(check_ptr, edge_var, var_ptr, var_edges, llr, max_iter, min_sum, scale, early_stop,
        total, hard, v2c, c2v, fwd, bwd):
    n = llr.shape[0]
    m = check_ptr.shape[0] - 1
    for e in range(edge_var.shape[0]):
        v2c[e] = llr[edge_var[e]]
    it = 0
    ok = False
    for it in range(1, max_iter + 1):
        for c in range(m):
            a = check_ptr[c]
            b = check_ptr[c + 1]
            if min_sum:
                m1 = np.inf
                m2 = np.inf
                pos = -1
                sgn = 1.0
                for e in range(a, b):
                    x = v2c[e]
                    if x < 0:
                        sgn = -sgn
                    ax = abs(x)
                    if ax < m1:
                        m2 = m1
                        m1 = ax
                        pos = e
                    elif ax < m2:
                        m2 = ax
                for e in range(a, b):
                    s = sgn if v2c[e] >= 0 else -sgn
                    c2v[e] = scale * s * (m2 if e == pos else m1)
            else:
                # prefix/suffix products of tanh(x/2) exclude each edge exactly
                acc = 1.0
                for e in range(a, b):
                    fwd[e] = acc
                    acc *= np.tanh(0.5 * v2c[e])
                acc = 1.0
                for e in range(b - 1, a - 1, -1):
                    bwd[e] = acc
                    acc *= np.tanh(0.5 * v2c[e])
                for e in range(a, b):
                    p = fwd[e] * bwd[e]
                    if p > _TANH_CLIP:
                        p = _TANH_CLIP
                    elif p < -_TANH_CLIP:
                        p = -_TANH_CLIP
                    c2v[e] = 2.0 * np.arctanh(p)
        for v in range(n):
            s = llr[v]
            for q in range(var_ptr[v], var_ptr[v + 1]):
                s += c2v[var_edges[q]]
            total[v] = s
            hard[v] = 1 if s < 0 else 0
            for q in range(var_ptr[v], var_ptr[v + 1]):
                e = var_edges[q]
                v2c[e] = s - c2v[e]
        if early_stop and _syndrome_ok(check_ptr, edge_var, hard):
            ok = True
            break
    if not early_stop:
        ok = _syndrome_ok(check_ptr, edge_var, hard)
    return it, ok


@njit(cache=True)
def _bp_batch(check_ptr, edge_var, var_ptr, var_edges, llr, max_iter, min_sum, scale, early_stop,
              hard_out, iters, ok_out):
    ne = edge_var.shape[0]
    n = llr.shape[1]
    v2c = np.empty(ne)
    c2v = np.empty(ne)
    fwd = np.empty(ne)
    bwd = np.empty(ne)
    total = np.empty(n)
    for f in range(llr.shape[0]):
        it, ok = _bp(check_ptr, edge_var, var_ptr, var_edges, llr[f], max_iter, min_sum, scale,
                     early_stop, total, hard_out[f], v2c, c2v, fwd, bwd)
        iters[f] = it
        ok_out[f] = ok


def _cfg_args(cfg: SpaConfig):
    return cfg.max_iterations, cfg.variant == "min_sum", float(cfg.min_sum_scale), bool(cfg.early_stop)


def spa_decode(code: LdpcCode, llr, cfg: SpaConfig = SpaConfig()) -> DecodeOutcome:
    """Flooding belief propagation; ``llr`` in the output holds the posteriors."""
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.shape != (code.n,):
        raise LdpcError(f"expected {code.n} LLRs, got shape {llr.shape}")
    ne = code.edge_var.shape[0]
    total = np.empty(code.n)
    hard = np.zeros(code.n, dtype=np.uint8)
    bufs = [np.empty(ne) for _ in range(4)]
    it, ok = _bp(code.check_ptr, code.edge_var, code.var_ptr, code.var_edges, llr,
                 *_cfg_args(cfg), total, hard, *bufs)
    status = SUCCESS if ok else DETECTED_FAILURE
    return DecodeOutcome(
        hard[code.info_positions].copy(), hard if ok else None, status, int(it), None, total
    )


def spa_batch(code: LdpcCode, llr, cfg: SpaConfig = SpaConfig()):
    """Decode frames row by row; returns (hard decisions, iterations, success flags)."""
    llr = np.ascontiguousarray(np.atleast_2d(llr), dtype=np.float64)
    if llr.shape[1] != code.n:
        raise LdpcError(f"expected {code.n} LLRs per frame, got {llr.shape[1]}")
    hard = np.zeros(llr.shape, dtype=np.uint8)
    iters = np.zeros(llr.shape[0], dtype=np.int64)
    ok = np.zeros(llr.shape[0], dtype=np.bool_)
    _bp_batch(code.check_ptr, code.edge_var, code.var_ptr, code.var_edges, llr, *_cfg_args(cfg),
              hard, iters, ok)
    return hard, iters, ok
