"""Monte Carlo BER/CER/UFER estimation over BPSK/AWGN.

Frames are processed in blocks; block b at SNR point p draws its info bits
and noise from the substream (seed, p, b). The stopping rule is checked
after each block in block order, so tallies depend only on the seed and
never on how many workers decoded the blocks.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from .channel import ChannelConfig, add_awgn, channel_llr, modulate, substream

CSV_COLUMNS = (
    "kind", "code", "decoder", "ebn0_db", "frames", "bit_errors", "frame_errors",
    "undetected_frame_errors", "ber", "cer", "ufer", "ci_low", "ci_high", "seed", "elapsed_s",
)


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class StopRule:
    min_frame_errors: int = 100
    max_frames: int = 10_000_000
    max_seconds: float | None = None
    block_size: int = 1000

    def __post_init__(self):
        if self.min_frame_errors < 1:
            raise SimError("min_frame_errors must be >= 1")
        if self.max_frames < 1:
            raise SimError("max_frames must be >= 1")
        if self.block_size < 1:
            raise SimError("block_size must be >= 1")


@dataclass
class SimPoint:
    code: str
    decoder: str
    ebn0_db: float
    frames: int = 0
    bit_errors: int = 0
    frame_errors: int = 0
    undetected_frame_errors: int = 0
    detected_failures: int = 0
    info_bits: int = 0
    seed: int = 0
    elapsed_s: float = 0.0
    kind: str = "sim"

    @property
    def ber(self) -> float:
        return self.bit_errors / self.info_bits if self.info_bits else 0.0

    @property
    def cer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def ufer(self) -> float:
        return self.undetected_frame_errors / self.frames if self.frames else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return confidence_interval(self.frame_errors, self.frames)

    def check(self, complete: bool = False) -> None:
        """Tally conservation; a complete decoder has no detected failures."""
        if not 0 <= self.undetected_frame_errors <= self.frame_errors <= self.frames:
            raise SimError("tally conservation violated")
        if self.frame_errors != self.undetected_frame_errors + self.detected_failures:
            raise SimError("frame errors must split into detected and undetected")
        if complete and self.detected_failures:
            raise SimError("complete decoder reported detected failures")

    def tallies(self) -> tuple:
        return (self.frames, self.bit_errors, self.frame_errors, self.undetected_frame_errors,
                self.detected_failures)

    def row(self) -> dict:
        lo, hi = self.ci
        return {
            "kind": self.kind, "code": self.code, "decoder": self.decoder, "ebn0_db": self.ebn0_db,
            "frames": self.frames, "bit_errors": self.bit_errors, "frame_errors": self.frame_errors,
            "undetected_frame_errors": self.undetected_frame_errors, "ber": self.ber, "cer": self.cer,
            "ufer": self.ufer, "ci_low": lo, "ci_high": hi, "seed": self.seed,
            "elapsed_s": round(self.elapsed_s, 3),
        }


@dataclass
class SimReport:
    points: list[SimPoint] = field(default_factory=list)

    def tallies(self) -> list[tuple]:
        return [p.tallies() for p in self.points]

    def rows(self) -> list[dict]:
        return [p.row() for p in self.points]

    def to_csv(self) -> str:
        return rows_to_csv(self.rows())

    def to_json(self) -> str:
        return json.dumps(self.rows(), indent=1)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in CSV_COLUMNS})
    return buf.getvalue()


def bound_rows(curve, code: str) -> list[dict]:
    """CSV rows for an analytic curve; count columns stay empty."""
    return [{"kind": curve.kind, "code": code, "decoder": "", "ebn0_db": e, "cer": p}
            for e, p in curve.points]


def confidence_interval(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson exact binomial interval."""
    if trials < 1 or not 0 <= errors <= trials:
        raise SimError("need 0 <= errors <= trials and trials >= 1")
    if not 0.0 < level < 1.0:
        raise SimError("level must be in (0, 1)")
    a = 1.0 - level
    lo = 0.0 if errors == 0 else float(stats.beta.ppf(a / 2, errors, trials - errors + 1))
    hi = 1.0 if errors == trials else float(stats.beta.ppf(1 - a / 2, errors + 1, trials - errors))
    return lo, hi


# --- pipelines ---

@dataclass(frozen=True)
class Pipeline:
    """Codec: ``encode(info) -> bits`` and ``decode(llr) -> (info_hat, ok)``
    for batches of frames. ``ok`` is False for detected failures."""

    code: str
    decoder: str
    k: int
    n: int
    encode: object
    decode: object
    complete: bool = True

    @property
    def rate(self) -> float:
        return self.k / self.n


def _bch_pipelines(n, k, decoder, params):
    from . import block_codes as bc

    code = bc.find_bch(n, k)
    name = f"{'eBCH' if code.algebraic and code.algebraic.variant == 'extended' else 'BCH'}({n},{k})"
    enc = lambda u: bc.encode_systematic(code, u)
    if decoder == "hard":
        def dec(llr):
            hard = (llr < 0).astype(np.uint8)
            out = np.zeros((llr.shape[0], k), dtype=np.uint8)
            ok = np.zeros(llr.shape[0], dtype=bool)
            for f in range(llr.shape[0]):
                res = bc.hard_decode_bch(code, hard[f])
                out[f], ok[f] = res.info_bits, res.ok
            return out, ok
        return Pipeline(name, "hard", k, n, enc, dec, complete=False)
    if decoder in ("viterbi", "bcjr", "bcjr_maxlog"):
        from . import trellis as tr

        trel = tr.build_wolf_trellis(code)
        if decoder == "viterbi":
            def dec(llr):
                cw = tr.viterbi_batch(trel, llr)
                return cw[:, :k], np.ones(llr.shape[0], dtype=bool)
        else:
            exact = decoder == "bcjr"

            def dec(llr):
                out = np.zeros((llr.shape[0], k), dtype=np.uint8)
                ok = np.zeros(llr.shape[0], dtype=bool)
                for f in range(llr.shape[0]):
                    _, res = tr.bcjr_decode(trel, llr[f], exact, code)
                    out[f], ok[f] = res.info_bits, res.ok
                return out, ok
        return Pipeline(name, decoder, k, n, enc, dec, complete=decoder == "viterbi")
    if decoder == "ml":
        return _ml_pipeline(code, name)
    if decoder == "mrb":
        return _mrb_pipeline(code, name, params, d_min=_known_dmin(code))
    raise SimError(f"decoder {decoder!r} not available for {name}")


def _known_dmin(code):
    """Minimum distance from the shipped spectrum or by enumeration, if affordable."""
    from .block_codes import ebch128_spectrum, spectrum_bruteforce

    if code.algebraic and code.algebraic.variant == "extended" and (code.n, code.k) == (128, 64):
        return ebch128_spectrum().min_distance
    if min(code.k, code.n - code.k) <= 20:
        return spectrum_bruteforce(code).min_distance
    return None


def _ml_pipeline(code, name):
    """Exhaustive correlation ML over the full codebook (small k only)."""
    import itertools

    if code.k > 16:
        raise SimError("exhaustive ML is limited to k <= 16")
    from .block_codes import encode_systematic

    infos = np.array(list(itertools.product([0, 1], repeat=code.k)), dtype=np.uint8)
    book = encode_systematic(code, infos)
    signs = 1.0 - 2.0 * book.astype(np.float64)
    pos = list(code.info_positions)

    def dec(llr):
        best = np.argmax(llr @ signs.T, axis=1)
        return book[best][:, pos], np.ones(llr.shape[0], dtype=bool)

    return Pipeline(name, "ml", code.k, code.n, lambda u: encode_systematic(code, u), dec)


def _mrb_pipeline(code, name, params, d_min=None, encode=None):
    from .osd import MrbConfig, mrb_batch

    order = int(params.get("order", 3))
    early = bool(params.get("early_termination", d_min is not None))
    cfg = MrbConfig(order, params.get("candidate_limit"), early and d_min is not None,
                    d_min if early else None)
    pos = list(code.info_positions)

    def dec(llr):
        cw, _, _ = mrb_batch(code, llr, cfg)
        return cw[:, pos], np.ones(llr.shape[0], dtype=bool)

    if encode is None:
        from .block_codes import encode_systematic

        encode = lambda u: encode_systematic(code, u)
    return Pipeline(name, cfg.label, code.k, code.n, encode, dec)


def _ldpc_pipelines(code_id, decoder, params):
    from . import ldpc as L

    if code_id == "ldpc_ccsds":
        code = L.ccsds_tc_ldpc()
        name = "LDPC(128,64)"
    elif code_id == "ldpc_mscmpc":
        counts = params.get("counts", [16, 16, 16, 16])
        code = L.build_mscmpc(128, 64, counts, int(params.get("perm_seed", 1)))
        name = "M-SC-MPC(128,64)"
    else:
        code = L.load_alist(code_id)
        name = code.name
    enc = lambda u: L.ldpc_encode(code, u)
    if decoder in ("spa", "minsum"):
        cfg = L.SpaConfig(int(params.get("max_iterations", 100)),
                          "sum_product" if decoder == "spa" else "min_sum",
                          float(params.get("min_sum_scale", 0.75)))

        def dec(llr):
            hard, _, ok = L.spa_batch(code, llr, cfg)
            return hard[:, code.info_positions], ok
        return Pipeline(name, decoder, code.k, code.n, enc, dec, complete=False)
    if decoder == "mrb":
        return _mrb_pipeline(code.as_linear_code(), name, params, encode=enc)
    raise SimError(f"decoder {decoder!r} not available for LDPC codes")


def _turbo_pipeline(decoder, params):
    from . import turbo as T

    spec = ptc_spec(params)
    its = int(params.get("iterations", 10))
    algo = {"turbo": "log_map", "log_map": "log_map", "max_log_map": "max_log_map"}.get(decoder)
    if algo is None:
        raise SimError(f"decoder {decoder!r} not available for the turbo code")

    def dec(llr):
        info, _, _ = T.turbo_decode_batch(spec, llr, its, algo)
        return info, np.ones(llr.shape[0], dtype=bool)

    return Pipeline(f"PTC({spec.n_punctured},{spec.k})", algo, spec.k, spec.n_punctured,
                    lambda u: T.turbo_encode(spec, u), dec)


def ptc_spec(params: dict):
    """Turbo spec from interleaver/pattern files, or the shipped design."""
    from . import turbo as T
    from .block_codes import data_path

    il = T.load_interleaver(params.get("interleaver") or data_path("ptc128_interleaver.txt"))
    pat = T.load_pattern(params.get("puncturing") or data_path("ptc128_puncturing.txt"))
    return T.TurboCodeSpec(il.K, il, pat)


def _uncoded_pipeline(params):
    k = int(params.get("k", 64))
    ident = lambda u: np.asarray(u, dtype=np.uint8)
    return Pipeline("uncoded", "hard", k, k, ident,
                    lambda llr: ((llr < 0).astype(np.uint8), np.ones(llr.shape[0], dtype=bool)))


CODES = ("uncoded", "bch", "ebch", "ldpc_ccsds", "ldpc_mscmpc", "ldpc_alist", "ptc")


def _freeze(params: dict) -> tuple:
    return tuple(sorted((k, json.dumps(v, sort_keys=True)) for k, v in params.items()))


@lru_cache(maxsize=32)
def _build_cached(code: str, decoder: str, frozen: tuple) -> Pipeline:
    params = {k: json.loads(v) for k, v in frozen}
    if code == "uncoded":
        return _uncoded_pipeline(params)
    if code == "bch":
        return _bch_pipelines(int(params.get("n", 63)), int(params.get("k", 56)), decoder, params)
    if code == "ebch":
        return _bch_pipelines(int(params.get("n", 128)), int(params.get("k", 64)), decoder, params)
    if code in ("ldpc_ccsds", "ldpc_mscmpc"):
        return _ldpc_pipelines(code, decoder, params)
    if code == "ldpc_alist":
        if "alist" not in params:
            raise SimError("ldpc_alist needs an 'alist' path")
        return _ldpc_pipelines(params["alist"], decoder, params)
    if code == "ptc":
        return _turbo_pipeline(decoder, params)
    raise SimError(f"unknown code {code!r}; expected one of {', '.join(CODES)}")


def build_pipeline(code: str, decoder: str, params: dict | None = None) -> Pipeline:
    return _build_cached(code, decoder, _freeze(params or {}))


# --- engine ---

def _run_block(args):
    code, decoder, frozen, ebn0, seed, point, block, size = args
    pipe = _build_cached(code, decoder, frozen)
    rng = substream(seed, point, block)
    info = rng.integers(0, 2, (size, pipe.k), dtype=np.uint8)
    bits = pipe.encode(info)
    cfg = ChannelConfig(ebn0, pipe.rate)
    llr = channel_llr(add_awgn(modulate(bits), cfg, rng), cfg)
    est, ok = pipe.decode(llr)
    wrong = est != info
    bit_err = wrong.sum(axis=1)
    # a detected failure is a frame error even if the info bits happen to match
    ferr = (bit_err > 0) | ~ok
    return np.stack([bit_err, ferr, ferr & ok, ~ok]).astype(np.int64)


def run_point(code: str, decoder: str, ebn0_db: float, stop: StopRule = StopRule(), seed: int = 0,
              workers: int = 1, params: dict | None = None, point_index: int = 0, pool=None) -> SimPoint:
    """Simulate one Eb/N0 point until the stop rule fires (checked per block)."""
    if workers < 1:
        raise SimError("workers must be >= 1")
    frozen = _freeze(params or {})
    pipe = _build_cached(code, decoder, frozen)
    pt = SimPoint(pipe.code, pipe.decoder, float(ebn0_db), seed=int(seed))
    t0 = time.perf_counter()
    nblocks_max = math.ceil(stop.max_frames / stop.block_size)

    def sizes(b):
        return min(stop.block_size, stop.max_frames - b * stop.block_size)

    def absorb(tally):
        pt.frames += tally.shape[1]
        pt.bit_errors += int(tally[0].sum())
        pt.frame_errors += int(tally[1].sum())
        pt.undetected_frame_errors += int(tally[2].sum())
        pt.detected_failures += int(tally[3].sum())
        pt.info_bits += tally.shape[1] * pipe.k

    def done():
        if pt.frame_errors >= stop.min_frame_errors or pt.frames >= stop.max_frames:
            return True
        return stop.max_seconds is not None and time.perf_counter() - t0 >= stop.max_seconds

    jobs = ((code, decoder, frozen, float(ebn0_db), seed, point_index, b, sizes(b)) for b in range(nblocks_max))
    if workers == 1 and pool is None:
        for job in jobs:
            absorb(_run_block(job))
            if done():
                break
    else:
        own = pool is None
        if own:
            from concurrent.futures import ProcessPoolExecutor

            pool = ProcessPoolExecutor(workers)
        try:
            pending = []
            jobs = iter(jobs)
            # keep a window of blocks in flight; results are consumed strictly in order
            for job in jobs:
                pending.append(pool.submit(_run_block, job))
                if len(pending) >= 2 * workers:
                    break
            while pending:
                absorb(pending.pop(0).result())
                if done():
                    for f in pending:
                        f.cancel()
                    break
                nxt = next(jobs, None)
                if nxt is not None:
                    pending.append(pool.submit(_run_block, nxt))
        finally:
            if own:
                pool.shutdown(cancel_futures=True)
    if pt.frames == 0:
        raise SimError("no frames simulated")
    pt.elapsed_s = time.perf_counter() - t0
    pt.check(pipe.complete)
    return pt


def run_sweep(code: str, decoder: str, grid, stop: StopRule = StopRule(), seed: int = 0, workers: int = 1,
              params: dict | None = None, cer_floor: float | None = None, progress=None) -> SimReport:
    """run_point over every grid point; stops early once CER drops below ``cer_floor``."""
    points = list(getattr(grid, "points", grid))
    if not points:
        raise SimError("empty SNR grid")
    report = SimReport()
    pool = None
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        pool = ProcessPoolExecutor(workers)
    try:
        for i, e in enumerate(points):
            pt = run_point(code, decoder, e, stop, seed, workers, params, point_index=i, pool=pool)
            report.points.append(pt)
            if progress:
                progress(pt)
            if cer_floor is not None and pt.cer < cer_floor:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return report


def default_workers() -> int:
    return int(os.environ.get("TCFEC_WORKERS", "1"))


def report_metadata(report: SimReport, **extra) -> dict:
    return {"columns": list(CSV_COLUMNS), "points": len(report.points), **extra}

