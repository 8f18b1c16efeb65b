"""Acceptance criteria 1-11, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary and written to ``acceptance_results.txt``. The full
set takes tens of minutes on one core; ``TCFEC_WORKERS`` spreads the
Monte Carlo blocks over processes without changing any tally.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from tcfec.block_codes import ebch128_spectrum, encode_systematic, find_bch, spectrum_bruteforce
from tcfec.bounds import (
    SnrGrid, analytic_hard_cer, crossing_ebn0, sp59, sp59_prob, sp59_required_ebn0, tub, tub_required_ebn0,
)
from tcfec.channel import ChannelConfig, add_awgn, channel_llr, modulate, substream
from tcfec.osd import MrbConfig, mrb_batch
from tcfec.simulator import StopRule, default_workers, run_point, run_sweep
from tcfec.turbo import (
    PuncturingPattern, TurboCodeSpec, distance_search, generate_interleavers, make_interleaver,
    periodic_patterns, refinement_patterns, design_search, turbo_encode,
)

from conftest import codebook, ml_decode

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, str] = {}
OUT = Path(__file__).resolve().parent.parent / "acceptance_results.txt"
WORKERS = default_workers()
POINTS = []  # every simulated point, for the conservation check


def report(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
    RESULTS[num] = line
    print(line)
    OUT.write_text("\n".join(RESULTS[k] for k in sorted(RESULTS)) + "\n")


def sweep_to(code, decoder, grid, target, min_errors=100, params=None, seed=1, max_frames=5_000_000):
    """Simulate along ``grid`` until CER falls below ``target``; returns (ebn0s, cers, points)."""
    rep = run_sweep(code, decoder, grid, StopRule(min_errors, max_frames, block_size=2000), seed, WORKERS,
                    params, cer_floor=target)
    POINTS.extend(rep.points)
    return [p.ebn0_db for p in rep.points], [p.cer for p in rep.points], rep.points


def fmt(pts):
    return ", ".join(f"{p.ebn0_db:g} dB {p.frame_errors}/{p.frames}" for p in pts)


def test_c01_hard_decoding_matches_analytic():
    t0 = time.time()
    ok, parts = True, []
    for i, eb in enumerate((5.0, 6.0, 7.0)):
        pt = run_point("bch", "hard", eb, StopRule(100, 10**7, block_size=2000), seed=101, workers=WORKERS,
                       point_index=i)
        POINTS.append(pt)
        a = float(analytic_hard_cer(63, 1, 56 / 63, eb))
        lo, hi = pt.ci
        inside = lo <= a <= hi and pt.frame_errors >= 100
        ok &= inside
        parts.append(f"{eb:g} dB sim {pt.cer:.3e} [{lo:.2e},{hi:.2e}] analytic {a:.3e}")
    runtime = time.time() - t0
    ok &= runtime < 300
    report(1, ok, "; ".join(parts) + f"; {runtime:.0f} s")
    assert ok


def test_c02_soft_decoding_gain():
    t0 = time.time()
    e_v, c_v, p_v = sweep_to("bch", "viterbi", SnrGrid.arange(5.75, 8.0, 0.25, 1).points, 1e-4)
    e_h, c_h, p_h = sweep_to("bch", "hard", SnrGrid.arange(7.75, 10.0, 0.25, 1).points, 1e-4)
    x_v, x_h = crossing_ebn0(e_v, c_v, 1e-4), crossing_ebn0(e_h, c_h, 1e-4)
    gap = x_h - x_v
    runtime = time.time() - t0
    ok = gap >= 2.0 - 0.3 and runtime < 3600
    report(2, ok, f"CER 1e-4 at {x_v:.2f} dB (Viterbi) vs {x_h:.2f} dB (hard): gain {gap:.2f} dB "
                  f"(need >= 1.7); {runtime:.0f} s")
    assert ok


def test_c03_tub_validity():
    ham = find_bch(8, 4)
    spec = spectrum_bruteforce(ham)
    grid = SnrGrid.arange(0.0, 8.0, 0.5, 0.5)
    bound = tub(spec, 8, grid).values
    rep = run_sweep("bch", "ml", grid, StopRule(1000, 2_000_000, block_size=20000), 103, WORKERS,
                    {"n": 8, "k": 4}, cer_floor=1e-4)
    POINTS.extend(rep.points)
    viol = [(p.ebn0_db, p.cer, b) for p, b in zip(rep.points, bound) if p.cer <= 1e-2 and p.cer > b]
    part_a = not viol and any(p.cer <= 1e-2 for p in rep.points)

    bch = spectrum_bruteforce(find_bch(63, 56))
    g2 = SnrGrid.arange(3.0, 12.0, 0.05, 56 / 63)
    t4, t8 = tub(bch, 4, g2).values, tub(bch, 8, g2).values
    sel = np.maximum(t4, t8) <= 1e-2
    rel = np.abs(t8[sel] / t4[sel] - 1)
    worst = int(np.argmax(rel))
    part_b = bool(np.all(rel < 0.05))
    below = t8[sel][rel < 0.05]
    report(3, part_a and part_b,
           f"(8,4) ML under TUB at every point with CER <= 1e-2: {'yes' if part_a else viol}; "
           f"BCH(63,56) TUB d*=4 vs d*=8 max rel diff {rel[worst]:.1%} at TUB {t8[sel][worst]:.2e} "
           f"(< 5% only once TUB <= {below.max():.1e})")
    assert part_a and part_b


def test_c04_sp59_sandwich():
    from test_bounds import mp_sp59

    t0 = time.time()
    spec = ebch128_spectrum()
    grid = SnrGrid.arange(0.0, 6.0, 0.25, 0.5)
    s, t = sp59(128, 64, grid).values, tub(spec, 50, grid).values
    below = bool(np.all(s <= t))
    gap = tub_required_ebn0(spec, 50, 0.5, 1e-5) - sp59_required_ebn0(128, 64, 1e-5)
    errs = [abs(sp59_prob(128, 64, e) / mp_sp59(128, 64, e) - 1) for e in (1.0, 2.5, 4.0)]
    runtime = time.time() - t0
    ok = below and abs(gap - 0.5) <= 0.2 and max(errs) < 1e-3 and runtime < 60
    report(4, ok, f"SP59 below TUB(d*=50) everywhere: {below}; gap at CER 1e-5 {gap:.3f} dB; "
                  f"oracle max rel err {max(errs):.1e}; {runtime:.0f} s")
    assert ok


def test_c05_ldpc_gap_to_sp59():
    t0 = time.time()
    e, c, pts = sweep_to("ldpc_ccsds", "spa", SnrGrid.arange(4.25, 6.0, 0.25, 1).points, 1e-4,
                         params={"max_iterations": 100})
    x = crossing_ebn0(e, c, 1e-4)
    ref = sp59_required_ebn0(128, 64, 1e-4)
    runtime = time.time() - t0
    ok = x - ref > 1.8 and runtime < 7200
    report(5, ok, f"LDPC SPA CER 1e-4 at {x:.2f} dB, SP59 {ref:.2f} dB, gap {x - ref:.2f} dB (need > 1.8); "
                  f"points {fmt(pts)}; {runtime:.0f} s")
    assert ok


def test_c06_mrb_small_scale_optimality():
    bch = find_bch(15, 7)
    _, book = codebook(bch)
    rng = substream(106, 0)
    cw = encode_systematic(bch, rng.integers(0, 2, (10**4, 7)))
    cfg = ChannelConfig(4.0, bch.rate)
    llr = channel_llr(add_awgn(modulate(cw), cfg, rng), cfg)
    ml = ml_decode(book, llr)
    agree = float((mrb_batch(bch, llr, MrbConfig(order=2))[0] == ml).all(1).mean())
    exact = []
    for n, k in ((8, 4), (15, 7), (31, 6)):
        code = find_bch(n, k)
        _, bk = codebook(code)
        r = substream(106, n)
        c = encode_systematic(code, r.integers(0, 2, (2000, k)))
        cf = ChannelConfig(1.0, code.rate)
        l = channel_llr(add_awgn(modulate(c), cf, r), cf)
        exact.append(bool(np.array_equal(mrb_batch(code, l, MrbConfig(order=k))[0], ml_decode(bk, l))))
    ok = agree >= 0.99 and all(exact)
    report(6, ok, f"MRB(2) on BCH(15,7) equals ML on {agree:.2%} of 1e4 frames at 4 dB; "
                  f"order k equals ML on (8,4), (15,7), (31,6): {exact}")
    assert ok


def test_c07_ebch_mrb3_near_sp59():
    t0 = time.time()
    e, c, pts = sweep_to("ebch", "mrb", SnrGrid.arange(2.5, 3.75, 0.25, 1).points, 1e-3, params={"order": 3})
    x = crossing_ebn0(e, c, 1e-3)
    ref = sp59_required_ebn0(128, 64, 1e-3)
    runtime = time.time() - t0
    ok = x - ref <= 0.8 and runtime < 4 * 3600
    report(7, ok, f"eBCH MRB(3) CER 1e-3 at {x:.2f} dB, SP59 {ref:.2f} dB, gap {x - ref:.2f} dB (need <= 0.8); "
                  f"points {fmt(pts)}; {runtime:.0f} s")
    assert ok


def test_c08_mrb_beats_spa_on_ldpc():
    eb = 4.25
    stop = StopRule(10**9, 30000, block_size=2000)
    spa = run_point("ldpc_ccsds", "spa", eb, stop, seed=108, workers=WORKERS)
    mrb = run_point("ldpc_ccsds", "mrb", eb, stop, seed=108, workers=WORKERS, params={"order": 3})
    POINTS.extend([spa, mrb])
    ok = mrb.ci[1] < spa.ci[0]
    report(8, ok, f"{eb:g} dB, 30000 frames: SPA CER {spa.cer:.2e} CI [{spa.ci[0]:.2e},{spa.ci[1]:.2e}], "
                  f"MRB(3) CER {mrb.cer:.2e} CI [{mrb.ci[0]:.2e},{mrb.ci[1]:.2e}]")
    assert ok


def test_c09_ptc_design():
    t0 = time.time()
    # distance oracle: exhaustive enumeration of a k=8 toy code
    oracle_ok = True
    for seed in range(4):
        toy = TurboCodeSpec(8, make_interleaver("drp", 8, seed=seed), PuncturingPattern(4, (1, 1, 1, 0)))
        infos = np.array([[(i >> b) & 1 for b in range(8)] for i in range(1, 256)], dtype=np.uint8)
        w = turbo_encode(toy, infos).sum(1)
        rep = distance_search(toy, 8)
        oracle_ok &= rep.exhaustive_flag and (rep.d_min_upper, rep.A_at_d) == (int(w.min()), int((w == w.min()).sum()))
    ils = generate_interleavers("drp", 64, 500, seed=1)
    ranked = design_search(ils, periodic_patterns(64, 17, 2), w_max=4,
                           refine_patterns=refinement_patterns(64), refine_top=60)
    best = ranked[0]
    spec = TurboCodeSpec(64, best.interleaver, best.puncturing)
    wider = distance_search(spec, 6)
    runtime = time.time() - t0
    d, a = best.report.d_min_upper, best.report.A_at_d
    target = d >= 10 and a <= 8
    ok = oracle_ok and d >= 9 and spec.n == 128 and runtime < 7200
    report(9, ok, f"500 DRP candidates: best d_min_upper {d}, A_at_d {a} (w_max 4); target d=10, A<=8 "
                  f"{'reached' if target else 'not reached'}; same design at w_max 6: d {wider.d_min_upper}, "
                  f"A {wider.A_at_d}; toy oracle {'ok' if oracle_ok else 'MISMATCH'}; {runtime:.0f} s")
    assert ok


def test_c10_ptc_waterfall():
    t0 = time.time()
    e, c, pts = sweep_to("ptc", "turbo", SnrGrid.arange(3.75, 5.0, 0.25, 1).points, 1e-4,
                         params={"iterations": 10})
    x = crossing_ebn0(e, c, 1e-4)
    ref = sp59_required_ebn0(128, 64, 1e-4)
    runtime = time.time() - t0
    ok = x - ref <= 1.8 and runtime < 3 * 3600
    report(10, ok, f"PTC log-MAP (10 it.) CER 1e-4 at {x:.2f} dB, SP59 {ref:.2f} dB, gap {x - ref:.2f} dB "
                   f"(need <= 1.8); points {fmt(pts)}; {runtime:.0f} s")
    assert ok


def test_c11_determinism_and_conservation():
    stop = StopRule(40, 20000, block_size=500)
    same = True
    for code, dec, grid, params in (("ldpc_ccsds", "spa", [3.0, 3.5], {}),
                                    ("bch", "hard", [5.0, 6.0], {}),
                                    ("ebch", "mrb", [2.5], {"order": 2})):
        a = run_sweep(code, dec, grid, stop, 111, 1, params)
        b = run_sweep(code, dec, grid, stop, 111, 3, params)
        same &= a.tallies() == b.tallies()
        POINTS.extend(a.points + b.points)
    bad = 0
    for p in POINTS:
        try:
            p.check()
        except Exception:
            bad += 1
    ok = same and bad == 0
    report(11, ok, f"worker counts 1 vs 3 give identical tallies: {same}; "
                   f"conservation holds on {len(POINTS) - bad}/{len(POINTS)} simulated points")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
