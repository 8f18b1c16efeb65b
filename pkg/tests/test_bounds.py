import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from tcfec.block_codes import WeightSpectrum, ebch128_spectrum, spectrum_bruteforce
from tcfec.bounds import (
    BoundCurve, BoundError, SnrGrid, analytic_hard_bch, analytic_hard_cer, crossing_ebn0, sp59,
    sp59_cone_angle, sp59_prob, sp59_required_ebn0, tub, tub_required_ebn0, tub_terms, uncoded_ber,
)


def mp_cone_angle(n, k):
    """Cone half-angle via the regularized incomplete beta function, by bisection."""
    half = mp.mpf(1) / 2

    def frac(t):
        ib = mp.betainc((n - 1) / mp.mpf(2), half, 0, mp.sin(t) ** 2, regularized=True) / 2
        return ib if t <= mp.pi / 2 else 1 - ib

    lo, hi = mp.mpf(0), mp.pi
    for _ in range(120):
        mid = (lo + hi) / 2
        if frac(mid) < mp.mpf(2) ** (-k):
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def mp_sp59(n, k, ebn0_db):
    """Probability that noise carries the signal point outside its cone.

    Written with the chi-distributed noise radius orthogonal to the signal
    and a Gaussian component along it.
    """
    mp.mp.dps = 30
    th = mp_cone_angle(n, k)
    a = mp.sqrt(2 * n * (mp.mpf(k) / n) * mp.power(10, mp.mpf(ebn0_db) / 10))
    nu = n - 1
    cot = mp.cot(th)

    def pdf(r):
        return mp.exp((nu - 1) * mp.log(r) - r * r / 2 - (nu / mp.mpf(2) - 1) * mp.log(2) - mp.loggamma(nu / mp.mpf(2)))

    c = mp.sqrt(nu)
    pts = sorted({mp.mpf(0), max(mp.mpf(0), c - 6), c, c + 6})
    return float(mp.quad(lambda r: pdf(r) * mp.ncdf(r * cot - a), pts + [mp.inf]))


def test_single_term_tub():
    s = WeightSpectrum(10, 5, ((0, 1), (4, 1)), complete=False)
    v = tub_terms(s, 4, [1.0, 3.0], 0.5)
    assert np.allclose(v, 0.5 * erfc(np.sqrt(4 * 0.5 * 10 ** (np.array([1.0, 3.0]) / 10))), rtol=1e-14)


def test_tub_dstar_beyond_known_part():
    with pytest.raises(BoundError):
        tub_terms(ebch128_spectrum(), 60, 3.0, 0.5)


def test_tub_bch63_dstar4_vs_8(bch63):
    spec = spectrum_bruteforce(bch63)
    grid = SnrGrid.arange(3.0, 10.0, 0.25, bch63.rate)
    a = tub(spec, 4, grid).values
    b = tub(spec, 8, grid).values
    sel = b < 0.1
    ratio = b[sel] / a[sel] - 1
    # the weight-6 terms only ever add, and their share decays with SNR
    assert np.all(ratio >= 0) and np.all(np.diff(ratio) < 0)
    b = b[sel]
    assert np.all(ratio[b <= 1e-4] < 0.05)


def test_ebch_tub_vs_sp59_gap():
    spec = ebch128_spectrum()
    gap = tub_required_ebn0(spec, 50, 0.5, 1e-5) - sp59_required_ebn0(128, 64, 1e-5)
    assert abs(gap - 0.5) <= 0.2


def test_uncoded_and_hard_basics():
    assert uncoded_ber(0.0) == pytest.approx(0.5 * erfc(1.0))
    p = 0.5 * erfc(math.sqrt(0.5 * 10**0.2))
    assert analytic_hard_cer(20, 0, 0.5, 2.0) == pytest.approx(1 - (1 - p) ** 20)
    assert analytic_hard_cer(20, 2, 0.5, 60.0) < 1e-300 or analytic_hard_cer(20, 2, 0.5, 60.0) == 0.0
    with pytest.raises(BoundError):
        analytic_hard_cer(20, -1, 0.5, 2.0)
    c = analytic_hard_bch(63, 1, 56 / 63, SnrGrid((4.0, 5.0, 6.0), 56 / 63))
    assert c.kind == "analytic_hd" and np.all(np.diff(c.values) < 0)


def test_grid_and_curve_validation():
    with pytest.raises(BoundError):
        SnrGrid((), 0.5)
    with pytest.raises(BoundError):
        SnrGrid((1.0, 1.0), 0.5)
    with pytest.raises(BoundError):
        BoundCurve("x", ((0.0, 0.1), (1.0, 0.2)))
    assert SnrGrid.arange(0.0, 1.0, 0.25, 0.5).points == (0.0, 0.25, 0.5, 0.75, 1.0)


@pytest.mark.parametrize("n,k,eb", [(128, 64, 1.0), (128, 64, 3.0), (16, 8, 2.0), (64, 32, 4.0)])
def test_sp59_against_mpmath(n, k, eb):
    assert sp59_prob(n, k, eb) == pytest.approx(mp_sp59(n, k, eb), rel=1e-3)


def test_cone_angle_against_mpmath():
    for n, k in [(128, 64), (16, 8), (63, 56)]:
        assert sp59_cone_angle(n, k) == pytest.approx(float(mp_cone_angle(n, k)), abs=1e-9)


def test_sp59_monotone_in_snr_and_length():
    c = sp59(128, 64, SnrGrid.arange(0.0, 5.0, 0.5, 0.5)).values
    assert np.all(np.diff(c) < 0)
    req = [sp59_required_ebn0(n, n // 2, 1e-4) for n in (32, 64, 128, 256)]
    assert all(b < a for a, b in zip(req, req[1:]))


def test_sp59_reference_values():
    # desk values for the (128, 64) code at R = 1/2
    assert sp59_required_ebn0(128, 64, 1e-4) == pytest.approx(2.62, abs=0.02)
    assert sp59_required_ebn0(128, 64, 1e-5) == pytest.approx(2.99, abs=0.02)


def test_crossing():
    assert crossing_ebn0([0, 1], [1e-1, 1e-3], 1e-2) == pytest.approx(0.5)
    assert math.isnan(crossing_ebn0([0, 1], [1e-1, 1e-2], 1e-4))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 40), min_size=1, max_size=5, unique=True), st.floats(0.0, 8.0))
def test_tub_is_sum_of_terms(weights, eb):
    ents = ((0, 1),) + tuple((w, w) for w in sorted(weights))
    s = WeightSpectrum(40, 20, ents, complete=False, max_weight=40)
    total = sum(0.5 * w * erfc(math.sqrt(w * 0.5 * 10 ** (eb / 10))) for w in weights)
    assert tub_terms(s, 40, eb, 0.5)[0] == pytest.approx(total, rel=1e-12)
