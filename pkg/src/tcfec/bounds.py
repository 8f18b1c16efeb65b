"""Analytic reference curves: truncated union bound, Shannon's 1959
sphere-packing bound, and the hard-decision bounded-distance CER."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special, stats

from .block_codes import WeightSpectrum


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class SnrGrid:
    points: tuple[float, ...]
    rate: float

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise BoundError("SNR grid is empty")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise BoundError("SNR grid must be strictly increasing")
        if not 0.0 < self.rate <= 1.0:
            raise BoundError(f"rate must be in (0, 1], got {self.rate}")

    @classmethod
    def arange(cls, start: float, stop: float, step: float, rate: float) -> SnrGrid:
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return cls(tuple(round(start + i * step, 10) for i in range(count)), rate)

    def linear(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.points) / 10.0)


@dataclass(frozen=True)
class BoundCurve:
    kind: str
    points: tuple[tuple[float, float], ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        probs = [p for _, p in self.points]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise BoundError(f"{self.kind}: probability outside [0, 1]")
        if any(b > a * (1 + 1e-12) for a, b in zip(probs, probs[1:])):
            raise BoundError(f"{self.kind}: curve increases with Eb/N0")

    @property
    def ebn0(self) -> np.ndarray:
        return np.array([e for e, _ in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p for _, p in self.points])


def tub_terms(spectrum: WeightSpectrum, d_star: int, ebn0_db, rate: float) -> np.ndarray:
    """Unclamped union-bound sum, one value per Eb/N0 (dB)."""
    if d_star < 1:
        raise BoundError("d_star must be at least 1")
    if d_star > spectrum.max_weight:
        raise BoundError(
            f"spectrum is only known up to weight {spectrum.max_weight}; cannot truncate at d* = {d_star}"
        )
    ebn0 = 10.0 ** (np.atleast_1d(np.asarray(ebn0_db, dtype=float)) / 10.0)
    out = np.zeros_like(ebn0)
    for w, a in spectrum.entries:
        if 1 <= w <= d_star and a:
            out += 0.5 * float(a) * special.erfc(np.sqrt(w * rate * ebn0))
    return out


def tub(spectrum: WeightSpectrum, d_star: int, grid: SnrGrid) -> BoundCurve:
    """Truncated union bound sum_{i<=d*} A_i/2 erfc(sqrt(i R Eb/N0)), clamped to 1."""
    vals = np.minimum(tub_terms(spectrum, d_star, grid.points, grid.rate), 1.0)
    return BoundCurve(
        "tub",
        tuple(zip(grid.points, map(float, vals))),
        {"n": spectrum.n, "k": spectrum.k, "d_star": d_star},
    )


def uncoded_ber(ebn0_db) -> np.ndarray:
    return 0.5 * special.erfc(np.sqrt(10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)))


def analytic_hard_cer(n: int, t: int, rate: float, ebn0_db) -> np.ndarray:
    """P(more than t of n hard decisions wrong) at raw error rate p = Q(sqrt(2 R Eb/N0))."""
    if t < 0:
        raise BoundError("t must be non-negative")
    p = 0.5 * special.erfc(np.sqrt(rate * 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)))
    return stats.binom.sf(t, n, p)


def analytic_hard_bch(n: int, t: int, rate: float, grid: SnrGrid) -> BoundCurve:
    vals = np.atleast_1d(analytic_hard_cer(n, t, rate, grid.points))
    return BoundCurve(
        "analytic_hd", tuple(zip(grid.points, map(float, vals))), {"n": n, "t": t, "rate": rate}
    )


# --- Shannon 1959 sphere-packing bound ---

def _log_sin_integral(n: int, theta: float) -> float:
    """log of int_0^theta sin^(n-2)(phi) dphi."""
    if theta <= 0.0:
        return -math.inf
    full = _log_sin_full(n)
    if theta >= math.pi:
        return full
    if theta > math.pi / 2:
        # complement is the same integral over [0, pi - theta]
        rest = _log_sin_integral(n, math.pi - theta)
        return full + math.log1p(-math.exp(rest - full))
    ref = (n - 2) * math.log(math.sin(theta))

    def f(phi):
        return math.exp((n - 2) * math.log(math.sin(phi)) - ref) if phi > 0 else 0.0

    # the integrand rises steeply towards theta; width ~ tan(theta)/(n-2)
    width = math.tan(theta) / max(n - 2, 1)
    lo = max(0.0, theta - 60.0 * width)
    val, _ = integrate.quad(f, lo, theta, epsabs=0.0, epsrel=1e-12, limit=200)
    return ref + math.log(val)


def _log_sin_full(n: int) -> float:
    # int_0^pi sin^(n-2) = sqrt(pi) Gamma((n-1)/2) / Gamma(n/2)
    return 0.5 * math.log(math.pi) + special.gammaln((n - 1) / 2) - special.gammaln(n / 2)


def sp59_cone_angle(n: int, k: float) -> float:
    """Half-angle whose cone covers a fraction 2^-k of the sphere surface in R^n."""
    target = -k * math.log(2.0)
    full = _log_sin_full(n)

    def g(theta):
        return _log_sin_integral(n, theta) - full - target

    lo, hi = 1e-9, math.pi - 1e-9
    if g(lo) > 0 or g(hi) < 0:
        raise BoundError(f"cannot bracket the cone angle for n={n}, k={k}")
    # bisection on the log solid-angle ratio
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def _log_radial(n: int, a: float, c: float) -> float:
    """log of int_0^inf s^(n-1) exp(-(s^2 - 2 s a c + a^2)/2) ds."""
    s0 = 0.5 * (a * c + math.sqrt(a * a * c * c + 4.0 * (n - 1)))

    def logf(s):
        return (n - 1) * math.log(s) - 0.5 * (s * s - 2.0 * s * a * c + a * a)

    peak = logf(s0)
    width = 1.0 / math.sqrt((n - 1) / (s0 * s0) + 1.0)
    lo = max(0.0, s0 - 40.0 * width)
    hi = s0 + 40.0 * width

    def f(s):
        return math.exp(logf(s) - peak) if s > 0 else 0.0

    val, _ = integrate.quad(f, lo, hi, points=[s0], epsabs=0.0, epsrel=1e-11, limit=200)
    return peak + math.log(val)


def sp59_log_prob(n: int, k: float, ebn0_db: float, theta: float | None = None) -> float:
    """Natural log of the SP59 lower bound on block error probability.

    Codewords are 2^k equal-energy points in n dimensions with energy per
    dimension R Eb, R = k/n, in white Gaussian noise of variance N0/2.
    """
    if n < 2:
        raise BoundError("n must be at least 2")
    if theta is None:
        theta = sp59_cone_angle(n, k)
    rate = k / n
    amp = math.sqrt(2.0 * rate * 10.0 ** (ebn0_db / 10.0))
    a = math.sqrt(n) * amp
    log_const = math.log(2.0) - 0.5 * n * math.log(2.0) - 0.5 * math.log(math.pi) - special.gammaln((n - 1) / 2)

    def g(phi):
        s = math.sin(phi)
        if s <= 0.0:
            return -math.inf
        return (n - 2) * math.log(s) + _log_radial(n, a, math.cos(phi))

    grid = np.linspace(theta, math.pi - 1e-6, 257)
    gv = np.array([g(p) for p in grid])
    i = int(np.argmax(gv))
    gmax = gv[i]
    # refine the location of the peak for the quadrature breakpoint
    if 0 < i < len(grid) - 1:
        res = optimize.minimize_scalar(
            lambda p: -g(p), bounds=(grid[i - 1], grid[i + 1]), method="bounded", options={"xatol": 1e-10}
        )
        peak_phi, gmax = float(res.x), max(gmax, -float(res.fun))
    else:
        peak_phi = float(grid[i])
    # keep only the region where the integrand is within e^-60 of its peak
    keep = np.flatnonzero(gv - gmax > -60.0)
    lo = grid[max(keep[0] - 1, 0)]
    hi = grid[min(keep[-1] + 1, len(grid) - 1)]
    lo = max(lo, theta)
    pts = [p for p in (peak_phi,) if lo < p < hi]
    val, _ = integrate.quad(
        lambda p: math.exp(g(p) - gmax), lo, hi, points=pts or None, epsabs=0.0, epsrel=1e-10, limit=200
    )
    return log_const + gmax + math.log(val)


def sp59_prob(n: int, k: float, ebn0_db: float, theta: float | None = None) -> float:
    return min(1.0, math.exp(sp59_log_prob(n, k, ebn0_db, theta)))


def sp59(n: int, k: float, grid: SnrGrid) -> BoundCurve:
    """Shannon 1959 sphere-packing lower bound on CER for an (n, k) code."""
    theta = sp59_cone_angle(n, k)
    vals = [sp59_prob(n, k, e, theta) for e in grid.points]
    # quadrature noise must not break monotonicity near CER = 1
    vals = np.minimum.accumulate(np.array(vals))
    return BoundCurve("sp59", tuple(zip(grid.points, map(float, vals))), {"n": n, "k": k})


def sp59_required_ebn0(n: int, k: float, target: float, lo: float = -2.0, hi: float = 12.0) -> float:
    """Eb/N0 (dB) at which the SP59 bound equals ``target``."""
    theta = sp59_cone_angle(n, k)
    lt = math.log(target)
    return optimize.brentq(lambda e: sp59_log_prob(n, k, e, theta) - lt, lo, hi, xtol=1e-6)


def crossing_ebn0(ebn0_db, probs, target: float) -> float:
    """Eb/N0 where a decreasing curve crosses ``target``.

    Linear interpolation in (dB, log10 probability) between the two grid
    points bracketing the target; NaN when the curve never brackets it.
    """
    x = np.asarray(ebn0_db, dtype=float)
    y = np.asarray(probs, dtype=float)
    lt = math.log10(target)
    for i in range(len(x) - 1):
        y0, y1 = y[i], y[i + 1]
        if y0 >= target >= y1 and y1 > 0:
            l0, l1 = math.log10(y0), math.log10(y1)
            if l0 == l1:
                return float(x[i])
            return float(x[i] + (lt - l0) * (x[i + 1] - x[i]) / (l1 - l0))
    return float("nan")


def tub_required_ebn0(spectrum: WeightSpectrum, d_star: int, rate: float, target: float,
                      lo: float = -2.0, hi: float = 15.0) -> float:
    lt = math.log(target)
    return optimize.brentq(
        lambda e: math.log(tub_terms(spectrum, d_star, e, rate)[0]) - lt, lo, hi, xtol=1e-6
    )

