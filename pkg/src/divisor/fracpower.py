"""Fractional convolution powers ``mu^{*t}``, possibly signed.

Three routes:

* series: exact binomial expansion for atomic factors with a dominant atom,
  smeared by the closed-form Cauchy/Gaussian part of the distribution;
* lattice: discrete inverse transform over one period for integer-lattice
  atomic distributions;
* grid: FFT inversion of ``exp(t * psi)`` for distributions with a decaying
  characteristic function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import voigt_profile

from .charfn import (
    admissibility_check,
    cf_eval,
    dominant_atom,
    psi_closed_form,
    second_characteristic,
)
from .errors import (
    AliasingSuspected,
    NotAdmissible,
    PsiUnavailable,
    RouteUnavailable,
    TailNotConverged,
    ValidationError,
)
from .measures import (
    DELTA0,
    AtomicLeaf,
    CauchyLeaf,
    Convolve,
    DistExpr,
    GaussianLeaf,
    GridSignedDensity,
    Mixture,
    Power,
    SignedAtomicMeasure,
    as_atomic,
    canonicalize,
    convolve_atomic,
    n_fold_power,
)

TAIL_TOL = 1e-14
L_MAX = 10**6
IMAG_TOL = 1e-8
MASS_TOL = 1e-6
INTEGER_EPS = 1e-12


def is_integer(t: float) -> bool:
    return abs(t - round(t)) <= INTEGER_EPS * max(1.0, abs(t))


def gen_binomial(t: float, l: int) -> float:
    """Generalised binomial coefficient ``t (t-1) ... (t-l+1) / l!``."""
    if l < 0:
        raise ValueError("l must be >= 0")
    out = 1.0
    for k in range(l):
        out *= (t - k) / (k + 1)
    return out


def binomial_coefficients(t: float, n: int) -> np.ndarray:
    """Coefficients C(t, 0..n-1) by the product recurrence."""
    c = np.empty(n)
    c[0] = 1.0
    for l in range(1, n):
        c[l] = c[l - 1] * (t - l + 1) / l
    return c


def series_length(alpha: float, t: float, tail_tol: float, l_max: int = L_MAX, prefactor: float = 1.0) -> int:
    """Number of terms L+1 such that ``prefactor * sum_{l>L} |C(t,l)| alpha^l < tail_tol``.

    Past ``l >= t`` the ratio |C(t,l+1)/C(t,l)| = |l-t|/(l+1) is below 1, so
    the tail is dominated by a geometric series with ratio alpha.
    """
    if is_integer(t):
        return int(round(t)) + 1
    coeff = 1.0
    weight = prefactor
    for l in range(0, l_max + 1):
        if l >= t and weight * abs(coeff) * alpha / (1 - alpha) < tail_tol:
            return l + 1
        coeff *= (t - l) / (l + 1)
        weight *= alpha
    raise TailNotConverged(f"binomial series for t={t:g}, alpha={alpha:g} needs more than {l_max} terms")


@dataclass(frozen=True, eq=False)
class BinomialSeriesParams:
    alpha: float
    t: float
    tail_tol: float = TAIL_TOL
    theta: SignedAtomicMeasure = field(default_factory=lambda: SignedAtomicMeasure.point(1.0))
    l_max: int = L_MAX

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not self.t > 0:
            raise ValidationError(f"t must be > 0, got {self.t!r}")
        if not self.tail_tol > 0:
            raise ValidationError("tail_tol must be > 0")
        th = self.theta
        if np.any(th.weights <= 0) or abs(th.total_mass - 1) > 1e-12:
            raise ValidationError("theta must be a probability measure")


def compound_power_atoms(p: BinomialSeriesParams) -> SignedAtomicMeasure:
    """``(1+alpha)^{-t} sum_l C(t,l) alpha^l theta^{*l}``, truncated at ``tail_tol``."""
    pre = (1 + p.alpha) ** (-p.t)
    n = series_length(p.alpha, p.t, p.tail_tol, p.l_max, pre)
    coeffs = binomial_coefficients(p.t, n) * p.alpha ** np.arange(n) * pre
    if np.array_equal(p.theta.locations, [1.0]):
        return canonicalize(zip(np.arange(n, dtype=float), coeffs))
    locs, wts = [], []
    term = DELTA0
    for l in range(n):
        if l:
            term = convolve_atomic(term, p.theta)
        locs.append(term.locations)
        wts.append(coeffs[l] * term.weights)
    return canonicalize(zip(np.concatenate(locs), np.concatenate(wts)))


def cauchy_compound_density(alpha: float, t: float, x, tail_tol: float = TAIL_TOL):
    """Density of ``(gamma_1 * nu)^{*t}`` with ``nu = (delta_0 + alpha delta_1)/(1+alpha)``.

    Sums ``C(t,l) alpha^l t / ((x-l)^2 + t^2)`` until the remaining
    total-variation bound times the kernel peak ``1/(pi t)`` is below
    ``tail_tol``.
    """
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    if not t > 0:
        raise ValidationError("t must be > 0")
    pre = (1 + alpha) ** (-t) / math.pi
    n = series_length(alpha, t, tail_tol, prefactor=pre / t)
    coeffs = binomial_coefficients(t, n) * alpha ** np.arange(n)
    x = np.asarray(x, dtype=float)
    l = np.arange(n, dtype=float)
    kern = t / (np.subtract.outer(x, l) ** 2 + t * t)
    return pre * (kern @ coeffs)


def cauchy_compound_threshold(alpha: float) -> float:
    """Every t at or above this value gives a non-negative ``f_t``."""
    return math.sqrt(alpha) / (1 - alpha)


def small_t_limit(alpha: float) -> float:
    """Limit of the bound on ``f_t(2)`` as t -> 0."""
    return -alpha * alpha / (2 * math.pi)


# ------------------------------------------------------------- structure


@dataclass
class _Factors:
    cauchy: float = 0.0
    mean: float = 0.0
    variance: float = 0.0
    atomic: list = field(default_factory=list)  # (measure, power)


def factorize(expr: DistExpr, power: float = 1.0) -> _Factors | None:
    """Split ``expr^{*power}`` into closed-form continuous parts and atomic factors."""
    out = _Factors()
    if not _collect(expr, power, out):
        return None
    return out


def _collect(expr, s, out):
    if isinstance(expr, CauchyLeaf):
        out.cauchy += s * expr.scale
        return True
    if isinstance(expr, GaussianLeaf):
        out.mean += s * expr.mean
        out.variance += s * expr.variance
        return True
    if isinstance(expr, Convolve):
        return all(_collect(p, s, out) for p in expr.parts)
    if isinstance(expr, Power):
        return _collect(expr.base, s * expr.t, out)
    m = as_atomic(expr)
    if m is None:
        return False
    out.atomic.append((m, s))
    return True


def atomic_power(m: SignedAtomicMeasure, s: float, tail_tol: float = TAIL_TOL) -> SignedAtomicMeasure:
    """``m^{*s}`` for a probability measure ``m`` by the binomial series."""
    if is_integer(s):
        return n_fold_power(m, int(round(s)))
    if len(m) == 1:
        return SignedAtomicMeasure.point(s * m.locations[0])
    k = dominant_atom(m)
    if k is None:
        raise RouteUnavailable("series route needs an atom heavier than all others combined")
    x0, w0 = m.locations[k], m.weights[k]
    rest = np.delete(np.arange(len(m)), k)
    alpha = (1 - w0) / w0
    theta = canonicalize(zip(m.locations[rest] - x0, m.weights[rest] / (1 - w0)))
    series = compound_power_atoms(BinomialSeriesParams(alpha, s, tail_tol, theta))
    return series.shift(s * x0)


@dataclass(frozen=True, eq=False)
class SmoothedAtomicDensity:
    """Signed atoms convolved with a Cauchy and/or Gaussian kernel."""

    atoms: SignedAtomicMeasure
    cauchy: float = 0.0
    mean: float = 0.0
    variance: float = 0.0

    def __post_init__(self):
        if self.cauchy < 0 or self.variance < 0 or (self.cauchy == 0 and self.variance == 0):
            raise ValidationError("kernel needs a positive Cauchy scale or variance")

    @property
    def width(self) -> float:
        return self.cauchy + math.sqrt(self.variance)

    @property
    def total_mass(self) -> float:
        return self.atoms.total_mass

    def kernel(self, x):
        x = np.asarray(x, dtype=float)
        if self.variance == 0:
            c = self.cauchy
            return c / (math.pi * (x * x + c * c))
        return voigt_profile(x, math.sqrt(self.variance), self.cauchy)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        loc = self.atoms.locations + self.mean
        out = np.zeros(x.shape)
        # chunk over atoms to bound memory
        for k in range(0, loc.size, 256):
            out = out + self.kernel(np.subtract.outer(x, loc[k : k + 256])) @ self.atoms.weights[k : k + 256]
        return out

    def support_window(self, pad: float = 10.0) -> tuple[float, float]:
        loc = self.atoms.locations + self.mean
        return float(loc.min() - pad * self.width - 1), float(loc.max() + pad * self.width + 1)

    def sample_points(self, max_points: int = 200_000) -> np.ndarray:
        """Grid dense enough to resolve every kernel bump."""
        lo, hi = self.support_window()
        w = self.width
        n = int(min(max_points, max(2001, math.ceil((hi - lo) / (w / 8)))))
        pts = [np.linspace(lo, hi, n)]
        stencil = w * np.array([-3, -2, -1.5, -1, -0.6, -0.3, -0.1, 0, 0.1, 0.3, 0.6, 1, 1.5, 2, 3])
        big = np.abs(self.atoms.weights) > 1e-14
        pts.append(np.add.outer(self.atoms.locations[big] + self.mean, stencil).ravel())
        return np.unique(np.concatenate(pts))

    def min_value(self) -> tuple[float, float]:
        """(value, x) of the global minimum, polished around the best samples."""
        x = self.sample_points()
        v = self(x)
        best_v, best_x = float(v.min()), float(x[int(np.argmin(v))])
        interior = np.flatnonzero((v[1:-1] <= v[:-2]) & (v[1:-1] <= v[2:])) + 1
        for k in interior[np.argsort(v[interior])][:5]:
            res = minimize_scalar(
                lambda z: float(self(np.array([z]))[0]),
                bounds=(x[k - 1], x[k + 1]),
                method="bounded",
                options={"xatol": 1e-10},
            )
            if res.fun < best_v:
                best_v, best_x = float(res.fun), float(res.x)
        return best_v, best_x

    def scale(self) -> float:
        return float(np.max(np.abs(self(self.sample_points()))))

    def to_grid(self, lo: float, hi: float, n: int) -> GridSignedDensity:
        x = np.linspace(lo, hi, n)
        return GridSignedDensity(lo, (hi - lo) / (n - 1), self(x))


def frac_power_series(expr: DistExpr, t: float, tail_tol: float = TAIL_TOL):
    """Series route; returns SignedAtomicMeasure or SmoothedAtomicDensity."""
    if not t > 0:
        raise ValidationError("t must be > 0")
    fac = factorize(expr, t)
    if fac is None:
        raise RouteUnavailable("series route needs a convolution of atomic, Cauchy and Gaussian parts")
    result = DELTA0
    for m, s in fac.atomic:
        result = convolve_atomic(result, atomic_power(m, s, tail_tol))
    if fac.cauchy == 0 and fac.variance == 0:
        return result.shift(fac.mean) if fac.mean else result
    return SmoothedAtomicDensity(result, fac.cauchy, fac.mean, fac.variance)


# ------------------------------------------------------------ lattice


def _integer_lattice(m: SignedAtomicMeasure) -> bool:
    return bool(np.all(np.abs(m.locations - np.round(m.locations)) < 1e-12))


def frac_power_lattice(expr: DistExpr, t: float, period: int = 2048, tol: float = 1e-15) -> SignedAtomicMeasure:
    """Discrete inverse transform of ``exp(t psi)`` over one period.

    For a distribution on the integers, ``psi(y + 2 pi) = psi(y) + 2 pi i n``
    with ``n`` the winding number; removing the drift ``i n y`` leaves a
    periodic function whose Fourier coefficients are the weights of the
    power, shifted by ``t n``.
    """
    m = as_atomic(expr)
    if m is None or not _integer_lattice(m):
        raise RouteUnavailable("lattice route needs an atomic distribution on the integers")
    y_max = 2 * math.pi
    trace = second_characteristic(expr, y_max, 2 * period)
    ys = 2 * math.pi * np.arange(period) / period
    psi = trace(ys)
    winding = int(round(trace.at(y_max).imag / (2 * math.pi)))
    periodic = np.exp(t * (psi - 1j * winding * ys))
    coeffs = np.fft.fft(periodic) / period
    k = np.fft.fftfreq(period, d=1.0 / period)
    vals = coeffs.real
    if np.max(np.abs(coeffs.imag)) > IMAG_TOL * max(1.0, np.max(np.abs(vals))):
        raise AliasingSuspected("lattice inversion left an imaginary residue")
    return canonicalize(zip(k + t * winding, vals), zero_weight=tol)


# ---------------------------------------------------------------- grid


def default_grid_params(expr: DistExpr, t: float, sup_tol: float = 1e-7) -> tuple[float, int]:
    """Frequency window and FFT size for the grid route.

    The window is set where ``exp(t psi)`` has decayed below ~1e-26; the
    spatial period is made long enough that the periodised Cauchy tail
    stays below ``sup_tol``.
    """
    fac = factorize(expr, t)
    c = fac.cauchy if fac else 0.0
    v = fac.variance if fac else 0.0
    rate = _decay_rate(expr) if fac is None else 0.0
    if fac is None:
        c = rate * t
    if c <= 0 and v <= 0:
        raise RouteUnavailable("grid route needs a decaying characteristic function")
    y_max = 60.0 / c if c > 0 else math.sqrt(120.0 / v)
    if rate > 0:
        # psi comes from unwinding here; stay where |cf| is well above the zero test
        y_max = min(y_max, 20.0 / rate)
    if c > 0 and v > 0:
        y_max = min(y_max, math.sqrt(120.0 / v))
    span = 64.0
    if fac is not None:
        for m, s in fac.atomic:
            span += abs(s) * (m.locations.max() - m.locations.min()) * 4
    length = max(span, math.sqrt(math.pi * max(c, 1e-300) / (3 * sup_tol)) if c > 0 else span)
    n = 1 << max(6, math.ceil(math.log2(length * y_max / math.pi)))
    return y_max, n


def _decay_rate(expr) -> float:
    """Crude exponential decay rate of |cf| from two samples (for mixtures)."""
    a, b = 5.0, 10.0
    ha, hb = abs(cf_eval(expr, a)), abs(cf_eval(expr, b))
    if hb >= ha:
        return 0.0
    return math.log(max(ha, 1e-300) / max(hb, 1e-300)) / (b - a)


def frac_power_grid(
    expr: DistExpr,
    t: float,
    y_max: float | None = None,
    n_freq: int | None = None,
    imag_tol: float = IMAG_TOL,
    mass_tol: float = MASS_TOL,
) -> GridSignedDensity:
    """Invert ``exp(t psi)`` by FFT on ``[-y_max, y_max)`` with ``n_freq`` samples.

    Spatial spacing is ``pi / y_max``; the returned samples are centred on 0.
    """
    if not t > 0:
        raise ValidationError("t must be > 0")
    if y_max is None or n_freq is None:
        dy_max, dn = default_grid_params(expr, t)
        y_max = dy_max if y_max is None else y_max
        n_freq = dn if n_freq is None else n_freq
    if n_freq < 64 or n_freq & (n_freq - 1):
        raise ValidationError("n_freq must be a power of two >= 64")
    dy = 2 * y_max / n_freq
    y = (np.arange(n_freq) - n_freq // 2) * dy
    psi = psi_closed_form(expr, y)
    if psi is None:
        try:
            trace = second_characteristic(expr, y_max, n_freq)
        except NotAdmissible as exc:
            raise PsiUnavailable(str(exc)) from exc
        psi = trace(y)
    phi = np.exp(t * psi)
    edge = float(np.max(np.abs(phi[[0, -1]])))
    if edge > mass_tol:
        raise AliasingSuspected(f"|cf^t| = {edge:.3g} at the window edge; increase y_max")
    f = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(phi))) * dy / (2 * math.pi)
    scale = float(np.max(np.abs(f.real)))
    resid = float(np.max(np.abs(f.imag)))
    if resid > imag_tol * max(scale, 1e-300):
        raise AliasingSuspected(f"imaginary residue {resid:.3g} exceeds {imag_tol:g} of the peak")
    dx = math.pi / y_max
    out = GridSignedDensity(-(n_freq // 2) * dx, dx, f.real)
    if abs(out.total_mass - 1.0) > mass_tol:
        raise AliasingSuspected(f"mass defect {abs(out.total_mass - 1):.3g}")
    return out


# ------------------------------------------------------------- dispatch


def fractional_power(expr: DistExpr, t: float, route: str = "auto", tail_tol: float = TAIL_TOL):
    """``expr^{*t}`` by the requested route (``auto``, ``series``, ``lattice``, ``grid``)."""
    if route == "series":
        return frac_power_series(expr, t, tail_tol)
    if route == "lattice":
        return frac_power_lattice(expr, t)
    if route == "grid":
        return frac_power_grid(expr, t)
    if route != "auto":
        raise ValueError(f"unknown route {route!r}")
    try:
        return frac_power_series(expr, t, tail_tol)
    except RouteUnavailable:
        pass
    try:
        return frac_power_lattice(expr, t)
    except RouteUnavailable:
        pass
    return frac_power_grid(expr, t)


def min_and_scale(result) -> tuple[float, float, float]:
    """(minimum value, its location, max |value|) of any power result."""
    if isinstance(result, SignedAtomicMeasure):
        w, x = result.min_atom()
        return w, x, float(np.max(np.abs(result.weights)))
    if isinstance(result, SmoothedAtomicDensity):
        v, x = result.min_value()
        return v, x, result.scale()
    v, x = result.min_value()
    return v, x, result.scale()


def real_root(expr: DistExpr, beta: float, tol: float = 1e-7, route: str = "auto"):
    """``expr^{*(1/beta)}`` and whether it is a probability measure within ``tol``."""
    if not beta > 0:
        raise ValidationError("beta must be > 0")
    result = fractional_power(expr, 1.0 / beta, route)
    v, _, scale = min_and_scale(result)
    return result, bool(v >= -tol * scale)


def as_base(result, fallback: DistExpr | None = None) -> DistExpr:
    """Re-wrap a non-negative atomic power as a distribution, else use ``fallback``."""
    if isinstance(result, SignedAtomicMeasure) and result.is_nonnegative():
        w = result.weights / result.total_mass
        keep = w > 0
        return AtomicLeaf(SignedAtomicMeasure(result.locations[keep], w[keep] / w[keep].sum()))
    if fallback is None:
        raise ValidationError("result is not an atomic probability measure")
    return fallback
