"""Membership tests for the divisibility set and scans over t.

A number t belongs to the set when ``exp(t psi)`` is again a
characteristic function, i.e. when the fractional power ``mu^{*t}`` is a
non-negative measure. Membership is decided either from the sign of the
power (density methods) or by Bochner's criterion on a finite Gram matrix.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from scipy.stats import qmc

from .charfn import second_characteristic
from .errors import PointsOutOfRange, RouteUnavailable, SpotCheckFailed, ValidationError
from .fracpower import (
    TAIL_TOL,
    SmoothedAtomicDensity,
    as_base,
    factorize,
    frac_power_grid,
    frac_power_lattice,
    frac_power_series,
    default_grid_params,
    is_integer,
    min_and_scale,
)
from .measures import DistExpr, GridSignedDensity, Power, SignedAtomicMeasure, convolve_atomic

SERIES_TOL = 1e-7
GRID_TOL = 1e-5
PSD_TOL = 1e-9
GRAM_POINTS = 48
GRAM_PERIOD = 8.0

METHODS = ("series_density", "grid_density", "gram_psd")


@dataclass(frozen=True)
class MembershipVerdict:
    t: float
    member: bool
    method: str
    min_value: float
    at: float | None
    tolerance: float
    support: str | None = None  # "atoms" or "density" for density methods

    @property
    def evidence(self) -> float:
        """Signed evidence normalised so that member iff evidence >= -tolerance."""
        return self.min_value

    def __str__(self):
        if self.member:
            return f"MEMBER t={_num(self.t)}"
        if self.method == "gram_psd":
            return f"NON-MEMBER t={_num(self.t)} min_eig={_sci(self.min_value)}"
        label = "min_weight" if self.support == "atoms" else "min_density"
        return f"NON-MEMBER t={_num(self.t)} {label}={_sci(self.min_value)} at={_num(self.at)}"


def _num(x) -> str:
    return f"{x:.10g}"


def _sci(x) -> str:
    mant, exp = f"{x:.4e}".split("e")
    return f"{mant}e{int(exp)}"


# ------------------------------------------------------------ Gram test


def gram_points(m: int = GRAM_POINTS, period: float = GRAM_PERIOD, seed: int = 0) -> np.ndarray:
    """Half uniform grid with spacing ``2 pi / period``, half Halton points in the same range."""
    n_uniform = m // 2
    dy = 2 * math.pi / period
    uniform = (np.arange(n_uniform) - (n_uniform - 1) / 2) * dy
    half = (n_uniform - 1) / 2 * dy if n_uniform > 1 else math.pi
    halton = qmc.Halton(1, scramble=True, seed=seed).random(m - n_uniform).ravel()
    return np.sort(np.concatenate([uniform, (2 * halton - 1) * half]))


def gram_psd_min_eig(psi, t: float, points) -> float:
    """Smallest eigenvalue of the Hermitian matrix ``exp(t psi(y_j - y_k))``."""
    points = np.asarray(points, dtype=float)
    diff = np.subtract.outer(points, points)
    if diff.size and np.max(np.abs(diff)) > psi.y_max * (1 + 1e-12):
        raise PointsOutOfRange(
            f"point differences reach {np.max(np.abs(diff)):g}, trace covers {psi.y_max:g}"
        )
    mat = np.exp(t * psi(diff.ravel()).reshape(diff.shape))
    mat = 0.5 * (mat + mat.conj().T)
    np.fill_diagonal(mat, 1.0)
    return float(np.linalg.eigvalsh(mat)[0])


_GRAM_TRACE_ATTR = "_divisor_gram_trace"


def _gram_trace(expr, reach):
    trace = getattr(expr, _GRAM_TRACE_ATTR, None)
    if trace is None or trace.y_max < reach:
        y_max = 1.05 * reach
        trace = second_characteristic(expr, y_max, 2 * int(math.ceil(100 * y_max)))
        object.__setattr__(expr, _GRAM_TRACE_ATTR, trace)
    return trace


# ------------------------------------------------------------ membership


def _power_for(expr, t, method):
    if method == "series_density":
        return frac_power_series(expr, t)
    try:
        return frac_power_lattice(expr, t)
    except RouteUnavailable:
        return frac_power_grid(expr, t)


def is_member(
    expr: DistExpr,
    t: float,
    tol: float | None = None,
    method: str = "auto",
    points=None,
) -> MembershipVerdict:
    """Decide ``t`` in the divisibility set of ``expr``.

    ``method`` is one of ``series_density``, ``grid_density``, ``gram_psd``,
    or ``auto``/``density`` (series when it applies, else grid).
    """
    if not t > 0:
        raise ValidationError(f"t must be > 0, got {t!r}")
    if method in ("auto", "density"):
        try:
            return is_member(expr, t, tol, "series_density")
        except RouteUnavailable:
            return is_member(expr, t, tol, "grid_density")
    if method == "gram_psd":
        tol = PSD_TOL if tol is None else tol
        pts = gram_points() if points is None else np.asarray(points, dtype=float)
        reach = float(np.ptp(pts)) if pts.size > 1 else 1.0
        eig = gram_psd_min_eig(_gram_trace(expr, reach), t, pts)
        return MembershipVerdict(t, eig >= -tol, method, eig, None, tol)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    tol = (SERIES_TOL if method == "series_density" else GRID_TOL) if tol is None else tol
    result = _power_for(expr, t, method)
    value, at, scale = min_and_scale(result)
    support = "atoms" if isinstance(result, SignedAtomicMeasure) else "density"
    member = value >= -tol * scale
    return MembershipVerdict(t, bool(member), method, value, at, tol, support)


# ------------------------------------------------------------ closure


@dataclass(frozen=True)
class ImpliedRay:
    """``[n a, inf)`` implied by a certified member interval ``[a, b]``."""

    a: float
    b: float
    n: int
    verified: tuple[float, ...] = ()
    tag: str = "implied"

    @property
    def start(self) -> float:
        return self.n * self.a


def member_runs(members) -> list[tuple[float, float]]:
    """Maximal runs of consecutive member grid points, as (first, last)."""
    runs, current = [], None
    for t, ok in members:
        if ok:
            current = (t, t) if current is None else (current[0], t)
        elif current is not None:
            runs.append(current)
            current = None
    if current is not None:
        runs.append(current)
    return runs


def interval_closure(members, verify=None, rng=None, n_spot: int = 3, upper: float | None = None) -> list[ImpliedRay]:
    """Rays implied by semigroup closure of each member interval.

    If ``[a, b]`` lies in the set, so do its n-fold sums ``[na, nb]``; these
    overlap once ``n (b - a) > 1``, giving ``[n a, inf)``. With ``verify``
    (a callable t -> bool) each ray is spot-checked at ``n_spot`` random
    points and :class:`SpotCheckFailed` is raised on a miss.
    """
    members = sorted(members)
    rng = np.random.default_rng(0) if rng is None else rng
    rays = []
    for a, b in member_runs(members):
        if b <= a:
            continue
        n = int(math.floor(1.0 / (b - a))) + 1
        ray = ImpliedRay(a, b, n)
        if verify is not None:
            lo = ray.start
            hi = max(lo, upper if upper is not None else lo) * 2 + 1
            probes = tuple(float(p) for p in rng.uniform(lo, hi, n_spot))
            for p in probes:
                if not verify(p):
                    raise SpotCheckFailed(f"implied member t={p:.6g} from [{a:g}, {b:g}] tested non-member", t=p)
            ray = ImpliedRay(a, b, n, probes)
        rays.append(ray)
    return rays


# ------------------------------------------------------------ scans


@dataclass
class LambdaReport:
    t_grid: list[float]
    verdicts: list[MembershipVerdict]
    lambda0_est: float
    lambda1_est: float
    classification: str
    ndiv_lower: int
    ndiv_upper: float
    rays: list[ImpliedRay] = field(default_factory=list)
    tolerance: float | None = None
    method: str = "auto"
    notes: list[str] = field(default_factory=list)

    @property
    def members(self) -> list[float]:
        return [v.t for v in self.verdicts if v.member]

    def check_chain(self) -> None:
        """0 <= lambda0 <= 1/ndiv_upper <= 1/ndiv_lower."""
        inv = lambda n: 0.0 if n == math.inf else 1.0 / n
        assert 0 <= self.lambda0_est <= inv(self.ndiv_upper) + 1e-12
        assert inv(self.ndiv_upper) <= inv(self.ndiv_lower) + 1e-12
        assert self.ndiv_lower <= self.ndiv_upper
        if math.isfinite(self.lambda1_est):
            assert self.lambda1_est >= self.lambda0_est

    def csv_rows(self):
        return [(v.t, int(v.member), v.method, v.min_value) for v in self.verdicts]

    def to_text(self) -> str:
        lines = [
            "divisibility scan",
            f"  grid: {len(self.t_grid)} points in [{_num(self.t_grid[0])}, {_num(self.t_grid[-1])}]"
            f", method {self.method}, tolerance {self.tolerance if self.tolerance is not None else 'default'}",
            f"  members: {_ranges(self.verdicts)}",
            f"  lambda0 estimate: {_num(self.lambda0_est)}",
            f"  lambda1 estimate: {'inf' if math.isinf(self.lambda1_est) else _num(self.lambda1_est)}",
            f"  n-divisible at most: {'inf' if math.isinf(self.ndiv_upper) else int(self.ndiv_upper)}",
            f"  divisible up to: {'inf' if math.isinf(self.ndiv_lower) else int(self.ndiv_lower)}",
            f"  classification: {self.classification}",
        ]
        for r in self.rays:
            checked = ", ".join(_num(p) for p in r.verified) or "none"
            lines.append(
                f"  implied ray [{_num(r.start)}, inf) from [{_num(r.a)}, {_num(r.b)}] (n={r.n}; spot checks: {checked})"
            )
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def _ranges(verdicts) -> str:
    parts = []
    for a, b in member_runs([(v.t, v.member) for v in verdicts]):
        parts.append(_num(a) if a == b else f"[{_num(a)}, {_num(b)}]")
    return ", ".join(parts) if parts else "none"


def scan_grid(t_min: float, t_max: float, n_steps: int) -> list[float]:
    """``n_steps`` evenly spaced points plus every integer in range."""
    if not 0 < t_min < t_max:
        raise ValidationError("need 0 < t_min < t_max")
    if n_steps < 2:
        raise ValidationError("n_steps must be >= 2")
    pts = np.linspace(t_min, t_max, int(n_steps))
    ints = np.arange(math.ceil(t_min), math.floor(t_max) + 1, dtype=float)
    pts = np.concatenate([pts, ints])
    near = np.abs(pts - np.round(pts)) < 1e-9
    pts[near] = np.round(pts[near])
    pts = np.round(pts, 12)
    return [float(p) for p in np.unique(pts)]


def thread_count() -> int:
    raw = os.environ.get("DIVISOR_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _classify(grid, flags) -> str:
    ints = [is_integer(t) for t in grid]
    if any(i and not f for i, f in zip(ints, flags)):
        return "inconclusive"
    if all(flags):
        return "infinitely_divisible_candidate"
    nonint_members = [t for t, i, f in zip(grid, ints, flags) if f and not i]
    if not nonint_members:
        return "minimally_divisible_candidate"
    r = min(nonint_members)
    tail_ok = all(f for t, f in zip(grid, flags) if t >= r)
    if tail_ok and len([t for t in grid if t >= r]) > 1:
        return "interval_plus_candidate"
    return "inconclusive"


def lambda_scan(
    expr: DistExpr,
    t_min: float,
    t_max: float,
    n_steps: int,
    tol: float | None = None,
    method: str = "auto",
    threads: int | None = None,
    seed: int = 0,
) -> LambdaReport:
    grid = scan_grid(t_min, t_max, n_steps)
    workers = threads or thread_count()
    check = lambda t: is_member(expr, t, tol, method)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(check, grid))
    else:
        verdicts = [check(t) for t in grid]
    flags = [v.member for v in verdicts]
    notes = []
    classification = _classify(grid, flags)
    if classification == "inconclusive" and any(is_integer(t) and not f for t, f in zip(grid, flags)):
        notes.append("an integer grid point tested non-member (numerical fault)")

    members = [t for t, f in zip(grid, flags) if f]
    lambda0 = min(members + [1.0])

    rays = []
    lambda1 = math.inf
    try:
        rays = interval_closure(
            list(zip(grid, flags)),
            verify=lambda p: is_member(expr, p, tol, method).member,
            rng=np.random.default_rng(seed),
            upper=grid[-1],
        )
    except SpotCheckFailed as exc:
        classification = "inconclusive"
        notes.append(str(exc))
    else:
        for ray in rays:
            tail = [f for t, f in zip(grid, flags) if t >= ray.a]
            if all(tail) and ray.b == grid[-1] and ray.start <= grid[-1]:
                lambda1 = ray.a
                break

    ndiv_upper = math.floor(1.0 / lambda0 + 1e-9)
    known = dict(zip(grid, flags))
    ndiv_lower = 1
    for k in range(2, ndiv_upper + 1):
        tk = 1.0 / k
        ok = known.get(round(tk, 12))
        if ok is None:
            ok = is_member(expr, tk, tol, method).member
        if not ok:
            break
        ndiv_lower = k
    if classification == "infinitely_divisible_candidate":
        notes.append(f"lambda0 estimate {_num(lambda0)} is the grid floor")

    report = LambdaReport(
        t_grid=grid,
        verdicts=verdicts,
        lambda0_est=lambda0,
        lambda1_est=lambda1,
        classification=classification,
        ndiv_lower=ndiv_lower,
        ndiv_upper=ndiv_upper,
        rays=rays,
        tolerance=tol,
        method=method,
        notes=notes,
    )
    report.check_chain()
    return report


# ------------------------------------------------------------ spot checks


def _rebased(expr, t, method):
    """``expr^{*t}`` as a new base distribution."""
    if t == 1:
        return expr
    if method in ("auto", "density", "series_density"):
        try:
            return as_base(frac_power_series(expr, t), Power(expr, t))
        except RouteUnavailable:
            pass
    return Power(expr, t)


def scaling_check(expr: DistExpr, s: float, t: float, probe: float, tol: float | None = None, method: str = "auto") -> bool:
    """``probe`` is a member for ``mu_t`` iff ``probe * t / s`` is one for ``mu_s``."""
    left = is_member(_rebased(expr, t, method), probe, tol, method)
    right = is_member(_rebased(expr, s, method), probe * t / s, tol, method)
    return left.member == right.member


def _conv_sup_diff(a, b, c) -> float:
    """sup |a * b - c| for smoothed densities, by FFT convolution on a wide grid."""
    width = min(a.width, b.width)
    dx = width / 20
    lo_c, hi_c = c.support_window(pad=2.0)
    half = max(2000.0, 4 * max(abs(lo_c), abs(hi_c)))
    n = int(2 * half / dx) | 1
    x = np.linspace(-half, half, n)
    dx = x[1] - x[0]
    conv = fftconvolve(a(x), b(x), mode="same") * dx
    sel = (x >= lo_c) & (x <= hi_c)
    return float(np.max(np.abs(conv[sel] - c(x[sel]))))


def _grid_conv_sup_diff(expr, s, t) -> float:
    y_max, n = default_grid_params(expr, min(s, t))
    gs = frac_power_grid(expr, s, y_max, n)
    gt = frac_power_grid(expr, t, y_max, n)
    gst = frac_power_grid(expr, s + t, y_max, n)
    # circular convolution of centred samples
    fs = np.fft.fft(np.fft.ifftshift(gs.values))
    ft = np.fft.fft(np.fft.ifftshift(gt.values))
    conv = np.fft.fftshift(np.fft.ifft(fs * ft).real) * gs.dx
    return float(np.max(np.abs(conv - gst.values)))


def semigroup_spot_check(
    expr: DistExpr, s: float, t: float, tol: float | None = None, method: str = "auto", sup_tol: float = 1e-4
) -> bool:
    """``s + t`` is a member and ``mu_s * mu_t`` equals ``mu_{s+t}``."""
    if not is_member(expr, s + t, tol, method).member:
        return False
    if method == "gram_psd":
        return True
    try:
        if method == "grid_density":
            raise RouteUnavailable("grid requested")
        ps, pt, pst = (frac_power_series(expr, u) for u in (s, t, s + t))
    except RouteUnavailable:
        try:
            ps, pt, pst = (frac_power_lattice(expr, u) for u in (s, t, s + t))
        except RouteUnavailable:
            return _grid_conv_sup_diff(expr, s, t) <= sup_tol
    if isinstance(ps, SignedAtomicMeasure):
        diff = convolve_atomic(ps, pt).max_abs_difference(pst)
        return diff <= 2 * TAIL_TOL
    return _conv_sup_diff(ps, pt, pst) <= sup_tol
