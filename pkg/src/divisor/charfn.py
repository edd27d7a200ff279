"""Characteristic functions, admissibility scans and the second characteristic.

The second characteristic is the continuous logarithm ``psi`` of the
characteristic function with ``psi(0) = 0``. Numerically it is built by
marching outward from 0 and summing principal logarithms of successive
ratios, bisecting any step whose phase jump is not safely below pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NotAdmissible, PointsOutOfRange, RefinementExhausted, ValidationError
from .measures import (
    AtomicLeaf,
    CauchyLeaf,
    Convolve,
    DistExpr,
    GaussianLeaf,
    Mixture,
    Power,
    SignedAtomicMeasure,
    as_atomic,
)

ZERO_TOL = 1e-10
PHASE_MARGIN = 0.35
MAX_REFINEMENT_DEPTH = 24


def atomic_cf(m: SignedAtomicMeasure, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.exp(1j * np.multiply.outer(y, m.locations)) @ m.weights


def cf_eval(expr: DistExpr, y):
    """Characteristic function of ``expr`` at ``y`` (scalar or array)."""
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = _cf(expr, y).astype(complex)
    out[y == 0] = 1.0
    return complex(out[0]) if scalar else out


def _cf(expr, y):
    if isinstance(expr, AtomicLeaf):
        return atomic_cf(expr.measure, y)
    if isinstance(expr, CauchyLeaf):
        return np.exp(-expr.scale * np.abs(y)) + 0j
    if isinstance(expr, GaussianLeaf):
        return np.exp(1j * expr.mean * y - 0.5 * expr.variance * y * y)
    if isinstance(expr, Convolve):
        out = np.ones(y.shape, dtype=complex)
        for p in expr.parts:
            out *= _cf(p, y)
        return out
    if isinstance(expr, Mixture):
        out = np.zeros(y.shape, dtype=complex)
        for w, d in expr.components:
            out += w * _cf(d, y)
        return out
    if isinstance(expr, Power):
        return np.exp(expr.t * psi_values(expr.base, y))
    raise TypeError(f"unknown distribution node {expr!r}")


# ------------------------------------------------------------ closed forms


def dominant_atom(m: SignedAtomicMeasure):
    """Index of an atom heavier than all others combined, or None."""
    if len(m) == 0 or np.any(m.weights <= 0):
        return None
    k = int(np.argmax(m.weights))
    w0 = m.weights[k]
    return k if w0 > m.total_mass - w0 else None


def _atomic_log(m: SignedAtomicMeasure, y):
    k = dominant_atom(m)
    if k is None:
        return None
    x0, w0 = m.locations[k], m.weights[k]
    rest = np.delete(np.arange(len(m)), k)
    rel = SignedAtomicMeasure(m.locations[rest] - x0, m.weights[rest] / w0)
    z = atomic_cf(rel, y) if len(rel) else np.zeros(np.shape(y), dtype=complex)
    # |z| < 1, so 1 + z stays in the right half-plane and Log is continuous
    return math.log(w0) + 1j * x0 * y + np.log1p(z)


def psi_closed_form(expr: DistExpr, y):
    """Closed-form second characteristic, or None when no formula applies."""
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = _psi_cf(expr, y)
    if out is None:
        return None
    out = np.asarray(out, dtype=complex)
    out[y == 0] = 0.0
    return complex(out[0]) if scalar else out


def _psi_cf(expr, y):
    if isinstance(expr, CauchyLeaf):
        return -expr.scale * np.abs(y) + 0j
    if isinstance(expr, GaussianLeaf):
        return 1j * expr.mean * y - 0.5 * expr.variance * y * y
    if isinstance(expr, Convolve):
        total = np.zeros(y.shape, dtype=complex)
        for p in expr.parts:
            part = _psi_cf(p, y)
            if part is None:
                return None
            total += part
        return total
    if isinstance(expr, Power):
        inner = _psi_cf(expr.base, y)
        return None if inner is None else expr.t * inner
    if isinstance(expr, (AtomicLeaf, Mixture)):
        m = as_atomic(expr)
        return None if m is None else _atomic_log(m, y)
    raise TypeError(f"unknown distribution node {expr!r}")


def psi_values(expr: DistExpr, y) -> np.ndarray:
    """psi at arbitrary points: closed form if possible, else by unwinding."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    closed = psi_closed_form(expr, y)
    if closed is not None:
        return closed
    need = float(np.max(np.abs(y))) if y.size else 0.0
    trace = _cached_trace(expr, need)
    return trace(y)


_TRACE_CACHE_ATTR = "_divisor_trace_cache"


def _cached_trace(expr, need):
    trace = getattr(expr, _TRACE_CACHE_ATTR, None)
    if trace is None or trace.y_max < need:
        y_max = max(2 * math.pi, 1.25 * need)
        n = 2 * int(math.ceil(32 * y_max))
        trace = second_characteristic(expr, y_max, max(n, 512))
        object.__setattr__(expr, _TRACE_CACHE_ATTR, trace)
    return trace


# ---------------------------------------------------------- admissibility


@dataclass(frozen=True)
class AdmissibilityVerdict:
    admissible: bool
    min_modulus: float
    y_at: float
    zero_at: float | None
    y_max: float
    n_samples: int
    zero_tol: float

    @property
    def verdict(self) -> str:
        return "admissible_on_grid" if self.admissible else "zero_found"


def _nonvanishing_factors(expr):
    """Split ``expr`` into factors whose CFs must each be checked for zeros.

    Cauchy and Gaussian factors never vanish and are dropped; powers vanish
    exactly where their base does.
    """
    if isinstance(expr, (CauchyLeaf, GaussianLeaf)):
        return []
    if isinstance(expr, Convolve):
        return [f for p in expr.parts for f in _nonvanishing_factors(p)]
    if isinstance(expr, Power):
        return _nonvanishing_factors(expr.base)
    return [expr]


def _grid(y_max, n_samples):
    n = int(n_samples) + (int(n_samples) % 2)
    return np.linspace(-y_max, y_max, n + 1)


def _polish(expr, y, h=1e-7, iters=6):
    """Refine a near-zero of |cf| by minimising its local linear model."""
    best_y, best_val = y, abs(cf_eval(expr, y))
    for _ in range(iters):
        h0 = cf_eval(expr, best_y)
        d = (cf_eval(expr, best_y + h) - cf_eval(expr, best_y - h)) / (2 * h)
        if d == 0:
            break
        step = -(d.conjugate() * h0).real / abs(d) ** 2
        cand = best_y + step
        val = abs(cf_eval(expr, cand))
        if not val < best_val:
            break
        best_y, best_val = cand, val
    return best_y, best_val


def _minimum_modulus(expr, ys):
    """Smallest |cf| on ``ys`` after polishing every local minimum."""
    speed = phase_speed_bound(expr)
    step = ys[1] - ys[0]
    if speed * step > 0.5:
        n = min(int(math.ceil((ys[-1] - ys[0]) * speed / 0.5)) + 1, 2_000_001)
        ys = np.linspace(ys[0], ys[-1], n)
    mod = np.abs(cf_eval(expr, ys))
    best_val, best_y = float(mod.min()), float(ys[int(np.argmin(mod))])
    interior = np.flatnonzero((mod[1:-1] <= mod[:-2]) & (mod[1:-1] <= mod[2:])) + 1
    for k in interior:
        res = minimize_scalar(
            lambda v: abs(cf_eval(expr, v)),
            bounds=(ys[k - 1], ys[k + 1]),
            method="bounded",
            options={"xatol": 1e-12, "maxiter": 500},
        )
        y, val = _polish(expr, float(res.x))
        if val < best_val:
            best_val, best_y = float(val), float(y)
    return best_val, best_y


def admissibility_check(expr: DistExpr, y_max: float, n_samples: int = 1024, zero_tol: float = ZERO_TOL):
    if not y_max > 0:
        raise ValidationError("y_max must be positive")
    if n_samples < 16:
        raise ValidationError("n_samples must be >= 16")
    ys = _grid(y_max, n_samples)
    zero_at = None
    for factor in _nonvanishing_factors(expr):
        val, y = _minimum_modulus(factor, ys)
        if val < zero_tol:
            zero_at = y
            break
    min_mod, y_at = _minimum_modulus(expr, ys)
    if zero_at is not None:
        min_mod, y_at = min(min_mod, abs(cf_eval(expr, zero_at))), zero_at
    return AdmissibilityVerdict(
        admissible=zero_at is None,
        min_modulus=min_mod,
        y_at=y_at,
        zero_at=zero_at,
        y_max=float(y_max),
        n_samples=int(n_samples),
        zero_tol=zero_tol,
    )


# ------------------------------------------------------------- unwinding


@dataclass(frozen=True, eq=False)
class PsiTrace:
    """Sampled second characteristic on a grid symmetric about 0.

    When ``source`` is set, evaluation between samples continues the
    logarithm from the nearest sample instead of interpolating linearly.
    """

    y_max: float
    y: np.ndarray
    psi: np.ndarray
    refinement_depth: int = 0
    source: DistExpr | None = field(default=None, repr=False)

    @property
    def samples(self) -> list[tuple[float, complex]]:
        return list(zip(self.y.tolist(), self.psi.tolist()))

    def at(self, y: float) -> complex:
        k = int(np.argmin(np.abs(self.y - y)))
        return complex(self.psi[k])

    def __call__(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.size and np.max(np.abs(y)) > self.y_max * (1 + 1e-12):
            raise PointsOutOfRange(f"|y| up to {np.max(np.abs(y)):g} exceeds trace range {self.y_max:g}")
        if self.source is None:
            re = np.interp(y, self.y, self.psi.real)
            im = np.interp(y, self.y, self.psi.imag)
            return re + 1j * im
        k = np.clip(np.searchsorted(self.y, y), 1, self.y.size - 1)
        left_closer = (y - self.y[k - 1]) <= (self.y[k] - y)
        k = np.where(left_closer, k - 1, k)
        anchor = self.y[k]
        ratio = cf_eval(self.source, y) / cf_eval(self.source, anchor)
        return self.psi[k] + np.log(ratio)

    def check_invariants(self, rel_tol: float = 1e-9) -> None:
        k0 = np.flatnonzero(self.y == 0)
        assert k0.size == 1 and self.psi[k0[0]] == 0, "psi(0) must be exactly 0"
        if self.source is not None:
            h = cf_eval(self.source, self.y)
            err = np.abs(np.exp(self.psi) - h) / np.abs(h)
            assert float(err.max()) < rel_tol, f"exp(psi) deviates from cf by {err.max():g}"
            steps = np.abs(np.angle(h[1:] / h[:-1]))
            assert float(steps.max()) < math.pi, "winding between consecutive samples"

    def rows(self):
        return [(float(y), float(p.real), float(p.imag)) for y, p in zip(self.y, self.psi)]


def phase_speed_bound(expr: DistExpr) -> float:
    """Largest spatial frequency present in the cf.

    Caps the phase advance of each exponential term per unit of y; steps
    longer than ``limit / speed`` are bisected even when the principal
    argument of the ratio looks small (guards against aliasing).
    """
    if isinstance(expr, AtomicLeaf):
        return float(np.max(np.abs(expr.measure.locations)))
    if isinstance(expr, CauchyLeaf):
        return 0.0
    if isinstance(expr, GaussianLeaf):
        return abs(expr.mean)
    if isinstance(expr, Convolve):
        return sum(phase_speed_bound(p) for p in expr.parts)
    if isinstance(expr, Mixture):
        return max(phase_speed_bound(d) for _, d in expr.components)
    if isinstance(expr, Power):
        return expr.t * phase_speed_bound(expr.base)
    raise TypeError(f"unknown distribution node {expr!r}")


def _certify(expr, y0, y1, h0, h1, limit, speed):
    """Per-step no-winding certificate; returns (ok, cf at midpoints)."""
    ym = 0.5 * (y0 + y1)
    hm = cf_eval(expr, ym)
    whole = np.log(h1 / h0)
    halves = np.log(hm / h0) + np.log(h1 / hm)
    ok = (
        (np.abs(whole.imag) < limit)
        & (speed * np.abs(y1 - y0) < limit)
        & (np.abs(halves - whole) < 1.0)
    )
    return ok, hm


def _march(expr, ys, limit, speed, max_depth):
    """Unwrap log cf along ``ys`` (starting at 0); returns (y, psi, depth used)."""
    h = cf_eval(expr, ys)
    if np.any(h == 0):
        raise NotAdmissible("characteristic function vanishes on the grid", y_loc=float(ys[h == 0][0]))
    ok, hm = _certify(expr, ys[:-1], ys[1:], h[:-1], h[1:], limit, speed)
    inc = np.log(h[1:] / h[:-1])
    out_y = [ys[:1]]
    out_inc = [np.zeros(1, dtype=complex)]
    depth_used = 0
    start = 0
    for b in np.flatnonzero(~ok):
        out_y.append(ys[start + 1 : b + 1])
        out_inc.append(inc[start:b])
        sub_y, sub_inc, d = _bisect(expr, ys[b], ys[b + 1], h[b], h[b + 1], hm[b], limit, speed, 1, max_depth)
        out_y.append(sub_y)
        out_inc.append(sub_inc)
        depth_used = max(depth_used, d)
        start = b + 1
    out_y.append(ys[start + 1 :])
    out_inc.append(inc[start:])
    y = np.concatenate(out_y)
    psi = np.cumsum(np.concatenate(out_inc))
    return y, psi, depth_used


def _bisect(expr, y0, y1, h0, h1, hm, limit, speed, depth, max_depth):
    if depth > max_depth:
        raise RefinementExhausted(
            f"phase step between y={y0:.6g} and y={y1:.6g} not certified after {max_depth} bisections"
        )
    if hm == 0:
        raise NotAdmissible("characteristic function vanishes", y_loc=0.5 * (y0 + y1))
    ym = 0.5 * (y0 + y1)
    ys, incs, used = [], [], depth
    for a, b, ha, hb in ((y0, ym, h0, hm), (ym, y1, hm, h1)):
        ok, hmid = _certify(expr, np.array([a]), np.array([b]), np.array([ha]), np.array([hb]), limit, speed)
        if ok[0]:
            ys.append(np.array([b]))
            incs.append(np.array([np.log(hb / ha)]))
        else:
            sy, si, d = _bisect(expr, a, b, ha, hb, hmid[0], limit, speed, depth + 1, max_depth)
            ys.append(sy)
            incs.append(si)
            used = max(used, d)
    return np.concatenate(ys), np.concatenate(incs), used


def second_characteristic(
    expr: DistExpr,
    y_max: float,
    n_samples: int = 1024,
    phase_margin: float = PHASE_MARGIN,
    max_depth: int = MAX_REFINEMENT_DEPTH,
    zero_tol: float = ZERO_TOL,
) -> PsiTrace:
    """Continuous logarithm of the characteristic function on ``[-y_max, y_max]``.

    Both half-axes are marched independently from 0. Raises
    :class:`NotAdmissible` when a zero is detected first.
    """
    verdict = admissibility_check(expr, y_max, n_samples, zero_tol)
    if not verdict.admissible:
        raise NotAdmissible(
            f"characteristic function vanishes near y={verdict.zero_at:.10g}", y_loc=verdict.zero_at
        )
    ys = _grid(y_max, n_samples)
    pos = ys[ys >= 0]
    limit = math.pi - phase_margin
    speed = phase_speed_bound(expr)
    y_pos, psi_pos, d_pos = _march(expr, pos, limit, speed, max_depth)
    y_neg, psi_neg, d_neg = _march(expr, -pos, limit, speed, max_depth)
    y = np.concatenate([y_neg[:0:-1], y_pos])
    psi = np.concatenate([psi_neg[:0:-1], psi_pos])
    psi[y == 0] = 0.0
    return PsiTrace(float(y_max), y, psi, max(d_pos, d_neg), expr)
