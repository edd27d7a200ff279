"""Exact and sampled signed measures, and the symbolic distribution tree."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ValidationError

ZERO_WEIGHT = 1e-15
MASS_TOL = 1e-12
MAX_DEPTH = 64
MAX_NODES = 10_000


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def default_merge_tol(locations) -> float:
    locations = np.asarray(locations, dtype=float)
    if locations.size == 0:
        return 1e-12
    span = float(locations.max() - locations.min())
    return 1e-12 * max(1.0, span)


@dataclass(frozen=True, eq=False)
class SignedAtomicMeasure:
    """Finite sum of weighted point masses; weights may be negative.

    Instances are always canonical: locations strictly increasing, all
    weights finite and non-negligible. Build one from loose pairs with
    :func:`canonicalize` or :meth:`from_atoms`.
    """

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = _frozen(self.locations).reshape(-1)
        w = _frozen(self.weights).reshape(-1)
        if loc.shape != w.shape:
            raise ValidationError("locations and weights differ in length")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(w))):
            raise ValidationError("atoms must be finite")
        if loc.size > 1 and np.any(np.diff(loc) <= 0):
            raise ValidationError("locations must be strictly increasing")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence[float]], merge_tol=None) -> "SignedAtomicMeasure":
        return canonicalize(atoms, merge_tol)

    @classmethod
    def point(cls, x: float = 0.0, weight: float = 1.0) -> "SignedAtomicMeasure":
        return cls(np.array([x]), np.array([weight]))

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.weights.tolist()))

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights.tolist())

    @property
    def negative_mass(self) -> float:
        return -math.fsum(self.weights[self.weights < 0].tolist())

    def __len__(self):
        return self.locations.size

    def __iter__(self):
        return iter(self.atoms)

    def __repr__(self):
        inner = ", ".join(f"{x:g}: {w:.6g}" for x, w in self.atoms[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"SignedAtomicMeasure({{{inner}{more}}})"

    def is_nonnegative(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.weights >= -tol))

    def min_atom(self) -> tuple[float, float]:
        """(weight, location) of the smallest weight."""
        k = int(np.argmin(self.weights))
        return float(self.weights[k]), float(self.locations[k])

    def shift(self, dx: float) -> "SignedAtomicMeasure":
        return SignedAtomicMeasure(self.locations + dx, self.weights)

    def scale(self, c: float) -> "SignedAtomicMeasure":
        return canonicalize(zip(self.locations, c * self.weights))

    def __sub__(self, other: "SignedAtomicMeasure") -> "SignedAtomicMeasure":
        loc = np.concatenate([self.locations, other.locations])
        w = np.concatenate([self.weights, -other.weights])
        return canonicalize(zip(loc, w), zero_weight=0.0)

    def max_abs_difference(self, other: "SignedAtomicMeasure") -> float:
        diff = self - other
        return float(np.max(np.abs(diff.weights))) if len(diff) else 0.0

    def weight_at(self, x: float, tol: float = 1e-9) -> float:
        k = np.flatnonzero(np.abs(self.locations - x) <= tol)
        return float(self.weights[k].sum()) if k.size else 0.0


def canonicalize(atoms, merge_tol=None, zero_weight: float = ZERO_WEIGHT) -> SignedAtomicMeasure:
    """Sort atoms, merge locations closer than ``merge_tol``, drop zero weights.

    ``atoms`` may be a :class:`SignedAtomicMeasure` or any iterable of
    ``(location, weight)`` pairs.
    """
    if isinstance(atoms, SignedAtomicMeasure):
        loc, w = np.array(atoms.locations), np.array(atoms.weights)
    else:
        pairs = np.array(list(atoms), dtype=float).reshape(-1, 2)
        loc, w = pairs[:, 0], pairs[:, 1]
    if merge_tol is None:
        merge_tol = default_merge_tol(loc)
    if merge_tol < 0:
        raise ValidationError("merge_tol must be >= 0")
    if loc.size == 0:
        return SignedAtomicMeasure(loc, w)
    order = np.argsort(loc, kind="stable")
    loc, w = loc[order], w[order]
    # a new cluster starts wherever the gap to the cluster head exceeds merge_tol
    heads = [0]
    for k in range(1, loc.size):
        if loc[k] - loc[heads[-1]] > merge_tol:
            heads.append(k)
    heads = np.array(heads)
    merged_w = np.add.reduceat(w, heads)
    merged_loc = loc[heads]
    keep = np.abs(merged_w) >= zero_weight
    return SignedAtomicMeasure(merged_loc[keep], merged_w[keep])


def convolve_atomic(a: SignedAtomicMeasure, b: SignedAtomicMeasure, merge_tol=None) -> SignedAtomicMeasure:
    loc = np.add.outer(a.locations, b.locations).ravel()
    w = np.multiply.outer(a.weights, b.weights).ravel()
    return canonicalize(zip(loc, w), merge_tol)


def n_fold_power(a: SignedAtomicMeasure, n: int) -> SignedAtomicMeasure:
    """``a`` convolved with itself ``n`` times (binary exponentiation)."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    result = None
    base = a
    while n:
        if n & 1:
            result = base if result is None else convolve_atomic(result, base)
        n >>= 1
        if n:
            base = convolve_atomic(base, base)
    return result


DELTA0 = SignedAtomicMeasure.point(0.0)


@dataclass(frozen=True, eq=False)
class GridSignedDensity:
    """Signed density sampled at ``x_origin + k * dx``."""

    x_origin: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values).reshape(-1)
        if not self.dx > 0:
            raise ValidationError("dx must be positive")
        if v.size == 0:
            raise ValidationError("values must be non-empty")
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.x_origin + self.dx * np.arange(self.values.size)

    @property
    def total_mass(self) -> float:
        return float(self.dx * math.fsum(self.values.tolist()))

    def min_value(self) -> tuple[float, float]:
        """(value, x) at the smallest sample."""
        k = int(np.argmin(self.values))
        return float(self.values[k]), float(self.x_origin + k * self.dx)

    def scale(self) -> float:
        return float(np.max(np.abs(self.values)))

    def restrict(self, lo: float, hi: float) -> "GridSignedDensity":
        x = self.x
        idx = np.flatnonzero((x >= lo) & (x <= hi))
        if idx.size == 0:
            raise ValidationError(f"no grid points in [{lo}, {hi}]")
        return GridSignedDensity(float(x[idx[0]]), self.dx, self.values[idx])

    def __call__(self, x):
        return np.interp(x, self.x, self.values)


# ---------------------------------------------------------------- DistExpr


class DistExpr:
    """Node of a symbolic distribution tree. Subclasses are frozen dataclasses."""

    def children(self) -> tuple["DistExpr", ...]:
        return ()

    def walk(self):
        yield self
        for c in self.children():
            yield from c.walk()

    def depth(self) -> int:
        kids = self.children()
        return 1 + (max(c.depth() for c in kids) if kids else 0)

    def node_count(self) -> int:
        return sum(1 for _ in self.walk())


@dataclass(frozen=True, eq=False)
class AtomicLeaf(DistExpr):
    measure: SignedAtomicMeasure

    def __post_init__(self):
        m = self.measure
        if not isinstance(m, SignedAtomicMeasure):
            m = canonicalize(m)
            object.__setattr__(self, "measure", m)
        if len(m) == 0:
            raise ValidationError("atomic leaf has no atoms")
        if np.any(m.weights <= 0):
            raise ValidationError("atomic leaf weights must be positive")
        if abs(m.total_mass - 1.0) > MASS_TOL:
            raise ValidationError(f"atomic leaf mass is {m.total_mass!r}, expected 1")

    def __eq__(self, other):
        return (
            isinstance(other, AtomicLeaf)
            and np.array_equal(self.measure.locations, other.measure.locations)
            and np.array_equal(self.measure.weights, other.measure.weights)
        )

    __hash__ = None


@dataclass(frozen=True)
class CauchyLeaf(DistExpr):
    scale: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValidationError(f"Cauchy scale must be > 0, got {self.scale!r}")


@dataclass(frozen=True)
class GaussianLeaf(DistExpr):
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValidationError("Gaussian mean must be finite")
        if not (math.isfinite(self.variance) and self.variance >= 0):
            raise ValidationError(f"Gaussian variance must be >= 0, got {self.variance!r}")


@dataclass(frozen=True)
class Convolve(DistExpr):
    parts: tuple[DistExpr, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValidationError("convolve needs at least one child")
        for p in parts:
            if not isinstance(p, DistExpr):
                raise ValidationError(f"not a distribution: {p!r}")
        object.__setattr__(self, "parts", parts)
        _check_size(self)

    def children(self):
        return self.parts


@dataclass(frozen=True)
class Mixture(DistExpr):
    components: tuple[tuple[float, DistExpr], ...]

    def __post_init__(self):
        comps = tuple((float(w), d) for w, d in self.components)
        if not comps:
            raise ValidationError("mixture needs at least one component")
        for w, d in comps:
            if not (math.isfinite(w) and w > 0):
                raise ValidationError(f"mixture weight must be > 0, got {w!r}")
            if not isinstance(d, DistExpr):
                raise ValidationError(f"not a distribution: {d!r}")
        total = math.fsum(w for w, _ in comps)
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(f"mixture weights sum to {total!r}, expected 1")
        object.__setattr__(self, "components", comps)
        _check_size(self)

    def children(self):
        return tuple(d for _, d in self.components)


@dataclass(frozen=True)
class Power(DistExpr):
    """Fractional convolution power ``base^{*t}``, defined through ``t * psi``.

    Not part of the spec-file format; used to re-wrap a certified power as
    a new base distribution.
    """

    base: DistExpr
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t > 0):
            raise ValidationError(f"power must be > 0, got {self.t!r}")
        _check_size(self)

    def children(self):
        return (self.base,)


def _check_size(expr: DistExpr):
    if expr.depth() > MAX_DEPTH:
        raise ValidationError(f"expression deeper than {MAX_DEPTH}")
    if expr.node_count() > MAX_NODES:
        raise ValidationError(f"expression has more than {MAX_NODES} nodes")


Leaf = Union[AtomicLeaf, CauchyLeaf, GaussianLeaf]


def atoms(pairs) -> AtomicLeaf:
    return AtomicLeaf(canonicalize(pairs))


def as_atomic(expr: DistExpr) -> SignedAtomicMeasure | None:
    """The exact atomic measure of ``expr`` if it is purely atomic, else None."""
    if isinstance(expr, AtomicLeaf):
        return expr.measure
    if isinstance(expr, GaussianLeaf) and expr.variance == 0:
        return SignedAtomicMeasure.point(expr.mean)
    if isinstance(expr, Mixture):
        parts = []
        for w, d in expr.components:
            m = as_atomic(d)
            if m is None:
                return None
            parts.append((w, m))
        loc = np.concatenate([m.locations for _, m in parts])
        wts = np.concatenate([w * m.weights for w, m in parts])
        return canonicalize(zip(loc, wts))
    if isinstance(expr, Convolve):
        result = DELTA0
        for p in expr.parts:
            m = as_atomic(p)
            if m is None:
                return None
            result = convolve_atomic(result, m)
        return result
    if isinstance(expr, Power) and float(expr.t).is_integer():
        m = as_atomic(expr.base)
        return None if m is None else n_fold_power(m, int(expr.t))
    return None
