"""Built-in example distributions.

``nu(alpha)`` puts mass ``1/(1+alpha)`` at 0 and ``alpha/(1+alpha)`` on
``theta`` (default: a point mass at 1); its divisibility set is exactly the
positive integers. ``mu(alpha)`` smears ``nu`` with a standard Cauchy
distribution, which makes every large enough t a member.
"""

from __future__ import annotations

import math

from .errors import ValidationError
from .fracpower import cauchy_compound_threshold, small_t_limit  # noqa: F401  (re-export)
from .measures import AtomicLeaf, CauchyLeaf, Convolve, GaussianLeaf, SignedAtomicMeasure, canonicalize


def nu(alpha: float = 0.5, theta: SignedAtomicMeasure | None = None) -> AtomicLeaf:
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha!r}")
    theta = SignedAtomicMeasure.point(1.0) if theta is None else theta
    pairs = [(0.0, 1.0 / (1 + alpha))]
    pairs += [(x, alpha * w / (1 + alpha)) for x, w in theta.atoms]
    m = canonicalize(pairs)
    # renormalise away rounding so the leaf passes its mass check
    return AtomicLeaf(SignedAtomicMeasure(m.locations, m.weights / math.fsum(m.weights.tolist())))


def mu(alpha: float = 0.5, scale: float = 1.0) -> Convolve:
    return Convolve((CauchyLeaf(scale), nu(alpha)))


def cauchy(scale: float = 1.0) -> CauchyLeaf:
    return CauchyLeaf(scale)


def gaussian(mean: float = 0.0, variance: float = 1.0) -> GaussianLeaf:
    return GaussianLeaf(mean, variance)


EXAMPLES = {"nu": nu, "mu": mu}
