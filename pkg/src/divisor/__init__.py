"""Fractional convolution powers and divisibility sets of probability distributions."""

from .charfn import (
    PsiTrace,
    admissibility_check,
    cf_eval,
    psi_closed_form,
    second_characteristic,
)
from .divisibility import (
    LambdaReport,
    MembershipVerdict,
    gram_psd_min_eig,
    interval_closure,
    is_member,
    lambda_scan,
    scaling_check,
    semigroup_spot_check,
)
from .errors import (
    AliasingSuspected,
    DivisorError,
    NotAdmissible,
    ParseError,
    PointsOutOfRange,
    PsiUnavailable,
    RefinementExhausted,
    RouteUnavailable,
    SpotCheckFailed,
    TailNotConverged,
    ValidationError,
)
from .fracpower import (
    BinomialSeriesParams,
    cauchy_compound_density,
    compound_power_atoms,
    frac_power_grid,
    frac_power_lattice,
    frac_power_series,
    fractional_power,
    gen_binomial,
    real_root,
)
from .measures import (
    AtomicLeaf,
    CauchyLeaf,
    Convolve,
    DistExpr,
    GaussianLeaf,
    GridSignedDensity,
    Mixture,
    Power,
    SignedAtomicMeasure,
    canonicalize,
    convolve_atomic,
    n_fold_power,
)
from .specfile import parse_spec, serialize_spec

__version__ = "0.1.0"
