"""Cancellation conditions for anisotropic Fourier multipliers.

Decide whether a subspace bundle on the sphere is canceling, whether a
functional is weakly canceling, build canceling extensions, and run grid
experiments on truncated multipliers and anisotropic Riesz potentials.
"""

from .bundles import constant_bundle, gn_bundle, gn_pattern, kms_bundle, kms_pattern, sampled_bundle, vector_bundle
from .cancellation import (
    CancellationReport,
    ExtensionError,
    bilinear_condition,
    bilinear_reduced_integral,
    canceling_check,
    dini_modulus,
    extend_functional,
    mikhlin_cancellation_check,
    total_cancellation_residual,
    weak_cancellation_check,
)
from .geometry import (
    HomogeneityPattern,
    PolarPoint,
    SphereQuadrature,
    dilate,
    eta,
    eta_equivalence_constants,
    graded_circle_quadrature,
    jacobian,
    polar_decompose,
    polar_integrate,
    radial_grid,
    sphere_quadrature,
)
from .multipliers import (
    GridFunction,
    TruncationWindow,
    apply_truncated_multiplier,
    kernel_ft_sup_experiment,
    l2_embedding_experiment,
    linfty_embedding_experiment,
    norms,
    riesz_apply,
    spectral_project_to_bundle,
)
from .specfile import OperatorSpec, SpecError, load_spec, parse_spec, serialize_spec
from .subspace import BundleMap, Subspace, distance, holder_estimate, intersect, intersect_family, projection
from .symbols import (
    FunctionalField,
    MatrixPolynomial,
    NonEllipticError,
    ellipticity_check,
    evaluate,
    functional_from_operator,
    image_bundle,
)

__version__ = "0.1.0"
