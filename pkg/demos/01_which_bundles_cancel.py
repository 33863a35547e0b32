"""Which subspace bundles cancel, and what to do with a functional that does not.

A bundle assigns a subspace of C^l to every point of the unit sphere.  It is
canceling when no nonzero vector lies in every fibre.  We look at three
bundles, then take a functional on the GN bundle whose weighted sphere mean is
nonzero and build an extension whose full mean vanishes.

Run with ``python3 demos/01_which_bundles_cancel.py``.
"""

import numpy as np

from anisocancel import (
    FunctionalField,
    HomogeneityPattern,
    canceling_check,
    constant_bundle,
    extend_functional,
    gn_bundle,
    gn_pattern,
    kms_bundle,
    sphere_quadrature,
    total_cancellation_residual,
    weak_cancellation_check,
)
from anisocancel.symbols import coordinate_functional

q2, q3 = sphere_quadrature(2), sphere_quadrature(3)

# The image of (d_1 ; d_2^2 + d_3^2) moves with zeta, so nothing is common to all fibres.
gn = gn_bundle()
rep = canceling_check(gn, q3)
print(f"GN bundle: dim V = {rep.v_dim}, canceling = {rep.is_canceling}, gap = {rep.spectral_gap:.3g}")

# The KMS normal rotates through every direction of C^2 as zeta goes round the circle.
kms, kms_a = kms_bundle(1, 1, 1)
rep = canceling_check(kms, q2)
print(f"KMS(1,1,1) on pattern {kms_a.a}: dim V = {rep.v_dim}, canceling = {rep.is_canceling}")

# A constant line is its own intersection.
line = constant_bundle(np.array([[1.0], [0.0]]), 2)
rep = canceling_check(line, q2)
print(f"constant line: dim V = {rep.v_dim}, V spanned by {np.round(rep.V.frame[:, 0], 3)}")

# On the line, a functional can still be weakly canceling: only its action on V
# needs a vanishing J-weighted mean.
iso = HomogeneityPattern.isotropic(2)
first = coordinate_functional(line, 0)
odd = FunctionalField(lambda z: np.column_stack([z[:, 0], np.zeros(len(z))]), line)
for name, B in (("e_1", first), ("zeta_1 e_1", odd)):
    w = weak_cancellation_check(B, line, iso, q2)
    print(f"  functional {name:>10}: weakly canceling = {w.is_weakly_canceling}, "
          f"residual = {abs(w.residuals[0]):.3g}")

# GN is canceling, so every functional is weakly canceling, yet the raw mean of
# the second coordinate is not zero.  The extension fixes that off the bundle.
a = gn_pattern()
B = coordinate_functional(gn, 1)
print(f"\nGN, second coordinate: full mean residual {total_cancellation_residual(B, a, q3):.3g}")
ext = extend_functional(B, gn, a, q3)
fine = q3.refined()
P = gn.projectors(fine.nodes)
restr = np.abs(np.einsum("nl,nlm->nm", ext.covectors(fine.nodes), P) - B.covectors(fine.nodes)).max()
print(f"extension: residual on a 2x finer rule {total_cancellation_residual(ext, a, fine):.2e}, "
      f"still equals B on the fibres to {restr:.1e}")
