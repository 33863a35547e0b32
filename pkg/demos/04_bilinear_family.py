"""When does the two-variable bilinear integral vanish?

For ``P1 = xi_1^kappa - tau1 xi_2^lambda`` and a partner ``P2`` built from
``sigma1``, the J-weighted sphere integral of ``Q / (P1 conj P2)`` reduces to
a one-dimensional integral along a line.  With ``beta`` tied to ``alpha`` by
the line condition, the integral vanishes exactly when ``kappa`` or ``lambda``
is odd, ``alpha`` and ``beta`` take their half-integer values, and ``tau1``,
``sigma1`` lie in the same half plane.  The table compares the sphere rule,
the reduced integral and that prediction.

Run with ``python3 demos/04_bilinear_family.py``.
"""

import itertools

from anisocancel import graded_circle_quadrature
from anisocancel.cancellation import (
    bilinear_family_reduced,
    bilinear_family_sphere,
    line_condition_beta,
    predicted_vanishing,
)

quad = graded_circle_quadrature(256)
print(f"{'k':>2} {'l':>2} {'alpha':>5} {'beta':>6} {'tau1':>8} {'sigma1':>8} {'|sphere|':>10} "
      f"{'|reduced|':>10} vanishes predicted")
for k, lam in itertools.product((1, 2, 3), repeat=2):
    alpha = (k - 1) / 2
    beta = line_condition_beta(k, lam, alpha)
    for tau, sigma in ((1j, 2j), (1j, -2j)):
        s, scale = bilinear_family_sphere(k, lam, alpha, beta, tau, sigma, quad)
        r = bilinear_family_reduced(k, lam, alpha, beta, tau, sigma)
        vanishes = abs(s) < 1e-9 * scale
        pred = predicted_vanishing(k, lam, alpha, beta, tau, sigma)
        t_txt, s_txt = f"{tau.imag:g}i", f"{sigma.imag:g}i"
        print(f"{k:>2} {lam:>2} {alpha:5.2f} {beta:6.3f} {t_txt:>8} {s_txt:>8} {abs(s):10.3e} "
              f"{abs(r):10.3e} {str(vanishes):>8} {str(pred):>9}")
