"""Truncated degree -d kernels: logarithmic growth versus a plateau.

``K(zeta) eta^{-d}`` cut to ``eps <= eta <= R`` has a bounded Fourier transform,
uniformly in the window, exactly when the J-weighted sphere mean of ``K``
vanishes.  We sample both kernels on a 512^2 lattice, widen the window, and
watch the sup of the transform.

Run with ``python3 demos/02_truncated_kernels.py``.
"""

import numpy as np

from anisocancel import HomogeneityPattern, dini_modulus, kernel_ft_sup_experiment, mikhlin_cancellation_check
from anisocancel.geometry import sphere_quadrature
from anisocancel.multipliers import TruncationWindow, matched_box, resolved_eta_range

a = HomogeneityPattern.isotropic(2)
shape = (512, 512)
box = matched_box(a)
lo, hi = resolved_eta_range(shape, box, a)
eps = 4 * lo
ratios = [3, 10, 30, 60]  # 4 lo * 60 stays below the highest resolved eta
windows = [TruncationWindow(eps, eps * r) for r in ratios]
print(f"lattice {shape}, resolved eta in [{lo:.3g}, {hi:.3g}], eps = {eps:.3g}\n")

quad = sphere_quadrature(2)
for name, K in (("1", lambda z: np.ones(len(z))), ("zeta_1", lambda z: z[:, 0])):
    residual, passes = mikhlin_cancellation_check(K, a, quad)
    res = kernel_ft_sup_experiment(K, a, windows, shape, box, quad)
    print(f"K = {name}: weighted mean {abs(residual):.3g}, cancels = {passes}")
    for r, s, z in zip(ratios, res.sups, res.at_zero):
        print(f"   R/eps = {r:>4}: sup |F K| = {s:8.4f}   value at 0 = {z.real:8.4f}"
              f"   2 pi log(R/eps) = {2 * np.pi * np.log(r):8.4f}")
    print(f"   slope against log(R/eps): {res.fit.slope:.3f}\n")

# The kernel smoothness hypothesis is a Dini condition on the modulus of continuity.
for name, K in (("zeta_1", lambda z: z[:, 0]), ("sign(zeta_1)", lambda z: np.sign(z[:, 0]))):
    dm = dini_modulus(K, np.geomspace(1.0, 1e-3, 16), d=2)
    print(f"Dini sum for {name:>12}: {dm.dini_sum:.3g}")
