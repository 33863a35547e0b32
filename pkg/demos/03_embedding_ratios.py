"""L1 -> L_inf and L1 -> L2 ratios on a non-canceling constant line.

The constant line ``span{e_1}`` in C^2 fails cancellation.  A near-delta along
``e_1`` is (almost) in ``L1``, but the truncated multiplier of the first
coordinate produces an output at the origin that grows like ``log(R/eps)``,
and the windowed Riesz potential grows like ``sqrt(log(R/eps))``.  Both are
measured on a 512^2 lattice against their closed forms.

Run with ``python3 demos/03_embedding_ratios.py``.
"""

import numpy as np

from anisocancel import HomogeneityPattern, constant_bundle, l2_embedding_experiment
from anisocancel.multipliers import (
    TruncationWindow,
    delta_response_experiment,
    matched_box,
    near_delta,
    resolved_eta_range,
)
from anisocancel.symbols import coordinate_functional

a = HomogeneityPattern.isotropic(2)
shape = (512, 512)
box = matched_box(a)
lo, _ = resolved_eta_range(shape, box, a)
ratios = [3, 10, 30, 60]  # 4 lo * 60 stays below the highest resolved eta
windows = [TruncationWindow(4 * lo, 4 * lo * r) for r in ratios]

line = constant_bundle(np.array([[1.0], [0.0]]), 2)
B = coordinate_functional(line, 0)
resp = delta_response_experiment(B, a, [1.0, 0.0], windows, shape, box)
print("output at the origin for a near-delta along e_1")
assert not any(resp.flagged), "a window left the resolved eta range"
for r, m, o, e in zip(ratios, resp.measured, resp.oracle, resp.relative_errors):
    print(f"   R/eps = {r:>4}: measured {m.real:8.4f}   log(R/eps) * int J = {o.real:8.4f}   ({e:.1%})")

f = near_delta(shape, box, [1.0, 0.0])
res = l2_embedding_experiment(line, a, [("near-delta", f)], windows)
fit = res.fit(np.sqrt)
print("\nwindowed Plancherel ratio ||chi I_{d/2} f||_2 / ||f||_1")
for r, m in zip(ratios, res.max_ratios):
    print(f"   R/eps = {r:>4}: {m:.4f}   sqrt(2 pi log(R/eps)) = {np.sqrt(2 * np.pi * np.log(r)):.4f}")
print(f"   line in sqrt(log(R/eps)): slope {fit.slope:.4f}, R^2 = {fit.r2:.6f}")
