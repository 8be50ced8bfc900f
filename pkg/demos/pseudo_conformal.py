"""Compare v (nonautonomous, shrinking time) with u (autonomous, all t >= 0)
through the pseudo-conformal change of variables.

    python3 demos/pseudo_conformal.py
"""

import numpy as np

from dissnls import ModelParams
from dissnls.spectral import Grid
from dissnls.transform import TransformPair, equivalence_test

p = ModelParams(lambda_re=-1.0, alpha=1.8, dim=1, b=4.0)
times = [0.25, 1.0, 4.0]
res = equivalence_test(
    lambda x: (1 + x**2) ** -1.0, p, times,
    Grid(1, 20.0, 2048), Grid(1, 60.0, 32768), sponge_start=40.0, radius=30.0,
)
for t, d, R in zip(res.times, res.discrepancy, res.radius):
    tp = TransformPair.from_u(t, p.b)
    print(f"t = {t:5.2f}  s = {tp.v_time:.4f}  1+bt = {tp.stretch:5.1f}  max|u - T v| on |x|<={R:.1f}: {d:.2e}")
print("largest discrepancy", np.max(res.discrepancy))
