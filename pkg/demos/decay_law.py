"""Decay of the L2 norm and the sup norm as 1 - b t -> 0, fitted on the last
decade of the run and compared with the predicted exponents.

    python3 demos/decay_law.py
"""

import numpy as np

from dissnls import IndexSet, ModelParams, StepPlan, build_profiles, run
from dissnls.profile import fit_power_law, l2_rate_check, l2_target_exponent
from dissnls.spectral import Grid, field_from_function, l2_norm

p = ModelParams(lambda_re=-1.0, alpha=1.8, dim=1, b=4.0)
idx = IndexSet.default(1)
v0 = field_from_function(Grid(1, 20.0, 2048), lambda x: (1 + x**2) ** -1.0)
r = 10.0 ** (-np.arange(1, 121) / 40)
marks = tuple((1 - r[r > 1e-3 * (1 + 1e-12)]) / p.b)
traj = run(v0, StepPlan(dt=5e-5, t_end=(1 - 1e-3) / p.b, adapt_c=0.0025, snapshot_stride=10**9, snapshot_times=marks), p)

rem = traj.remaining
sup = np.array([s.abs.max() for s in traj.snapshots])
l2 = np.array([l2_norm(s) for s in traj.snapshots])
window = (1e-3, 1e-2)
fs = fit_power_law(rem, sup, window)
print(f"sup norm:  exponent {fs.exponent:.4f}  predicted {p.gap / p.alpha:.4f}")
fl = fit_power_law(rem, l2, window)
chk = l2_rate_check(traj, idx=idx, prof=build_profiles(traj, n=idx.n))
print(f"L2 norm:   exponent {fl.exponent:.4f}  predicted {l2_target_exponent(p, idx.n):.4f}  (profile route {chk.profile_fit.exponent:.4f})")
