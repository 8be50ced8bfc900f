"""Desk run: integrate v up to 1 - b t = 1e-3, build the asymptotic profiles and
print how the solution approaches them.

    python3 demos/desk_walkthrough.py
"""

import numpy as np

from dissnls import IndexSet, ModelParams, StepPlan, build_profiles, run
from dissnls.profile import magnitude_identity_residual, profile_error, sup_limit_check
from dissnls.spectral import Grid, field_from_function

p = ModelParams(lambda_re=-1.0, alpha=1.8, dim=1, b=4.0)
idx = IndexSet.default(1)
grid = Grid(1, 20.0, 2048)
v0 = field_from_function(grid, lambda x: (1 + x**2) ** -1.0)

# geometric snapshot ladder: 40 per decade of 1 - b t
r = 10.0 ** (-np.arange(1, 121) / 40)
marks = tuple((1 - r[r > 1e-3 * (1 + 1e-12)]) / p.b)
plan = StepPlan(dt=5e-5, t_end=(1 - 1e-3) / p.b, adapt_c=0.0025, snapshot_stride=10**9, snapshot_times=marks)
traj = run(v0, plan, p)
print(f"{len(traj.steps)} steps, {len(traj.snapshots)} snapshots, mass ledger {traj.mass_ledger().max():.2e}")

prof = build_profiles(traj, n=idx.n)
ident = magnitude_identity_residual(traj)
err = profile_error(traj, prof, idx)
lim = sup_limit_check(traj)

print(f"{'1-bt':>10} {'sup|v|':>10} {'identity':>10} {'profile err':>12} {'limit ratio':>12}")
for k in range(0, len(traj.snapshots), 20):
    s = traj.snapshots[k]
    rem = 1 - p.b * s.time
    ratio = rem ** (-p.gap) * s.abs.max() ** p.alpha / p.limit_constant()
    print(f"{rem:10.3e} {s.abs.max():10.4f} {ident[k]:10.2e} {err[k]:12.3e} {ratio:12.4f}")
print(f"sup-limit deviation at the end: {lim.deviation:.3f} (decreasing: {lim.decreasing})")
