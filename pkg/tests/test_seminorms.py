import math

import numpy as np
import pytest

from dissnls.integrator import StepPlan, run
from dissnls.params import IndexSet, ModelParams, sigma_schedule
from dissnls.seminorms import (
    MAX_ORDER,
    data_bound,
    decay_bound_holds,
    monitors,
    multi_indices,
    seminorms,
)
from dissnls.spectral import Field, Grid, field_from_function

IDX = IndexSet.default(1)


def test_multi_index_counts():
    assert multi_indices(1, 4) == [(4,)]
    assert len(multi_indices(2, 3)) == 4
    assert len(multi_indices(3, 2)) == 6
    assert all(sum(b) == 5 for b in multi_indices(3, 5))


def test_zero_field():
    g = Grid(1, 10.0, 128)
    tab = seminorms(Field(g, np.zeros(128)), IDX)
    assert all(v == 0 for fam in (tab.fam1, tab.fam2, tab.fam3) for v in fam.values())
    assert tab.x_norm == 0 and tab.inf_weighted == 0
    assert data_bound(tab) == math.inf


def test_gaussian_weighted_sup():
    # node spacing 1/32 puts |x| = 1 on the grid
    g = Grid(1, 20.0, 1280)
    f = field_from_function(g, lambda x: np.exp(-x**2 / 2))
    tab = seminorms(f, IDX)
    assert tab.fam1[0] == pytest.approx(2 * math.exp(-0.5), abs=1e-12)
    dense = np.linspace(0, 5, 500001)
    assert tab.fam1[0] == pytest.approx(((1 + dense**2) * np.exp(-dense**2 / 2)).max(), abs=1e-10)


def test_families_cover_all_orders():
    g = Grid(1, 20.0, 512)
    f = field_from_function(g, lambda x: np.exp(-x**2 / 2))
    tab = seminorms(f, IDX)
    r1, r2, r3 = IDX.ranges
    assert sorted(tab.fam1) == list(r1) and sorted(tab.fam2) == list(r2) and sorted(tab.fam3) == list(r3)
    # first two families are running maxima in the order
    for fam in (tab.fam1, tab.fam2):
        vals = [fam[k] for k in sorted(fam)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_family_two_weighted_l2():
    g = Grid(1, 20.0, 1024)
    f = field_from_function(g, lambda x: np.exp(-x**2 / 2))
    tab = seminorms(f, IDX)
    # fifth derivative of exp(-x^2/2): -(x^5 - 10 x^3 + 15 x) exp(-x^2/2)
    x = np.linspace(-20, 20, 400001)
    d5 = (x**5 - 10 * x**3 + 15 * x) * np.exp(-x**2 / 2)
    ref = math.sqrt(np.trapezoid(((1 + x**2) * d5) ** 2, x))
    assert tab.fam2[5] == pytest.approx(ref, rel=1e-8)


def test_tail_warning_and_order_cap():
    g = Grid(1, 5.0, 64)
    rough = Field(g, np.sign(g.axis) + 0.5 + 0j)
    with pytest.warns(RuntimeWarning):
        seminorms(rough, IDX)
    with pytest.raises(ValueError):
        seminorms(rough, IndexSet(1, 2, 7, MAX_ORDER + 3))


def test_monitors_initial_snapshot_equal_raw_values():
    g = Grid(1, 20.0, 512)
    v0 = field_from_function(g, lambda x: (1 + x**2) ** -1.0)
    p = ModelParams()
    tr = run(v0, StepPlan(dt=1e-3, t_end=1e-3), p)
    tr.snapshots = tr.snapshots[:1]
    rep = monitors(tr, sigma_schedule(p, IDX), IDX)
    tab = seminorms(v0, IDX, warn=False)
    assert rep.Phi1 == max(tab.fam1.values())
    assert rep.Phi2 == max(tab.fam2.values())
    assert rep.Phi3 == max(tab.fam3.values())
    assert rep.Phi4 == 1 / tab.inf_weighted
    assert tab.inf_weighted == pytest.approx(1.0, abs=1e-15)


def test_data_bound_gives_4K_at_t0():
    g = Grid(1, 20.0, 512)
    v0 = field_from_function(g, lambda x: (1 + x**2) ** -1.0)
    K = data_bound(seminorms(v0, IDX, warn=False))
    p = ModelParams(K=K)
    tr = run(v0, StepPlan(dt=1e-3, t_end=1e-3), p)
    tr.snapshots = tr.snapshots[:1]
    rep = monitors(tr, sigma_schedule(p, IDX), IDX)
    assert rep.PsiT <= K
    assert rep.bound_4K_ok and rep.first_violation is None


def test_monitors_reject_vanishing_lower_bound():
    g = Grid(1, 10.0, 64)
    p = ModelParams()
    tr = run(Field(g, np.ones(64) * 0.5), StepPlan(dt=1e-3, t_end=1e-3), p)
    tr.snapshots = [Field(g, np.zeros(64))]
    with pytest.raises(ZeroDivisionError):
        monitors(tr, sigma_schedule(p, IDX), IDX)


def test_decay_bound():
    p = ModelParams()
    assert decay_bound_holds(10.0, 1.0, p)
    c = p.limit_constant()
    r = 1e-2
    bound = (c * r**p.gap / (1 - r**p.gap)) ** (1 / p.alpha)
    assert decay_bound_holds(0.99 * bound, r, p)
    assert not decay_bound_holds(1.01 * bound, r, p)


def test_monitors_on_nonautonomous_run(desk_traj):
    sub = type(desk_traj)(params=desk_traj.params, plan=desk_traj.plan, snapshots=desk_traj.snapshots[:41])
    rep = monitors(sub, sigma_schedule(desk_traj.params, IDX), IDX)
    assert len(rep.running_Psi) == 41
    assert np.all(np.diff(rep.running_Psi) >= 0)
    assert rep.decay_bound_ok.all()
