import numpy as np
import pytest

from dissnls.integrator import StepPlan, run
from dissnls.params import IndexSet, ModelParams
from dissnls.profile import build_profiles
from dissnls.spectral import Grid, field_from_function

DESK = ModelParams(lambda_re=-1.0, lambda_im=0.0, alpha=1.8, dim=1, b=4.0)


def desk_plan(stop=1e-3, per_decade=40):
    r = 10.0 ** (-np.arange(1, int(round(-np.log10(stop) * per_decade)) + 1) / per_decade)
    marks = tuple((1 - r[r > stop * (1 + 1e-12)]) / DESK.b)
    return StepPlan(dt=5e-5, t_end=(1 - stop) / DESK.b, adapt_c=0.0025, snapshot_stride=10**9, snapshot_times=marks)


@pytest.fixture(scope="session")
def desk_grid():
    return Grid(1, 20.0, 2048)


@pytest.fixture(scope="session")
def desk_traj(desk_grid):
    v0 = field_from_function(desk_grid, lambda x: (1 + x**2) ** -1.0)
    return run(v0, desk_plan(), DESK)


@pytest.fixture(scope="session")
def desk_prof(desk_traj):
    return build_profiles(desk_traj, n=IndexSet.default(1).n)
