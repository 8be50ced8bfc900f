import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissnls.params import ModelParams
from dissnls.spectral import Grid, field_from_function, free_propagate, l2_norm, resample
from dissnls.transform import (
    TransformPair,
    equivalence_test,
    sponge,
    subgrid,
    u_to_v,
    v_to_u,
)

P = ModelParams(b=1.0)


def gaussian_free(a, t, x):
    """exp(-a x^2) evolved by i u_t + u_xx = 0 for time t."""
    d = 1 + 4j * a * t
    return d**-0.5 * np.exp(-a * x**2 / d)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0.0, 1e3), b=st.floats(0.0, 10.0))
def test_pair_round_trip(t, b):
    tp = TransformPair.from_u(t, b)
    back = TransformPair.from_v(tp.v_time, b)
    assert back.u_time == pytest.approx(t, rel=1e-9, abs=1e-12)
    assert tp.scale * tp.stretch == pytest.approx(1.0, rel=1e-15)
    assert tp.scale == pytest.approx(1 - b * tp.v_time, rel=1e-9, abs=1e-12)
    if b > 0:
        assert tp.v_time < 1 / b


def test_pair_rejects_end_of_interval():
    with pytest.raises(ValueError):
        TransformPair.from_v(0.25, 4.0)
    with pytest.raises(ValueError):
        TransformPair.from_u(-1.0, 4.0)
    with pytest.raises(ValueError):
        TransformPair.from_u(1.0, -1.0)


def test_initial_time_is_a_pure_chirp():
    g = Grid(1, 20.0, 1024)
    v0 = field_from_function(g, lambda x: (1 + x**2) ** -1.0)
    u0 = v_to_u(v0, P, g)
    assert np.abs(u0.values - np.exp(1j * g.axis**2 / 4) * v0.values).max() < 1e-14
    assert u0.time == 0.0


def test_b_zero_is_identity():
    g = Grid(1, 20.0, 256)
    v = field_from_function(g, lambda x: np.exp(-x**2), time=0.3)
    p = ModelParams(b=0.0)
    assert np.array_equal(v_to_u(v, p, g).values, v.values)
    assert np.array_equal(u_to_v(v, p, g).values, v.values)


def test_l2_isometry_and_modulus():
    src = Grid(1, 20.0, 2048)
    tgt = Grid(1, 16.0, 2048)
    s = 0.2
    v = field_from_function(src, lambda x: np.exp(-x**2 / 2) * (1 + 0.3j * x), time=s)
    u = v_to_u(v, P, tgt)
    assert l2_norm(u) == pytest.approx(l2_norm(v), rel=1e-8)
    r = 1 - P.b * s
    assert u.time == pytest.approx(s / r, rel=1e-15)
    ref = r**0.5 * np.abs(resample(v, r, tgt).values)
    assert np.abs(u.abs - ref).max() < 1e-10


def test_gaussian_round_trip():
    src = Grid(1, 20.0, 2048)
    v = field_from_function(src, lambda x: np.exp(-x**2 / 2), time=0.2)
    mid = Grid(1, 20.0, 4096)
    back = u_to_v(v_to_u(v, P, mid), P, Grid(1, 10.0, 1024))
    exact = np.exp(-back.grid.axis**2 / 2)
    assert np.abs(back.values - exact).max() < 1e-9
    assert back.time == pytest.approx(0.2, rel=1e-14)


def test_chirp_guard_rejects_coarse_target():
    v = field_from_function(Grid(1, 20.0, 256), lambda x: np.exp(-x**2 / 2), time=0.1)
    with pytest.raises(ValueError):
        v_to_u(v, ModelParams(b=4.0), Grid(1, 20.0, 64))


def test_linear_transform_against_closed_form():
    # lambda = 0: v evolves freely, and so does u = e^{ib|x|^2/4} v0
    b, s = 1.0, 0.5
    p = ModelParams(lambda_re=0.0, b=b)
    vg = Grid(1, 20.0, 1024)
    v = free_propagate(field_from_function(vg, lambda x: np.exp(-x**2 / 2)), s)
    t = TransformPair.from_v(s, b).u_time
    assert t == pytest.approx(1.0)
    ug = Grid(1, 20.0, 2048)
    u = v_to_u(v, p, ug)
    exact = gaussian_free(0.5 - 0.25j * b, t, ug.axis)
    assert np.abs(u.values - exact).max() < 1e-7


def test_subgrid_alignment():
    g = Grid(1, 60.0, 4096)
    sub, (sl,) = subgrid(g, 30.0)
    assert np.array_equal(sub.axis, g.axis[sl])
    assert sub.half_width <= 30.0
    with pytest.raises(ValueError):
        subgrid(g, 0.1)


def test_sponge_profile():
    g = Grid(1, 60.0, 1024)
    rate = sponge(g, 40.0, 500.0)
    assert np.all(rate[np.abs(g.axis) <= 40.0] == 0)
    assert rate.max() <= 500.0 and rate.max() > 400.0
    assert np.all(rate >= 0)


def test_equivalence_initial_time_exact():
    g = Grid(1, 20.0, 4096)
    res = equivalence_test(lambda x: (1 + x**2) ** -1.0, ModelParams(), [0.0], g, g)
    assert res.discrepancy[0] == 0.0


def test_equivalence_rejects_inner_sponge():
    g = Grid(1, 20.0, 512)
    with pytest.raises(ValueError):
        equivalence_test(lambda x: (1 + x**2) ** -1.0, ModelParams(), [0.1], g, g, sponge_start=5.0, radius=10.0)


def test_equivalence_free_gaussian_small():
    p = ModelParams(lambda_re=0.0, b=1.0)
    res = equivalence_test(
        lambda x: np.exp(-x**2 / 2), p, [0.0, 0.5], Grid(1, 20.0, 512), Grid(1, 40.0, 4096),
        v_dt=0.05, v_adapt_c=0.1, u_dt=0.5,
    )
    assert res.discrepancy.max() < 1e-7
    assert res.radius[1] <= 20.0
