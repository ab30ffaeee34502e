import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from colavoid.orbital import (
    EARTH,
    MU_EARTH,
    EciState,
    OrbitalElements,
    along_track_unit,
    eci_to_elements,
    elements_to_eci,
    orbital_period,
    propagate,
    solve_kepler,
)
from oracles import integrate_two_body

R_E = EARTH.r_earth


def energy(x: EciState) -> float:
    return 0.5 * x.velocity @ x.velocity - MU_EARTH / np.linalg.norm(x.position)


def angle_diff(a, b):
    return abs((a - b + 180.0) % 360.0 - 180.0)


box_elements = st.builds(
    OrbitalElements,
    a=st.floats(R_E + 400, R_E + 600),
    e=st.floats(0.01, 0.11),
    i=st.floats(75, 90),
    raan=st.floats(45, 90),
    argp=st.floats(30, 60),
    mean_anomaly=st.floats(0, 359.999),
)


def test_circular_equatorial_at_node():
    x = elements_to_eci(OrbitalElements(7000.0, 0.0, 0.0, 0.0, 0.0, 0.0))
    np.testing.assert_allclose(x.position, [7000.0, 0.0, 0.0], atol=1e-9)
    assert np.linalg.norm(x.velocity) == pytest.approx(math.sqrt(MU_EARTH / 7000.0), rel=1e-12)


def test_elements_round_trip_example():
    el = OrbitalElements(6778.137, 0.01, 80.0, 60.0, 45.0, 120.0)
    x = elements_to_eci(el)
    back = eci_to_elements(x)
    assert back.a == pytest.approx(el.a, rel=1e-12)
    assert back.e == pytest.approx(el.e, abs=1e-12)
    for name in ("i", "raan", "argp", "mean_anomaly"):
        assert angle_diff(getattr(back, name), getattr(el, name)) < 1e-8
    assert energy(x) == pytest.approx(-MU_EARTH / (2 * el.a), rel=1e-9)


def test_hyperbolic_elements_rejected():
    with pytest.raises(ValueError):
        elements_to_eci(OrbitalElements(7000.0, 1.2, 10.0, 0.0, 0.0, 0.0))


def test_circular_state_to_elements():
    x = EciState([7000.0, 0.0, 0.0], [0.0, math.sqrt(MU_EARTH / 7000.0), 0.0])
    el = eci_to_elements(x)
    assert el.a == pytest.approx(7000.0, rel=1e-9)
    assert el.e == pytest.approx(0.0, abs=1e-9)


def test_rectilinear_state_rejected():
    x = EciState([7000.0, 0.0, 0.0], [3.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        eci_to_elements(x)
    with pytest.raises(ValueError):
        propagate(x, 60.0)


@given(box_elements)
def test_elements_round_trip_property(el):
    x = elements_to_eci(el)
    back = eci_to_elements(x)
    assert back.a == pytest.approx(el.a, rel=1e-10)
    assert back.e == pytest.approx(el.e, abs=1e-10)
    for name in ("i", "raan", "argp", "mean_anomaly"):
        assert angle_diff(getattr(back, name), getattr(el, name)) < 1e-8
    again = elements_to_eci(back)
    np.testing.assert_allclose(again.position, x.position, atol=1e-6)
    np.testing.assert_allclose(again.velocity, x.velocity, atol=1e-9)


@pytest.mark.parametrize("m, e, expected", [(1.3, 0.0, 1.3), (math.pi, 0.5, math.pi)])
def test_kepler_exact_cases(m, e, expected):
    assert solve_kepler(m, e) == pytest.approx(expected, abs=1e-12)


def test_kepler_residual_example():
    E = solve_kepler(0.5, 0.3)
    assert abs(E - 0.3 * math.sin(E) - 0.5) <= 1e-12


@given(st.floats(-20.0, 20.0), st.floats(0.0, 0.99))
def test_kepler_residual_property(m, e):
    E = solve_kepler(m, e)
    assert abs(E - e * math.sin(E) - m) <= 1e-11


def test_kepler_rejects_open_orbits():
    with pytest.raises(ValueError):
        solve_kepler(1.0, 1.0)


def test_propagate_zero_is_identity():
    x = elements_to_eci(OrbitalElements(6878.0, 0.05, 80.0, 60.0, 45.0, 10.0))
    assert propagate(x, 0.0) == x


def test_one_period_closes_circular_orbit():
    x = elements_to_eci(OrbitalElements(6878.137, 0.0, 85.0, 50.0, 0.0, 33.0))
    y = propagate(x, orbital_period(6878.137))
    np.testing.assert_allclose(y.position, x.position, atol=1e-6)


@given(box_elements)
def test_propagate_matches_integrator_one_hour(el):
    x = elements_to_eci(el)
    y = propagate(x, 3600.0)
    ref = integrate_two_body(x.as_array(), 3600.0)
    np.testing.assert_allclose(y.position, ref[:3], atol=1e-5)


@given(box_elements, st.floats(-3 * 86400, 3 * 86400))
def test_propagate_conserves_elements_and_reverses(el, dt):
    x = elements_to_eci(el)
    y = propagate(x, dt)
    e0, e1 = eci_to_elements(x), eci_to_elements(y)
    assert e1.a == pytest.approx(e0.a, rel=1e-9)
    assert e1.e == pytest.approx(e0.e, rel=1e-9)
    assert e1.i == pytest.approx(e0.i, rel=1e-9)
    h0 = np.cross(x.position, x.velocity)
    h1 = np.cross(y.position, y.velocity)
    np.testing.assert_allclose(h1, h0, rtol=1e-9, atol=1e-9 * np.linalg.norm(h0))
    back = propagate(y, -dt)
    np.testing.assert_allclose(back.position, x.position, atol=1e-6)


@given(box_elements, st.floats(-86400, 86400), st.floats(-86400, 86400))
def test_propagate_group_action(el, t1, t2):
    x = elements_to_eci(el)
    a = propagate(x, t1 + t2)
    b = propagate(propagate(x, t1), t2)
    np.testing.assert_allclose(a.position, b.position, atol=1e-6)


@pytest.mark.parametrize(
    "v, expected", [((0.0, 7.5, 0.0), (0.0, 1.0, 0.0)), ((3.0, 4.0, 0.0), (0.6, 0.8, 0.0))]
)
def test_along_track_unit_examples(v, expected):
    u = along_track_unit(EciState([7000.0, 0.0, 0.0], v))
    np.testing.assert_allclose(u, expected, atol=1e-15)


@given(box_elements)
def test_along_track_unit_is_normalized(el):
    u = along_track_unit(elements_to_eci(el))
    assert abs(u @ u - 1.0) <= 1e-12


def test_along_track_rejects_zero_velocity():
    with pytest.raises(ValueError):
        along_track_unit(EciState([7000.0, 0.0, 0.0], [0.0, 0.0, 0.0]))


def test_state_invariants():
    with pytest.raises(ValueError):
        EciState([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        EciState([7000.0, np.nan, 0.0], [1.0, 0.0, 0.0])
