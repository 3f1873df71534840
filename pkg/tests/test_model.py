import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smclmi import cuk
from smclmi.errors import ConfigurationError
from smclmi.model import (CCM_OFF, CCM_ON, ModeDynamics, SlidingSurface, SwitchedAffineSystem,
                          hysteresis_control, mode_field, surface_value)

from conftest import P, X_A, X_B, cuk_rhs

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_surface_value_at_operating_points():
    assert surface_value(cuk.surface_a(0.5, 0.01), X_A) == 0.0
    assert abs(surface_value(cuk.surface_b(1, 1, 2, 0.01), X_B)) < 1e-15
    s = SlidingSurface(np.array([2.0, -1.0, 3.0]), 0.0, 0.1)
    assert surface_value(s, np.zeros(3)) == 0.0


def test_surface_value_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        surface_value(cuk.surface_a(0.5, 0.01), np.zeros(3))


def test_surface_rejects_bad_parameters():
    with pytest.raises(ConfigurationError):
        SlidingSurface(np.zeros(4), 0.0, 0.1)
    with pytest.raises(ConfigurationError):
        SlidingSurface(np.ones(4), 0.0, 0.0)
    with pytest.raises(ConfigurationError):
        SlidingSurface(np.ones(4), 0.0, -1.0)


def test_surface_through_point():
    s = SlidingSurface.through([1.0, 1.0, 0.0, 0.0], X_B, 0.01)
    assert abs(surface_value(s, X_B)) < 1e-15
    assert s.with_delta(0.1).delta == 0.1


def test_hysteresis_branches():
    d = 0.01
    assert hysteresis_control(-2 * d, d, 0) == 1
    assert hysteresis_control(2 * d, d, 1) == 0
    assert hysteresis_control(0.0, d, 1) == 1
    assert hysteresis_control(0.0, d, 0) == 0
    # the band edges are inside the band
    assert hysteresis_control(d, d, 1) == 1
    assert hysteresis_control(-d, d, 0) == 0


@given(st.floats(-1.0, 1.0), st.integers(0, 1), st.integers(1, 20))
def test_hysteresis_holds_inside_band(frac, u, repeats):
    d = 0.5
    s = frac * d
    for _ in range(repeats):
        u2 = hysteresis_control(s, d, u)
        assert u2 == u
        u = u2


def test_mode_field_offset_and_cuk_values():
    sys = cuk.build_ccm(P)
    assert np.array_equal(mode_field(sys.mode(0), np.zeros(4)), sys.B)
    on = mode_field(sys.mode(1), X_A)
    assert np.allclose(on, cuk_rhs(X_A, 1), rtol=1e-14, atol=1e-9)
    # switch on: i_L1 rises at v_in/L1, C1 discharges through i_L2, C2 is balanced
    assert np.allclose(on, [1e4, 1e4, -1e6, 0.0], rtol=1e-14, atol=1e-9)


def test_dcvm_has_frozen_capacitor(rng):
    dcvm = cuk.build_dcvm(P)
    for x in rng.normal(size=(20, 4)) * 10:
        assert mode_field(dcvm, x)[cuk.V_C1] == 0.0


@settings(max_examples=50)
@given(st.lists(finite, min_size=4, max_size=4), st.lists(finite, min_size=4, max_size=4), st.integers(0, 1))
def test_mode_field_is_affine(x, y, u):
    mode = cuk.build_ccm(P).mode(u)
    x, y = np.array(x), np.array(y)
    lhs = mode_field(mode, x + y) - mode_field(mode, x) - mode_field(mode, y) + mode_field(mode, np.zeros(4))
    scale = max(1.0, np.max(np.abs(mode.M)) * (np.max(np.abs(x)) + np.max(np.abs(y))))
    assert np.max(np.abs(lhs)) <= 1e-13 * scale


def test_on_minus_off_equals_control_path(rng):
    sys = cuk.build_ccm(P)
    for x in rng.normal(size=(20, 4)) * 5:
        diff = mode_field(sys.mode(1), x) - mode_field(sys.mode(0), x)
        assert np.allclose(diff, sys.C @ x + sys.D, rtol=1e-12, atol=1e-6)


def test_system_validation():
    with pytest.raises(ConfigurationError):
        SwitchedAffineSystem(np.eye(2), np.zeros(3), np.eye(2))
    with pytest.raises(ConfigurationError):
        SwitchedAffineSystem(np.array([[np.inf, 0], [0, 1]]), np.zeros(2), np.eye(2))
    sys = SwitchedAffineSystem(np.eye(2), np.zeros(2), np.eye(2))
    assert np.array_equal(sys.D, np.zeros(2))
    assert sys.mode(1).id == CCM_ON and sys.mode(0).id == CCM_OFF


def test_mode_dynamics_augmented():
    mode = ModeDynamics(CCM_ON, np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([5.0, 6.0]))
    Ma = mode.augmented()
    assert Ma.shape == (3, 3)
    assert np.array_equal(Ma[-1], np.zeros(3))
    assert np.array_equal(Ma[:2, 2], [5.0, 6.0])
