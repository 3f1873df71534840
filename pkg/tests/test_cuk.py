import numpy as np
import pytest

from smclmi import cuk
from smclmi.equiv import closed_loop_field, find_equilibrium, reduce
from smclmi.errors import ConfigurationError, DomainError
from smclmi.model import CCM_OFF, CCM_ON, DCVM, DICM, mode_field, surface_value
from smclmi.sim import BIDIRECTIONAL, UNIDIRECTIONAL

from conftest import P, SQ5, X_A, X_B, cuk_rhs, dcvm_rhs, dicm_rhs

SYS = cuk.build_ccm(P)


def test_params_must_be_positive():
    with pytest.raises(ConfigurationError):
        cuk.CukParams(c1=0.0)
    with pytest.raises(ConfigurationError):
        cuk.CukParams(r_load=-5.0)
    assert cuk.PAPER_LITERAL.c1 == 1e-9 and cuk.DEFAULT.c1 == 1e-6


def test_ccm_matrices():
    A, C = SYS.A, SYS.C
    expected_A = np.zeros((4, 4))
    expected_A[0, 2] = -1 / P.l1
    expected_A[1, 3] = 1 / P.l2
    expected_A[2, 0] = 1 / P.c1
    expected_A[3, 1] = -1 / P.c2
    expected_A[3, 3] = -1 / (P.r_load * P.c2)
    assert np.array_equal(A, expected_A)
    expected_C = np.zeros((4, 4))
    expected_C[0, 2] = 1 / P.l1
    expected_C[1, 2] = 1 / P.l2
    expected_C[2, 0] = expected_C[2, 1] = -1 / P.c1
    assert np.array_equal(C, expected_C)
    assert np.array_equal(SYS.B, [P.v_in / P.l1, 0, 0, 0])
    assert not np.any(SYS.D)
    assert (A + C)[0, 2] == 0.0


@pytest.mark.parametrize("u", [0, 1])
def test_ccm_modes_match_reference(u, rng):
    for x in rng.normal(size=(50, 4)) * [1, 1, 10, 10]:
        ref = cuk_rhs(x, u)
        assert np.allclose(mode_field(SYS.mode(u), x), ref, rtol=1e-13, atol=1e-13 * np.max(np.abs(ref)))


def test_dicm_mode(rng):
    dicm = cuk.build_dicm(P)
    assert dicm.id == DICM
    for x in rng.normal(size=(50, 4)) * [1, 1, 10, 10]:
        f = mode_field(dicm, x)
        assert np.allclose(f, dicm_rhs(x), rtol=1e-13, atol=1e-13 * np.max(np.abs(f)))
        assert abs(f[0] + f[1]) <= 1e-12 * abs(f[0]) + 1e-300
    x = np.array([0.2, -0.2, 7.0, 3.0])
    f = mode_field(dicm, x)
    assert f[0] == 0.0 and f[1] == 0.0


def test_dcvm_mode(rng):
    dcvm = cuk.build_dcvm(P)
    assert dcvm.id == DCVM
    for x in rng.normal(size=(50, 4)) * [1, 1, 10, 10]:
        f = mode_field(dcvm, x)
        assert np.allclose(f, dcvm_rhs(x), rtol=1e-13, atol=1e-13 * np.max(np.abs(f)))
        assert f[2] == 0.0
        assert f[0] == pytest.approx(1e4, rel=1e-15)


def test_modes_table():
    table = cuk.modes(P)
    assert set(table) == {CCM_ON, CCM_OFF, DICM, DCVM}


def test_surface_a_branches():
    b = cuk.surface_a_equilibrium(0.5, P)
    assert b.feasible.feasible and not b.infeasible.feasible
    assert np.allclose(b.feasible.x_star, X_A, rtol=0, atol=1e-12)
    assert np.allclose(b.infeasible.x_star, [0.5, -1.0, 5.0, 5.0], rtol=0, atol=1e-12)
    assert b.feasible.u_eq_star == pytest.approx((15 - 10) / 15, rel=1e-15)
    for br in b:
        assert np.max(np.abs(closed_loop_field(SYS, cuk.surface_a(0.5, 0.01), br.x_star))) < 1e-9
        assert surface_value(cuk.surface_a(0.5, 0.01), br.x_star) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ConfigurationError):
        cuk.surface_a_equilibrium(0.0, P)


def test_surface_a_zero_power_limit():
    b = cuk.surface_a_equilibrium(1e-14, P)
    for br in b:
        assert np.allclose(br.x_star, [0, 0, P.v_in, 0], atol=1e-6)


def test_surface_b_branches():
    b = cuk.surface_b_equilibrium(1, 1, 2, P)
    assert b.feasible.feasible
    assert np.allclose(b.feasible.x_star, X_B, rtol=0, atol=1e-12)
    # unrationalised forms of the same vector
    assert (6 - 2 * SQ5) / (SQ5 - 1) == pytest.approx(SQ5 - 1, rel=1e-14)
    assert (-30 + 10 * SQ5) / (SQ5 - 1) == pytest.approx(5 * (1 - SQ5), rel=1e-14)
    assert b.feasible.u_eq_star == pytest.approx((3 - SQ5) / 2, rel=1e-14)
    generic = find_equilibrium(SYS, cuk.surface_b(1, 1, 2, 0.01), [0.9, 1.1, 15.0, -6.0])
    assert np.allclose(generic.x_star, b.feasible.x_star, rtol=1e-9, atol=0)
    with pytest.raises(ConfigurationError):
        cuk.surface_b_equilibrium(1, 0, 2, P)


@pytest.mark.parametrize("m,m5", [([1, 0, 0, 0], 0.5), ([1, 1, 0, 0], 2.0), ([2, 0.5, 0, 0], 1.0),
                                  ([1, 0.3, 0.01, -0.02], 0.7)])
def test_general_equilibria_solve_the_sliding_field(m, m5):
    b = cuk.equilibria(m, m5, P)
    surf = cuk.SlidingSurface(np.array(m, float), m5, 0.01)
    for br in b:
        f = closed_loop_field(SYS, surf, br.x_star)
        assert np.max(np.abs(f)) <= 1e-9 * 1e6 * max(1, np.max(np.abs(br.x_star)))
        assert abs(surface_value(surf, br.x_star)) <= 1e-12 * max(1, m5)
    assert b.feasible.feasible


def test_equilibria_agree_with_surface_specific_forms():
    a = cuk.equilibria([1, 0, 0, 0], 0.5, P)
    assert np.allclose(a.feasible.x_star, cuk.surface_a_equilibrium(0.5, P).feasible.x_star)
    b = cuk.equilibria([1, 1, 0, 0], 2.0, P)
    assert np.allclose(b.feasible.x_star, cuk.surface_b_equilibrium(1, 1, 2, P).feasible.x_star)
    assert np.allclose(b.infeasible.x_star, cuk.surface_b_equilibrium(1, 1, 2, P).infeasible.x_star)


def test_surface_a_remainder_values():
    assert cuk.surface_a_remainder([0.0, 0.0, 0.0], X_A, P) == 0.0
    assert cuk.surface_a_remainder([0.0, 1.0, 0.0], X_A, P) == pytest.approx(1 / (16 * 15e-6), rel=1e-14)
    with pytest.raises(DomainError):
        cuk.surface_a_remainder([0.0, -15.0, 0.0], X_A, P)


def test_surface_b_remainder_values(rng):
    assert cuk.surface_b_remainder([0.0, 0.0, 0.0], X_B, P, 1, 1) == 0.0
    m1, m2 = 2.0, 1.0
    xs = cuk.surface_b_equilibrium(m1, m2, 3.0, P).feasible.x_star
    y3 = 0.7
    y1 = m2 * xs[3] * y3 / (P.r_load * P.v_in * (m1 - m2))
    assert cuk.surface_b_remainder([y1, y3, 0.4], xs, P, m1, m2) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(DomainError):
        cuk.surface_b_remainder([0.0, -X_B[2], 0.0], X_B, P, 1, 1)


@pytest.mark.parametrize("m1,m2,m5", [(1, 1, 2), (2, 1, 3), (1, 3, 2)])
def test_surface_b_remainder_matches_pipeline(m1, m2, m5, rng):
    xs = cuk.surface_b_equilibrium(m1, m2, m5, P).feasible.x_star
    surf = cuk.surface_b(m1, m2, m5, 0.01)
    red = reduce(SYS, surf, xs, eliminate=1)
    Z = rng.uniform(-1, 1, (300, 3)) * [0.3, 0.5 * xs[2], 2.0]
    k = int(np.flatnonzero(red.keep == cuk.V_C1)[0])
    got = red.remainder(Z)[:, k]
    ref = cuk.surface_b_remainder(Z, xs, P, m1, m2)
    scale = np.maximum(np.abs(ref), np.max(np.abs(Z @ red.A_star.T), axis=1) * 1e-3)
    assert np.max(np.abs(got - ref) / scale) <= 1e-9


def test_off_mode_spectrum():
    ev = cuk.off_mode_eigenvalues(P)
    assert np.all(ev.real <= 1e-9)
    poles = cuk.output_filter_poles(P)
    char = np.poly(np.array([[0, 1 / P.l2], [-1 / P.c2, -1 / (P.r_load * P.c2)]]))
    assert np.allclose(np.sort_complex(poles), np.sort_complex(np.roots(char)))
    # the output filter pair is the slow pair of the off-mode spectrum
    slow = ev[np.argsort(np.abs(ev))][:2]
    assert np.allclose(np.sort_complex(slow), np.sort_complex(poles), rtol=1e-9)
    light = cuk.output_filter_poles(cuk.CukParams(r_load=1e12))
    assert np.allclose(np.abs(light.imag), 1 / np.sqrt(P.l2 * P.c2), rtol=1e-6)
    assert np.all(np.abs(light.real) < 1e-3)


def test_automaton_realizations(surf_a):
    uni = cuk.automaton(P, surf_a, UNIDIRECTIONAL)
    bi = cuk.automaton(P, surf_a, BIDIRECTIONAL)
    assert set(uni.modes) == {CCM_ON, CCM_OFF, DICM, DCVM}
    assert set(bi.modes) == {CCM_ON, CCM_OFF}
    targets = {m: {g.target for g in gs} for m, gs in uni.guards.items()}
    assert targets == {CCM_ON: {CCM_OFF, DCVM}, CCM_OFF: {CCM_ON, DICM}, DICM: {CCM_ON}, DCVM: {CCM_OFF}}
    with pytest.raises(ConfigurationError):
        cuk.automaton(P, surf_a, "tri")
