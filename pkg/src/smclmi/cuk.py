"""Cuk converter: circuit matrices, discontinuous modes and closed forms.

State ordering is x = [i_L1, i_L2, v_C1, v_C2].  The closed-form equilibria
and remainders here are independent of the generic pipeline in
:mod:`smclmi.equiv` and are used to cross-check it.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .equiv import FEASIBLE, INFEASIBLE, EquilibriumResult, closed_loop_field
from .errors import ConfigurationError, DomainError
from .model import CCM_OFF, CCM_ON, DCVM, DICM, ModeDynamics, SlidingSurface, SwitchedAffineSystem

STATE_LABELS = ("i_L1 [A]", "i_L2 [A]", "v_C1 [V]", "v_C2 [V]")
STATE_KEYS = ("i_l1", "i_l2", "v_c1", "v_c2")
I_L1, I_L2, V_C1, V_C2 = range(4)


@dataclass(frozen=True)
class CukParams:
    v_in: float = 10.0
    l1: float = 1e-3
    l2: float = 1e-3
    c1: float = 1e-6
    c2: float = 20e-6
    r_load: float = 5.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"circuit parameter {name} must be positive, got {value}")


# Capacitances are in microfarads; the ripple design rules and band limits
# are only consistent with these values.  PAPER_LITERAL carries the nanofarad
# reading for comparison runs.
DEFAULT = CukParams()
PAPER_LITERAL = CukParams(c1=1e-9, c2=20e-9)


def build_ccm(p: CukParams) -> SwitchedAffineSystem:
    A = np.array([
        [0.0, 0.0, -1 / p.l1, 0.0],
        [0.0, 0.0, 0.0, 1 / p.l2],
        [1 / p.c1, 0.0, 0.0, 0.0],
        [0.0, -1 / p.c2, 0.0, -1 / (p.r_load * p.c2)],
    ])
    B = np.array([p.v_in / p.l1, 0.0, 0.0, 0.0])
    C = np.array([
        [0.0, 0.0, 1 / p.l1, 0.0],
        [0.0, 0.0, 1 / p.l2, 0.0],
        [-1 / p.c1, -1 / p.c1, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    return SwitchedAffineSystem(A, B, C, np.zeros(4), STATE_LABELS)


def build_dicm(p: CukParams) -> ModeDynamics:
    """Switch and diode both off; the inductor currents sum to zero."""
    ls = p.l1 + p.l2
    M = np.array([
        [0.0, 0.0, -1 / ls, -1 / ls],
        [0.0, 0.0, 1 / ls, 1 / ls],
        [0.0, -1 / p.c1, 0.0, 0.0],
        [0.0, -1 / p.c2, 0.0, -1 / (p.r_load * p.c2)],
    ])
    b = np.array([p.v_in / ls, -p.v_in / ls, 0.0, 0.0])
    return ModeDynamics(DICM, M, b)


def build_dcvm(p: CukParams) -> ModeDynamics:
    """Switch and diode both on; v_C1 is clamped at zero."""
    M = np.array([
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1 / p.l2],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, -1 / p.c2, 0.0, -1 / (p.r_load * p.c2)],
    ])
    b = np.array([p.v_in / p.l1, 0.0, 0.0, 0.0])
    return ModeDynamics(DCVM, M, b)


def modes(p: CukParams) -> dict[str, ModeDynamics]:
    sys = build_ccm(p)
    return {CCM_ON: sys.mode(1), CCM_OFF: sys.mode(0), DICM: build_dicm(p), DCVM: build_dcvm(p)}


def surface_a(m5: float, delta: float) -> SlidingSurface:
    """S(x) = i_L1 - m5: input current control."""
    return SlidingSurface([1.0, 0.0, 0.0, 0.0], m5, delta)


def surface_b(m1: float, m2: float, m5: float, delta: float) -> SlidingSurface:
    """S(x) = m1 i_L1 + m2 i_L2 - m5: weighted inductor current control."""
    return SlidingSurface([m1, m2, 0.0, 0.0], m5, delta)


class Branches(NamedTuple):
    feasible: EquilibriumResult
    infeasible: EquilibriumResult


def steady_state_from_output(v_c2: float, p: CukParams) -> np.ndarray:
    """Steady state of the sliding dynamics parametrised by the output voltage."""
    return np.array([v_c2**2 / (p.r_load * p.v_in), -v_c2 / p.r_load, p.v_in - v_c2, v_c2])


def steady_state_duty(v_c2: float, p: CukParams) -> float:
    return -v_c2 / (p.v_in - v_c2)


def _branch(v_c2, p, surface):
    x = steady_state_from_output(v_c2, p)
    u = steady_state_duty(v_c2, p)
    res = float(np.max(np.abs(closed_loop_field(build_ccm(p), surface, x))))
    return EquilibriumResult(x, u, res, FEASIBLE if v_c2 < 0 and x[V_C1] > 0 else INFEASIBLE)


def equilibria(m, m5: float, p: CukParams = DEFAULT) -> Branches:
    """Both steady states on S(x) = m.x - m5 = 0.

    Substituting the steady-state relations into the surface leaves
    a x4^2 + b x4 + c = 0 in the output voltage.  The branch with
    v_C2 < 0 and v_C1 > 0 is the physical one.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (4,):
        raise ConfigurationError("Cuk surfaces have four coefficients")
    m1, m2, m3, m4 = m
    a = m1 / (p.r_load * p.v_in)
    b = -m2 / p.r_load - m3 + m4
    c = m3 * p.v_in - m5
    surf = SlidingSurface(m, m5, 1.0)
    if a == 0:
        if b == 0:
            raise ConfigurationError("surface does not determine the operating point")
        root = _branch(-c / b, p, surf)
        return Branches(root, root)
    disc = b * b - 4 * a * c
    if disc < 0:
        raise ConfigurationError("surface admits no real steady state")
    q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
    lo, hi = sorted([q / a, c / q] if q != 0 else [0.0, 0.0])
    first, second = _branch(lo, p, surf), _branch(hi, p, surf)
    if second.feasible and not first.feasible:
        first, second = second, first
    return Branches(first, second)


def surface_a_equilibrium(m5: float, p: CukParams = DEFAULT) -> Branches:
    """x1* = m5, x4* = -/+ sqrt(m5 v_in R); the first field is the physical branch."""
    if not m5 > 0:
        raise ConfigurationError("m5 must be positive")
    root = np.sqrt(m5 * p.v_in * p.r_load)
    surf = surface_a(m5, 1.0)
    return Branches(_branch(-root, p, surf), _branch(root, p, surf))


def surface_b_equilibrium(m1: float, m2: float, m5: float, p: CukParams = DEFAULT) -> Branches:
    """Roots of m1 x4^2/(R v_in) - m2 x4/R = m5 mapped through the steady-state relations."""
    if not (m1 > 0 and m2 > 0 and m5 > 0):
        raise ConfigurationError("m1, m2 and m5 must be positive")
    a = m1 / (p.r_load * p.v_in)
    b = -m2 / p.r_load
    c = -m5
    disc = b * b - 4 * a * c
    assert disc > 0, "complex equilibria cannot occur for positive coefficients"
    q = -0.5 * (b - np.sqrt(disc))  # b < 0, so this avoids cancellation
    hi, lo = q / a, c / q
    surf = surface_b(m1, m2, m5, 1.0)
    return Branches(_branch(lo, p, surf), _branch(hi, p, surf))


def surface_a_remainder(z, x_star, p: CukParams = DEFAULT):
    """v_C1 component of the reduced remainder for S = i_L1 - m5; z = [y2, y3, y4]."""
    z = np.asarray(z, dtype=float)
    y2, y3 = z[..., 0], z[..., 1]
    x3 = y3 + x_star[V_C1]
    if np.any(x3 == 0):
        raise DomainError("pole of the remainder at v_C1 = 0")
    return (-p.v_in * y2 * y3 + x_star[I_L2] * y3**2) / (x3 * x_star[V_C1] * p.c1)


def surface_b_remainder(z, x_star, p: CukParams, m1: float, m2: float):
    """v_C1 component of the reduced remainder for S = m1 i_L1 + m2 i_L2 - m5; z = [y1, y3, y4]."""
    z = np.asarray(z, dtype=float)
    y1, y3, y4 = z[..., 0], z[..., 1], z[..., 2]
    x3s, x4s = x_star[V_C1], x_star[V_C2]
    x3 = y3 + x3s
    if np.any(x3 == 0):
        raise DomainError("pole of the remainder at v_C1 = 0")
    R, vin = p.r_load, p.v_in
    first = m2 * x4s * y3 - R * vin * (m1 - m2) * y1
    second = y3 * (m2 * p.l1 * x4s + m1 * p.l2 * vin) - y4 * m2 * p.l1 * x3s
    return -first * second / (m2 * p.c1 * R * vin * x3s * x3 * (m1 * p.l2 + m2 * p.l1))


def off_mode_eigenvalues(p: CukParams = DEFAULT) -> np.ndarray:
    """Spectrum of the switch-off matrix, sorted by decreasing real part."""
    ev = np.linalg.eigvals(build_ccm(p).A)
    return ev[np.lexsort((ev.imag, -ev.real))]


def output_filter_poles(p: CukParams = DEFAULT) -> np.ndarray:
    """Roots of s^2 + s/(R C2) + 1/(L2 C2)."""
    return np.roots([1.0, 1 / (p.r_load * p.c2), 1 / (p.l2 * p.c2)])


def _dicm_entry(x):
    x = np.array(x, dtype=float)
    s = 0.5 * (x[I_L1] - x[I_L2])
    x[I_L1], x[I_L2] = s, -s
    return x


def _dcvm_entry(x):
    x = np.array(x, dtype=float)
    x[V_C1] = 0.0
    return x


def automaton(p: CukParams, surface: SlidingSurface, realization: str = "unidirectional"):
    """Hybrid automaton of the converter under hysteresis control.

    The unidirectional (switch + diode) circuit adds DICM, entered when the
    inductor current sum falls through zero with the switch off, and DCVM,
    entered when v_C1 falls through zero with the switch on.
    """
    from .sim import BIDIRECTIONAL, UNIDIRECTIONAL, Guard, HybridAutomaton, ccm_automaton, hysteresis_guards

    if realization == BIDIRECTIONAL:
        return ccm_automaton(build_ccm(p), surface)
    if realization != UNIDIRECTIONAL:
        raise ConfigurationError(f"unknown realization {realization!r}")
    hg = hysteresis_guards(surface)
    to_dicm = Guard(np.array([1.0, 1.0, 0.0, 0.0]), 0.0, -1, DICM, "i_L1+i_L2=0")
    to_dcvm = Guard(np.array([0.0, 0.0, 1.0, 0.0]), 0.0, -1, DCVM, "v_C1=0")
    return HybridAutomaton(
        modes=modes(p),
        guards={
            CCM_ON: (hg["on"], to_dcvm),
            CCM_OFF: (hg["off"], to_dicm),
            DICM: (hg["off"],),
            DCVM: (hg["on"],),
        },
        surface=surface,
        control={CCM_ON: 1, CCM_OFF: 0, DICM: 0, DCVM: 1},
        realization=UNIDIRECTIONAL,
        entry_maps={DICM: _dicm_entry, DCVM: _dcvm_entry},
    )
