"""Linear ripple design rules for the Cuk converter under hysteresis control.

Valid for surfaces S = m1 i_L1 + m2 i_L2 - m5.  With the switch on for
u_eq T_S the controlled current combination rises by the full band 2 delta:

    2 delta = (m1/L1 + m2/L2) v_in u_eq T_S
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .cuk import I_L2, CukParams
from .errors import DomainError, NoCrossing, UnsupportedSurface
from .model import SlidingSurface


@dataclass(frozen=True)
class RipplePrediction:
    T_S: float
    d_iL1: float
    d_iL2: float
    d_vC1: float
    d_vC2: float
    u_eq_star: float


def current_gain(surface: SlidingSurface, p: CukParams) -> float:
    """m1/L1 + m2/L2 for the supported surface family."""
    m = surface.m
    if m.size != 4 or m[2] != 0 or m[3] != 0:
        raise UnsupportedSurface("ripple rules cover only surfaces in i_L1 and i_L2")
    kappa = float(m[0] / p.l1 + m[1] / p.l2)
    if not kappa > 0:
        raise UnsupportedSurface("surface current gain must be positive")
    return kappa


def switching_period(surface: SlidingSurface, u_eq_star: float, p: CukParams,
                     delta: float | None = None) -> float:
    delta = surface.delta if delta is None else delta
    if not 0 < u_eq_star < 1:
        raise ValueError(f"duty ratio must lie in (0, 1), got {u_eq_star}")
    return float(2 * delta / (current_gain(surface, p) * p.v_in * u_eq_star))


def predict_ripples(T_S: float, u_eq_star: float, x_star, p: CukParams) -> RipplePrediction:
    on_time = u_eq_star * T_S
    d_il1 = p.v_in / p.l1 * on_time
    d_il2 = p.v_in / p.l2 * on_time
    d_vc1 = x_star[I_L2] * on_time / p.c1
    d_vc2 = d_il2 * T_S / (8 * p.c2)
    return RipplePrediction(*(float(v) for v in (T_S, d_il1, d_il2, d_vc1, d_vc2, u_eq_star)))


def hysteresis_limit(d_vC1_max: float, x_star, p: CukParams, surface: SlidingSurface) -> float:
    """Largest band half-width whose predicted v_C1 ripple stays below d_vC1_max."""
    return float(d_vC1_max * current_gain(surface, p) * p.v_in * p.c1 / (2 * x_star[I_L2]))


def estimate_linear_ripple_limit(y, h, r: float) -> float:
    """|y| where |h| first exceeds r |y|, scanning samples by increasing |y|.

    The crossing is interpolated linearly between the bracketing samples.
    """
    y = np.abs(np.asarray(y, dtype=float))
    h = np.abs(np.asarray(h, dtype=float))
    order = np.argsort(y, kind="stable")
    y, h = y[order], h[order]
    excess = h - r * y
    above = np.flatnonzero(excess > 0)
    if above.size == 0:
        raise NoCrossing("remainder stays inside the sector over the whole series")
    i = above[0]
    if i == 0:
        return float(y[0])
    y0, y1, e0, e1 = y[i - 1], y[i], excess[i - 1], excess[i]
    return float(y0 + (y1 - y0) * (-e0) / (e1 - e0))


def axis_crossing(reduced, component: int, r: float, points: int = 4000) -> float:
    """Smallest |y| with |h_k(y e_k)| = r|y| along the k-th reduced axis.

    Both signs of y are scanned on a logarithmic grid and the first
    bracketed sign change is refined with brentq.  Other reduced
    coordinates are held at zero.
    """
    k = int(component)
    scale = max(1.0, float(np.max(np.abs(reduced.x_star))))
    mags = np.geomspace(1e-9 * scale, 1e3 * scale, points)
    best = np.inf
    for sign in (1.0, -1.0):
        def excess(y):
            z = np.zeros(reduced.A_star.shape[0])
            z[k] = sign * y
            try:
                h = reduced.remainder(z)[k]
            except DomainError:
                return np.inf
            return abs(h) - r * y if np.isfinite(h) else np.inf

        prev_y, prev_e = None, None
        for y in mags:
            e = excess(y)
            if prev_e is not None and prev_e <= 0 < e:
                if np.isfinite(e):
                    y = brentq(excess, prev_y, y, xtol=1e-14 * y, rtol=1e-12)
                best = min(best, y)
                break
            prev_y, prev_e = y, e
    if not np.isfinite(best):
        raise NoCrossing("remainder stays inside the sector along the axis")
    return float(best)


def ripple_limit_from_crossing(y_cross: float, x_star, p: CukParams,
                               surface: SlidingSurface) -> tuple[float, float]:
    """(d_vC1_max, delta_max) treating the crossing as a peak amplitude."""
    d_vc1 = 2.0 * y_cross
    return d_vc1, hysteresis_limit(d_vc1, x_star, p, surface)
