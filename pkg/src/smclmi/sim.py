"""Event-driven simulation of the hysteresis-controlled switched affine system.

Inside a mode the dynamics are affine, so the state is advanced exactly with
the exponential of the augmented matrix [[M, b], [0, 0]].  Each mode is
traversed in substeps of length h <= 0.25/||[[M, b], [0, 0]]||_1; when a guard
changes sign inside a substep the crossing is localised on the Taylor
expansion of the flow over that substep, which is exact to rounding for
such short steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .equiv import ReducedModel, singular_mask
from .errors import ConfigurationError, DivergenceError, EventLocalizationFailure, ZenoError
from .model import (CCM_OFF, CCM_ON, DCVM, DICM, ModeDynamics, SlidingSurface,
                    hysteresis_control, surface_value)

UNIDIRECTIONAL = "unidirectional"
BIDIRECTIONAL = "bidirectional"

MAX_EVENTS = 10**6
DIVERGENCE_LIMIT = 1e9
SUBSTEP_NORM = 0.25


def step_affine(mode: ModeDynamics, x, dt: float) -> np.ndarray:
    """Exact solution of dx/dt = M x + b after time dt."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    x = np.asarray(x, dtype=float)
    if dt == 0:
        return x.copy()
    Phi = scipy.linalg.expm(mode.augmented() * dt)
    return Phi[:-1, :-1] @ x + Phi[:-1, -1]


def integrate_rk(mode: ModeDynamics, x, dt: float, rtol: float = 1e-12) -> np.ndarray:
    """Adaptive classical RK4 with step doubling and local extrapolation.

    Kept as an independent check on :func:`step_affine`.
    """
    M, b = mode.M, mode.b
    f = lambda y: M @ y + b  # noqa: E731

    def rk4(y, h):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    y = np.array(x, dtype=float)
    t = 0.0
    scale = max(np.linalg.norm(mode.augmented(), 1), 1e-300)
    h = min(dt, 0.05 / scale)
    while t < dt:
        h = min(h, dt - t)
        full = rk4(y, h)
        half = rk4(rk4(y, 0.5 * h), 0.5 * h)
        err = np.max(np.abs(half - full)) / 15.0
        tol = rtol * max(np.max(np.abs(y)), np.max(np.abs(b)) * h, 1e-300)
        if err <= tol or h < 1e-15 * dt:
            y = half + (half - full) / 15.0
            t += h
        h *= min(4.0, max(0.2, 0.9 * (tol / max(err, 1e-300)) ** 0.2))
    return y


@dataclass(frozen=True, eq=False)
class Guard:
    """Linear guard g(x) = w.x - offset that fires when crossed in ``direction``.

    direction = -1 fires on g going from >= 0 to < 0, +1 on <= 0 to > 0.
    """

    weights: np.ndarray
    offset: float
    direction: int
    target: str
    label: str

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.weights - self.offset


@dataclass(frozen=True, eq=False)
class HybridAutomaton:
    modes: dict
    guards: dict
    surface: SlidingSurface
    control: dict
    realization: str = BIDIRECTIONAL
    # Projection applied to the state when a mode is entered.
    entry_maps: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.realization == BIDIRECTIONAL and set(self.modes) - {CCM_ON, CCM_OFF}:
            raise ConfigurationError("a bidirectional realization has only the two CCM modes")


def hysteresis_guards(surface: SlidingSurface) -> dict:
    on = Guard(surface.m, surface.m5 + surface.delta, +1, CCM_OFF, "S>+delta")
    off = Guard(surface.m, surface.m5 - surface.delta, -1, CCM_ON, "S<-delta")
    return {"on": on, "off": off}


def ccm_automaton(system, surface: SlidingSurface) -> HybridAutomaton:
    """Two-mode automaton of a converter with bidirectional switches."""
    g = hysteresis_guards(surface)
    return HybridAutomaton(
        modes={CCM_ON: system.mode(1), CCM_OFF: system.mode(0)},
        guards={CCM_ON: (g["on"],), CCM_OFF: (g["off"],)},
        surface=surface,
        control={CCM_ON: 1, CCM_OFF: 0},
    )


@dataclass(frozen=True)
class Event:
    t: float
    source: str
    target: str
    label: str


@dataclass(frozen=True, eq=False)
class SimTrace:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    mode: np.ndarray
    events: tuple
    surface: SlidingSurface

    def __len__(self):
        return self.t.size

    @property
    def modes_visited(self) -> set:
        return set(self.mode.tolist())

    def rising_edges(self) -> np.ndarray:
        return np.array([e.t for e in self.events
                         if e.target == CCM_ON and e.source in (CCM_OFF, DICM)])

    def window(self, t_from: float, t_to: float = np.inf) -> "SimTrace":
        sel = (self.t >= t_from) & (self.t <= t_to)
        ev = tuple(e for e in self.events if t_from <= e.t <= t_to)
        return SimTrace(self.t[sel], self.x[sel], self.u[sel], self.mode[sel], ev, self.surface)


class _Flow:
    """Substep propagator and local Taylor expansion for one mode."""

    def __init__(self, mode: ModeDynamics, h_max: float = np.inf):
        self.mode = mode
        self.Ma = mode.augmented()
        norm = np.linalg.norm(self.Ma, 1)
        self.h = min(h_max, SUBSTEP_NORM / norm) if norm > 0 else h_max
        if not np.isfinite(self.h):
            self.h = 1.0
        self.Phi = scipy.linalg.expm(self.Ma * self.h)

    def advance(self, z, dt):
        if dt == self.h:
            return self.Phi @ z
        return scipy.linalg.expm(self.Ma * dt) @ z

    def taylor(self, z, dt):
        """Rows c_j with z(tau) = sum_j c_j tau^j on [0, dt]."""
        coeffs = [z]
        term = z
        size = max(np.max(np.abs(z)), 1e-300)
        for j in range(1, 60):
            term = self.Ma @ term / j
            coeffs.append(term)
            if np.max(np.abs(term)) * dt**j <= 1e-18 * size:
                break
        return np.array(coeffs)

    @staticmethod
    def evaluate(coeffs, tau):
        tau = np.asarray(tau, dtype=float)
        out = np.zeros(tau.shape + coeffs.shape[1:])
        for c in coeffs[::-1]:
            out = out * tau[..., None] + c
        return out


def _crossed(g0, g1, direction):
    if direction < 0:
        return g0 >= 0 and g1 < 0
    if direction > 0:
        return g0 <= 0 and g1 > 0
    return (g0 >= 0 > g1) or (g0 <= 0 < g1)


def _root(fun, a, b):
    fa = fun(a)
    if fa == 0:
        return a
    return brentq(fun, a, b, xtol=1e-15 * max(b, 1e-300), rtol=4 * np.finfo(float).eps, maxiter=200)


def locate_event(mode: ModeDynamics, x, guard: Callable, dt_max: float,
                 direction: int = 0, expect: bool = False):
    """First time in (0, dt_max] at which ``guard`` crosses zero along the flow.

    Returns (t_hit, x_hit) or None.  With ``expect=True`` a missing crossing
    raises EventLocalizationFailure instead.
    """
    if not dt_max > 0:
        raise ValueError("dt_max must be positive")
    flow = _Flow(mode)
    z = np.append(np.asarray(x, dtype=float), 1.0)
    n = z.size - 1
    t = 0.0
    g0 = guard(z[:n])
    steps = 0
    while t < dt_max:
        dt = min(flow.h, dt_max - t)
        coeffs = flow.taylor(z, dt)
        zn = flow.advance(z, dt)
        g1 = guard(zn[:n])
        hit = _crossed(g0, g1, direction)
        if not hit:
            # turning point inside the substep may hide a double crossing
            taus = np.linspace(0.0, dt, 9)[1:-1]
            gs = np.array([guard(s[:n]) for s in flow.evaluate(coeffs, taus)])
            for k, gk in enumerate(gs):
                if _crossed(g0, gk, direction):
                    dt, zn, g1, hit = taus[k], flow.evaluate(coeffs, taus[k]), gk, True
                    break
        if hit:
            fun = lambda s: guard(flow.evaluate(coeffs, s)[:n])  # noqa: E731
            tau = _root(fun, 0.0, dt)
            return t + tau, flow.evaluate(coeffs, tau)[:n]
        z, g0 = zn, g1
        t += dt
        steps += 1
    if expect:
        raise EventLocalizationFailure(f"no guard crossing found in {steps} subdivisions")
    return None


def simulate(automaton: HybridAutomaton, x0, u0: int, t_end: float, sample_dt: float,
             max_events: int = MAX_EVENTS) -> SimTrace:
    """Integrate the hybrid system from (x0, u0) up to t_end.

    Samples are recorded on the grid k*sample_dt and at every transition (the
    post-transition state and mode).
    """
    if not (t_end > 0 and sample_dt > 0):
        raise ConfigurationError("t_end and sample_dt must be positive")
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ConfigurationError("initial state must be finite")
    surface = automaton.surface
    u = hysteresis_control(float(surface_value(surface, x0)), surface.delta, int(u0))
    mode = CCM_ON if u == 1 else CCM_OFF
    n = x0.size
    flows = {k: _Flow(m) for k, m in automaton.modes.items()}
    guard_mats = {}
    for k, gs in automaton.guards.items():
        W = np.array([np.append(g.weights, -g.offset) for g in gs]) if gs else np.zeros((0, n + 1))
        guard_mats[k] = (W, gs)
    limit = DIVERGENCE_LIMIT * max(1.0, np.max(np.abs(x0)))

    ts, xs, us, ms = [0.0], [x0.copy()], [u], [mode]
    events = []
    z = np.append(x0, 1.0)
    t = 0.0
    k_next = 1

    def record_grid(coeffs, t_start, t_stop, mode_label, u_val):
        nonlocal k_next
        k_last = int(np.floor(t_stop / sample_dt + 1e-9))
        if k_last < k_next:
            return
        grid = np.arange(k_next, k_last + 1) * sample_dt
        grid = grid[(grid > t_start) & (grid <= t_stop)]
        k_next = k_last + 1
        if grid.size == 0:
            return
        states = _Flow.evaluate(coeffs, grid - t_start)[:, :n]
        ts.extend(grid.tolist())
        xs.extend(states)
        us.extend([u_val] * grid.size)
        ms.extend([mode_label] * grid.size)

    while t < t_end:
        flow = flows[mode]
        W, gs = guard_mats[mode]
        dt = min(flow.h, t_end - t)
        zn = flow.advance(z, dt)
        g0 = W @ z
        g1 = W @ zn
        crossed = [i for i, g in enumerate(gs) if _crossed(g0[i], g1[i], g.direction)]
        coeffs = None
        if not crossed and gs:
            # slopes of opposite sign at both ends: look for a hidden double crossing
            d0 = W @ (flow.Ma @ z)
            d1 = W @ (flow.Ma @ zn)
            if np.any(d0 * d1 < 0):
                coeffs = flow.taylor(z, dt)
                taus = np.linspace(0.0, dt, 17)[1:-1]
                gm = _Flow.evaluate(coeffs, taus) @ W.T
                for j, tau in enumerate(taus):
                    hit = [i for i, g in enumerate(gs) if _crossed(g0[i], gm[j, i], g.direction)]
                    if hit:
                        crossed, dt = hit, tau
                        break
        if crossed:
            if coeffs is None:
                coeffs = flow.taylor(z, dt)
            best_tau, best = np.inf, None
            for i in crossed:
                w = W[i]
                tau = _root(lambda s: _Flow.evaluate(coeffs, s) @ w, 0.0, dt)
                if tau < best_tau:
                    best_tau, best = tau, gs[i]
            record_grid(coeffs, t, t + best_tau, mode, u)
            z = _Flow.evaluate(coeffs, best_tau)
            t = t + best_tau
            source, mode = mode, best.target
            u = automaton.control[mode]
            if mode in automaton.entry_maps:
                z = np.append(automaton.entry_maps[mode](z[:n]), 1.0)
            events.append(Event(t, source, mode, best.label))
            if len(events) > max_events:
                raise ZenoError(f"more than {max_events} transitions before t = {t:.6g} s")
            if t > ts[-1]:
                ts.append(t)
                xs.append(z[:n].copy())
                us.append(u)
                ms.append(mode)
            else:
                xs[-1], us[-1], ms[-1] = z[:n].copy(), u, mode
            continue
        if k_next * sample_dt <= t + dt:
            record_grid(flow.taylor(z, dt), t, t + dt, mode, u)
        z = zn
        t += dt
        if not np.max(np.abs(z[:n])) < limit:
            raise DivergenceError(f"state norm exceeded {limit:.3g} at t = {t:.6g} s")

    return SimTrace(np.array(ts), np.array(xs), np.array(us, dtype=int),
                    np.array(ms), tuple(events), surface)


@dataclass(frozen=True)
class CycleMetrics:
    T_S: float
    ripple: np.ndarray
    average: np.ndarray
    converged: bool
    modes_visited: frozenset
    periods: np.ndarray
    t_start: float = np.nan
    t_stop: float = np.nan


def measure_cycle(trace: SimTrace, rel_tol: float = 1e-3, cycles: int = 3) -> CycleMetrics:
    """Switching period and per-state ripple over the last full period.

    The period is the spacing of rising edges of u.  Steady state is declared
    when the last ``cycles`` consecutive period ratios all agree to rel_tol.
    """
    n = trace.x.shape[1]
    visited = frozenset(trace.modes_visited)
    rises = trace.rising_edges()
    periods = np.diff(rises)
    nan = np.full(n, np.nan)
    if len(trace.events) < 8 or periods.size < 2:
        return CycleMetrics(np.nan, nan, nan, False, visited, periods)
    tail = periods[-(cycles + 1):]
    converged = bool(tail.size == cycles + 1 and
                     np.all(np.abs(np.diff(tail)) <= rel_tol * tail[1:]))
    t0, t1 = rises[-2], rises[-1]
    sel = (trace.t >= t0) & (trace.t <= t1)
    X = trace.x[sel]
    ripple = X.max(axis=0) - X.min(axis=0)
    average = trapezoid(X, trace.t[sel], axis=0) / (t1 - t0)
    return CycleMetrics(float(t1 - t0), ripple, average, converged, visited, periods, t0, t1)


@dataclass(frozen=True)
class RemainderSeries:
    y: np.ndarray
    h: np.ndarray
    t: np.ndarray
    skipped: int


def record_remainder(trace: SimTrace, reduced: ReducedModel, component: int,
                     t_from: float = -np.inf) -> RemainderSeries:
    """Pairs (z_k, h*_k) of the reduced remainder along a trace.

    Samples where the sliding field is undefined are skipped and counted.
    """
    sel = trace.t >= t_from
    X = trace.x[sel]
    T = trace.t[sel]
    z = reduced.project(X)
    ok = ~singular_mask(reduced.system, reduced.surface, reduced.lift(z))
    h = np.full(z.shape, np.nan)
    if np.any(ok):
        h[ok] = reduced.remainder(z[ok])
    ok &= np.all(np.isfinite(h), axis=1)
    return RemainderSeries(z[ok, component], h[ok, component], T[ok], int(np.count_nonzero(~ok)))
