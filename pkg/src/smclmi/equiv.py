"""Equivalent control, sliding dynamics and their reduction onto the surface.

All evaluators accept a single state of shape (n,) or a batch of shape (k, n).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, EquivalentControlSingular, NoEquilibrium
from .model import SlidingSurface, SwitchedAffineSystem, surface_value

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"


def _terms(sys: SwitchedAffineSystem, surface: SlidingSurface, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != sys.n or surface.m.shape[0] != sys.n:
        raise ConfigurationError("state, system and surface dimensions disagree")
    drift = x @ sys.A.T + sys.B
    gain = x @ sys.C.T + sys.D
    num = drift @ surface.m
    den = gain @ surface.m
    scale = (np.abs(x) @ np.abs(sys.C).T + np.abs(sys.D)) @ np.abs(surface.m)
    return drift, gain, num, den, scale


def singular_mask(sys, surface, x) -> np.ndarray:
    """True where m.(Cx + D) vanishes (to rounding) and u_eq is undefined."""
    _, _, _, den, scale = _terms(sys, surface, x)
    return np.abs(den) <= 1e-13 * scale


def equivalent_control(sys: SwitchedAffineSystem, surface: SlidingSurface, x):
    """u_eq = -(m.(Cx + D))^-1 m.(Ax + B), the control that keeps dS/dt = 0."""
    _, _, num, den, scale = _terms(sys, surface, x)
    bad = np.abs(den) <= 1e-13 * scale
    if np.any(bad):
        raise EquivalentControlSingular(den if np.ndim(den) == 0 else den[bad][0])
    return -num / den


def closed_loop_field(sys: SwitchedAffineSystem, surface: SlidingSurface, x):
    drift, gain, num, den, scale = _terms(sys, surface, x)
    # where Cx + D vanishes the switch has no effect and u is irrelevant
    inert = ~np.any(gain, axis=-1)
    bad = (np.abs(den) <= 1e-13 * scale) & ~inert
    if np.any(bad):
        raise EquivalentControlSingular(den if np.ndim(den) == 0 else den[bad][0])
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(inert, 0.0, -num / den)
    return drift + gain * np.asarray(u)[..., None]


def jacobian(sys: SwitchedAffineSystem, surface: SlidingSurface, x) -> np.ndarray:
    """Exact Jacobian of the sliding vector field at a single state."""
    if not (np.any(sys.C) or np.any(sys.D)):
        return sys.A.copy()
    drift, gain, num, den, scale = _terms(sys, surface, x)
    if abs(den) <= 1e-13 * scale:
        raise EquivalentControlSingular(den)
    m = surface.m
    grad_u = -(m @ sys.A) / den + num * (m @ sys.C) / den**2
    return sys.A + sys.C * (-num / den) + np.outer(gain, grad_u)


def linearize(sys, surface, x_star, method: str = "analytic") -> np.ndarray:
    """Jacobian A1 of the closed-loop field at x_star.

    ``method="fd"`` uses central differences with h_i = max(1e-6, 1e-6 |x_i|);
    the default evaluates the closed-form derivative of the rational field.
    """
    x_star = np.asarray(x_star, dtype=float)
    if method == "analytic":
        return jacobian(sys, surface, x_star)
    if method != "fd":
        raise ConfigurationError(f"unknown linearization method {method!r}")
    n = x_star.size
    J = np.empty((n, n))
    for i in range(n):
        h = max(1e-6, 1e-6 * abs(x_star[i]))
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (closed_loop_field(sys, surface, x_star + e)
                   - closed_loop_field(sys, surface, x_star - e)) / (2 * h)
    return J


def remainder(sys, surface, x_star, A1, x):
    """h(x) = f(x) - A1 (x - x*), the exact nonlinear part of the sliding field."""
    x = np.asarray(x, dtype=float)
    return closed_loop_field(sys, surface, x) - (x - x_star) @ np.asarray(A1).T


@dataclass(frozen=True)
class EquilibriumResult:
    x_star: np.ndarray
    u_eq_star: float
    residual: float
    branch_tag: str
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.branch_tag == FEASIBLE


def classify(sys, surface, x_star, iterations=0) -> EquilibriumResult:
    x_star = np.asarray(x_star, dtype=float)
    u = float(equivalent_control(sys, surface, x_star))
    res = float(np.max(np.abs(closed_loop_field(sys, surface, x_star))))
    tag = FEASIBLE if 0.0 <= u <= 1.0 else INFEASIBLE
    return EquilibriumResult(x_star, u, res, tag, iterations)


def find_equilibrium(sys, surface, guess, tol: float = 1e-10, max_iter: int = 100) -> EquilibriumResult:
    """Levenberg-Marquardt on [f(x); S(x)] = 0.

    The sliding field has rank n-1 along the set of steady states, so the
    surface equation is appended to pin the operating point.  Residual rows
    are scaled by the row norms of the Jacobian at the guess so that the
    stopping test reads in state units.
    """
    x = np.array(guess, dtype=float)
    m = surface.m

    def resid(x):
        return np.append(closed_loop_field(sys, surface, x), surface_value(surface, x))

    def jac(x):
        return np.vstack([jacobian(sys, surface, x), m])

    try:
        J0 = jac(x)
        r = resid(x)
    except EquivalentControlSingular as exc:
        raise NoEquilibrium(f"equivalent control undefined at the initial guess {x}") from exc
    norms = np.linalg.norm(J0, axis=1)
    # rows that vanish at the guess (e.g. a state pinned by the surface) get unit-scale weight
    w = 1.0 / np.where(norms > 1e-12 * norms.max(), norms, norms.max())
    lam = 1e-3
    cost = np.sum((w * r) ** 2)
    for it in range(1, max_iter + 1):
        Jw = w[:, None] * jac(x)
        rw = w * r
        scale_x = max(1.0, np.max(np.abs(x)))
        small = np.max(np.abs(rw)) <= tol * scale_x
        # a small residual is not enough when the problem is badly scaled:
        # also require the Gauss-Newton correction to be negligible
        if small and np.max(np.abs(np.linalg.lstsq(Jw, -rw, rcond=None)[0])) <= 1e-2 * tol * scale_x:
            return classify(sys, surface, x, it - 1)
        JtJ = Jw.T @ Jw
        g = Jw.T @ rw
        while True:
            step = np.linalg.solve(JtJ + lam * np.diag(np.diag(JtJ)), -g)
            try:
                r_new = resid(x + step)
                cost_new = np.sum((w * r_new) ** 2)
            except EquivalentControlSingular:
                cost_new = np.inf
            if cost_new < cost:
                x = x + step
                r, cost = r_new, cost_new
                lam = max(lam / 5.0, 1e-12)
                break
            lam *= 4.0
            if lam > 1e12:
                if small:  # rounding floor reached
                    return classify(sys, surface, x, it)
                raise NoEquilibrium(f"stalled after {it} iterations at x = {x}")
    if np.max(np.abs(w * r)) <= tol * max(1.0, np.max(np.abs(x))):
        return classify(sys, surface, x, max_iter)
    raise NoEquilibrium(f"no convergence in {max_iter} iterations (last x = {x})")


def default_elimination(m) -> int:
    """Index of the largest |m_k|; ties go to the highest index."""
    a = np.abs(np.asarray(m, dtype=float))
    return int(np.flatnonzero(a == a.max())[-1])


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Sliding dynamics in deviation coordinates with one state eliminated."""

    A_star: np.ndarray
    eliminated_index: int
    substitution: np.ndarray
    x_star: np.ndarray
    system: SwitchedAffineSystem
    surface: SlidingSurface

    @property
    def keep(self) -> np.ndarray:
        return np.delete(np.arange(self.x_star.size), self.eliminated_index)

    @property
    def embedding(self) -> np.ndarray:
        """E with y = E z on the surface."""
        n = self.x_star.size
        E = np.zeros((n, n - 1))
        E[self.keep, np.arange(n - 1)] = 1.0
        E[self.eliminated_index] = self.substitution
        return E

    def lift(self, z):
        return self.x_star + np.asarray(z, dtype=float) @ self.embedding.T

    def project(self, x):
        """Reduced coordinates z of a (possibly off-surface) state."""
        return (np.asarray(x, dtype=float) - self.x_star)[..., self.keep]

    def field(self, z):
        try:
            f = closed_loop_field(self.system, self.surface, self.lift(z))
        except EquivalentControlSingular as exc:
            raise DomainError(f"reduced field undefined: {exc}") from exc
        return f[..., self.keep]

    def remainder(self, z):
        return self.field(z) - np.asarray(z, dtype=float) @ self.A_star.T


def reduce(sys, surface, x_star, A1=None, eliminate: int | None = None) -> ReducedModel:
    x_star = np.asarray(x_star, dtype=float)
    m = surface.m
    k = default_elimination(m) if eliminate is None else int(eliminate)
    if not 0 <= k < m.size:
        raise ConfigurationError(f"elimination index {k} out of range")
    if m[k] == 0.0:
        raise ConfigurationError(f"cannot eliminate x{k + 1}: its surface coefficient is zero")
    if A1 is None:
        A1 = linearize(sys, surface, x_star)
    keep = np.delete(np.arange(m.size), k)
    subst = -m[keep] / m[k]
    model = ReducedModel(np.zeros((m.size - 1,) * 2), k, subst, x_star, sys, surface)
    A_star = np.asarray(A1)[keep] @ model.embedding
    return ReducedModel(A_star, k, subst, x_star, sys, surface)


def remainder_reduced(model: ReducedModel, z):
    return model.remainder(z)
