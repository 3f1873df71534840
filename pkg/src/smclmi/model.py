"""Switched affine systems, linear sliding surfaces and the hysteresis law.

A converter with a single controllable switch is described by

    dx/dt = A x + B + (C x + D) u,   u in {0, 1}

and is steered by a relay with hysteresis on S(x) = m.x - m5.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

CCM_ON = "CCM_ON"
CCM_OFF = "CCM_OFF"
DICM = "DICM"
DCVM = "DCVM"


def _frozen(a, shape=None, name="array"):
    arr = np.array(a, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ConfigurationError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SwitchedAffineSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = None
    state_labels: tuple = ()

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigurationError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        object.__setattr__(self, "A", _frozen(A, (n, n), "A"))
        object.__setattr__(self, "B", _frozen(self.B, (n,), "B"))
        object.__setattr__(self, "C", _frozen(self.C, (n, n), "C"))
        D = np.zeros(n) if self.D is None else self.D
        object.__setattr__(self, "D", _frozen(D, (n,), "D"))
        labels = tuple(self.state_labels) or tuple(f"x{i + 1}" for i in range(n))
        if len(labels) != n:
            raise ConfigurationError(f"{len(labels)} state labels for {n} states")
        object.__setattr__(self, "state_labels", labels)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def mode(self, u: int) -> "ModeDynamics":
        """Affine dynamics with the switch held at ``u``."""
        if u == 1:
            return ModeDynamics(CCM_ON, self.A + self.C, self.B + self.D)
        if u == 0:
            return ModeDynamics(CCM_OFF, self.A, self.B)
        raise ConfigurationError(f"u must be 0 or 1, got {u!r}")


@dataclass(frozen=True, eq=False)
class SlidingSurface:
    m: np.ndarray
    m5: float
    delta: float

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.ndim != 1:
            raise ConfigurationError("surface coefficients must be a vector")
        if not np.any(m):
            raise ConfigurationError("surface coefficients are all zero")
        object.__setattr__(self, "m", _frozen(m, name="m"))
        object.__setattr__(self, "m5", float(self.m5))
        object.__setattr__(self, "delta", float(self.delta))
        if not self.delta > 0:
            raise ConfigurationError(f"hysteresis half-width must be positive, got {self.delta}")

    @classmethod
    def through(cls, m, x_star, delta) -> "SlidingSurface":
        """Surface M(x - x*) = 0, i.e. with m5 = m.x*."""
        m = np.asarray(m, dtype=float)
        return cls(m, float(m @ np.asarray(x_star, dtype=float)), delta)

    def with_delta(self, delta) -> "SlidingSurface":
        return SlidingSurface(self.m, self.m5, delta)


@dataclass(frozen=True, eq=False)
class ModeDynamics:
    id: str
    M: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        n = M.shape[0]
        object.__setattr__(self, "M", _frozen(M, (n, n), "M"))
        object.__setattr__(self, "b", _frozen(self.b, (n,), "b"))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def augmented(self) -> np.ndarray:
        """The (n+1)x(n+1) matrix [[M, b], [0, 0]] generating the affine flow."""
        n = self.n
        out = np.zeros((n + 1, n + 1))
        out[:n, :n] = self.M
        out[:n, n] = self.b
        return out


def surface_value(surface: SlidingSurface, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != surface.m.shape[0]:
        raise ConfigurationError(
            f"state has {x.shape[-1]} components, surface has {surface.m.shape[0]}"
        )
    return x @ surface.m - surface.m5


def hysteresis_control(s_value: float, delta: float, prev_u: int) -> int:
    """Relay with dead band: on below -delta, off above +delta, hold inside.

    Values exactly on the thresholds count as inside the band.
    """
    if s_value < -delta:
        return 1
    if s_value > delta:
        return 0
    return prev_u


def mode_field(mode: ModeDynamics, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x @ mode.M.T + mode.b
