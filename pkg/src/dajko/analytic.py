"""Closed-form profiles: Barenblatt solutions and the two-bump Gaussian."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .energy import DomainError
from .grid import GridSpec, QuadratureWeights


@dataclass(frozen=True)
class BarenblattParams:
    m: float = 2.0
    C: float = (3.0 / 16.0) ** (1.0 / 3.0)
    t0: float = 1e-3

    def __post_init__(self):
        if not self.m > 1:
            raise ValueError(f"Barenblatt profile needs m > 1, got {self.m}")
        if not (self.C > 0 and self.t0 > 0):
            raise ValueError("Barenblatt constants C and t0 must be positive")


def barenblatt(x, t, p: BarenblattParams):
    """Self-similar porous-medium solution ``u_b(x, t)``."""
    s = t + p.t0
    if np.any(np.asarray(s) <= 0):
        raise ValueError("barenblatt requires t + t0 > 0")
    m = p.m
    x = np.asarray(x, dtype=float)
    core = p.C - (m - 1.0) / (2.0 * m * (m + 1.0)) * x * x * s ** (-2.0 / (m + 1.0))
    out = s ** (-1.0 / (m + 1.0)) * np.maximum(core, 0.0) ** (1.0 / (m - 1.0))
    return float(out) if out.ndim == 0 else out


def support_radius(t, p: BarenblattParams) -> float:
    m = p.m
    return float(np.sqrt(p.C * 2.0 * m * (m + 1.0) / (m - 1.0)) * (t + p.t0) ** (1.0 / (m + 1.0)))


def shifted_barenblatt_profile(grid: GridSpec, p: BarenblattParams, x_shift: float = 0.0,
                               t_shift: float = 0.0) -> np.ndarray:
    return barenblatt(grid.x - x_shift, t_shift, p)


def gaussian_two_bump(grid: GridSpec, eta: float = 0.2) -> np.ndarray:
    """``G(x - 1/3) + G(x + 1/3)`` with ``G(x) = exp(-x^2 / eta^2) / (2 pi eta^2)``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    x = grid.x

    def G(s):
        return np.exp(-s * s / eta**2) / (2.0 * np.pi * eta**2)

    return G(x - 1.0 / 3.0) + G(x + 1.0 / 3.0)


def discrete_mass(profile, q: QuadratureWeights) -> float:
    return float(np.dot(q.wx, profile))


def barenblatt_mass(p: BarenblattParams, grid: GridSpec, q: QuadratureWeights, t: float = 0.0,
                    x_shift: float = 0.0) -> float:
    """Trapezoidal mass of the Barenblatt profile at time ``t``; warns if the support leaves the domain."""
    r = support_radius(t, p)
    if x_shift - r < grid.L or x_shift + r > grid.R:
        warnings.warn(f"Barenblatt support [{x_shift - r:.4g}, {x_shift + r:.4g}] is truncated by "
                      f"[{grid.L}, {grid.R}]", RuntimeWarning, stacklevel=2)
    return discrete_mass(shifted_barenblatt_profile(grid, p, x_shift, t), q)


def scale_to_mass(profile, target_mass: float, q: QuadratureWeights) -> np.ndarray:
    profile = np.asarray(profile, dtype=float)
    mass = discrete_mass(profile, q)
    if not mass > 0:
        raise DomainError(f"cannot rescale a profile with mass {mass}")
    return profile * (target_mass / mass)
