"""Space-time grids, trapezoidal weights and the weighted inner product."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[L, R] x [0, 1]`` with ``Nx`` spatial and ``Nt`` temporal intervals.

    Arrays indexed by the grid use 0-based ``[j, k]`` internally; the
    documented node ``x_j`` for 1-based ``j`` is ``x[j - 1]``.
    """

    L: float
    R: float
    Nx: int
    Nt: int

    def __post_init__(self):
        if not self.L < self.R:
            raise ValueError(f"grid requires L < R, got L={self.L}, R={self.R}")
        if int(self.Nx) != self.Nx or self.Nx < 1:
            raise ValueError(f"Nx must be a positive integer, got {self.Nx}")
        if int(self.Nt) != self.Nt or self.Nt < 1:
            raise ValueError(f"Nt must be a positive integer, got {self.Nt}")

    @property
    def dx(self) -> float:
        return (self.R - self.L) / self.Nx

    @property
    def dt(self) -> float:
        return 1.0 / self.Nt

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nx + 1, self.Nt + 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = self.L + self.dx * np.arange(self.Nx + 1)
        x[-1] = self.R
        return x

    @cached_property
    def t(self) -> np.ndarray:
        t = self.dt * np.arange(self.Nt + 1)
        t[-1] = 1.0
        return t


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class QuadratureWeights:
    wx: np.ndarray
    wt: np.ndarray

    @classmethod
    def from_grid(cls, grid: GridSpec) -> "QuadratureWeights":
        return cls(trapezoid_weights(grid.Nx, grid.dx), trapezoid_weights(grid.Nt, grid.dt))

    @cached_property
    def cell(self) -> np.ndarray:
        """Product weights ``wx_j * wt_k`` as an ``(Nx+1, Nt+1)`` array."""
        return np.outer(self.wx, self.wt)


@dataclass
class StateField:
    """Density/momentum pair on the space-time grid.

    ``data`` has shape ``(2, Nx+1, Nt+1)``; channel 0 is the density and
    channel 1 the momentum.
    """

    data: np.ndarray

    @classmethod
    def zeros(cls, grid: GridSpec) -> "StateField":
        return cls(np.zeros((2,) + grid.shape))

    @classmethod
    def from_parts(cls, rho, mom) -> "StateField":
        rho = np.asarray(rho, dtype=float)
        mom = np.asarray(mom, dtype=float)
        if rho.shape != mom.shape or rho.ndim != 2:
            raise ValueError(f"rho and mom must be 2D arrays of equal shape, got {rho.shape} and {mom.shape}")
        return cls(np.stack([rho, mom]))

    @property
    def rho(self) -> np.ndarray:
        return self.data[0]

    @property
    def mom(self) -> np.ndarray:
        return self.data[1]

    @property
    def final_slice(self) -> np.ndarray:
        return self.data[0, :, -1]

    def copy(self) -> "StateField":
        return StateField(self.data.copy())

    def __add__(self, other):
        return StateField(self.data + other.data)

    def __sub__(self, other):
        return StateField(self.data - other.data)

    def __mul__(self, alpha):
        return StateField(alpha * self.data)

    __rmul__ = __mul__


def _check(v: StateField, q: QuadratureWeights):
    expected = (2, q.wx.size, q.wt.size)
    if v.data.shape != expected:
        raise ValueError(f"field of shape {v.data.shape} does not match grid shape {expected}")


def weighted_inner_product(v: StateField, w: StateField, q: QuadratureWeights) -> float:
    _check(v, q)
    _check(w, q)
    return float(np.sum(q.cell * (v.data * w.data).sum(axis=0)))


def weighted_norm(v: StateField, q: QuadratureWeights) -> float:
    return float(np.sqrt(max(weighted_inner_product(v, v, q), 0.0)))


def gramian_apply(v: StateField, q: QuadratureWeights) -> StateField:
    _check(v, q)
    return StateField(v.data * q.cell)


def gramian_solve(v: StateField, q: QuadratureWeights) -> StateField:
    _check(v, q)
    return StateField(v.data / q.cell)
