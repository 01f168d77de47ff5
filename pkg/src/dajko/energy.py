"""Discrete driving energies and their gradients in the weighted inner product."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import GridSpec, QuadratureWeights, StateField
from .measurements import MeasurementSpec, data_misfit_slice

ENTROPY_FLOOR = 1e-12


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyFunctional:
    """``F_h(u) = sum_j wx_j (U(u_j) + V_j u_j + 1/2 sum_i wx_i W_ij u_i u_j)``.

    ``potential`` and ``interaction`` may be ``None`` for absent terms; a
    ``None`` internal energy means ``U = 0``. ``internal_kind`` ("entropy" or
    "power" with ``internal_exponent``) identifies ``U`` for solvers that
    treat it implicitly.
    """

    U: Callable | None = None
    dU: Callable | None = None
    potential: np.ndarray | None = None
    interaction: np.ndarray | None = None
    name: str = "custom"
    internal_kind: str | None = None
    internal_exponent: float = 0.0

    def __post_init__(self):
        W = self.interaction
        if W is not None and not np.allclose(W, W.T, rtol=0, atol=0):
            raise ValueError("interaction matrix must be symmetric")

    def _internal(self, rho1, fn):
        if fn is None:
            return np.zeros_like(rho1)
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = fn(rho1)
        bad = ~np.isfinite(vals)
        if bad.any():
            j = int(np.argmax(bad))
            raise DomainError(f"{self.name}: internal energy undefined at grid index j={j + 1} (value {rho1[j]!r})")
        return vals

    def value(self, rho1, wx) -> float:
        rho1 = np.asarray(rho1, dtype=float)
        dens = self._internal(rho1, self.U)
        if self.potential is not None:
            dens = dens + self.potential * rho1
        if self.interaction is not None:
            dens = dens + 0.5 * (self.interaction @ (wx * rho1)) * rho1
        return float(np.dot(wx, dens))

    def slice_gradient(self, rho1, wx, internal: bool = True) -> np.ndarray:
        """``U'(rho1) + V + W (wx rho1)``: the derivative w.r.t. ``rho1_j`` divided by ``wx_j``.

        ``internal=False`` drops the ``U'`` term.
        """
        rho1 = np.asarray(rho1, dtype=float)
        g = self._internal(rho1, self.dU if internal else None)
        if self.potential is not None:
            g = g + self.potential
        if self.interaction is not None:
            g = g + self.interaction @ (wx * rho1)
        return g


ZERO_ENERGY = EnergyFunctional(name="zero")


def evaluate_Fh(E: EnergyFunctional, rho1, q: QuadratureWeights) -> float:
    return E.value(rho1, q.wx)


def _lift(slice_grad, q: QuadratureWeights) -> StateField:
    data = np.zeros((2, q.wx.size, q.wt.size))
    data[0, :, -1] = slice_grad / q.wt[-1]
    return StateField(data)


def grad_Fh(E: EnergyFunctional, u: StateField, q: QuadratureWeights) -> StateField:
    return _lift(E.slice_gradient(u.final_slice, q.wx), q)


@dataclass(frozen=True)
class PMEParams:
    m_exponent: float = 2.0

    def __post_init__(self):
        if not self.m_exponent >= 1:
            raise ValueError(f"porous-medium exponent must be >= 1, got {self.m_exponent}")


@dataclass(frozen=True)
class ChemoParams:
    chi: float = 2.0
    kernel_dim: int = 1

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError(f"chi must be positive, got {self.chi}")
        if int(self.kernel_dim) != self.kernel_dim or self.kernel_dim < 1:
            raise ValueError(f"kernel_dim must be a positive integer, got {self.kernel_dim}")


def entropy(u):
    u = np.asarray(u, dtype=float)
    out = np.where(u < 0, np.nan, 0.0)
    pos = u > 0
    out[pos] = u[pos] * np.log(u[pos])
    return out


def entropy_derivative(u):
    u = np.asarray(u, dtype=float)
    return np.where(u < 0, np.nan, np.log(np.maximum(u, ENTROPY_FLOOR)) + 1.0)


def pme_energy(params: PMEParams, grid: GridSpec | None = None) -> EnergyFunctional:
    m = float(params.m_exponent)
    if m == 1.0:
        return EnergyFunctional(entropy, entropy_derivative, name="pme(m=1)", internal_kind="entropy")

    def U(u):
        u = np.asarray(u, dtype=float)
        return np.where(u < 0, np.nan, np.abs(u) ** m / (m - 1.0))

    def dU(u):
        u = np.asarray(u, dtype=float)
        return np.where(u < 0, np.nan, m * np.abs(u) ** (m - 1.0) / (m - 1.0))

    return EnergyFunctional(U, dU, name=f"pme(m={m:g})", internal_kind="power", internal_exponent=m)


def log_kernel_matrix(grid: GridSpec, scale: float) -> np.ndarray:
    """``scale * log|x_i - x_j|``, with the diagonal replaced by the two-cell average of ``log|s|``."""
    x = grid.x
    diff = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(diff, 1.0)
    W = np.log(diff)
    np.fill_diagonal(W, np.log(grid.dx) - 1.0)
    return scale * W


def chemo_energy(params: ChemoParams, grid: GridSpec) -> EnergyFunctional:
    # stored W carries twice the kernel prefactor chi / (2 d pi); F_h supplies the 1/2
    scale = params.chi / (params.kernel_dim * np.pi)
    return EnergyFunctional(entropy, entropy_derivative, interaction=log_kernel_matrix(grid, scale),
                            name=f"chemotaxis(chi={params.chi:g})", internal_kind="entropy")


def combined_energy(E: EnergyFunctional, M: MeasurementSpec, rho1, q: QuadratureWeights, grid: GridSpec,
                    v=None) -> float:
    return E.value(rho1, q.wx) + data_misfit_slice(M, v, np.asarray(rho1, dtype=float), grid.x, q.wx)[0]


def combined_gradient(E: EnergyFunctional, M: MeasurementSpec, u: StateField, q: QuadratureWeights,
                      grid: GridSpec, v=None) -> StateField:
    rho1 = u.final_slice
    g = E.slice_gradient(rho1, q.wx) + data_misfit_slice(M, v, rho1, grid.x, q.wx)[1]
    return _lift(g, q)
