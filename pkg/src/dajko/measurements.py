"""Moment observations of the final density slice and the data term."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import GridSpec, QuadratureWeights, StateField


class ConfigurationError(ValueError):
    pass


@dataclass
class MeasurementSpec:
    """Which moments are observed, the penalty weight and the data values.

    ``data_sequence[n - 1]`` is the observation vector used by the step
    that produces the profile at time ``n * tau``. Observation vectors list
    the expectation first, then the variance.
    """

    use_expectation: bool = False
    use_variance: bool = False
    theta: float = np.inf
    data_sequence: list = field(default_factory=list)

    def __post_init__(self):
        if not self.theta > 0:
            raise ConfigurationError(f"theta must be positive, got {self.theta}")
        self.data_sequence = [np.atleast_1d(np.asarray(v, dtype=float)) for v in self.data_sequence]
        for n, v in enumerate(self.data_sequence, start=1):
            if v.shape != (self.n_obs,):
                raise ConfigurationError(f"observation {n} has {v.size} values, expected {self.n_obs}")

    @property
    def enabled(self) -> bool:
        return self.use_expectation or self.use_variance

    @property
    def n_obs(self) -> int:
        return int(self.use_expectation) + int(self.use_variance)

    def data_for_step(self, n: int) -> np.ndarray | None:
        """Data for the step that produces the profile ``n + 1`` (1-based ``n``)."""
        if not self.enabled:
            return None
        if n > len(self.data_sequence):
            raise ConfigurationError(f"no observation data for JKO step {n}")
        return self.data_sequence[n - 1]


NO_DATA = MeasurementSpec()


def _moments(rho1, x, wx):
    b1 = float(np.dot(wx * x, rho1))
    b2 = float(np.dot(wx * (x - b1) ** 2, rho1))
    return b1, b2


def observe_expectation(rho1, grid: GridSpec, q: QuadratureWeights) -> float:
    return float(np.dot(q.wx * grid.x, np.asarray(rho1, dtype=float)))


def observe_variance(rho1, grid: GridSpec, q: QuadratureWeights) -> float:
    return _moments(np.asarray(rho1, dtype=float), grid.x, q.wx)[1]


def observe(M: MeasurementSpec, rho1, grid: GridSpec, q: QuadratureWeights) -> np.ndarray:
    b1, b2 = _moments(np.asarray(rho1, dtype=float), grid.x, q.wx)
    return np.array([b for b, on in ((b1, M.use_expectation), (b2, M.use_variance)) if on])


def expectation_slice_gradient(rho1, x, wx) -> np.ndarray:
    """Derivative of the expectation w.r.t. ``rho1_j``, divided by ``wx_j``."""
    return np.array(x, dtype=float)


def variance_slice_gradient(rho1, x, wx) -> np.ndarray:
    """Derivative of the variance w.r.t. ``rho1_j``, divided by ``wx_j``."""
    b1 = float(np.dot(wx * x, rho1))
    centred = float(np.dot(wx * (x - b1), rho1))
    return (x - b1) ** 2 - 2.0 * x * centred


def _lift(slice_grad, grid: GridSpec, q: QuadratureWeights) -> StateField:
    u = StateField.zeros(grid)
    u.data[0, :, -1] = slice_grad / q.wt[-1]
    return u


def grad_observe_expectation(u: StateField, grid: GridSpec, q: QuadratureWeights) -> StateField:
    return _lift(expectation_slice_gradient(u.final_slice, grid.x, q.wx), grid, q)


def grad_observe_variance(u: StateField, grid: GridSpec, q: QuadratureWeights) -> StateField:
    return _lift(variance_slice_gradient(u.final_slice, grid.x, q.wx), grid, q)


def data_misfit_slice(M: MeasurementSpec, v, rho1, x, wx) -> tuple[float, np.ndarray]:
    """Data term ``|B(rho1) - v|^2 / (2 theta)`` and its slice gradient (divided by ``wx``)."""
    if not M.enabled:
        return 0.0, np.zeros_like(rho1)
    if v is None:
        raise ConfigurationError("observation data missing for an enabled measurement")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (M.n_obs,):
        raise ConfigurationError(f"expected {M.n_obs} observation values, got {v.size}")
    b1, b2 = _moments(rho1, x, wx)
    values, grads = [], []
    if M.use_expectation:
        values.append(b1)
        grads.append(expectation_slice_gradient(rho1, x, wx))
    if M.use_variance:
        values.append(b2)
        grads.append(variance_slice_gradient(rho1, x, wx))
    r = np.array(values) - v
    value = 0.5 * float(r @ r) / M.theta
    grad = sum(ri * g for ri, g in zip(r, grads)) / M.theta
    return value, grad


def make_data_sequence(ground_truth: Callable[[float], np.ndarray], tau: float, n_jko: int,
                       grid: GridSpec, q: QuadratureWeights, use_expectation=True, use_variance=False) -> list:
    """Observe ``ground_truth(n * tau)`` for ``n = 1 .. n_jko - 1``."""
    M = MeasurementSpec(use_expectation, use_variance)
    return [observe(M, ground_truth(n * tau), grid, q) for n in range(1, n_jko)]


def add_noise(data: Sequence, noise_sigma: float, seed: int) -> list:
    rng = np.random.default_rng(seed)
    return [np.asarray(v, dtype=float) + noise_sigma * rng.standard_normal(np.shape(v)) for v in data]
