"""Euclidean minimizing movements: implicit Euler, stability and nudging checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

GRAD_TOL = 1e-10


class MinimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SmoothFunctional:
    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    sup_norm_bound: float = np.inf
    hess: Callable[[np.ndarray], np.ndarray] | None = None

    def __add__(self, other: "SmoothFunctional") -> "SmoothFunctional":
        hess = None
        if self.hess is not None and other.hess is not None:
            def hess(u):
                return self.hess(u) + other.hess(u)
        return SmoothFunctional(lambda u: self.eval(u) + other.eval(u),
                                lambda u: self.grad(u) + other.grad(u),
                                self.sup_norm_bound + other.sup_norm_bound, hess)

    def scaled(self, alpha: float) -> "SmoothFunctional":
        hess = None if self.hess is None else (lambda u: alpha * self.hess(u))
        return SmoothFunctional(lambda u: alpha * self.eval(u), lambda u: alpha * self.grad(u),
                                abs(alpha) * self.sup_norm_bound, hess)


def zero_functional(d: int) -> SmoothFunctional:
    return SmoothFunctional(lambda u: 0.0, lambda u: np.zeros(d), 0.0, lambda u: np.zeros((d, d)))


def quadratic(Q, b) -> SmoothFunctional:
    """``1/2 u^T Q u + b^T u`` (unbounded, so ``sup_norm_bound`` is infinite)."""
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float)
    return SmoothFunctional(lambda u: 0.5 * u @ Q @ u + b @ u, lambda u: Q @ u + b, np.inf, lambda u: Q)


def gaussian_bumps(amplitudes, centres, widths) -> SmoothFunctional:
    """``sum_i a_i exp(-|u - c_i|^2 / (2 s_i^2))``; for ``a_i >= 0`` it takes values in ``[0, sum a_i]``."""
    a = np.asarray(amplitudes, dtype=float)
    c = np.atleast_2d(np.asarray(centres, dtype=float))
    s2 = np.asarray(widths, dtype=float) ** 2

    def parts(u):
        diff = u[None, :] - c
        e = a * np.exp(-0.5 * (diff * diff).sum(axis=1) / s2)
        return diff, e

    def ev(u):
        return float(parts(np.asarray(u, dtype=float))[1].sum())

    def gr(u):
        diff, e = parts(np.asarray(u, dtype=float))
        return -((e / s2)[:, None] * diff).sum(axis=0)

    def he(u):
        diff, e = parts(np.asarray(u, dtype=float))
        d = diff.shape[1]
        H = np.zeros((d, d))
        for di, ei, si in zip(diff, e, s2):
            H += ei / si * (np.outer(di, di) / si - np.eye(d))
        return H

    return SmoothFunctional(ev, gr, float(np.abs(a).sum()), he)


def _minimize(objective, gradient, hessian, x0, what: str) -> np.ndarray:
    res = minimize(objective, x0, jac=gradient, method="BFGS", options={"gtol": 1e-12, "maxiter": 10_000})
    x = res.x
    if hessian is not None:
        # Newton polish: BFGS stalls on precision loss just above the target
        for _ in range(20):
            g = gradient(x)
            if np.linalg.norm(g) <= GRAD_TOL:
                break
            x = x - np.linalg.solve(hessian(x), g)
    gnorm = float(np.linalg.norm(gradient(x)))
    if not gnorm <= GRAD_TOL * max(1.0, float(np.linalg.norm(x))):
        raise MinimizationError(f"{what}: gradient norm {gnorm:.3e} above tolerance ({res.message})")
    return x


def mm_step(u_prev, F: SmoothFunctional, tau: float) -> np.ndarray:
    """``argmin_u F(u) + |u - u_prev|^2 / (2 tau)``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    u_prev = np.asarray(u_prev, dtype=float)
    d = u_prev.size
    hess = None if F.hess is None else (lambda u: F.hess(u) + np.eye(d) / tau)
    return _minimize(lambda u: F.eval(u) + 0.5 * np.sum((u - u_prev) ** 2) / tau,
                     lambda u: F.grad(u) + (u - u_prev) / tau, hess, u_prev.copy(), "mm_step")


def implicit_euler_residual(u_prev, u_next, F: SmoothFunctional, tau: float) -> float:
    u_prev = np.asarray(u_prev, dtype=float)
    u_next = np.asarray(u_next, dtype=float)
    return float(np.linalg.norm(u_next - u_prev + tau * F.grad(u_next)))


def stability_gap(F1: SmoothFunctional, F2: SmoothFunctional, u1, u2, tau: float,
                  delta_F: float) -> tuple[float, float]:
    """One step from ``u1`` under ``F1`` and from ``u2`` under ``F2``.

    Returns ``(|u1' - u2'|^2, 9 |u1 - u2|^2 + 8 tau delta_F + 4 tau (|F1|_sup + |F2|_sup))``.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    n1 = mm_step(u1, F1, tau)
    n2 = mm_step(u2, F2, tau)
    lhs = float(np.sum((n1 - n2) ** 2))
    rhs = 9.0 * float(np.sum((u1 - u2) ** 2)) + 8.0 * tau * delta_F \
        + 4.0 * tau * (F1.sup_norm_bound + F2.sup_norm_bound)
    return lhs, rhs


def nudged_step(u_prev, F: SmoothFunctional, tau: float, theta: float, B, v) -> np.ndarray:
    """``argmin_u F(u) + |u - u_prev|^2 / (2 tau) + |B u - v|^2 / (2 tau theta)``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    u_prev = np.asarray(u_prev, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    v = np.asarray(v, dtype=float)
    d = u_prev.size
    c = 1.0 / (tau * theta)
    BtB = B.T @ B
    hess = None if F.hess is None else (lambda u: F.hess(u) + np.eye(d) / tau + c * BtB)
    return _minimize(lambda u: F.eval(u) + 0.5 * np.sum((u - u_prev) ** 2) / tau + 0.5 * c * np.sum((B @ u - v) ** 2),
                     lambda u: F.grad(u) + (u - u_prev) / tau + c * (B.T @ (B @ u - v)),
                     hess, u_prev.copy(), "nudged_step")


def nudging_residual(u_prev, u_next, F: SmoothFunctional, tau: float, theta: float, B, v) -> float:
    """Stationarity residual ``|u' - u + tau grad F(u') + B^T (B u' - v) / theta|``."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    u_next = np.asarray(u_next, dtype=float)
    return float(np.linalg.norm(u_next - np.asarray(u_prev) + tau * F.grad(u_next)
                                + B.T @ (B @ u_next - np.asarray(v)) / theta))


def random_bump_functional(rng: np.random.Generator, d: int, n_bumps: int = 3) -> SmoothFunctional:
    return gaussian_bumps(rng.uniform(0.1, 1.0, n_bumps), rng.uniform(-1.0, 1.0, (n_bumps, d)),
                          rng.uniform(0.5, 1.5, n_bumps))


@dataclass
class SuiteReport:
    name: str
    passed: int
    failed: int
    worst: float

    @property
    def ok(self) -> bool:
        return self.failed == 0


def stability_suite(n: int = 1000, seed: int = 0) -> SuiteReport:
    """Randomized check of the stability estimate over d in {1, 2, 5}, tau in {1e-3, 1e-2, 1e-1}."""
    rng = np.random.default_rng(seed)
    failed = 0
    worst = -np.inf
    for i in range(n):
        d = (1, 2, 5)[i % 3]
        tau = (1e-3, 1e-2, 1e-1)[(i // 3) % 3]
        F1 = random_bump_functional(rng, d)
        eps = (0.0, 1e-3, 1e-2, 1e-1)[(i // 9) % 4]
        F2 = F1 + random_bump_functional(rng, d, 1).scaled(eps) if eps else F1
        delta_F = F2.sup_norm_bound - F1.sup_norm_bound if eps else 0.0
        u1 = rng.uniform(-1.5, 1.5, d)
        u2 = u1 + rng.normal(scale=rng.choice([1e-3, 1e-1, 1.0]), size=d)
        lhs, rhs = stability_gap(F1, F2, u1, u2, tau, delta_F)
        worst = max(worst, lhs - rhs)
        failed += lhs > rhs
    return SuiteReport("stability", n - failed, failed, worst)


def implicit_euler_suite(n: int = 100, seed: int = 1, tol: float = 1e-8) -> SuiteReport:
    """``mm_step`` on random convex quadratics: stationarity residual and linear-solve agreement."""
    rng = np.random.default_rng(seed)
    failed = 0
    worst = 0.0
    for i in range(n):
        d = int(rng.integers(1, 8))
        G = rng.normal(size=(d, d))
        Q = G @ G.T + 0.1 * np.eye(d)
        b = rng.normal(size=d)
        tau = float(rng.choice([1e-3, 1e-2, 1e-1, 1.0]))
        u_prev = rng.normal(size=d)
        F = quadratic(Q, b)
        u_next = mm_step(u_prev, F, tau)
        exact = np.linalg.solve(np.eye(d) + tau * Q, u_prev - tau * b)
        res = implicit_euler_residual(u_prev, u_next, F, tau) / (1.0 + np.linalg.norm(u_prev))
        err = np.linalg.norm(u_next - exact) / (1.0 + np.linalg.norm(exact))
        worst = max(worst, res, err)
        failed += not (res <= tol and err <= tol)
    return SuiteReport("implicit-euler", n - failed, failed, worst)


def nudging_suite(n: int = 100, seed: int = 2) -> SuiteReport:
    """``F = 0, B = I`` against the weighted average ``(theta u + v) / (theta + 1)``."""
    rng = np.random.default_rng(seed)
    failed = 0
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(1, 6))
        theta = float(10 ** rng.uniform(-2, 2))
        u_prev = rng.normal(size=d)
        v = rng.normal(size=d)
        got = nudged_step(u_prev, zero_functional(d), 1.0, theta, np.eye(d), v)
        err = float(np.max(np.abs(got - (theta * u_prev + v) / (theta + 1.0))))
        worst = max(worst, err)
        failed += err > 1e-12
    return SuiteReport("nudging", n - failed, failed, worst)
