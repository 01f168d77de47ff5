"""Benamou-Brenier action and its pointwise proximal map."""

from __future__ import annotations

import numpy as np

from .grid import QuadratureWeights, StateField

_C_FLOOR = 1e-14


def phi(rho, mom):
    """Kinetic energy density ``m^2 / (2 rho)`` with its lower semicontinuous extension."""
    rho = np.asarray(rho, dtype=float)
    mom = np.asarray(mom, dtype=float)
    out = np.full(np.broadcast(rho, mom).shape, np.inf)
    pos = rho > 0
    np.divide(mom * mom, 2.0 * rho, out=out, where=pos)
    out[(rho == 0) & (mom == 0)] = 0.0
    return out


def discrete_action(u: StateField, q: QuadratureWeights, fixed_first_momentum: bool = True) -> float:
    """Trapezoidal sum of ``phi`` over the space-time grid.

    With ``fixed_first_momentum`` the momentum of the first time slice is not
    an unknown of the problem and is left out of the sum.
    """
    mom = u.mom
    if fixed_first_momentum:
        mom = mom.copy()
        mom[:, 0] = 0.0
    vals = phi(u.rho, mom)
    if np.isinf(vals).any():
        return float("inf")
    return float(np.sum(q.cell * vals))


def _bisect_largest_root(p, q, lo, hi, iters=200):
    # f(y) = y^3 + p y + q is increasing on [lo, inf) with f(lo) <= 0
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = mid * mid * mid + p * mid + q <= 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def cardano_largest_root(rho, mom, lam):
    """Largest real root of ``(x - rho) (x + lam)^2 - lam m^2 / 2``.

    With ``z = x - rho``, ``p = rho + lam``, ``c = lam m^2 / 2`` the root
    satisfies ``z (z + p)^2 = c`` with ``z >= max(0, -p)``. Substituting
    ``y = sqrt(z)`` gives the depressed cubic ``y^3 + p y - sqrt(c) = 0``
    whose largest real root is the one sought.
    """
    rho, mom, lam = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (rho, mom, lam)))
    scalar = rho.ndim == 0
    rho, mom, lam = (np.atleast_1d(a).astype(float) for a in (rho, mom, lam))
    p = rho + lam
    c = 0.5 * lam * mom * mom
    q = -np.sqrt(c)
    disc = (p / 3.0) ** 3 + (q / 2.0) ** 2
    y = np.empty_like(p)

    one = disc >= 0
    if one.any():
        pp, qq, dd = p[one], q[one], disc[one]
        C = np.cbrt(-qq / 2.0 + np.sqrt(dd))
        with np.errstate(divide="ignore", invalid="ignore"):
            D = -pp / (3.0 * C)
            # y = C + D; for p > 0 the sum cancels, use y (C^2 - C D + D^2) = -q instead
            y_direct = C + D
            y_stable = -qq / (C * C + pp / 3.0 + D * D)
        yy = np.where(pp > 0, y_stable, y_direct)
        tiny = np.abs(C) < _C_FLOOR
        if tiny.any():
            lo = np.sqrt(np.maximum(-pp[tiny], 0.0))
            hi = lo + np.cbrt(np.abs(qq[tiny])) + 1.0
            yy[tiny] = _bisect_largest_root(pp[tiny], qq[tiny], lo, hi)
        y[one] = yy

    three = ~one
    if three.any():
        # three real roots (only possible for p < 0); trigonometric form
        pp, qq = p[three], q[three]
        r = np.sqrt(-pp / 3.0)
        arg = np.clip(1.5 * qq / pp / r, -1.0, 1.0)
        y[three] = 2.0 * r * np.cos(np.arccos(arg) / 3.0)

    # one Newton polish; f' > 0 at the largest root except in the q = p = 0 corner
    fy = y * y * y + p * y + q
    dfy = 3.0 * y * y + p
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(dfy > 0, fy / dfy, 0.0)
    y = y - np.where(np.isfinite(step), step, 0.0)

    out = y * y + rho
    return float(out[0]) if scalar else out


def prox_action_arrays(rho, mom, lam):
    """Vectorized ``prox_{lam phi}``; returns ``(rho*, m*)`` with ``rho* >= 0``."""
    root = cardano_largest_root(rho, mom, lam)
    pos = root > 0
    rho_new = np.where(pos, root, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        mom_new = np.where(pos, root * mom / (root + lam), 0.0)
    return rho_new, mom_new


def prox_action_pointwise(rho: float, mom: float, lam: float) -> tuple[float, float]:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    r, m = prox_action_arrays(np.array([rho]), np.array([mom]), lam)
    return float(r[0]), float(m[0])


def prox_action_field(u: StateField, lam: float, fixed_first_momentum: bool = True) -> StateField:
    """Apply the pointwise prox at every grid point.

    When the first-slice momentum is fixed, those entries are copied through
    and the first-slice densities are prox-ed with zero momentum.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    mom = u.mom
    if fixed_first_momentum:
        mom = mom.copy()
        mom[:, 0] = 0.0
    rho_new, mom_new = prox_action_arrays(u.rho, mom, lam)
    if fixed_first_momentum:
        mom_new[:, 0] = u.mom[:, 0]
    return StateField(np.stack([rho_new, mom_new]))


def prox_action_internal_pointwise(rho: float, mom: float, lam: float, kappa: float, kind: str,
                                   exponent: float = 0.0) -> tuple[float, float]:
    """``prox`` of ``lam phi + kappa U`` for ``U`` = entropy (``kind="entropy"``) or ``r^m / (m - 1)`` ("power")."""
    from . import _kernels

    if lam <= 0 or kappa < 0:
        raise ValueError("need lam > 0 and kappa >= 0")
    code = {"entropy": _kernels.INTERNAL_ENTROPY, "power": _kernels.INTERNAL_POWER}[kind]
    r, m = _kernels.internal_prox_point(float(rho), float(mom), float(lam), float(kappa), code, float(exponent))
    return float(r), float(m)
