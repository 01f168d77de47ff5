"""Compiled kernels for the primal-dual inner loop.

The numpy implementations in :mod:`dajko.action` and
:mod:`dajko.constraints` are the reference; these kernels repeat the same
arithmetic point by point. ``DAJKO_NUM_THREADS`` > 1 selects the parallel
prox sweep.
"""

from __future__ import annotations

import math
import os

import numba
import numpy as np

_C_FLOOR = 1e-14
# avoid probing an outdated TBB first
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@numba.njit(cache=True)
def largest_root(rho, mom, lam):
    p = rho + lam
    c = 0.5 * lam * mom * mom
    q = -math.sqrt(c)
    disc = (p / 3.0) ** 3 + (q / 2.0) ** 2
    if disc >= 0.0:
        C = np.cbrt(-q / 2.0 + math.sqrt(disc))
        if abs(C) < _C_FLOOR:
            lo = math.sqrt(max(-p, 0.0))
            hi = lo + np.cbrt(abs(q)) + 1.0
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid * mid * mid + p * mid + q <= 0.0:
                    lo = mid
                else:
                    hi = mid
            y = 0.5 * (lo + hi)
        else:
            D = -p / (3.0 * C)
            if p > 0.0:
                y = -q / (C * C + p / 3.0 + D * D)
            else:
                y = C + D
    else:
        r = math.sqrt(-p / 3.0)
        arg = 1.5 * q / p / r
        arg = min(1.0, max(-1.0, arg))
        y = 2.0 * r * math.cos(math.acos(arg) / 3.0)
    fy = y * y * y + p * y + q
    dfy = 3.0 * y * y + p
    if dfy > 0.0:
        step = fy / dfy
        if math.isfinite(step):
            y -= step
    return y * y + rho


@numba.njit(cache=True)
def _prox_point(z, out, j, k, lam):
    root = largest_root(z[0, j, k], z[1, j, k], lam)
    if root > 0.0:
        out[0, j, k] = root
        out[1, j, k] = root * z[1, j, k] / (root + lam)
    else:
        out[0, j, k] = 0.0
        out[1, j, k] = 0.0


@numba.njit(cache=True)
def prox_sweep_serial(z, out, lam):
    for j in range(z.shape[1]):
        for k in range(z.shape[2]):
            _prox_point(z, out, j, k, lam)


@numba.njit(cache=True, parallel=True)
def prox_sweep_parallel(z, out, lam):
    for j in numba.prange(z.shape[1]):
        for k in range(z.shape[2]):
            _prox_point(z, out, j, k, lam)


@numba.njit(cache=True)
def apply_A(u, out, sw_div, sw_t, sw_t_mass, sw_x, wx, inv_dt, inv_dx):
    Nx = u.shape[1] - 1
    Nt = u.shape[2] - 1
    r = 0
    for j in range(Nx + 1):
        for k in range(1, Nt + 1):
            if j == 0:
                dm = u[1, 1, k] - u[1, 0, k]
            elif j == Nx:
                dm = u[1, Nx, k] - u[1, Nx - 1, k]
            else:
                dm = 0.5 * (u[1, j + 1, k] - u[1, j - 1, k])
            out[r] = sw_div[j, k - 1] * ((u[0, j, k] - u[0, j, k - 1]) * inv_dt + dm * inv_dx)
            r += 1
    for k in range(Nt + 1):
        out[r + k] = sw_t[k] * u[1, 0, k]
        out[r + Nt + 1 + k] = sw_t[k] * u[1, Nx, k]
    r += 2 * (Nt + 1)
    for k in range(1, Nt + 1):
        s = 0.0
        for j in range(Nx + 1):
            s += wx[j] * u[0, j, k]
        out[r + k - 1] = sw_t_mass[k - 1] * s
    r += Nt
    for j in range(Nx + 1):
        out[r + j] = sw_x[j] * u[0, j, 0]


@numba.njit(cache=True)
def apply_AT(psi, out, sw_div, sw_t, sw_t_mass, sw_x, wx, inv_dt, inv_dx):
    Nx = out.shape[1] - 1
    Nt = out.shape[2] - 1
    out[:] = 0.0
    r = 0
    for j in range(Nx + 1):
        for k in range(1, Nt + 1):
            g = psi[r] * sw_div[j, k - 1]
            gt = g * inv_dt
            out[0, j, k] += gt
            out[0, j, k - 1] -= gt
            gx = g * inv_dx
            if j == 0:
                out[1, 1, k] += gx
                out[1, 0, k] -= gx
            elif j == Nx:
                out[1, Nx, k] += gx
                out[1, Nx - 1, k] -= gx
            else:
                out[1, j + 1, k] += 0.5 * gx
                out[1, j - 1, k] -= 0.5 * gx
            r += 1
    for k in range(Nt + 1):
        out[1, 0, k] += sw_t[k] * psi[r + k]
        out[1, Nx, k] += sw_t[k] * psi[r + Nt + 1 + k]
    r += 2 * (Nt + 1)
    for k in range(1, Nt + 1):
        s = sw_t_mass[k - 1] * psi[r + k - 1]
        for j in range(Nx + 1):
            out[0, j, k] += wx[j] * s
    r += Nt
    for j in range(Nx + 1):
        out[0, j, 0] += sw_x[j] * psi[r + j]


def num_threads() -> int:
    try:
        return max(1, int(os.environ.get("DAJKO_NUM_THREADS", "1")))
    except ValueError:
        return 1


def prox_sweep(z: np.ndarray, out: np.ndarray, lam: float) -> None:
    n = num_threads()
    if n > 1:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
        prox_sweep_parallel(z, out, lam)
    else:
        prox_sweep_serial(z, out, lam)


@numba.njit(cache=True)
def dual_update(phi, Au, sigma, b, offsets, deltas, out):
    """``out = y - sigma * proj_C(y / sigma)`` with ``y = phi + sigma * Au``, blockwise."""
    for i in range(deltas.size):
        lo = offsets[i]
        hi = offsets[i + 1]
        nrm2 = 0.0
        for r in range(lo, hi):
            d = (phi[r] + sigma * Au[r]) / sigma - b[r]
            nrm2 += d * d
        nrm = math.sqrt(nrm2)
        if not nrm <= deltas[i]:  # also routes NaN through, so divergence stays visible
            scale = deltas[i] / nrm
            for r in range(lo, hi):
                y = phi[r] + sigma * Au[r]
                out[r] = y - sigma * (scale * (y / sigma - b[r]) + b[r])
        else:
            for r in range(lo, hi):
                out[r] = 0.0


@numba.njit(cache=True)
def block_residual_norms(Au, b, offsets, out):
    for i in range(out.size):
        s = 0.0
        for r in range(offsets[i], offsets[i + 1]):
            d = Au[r] - b[r]
            s += d * d
        out[i] = math.sqrt(s)


@numba.njit(cache=True)
def weighted_sq(a, cell):
    s = 0.0
    for c in range(a.shape[0]):
        for j in range(a.shape[1]):
            for k in range(a.shape[2]):
                s += cell[j, k] * a[c, j, k] * a[c, j, k]
    return s


@numba.njit(cache=True)
def weighted_sq_diff(a, b, cell):
    s = 0.0
    for c in range(a.shape[0]):
        for j in range(a.shape[1]):
            for k in range(a.shape[2]):
                d = a[c, j, k] - b[c, j, k]
                s += cell[j, k] * d * d
    return s


INTERNAL_NONE, INTERNAL_ENTROPY, INTERNAL_POWER = 0, 1, 2


@numba.njit(cache=True)
def _internal_dd(r, kind, mexp):
    """``(U'(r), U''(r))`` for ``r > 0``."""
    if kind == INTERNAL_ENTROPY:
        return math.log(r) + 1.0, 1.0 / r
    return mexp / (mexp - 1.0) * r ** (mexp - 1.0), mexp * r ** (mexp - 2.0)


@numba.njit(cache=True)
def internal_prox_point(zr, zm, lam, kappa, kind, mexp):
    """Minimize ``lam Phi(r, m) + kappa U(r) + |(r, m) - (zr, zm)|^2 / 2``.

    Eliminating ``m = r zm / (r + lam)`` leaves the convex scalar problem
    ``h'(r) = -lam zm^2 / (2 (r + lam)^2) + kappa U'(r) + r - zr = 0``,
    solved by Newton safeguarded with a bisection bracket.
    """
    a = 0.5 * lam * zm * zm
    # power laws with U'(0) = 0 can put the minimizer on the boundary
    if kind == INTERNAL_POWER and -a / (lam * lam) - zr >= 0.0:
        return 0.0, 0.0
    lo = 0.0
    hi = max(zr, 0.0) + 1.0
    for _ in range(2000):
        d1, _d2 = _internal_dd(hi, kind, mexp)
        if -a / (hi + lam) ** 2 + kappa * d1 + hi - zr > 0.0:
            break
        lo = hi
        hi *= 2.0
    r = 0.5 * (lo + hi)
    for _ in range(200):
        if r < 1e-300:
            return 0.0, 0.0
        d1, d2 = _internal_dd(r, kind, mexp)
        g = -a / (r + lam) ** 2 + kappa * d1 + r - zr
        if g > 0.0:
            hi = r
        else:
            lo = r
        h = 2.0 * a / (r + lam) ** 3 + kappa * d2 + 1.0
        step = r - g / h
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if abs(step - r) <= 1e-15 * max(r, 1e-300) or hi - lo <= 1e-15 * hi:
            r = step
            break
        r = step
    return r, r * zm / (r + lam)


@numba.njit(cache=True)
def internal_prox_slice(z, out, k, lam, kappa, kind, mexp):
    for j in range(z.shape[1]):
        r, m = internal_prox_point(z[0, j, k], z[1, j, k], lam, kappa, kind, mexp)
        out[0, j, k] = r
        out[1, j, k] = m
