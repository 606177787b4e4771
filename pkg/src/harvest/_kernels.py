"""Time-stepping kernels for the delayed-system Monte Carlo integrator.

Two interchangeable lanes produce bit-identical trajectories: a compiled
per-trajectory kernel (numba) and a vectorized kernel (numpy) that steps the
whole ensemble in lockstep.  Both consume the same pregenerated standard-normal
streams and apply the same floating-point operations in the same order, so
their outputs agree to the last bit.  The lane is chosen at import time;
setting the environment variable HARVEST_NO_NUMBA=1 forces the numpy lane.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


USE_NUMBA = _HAVE_NUMBA and os.environ.get("HARVEST_NO_NUMBA", "") not in (
    "1",
    "true",
    "yes",
)

# Store nothing, the displacement only, or displacement/velocity/voltage.
STORE_NONE = 0
STORE_X = 1
STORE_XVV = 2

DIVERGENCE_LIMIT = 1.0e3


@njit(cache=True)
def _chunk_scalar(
    x,
    v,
    V,
    xi,
    xbuf,
    vbuf,
    s0,
    n,
    forcing,
    draws,
    dt,
    beta,
    delta1,
    delta3,
    kappa,
    alpha,
    mu,
    nu,
    k1,
    f1,
    k2,
    f2,
    E_ou,
    S_ou,
    skip,
    hist,
    x_min,
    dx,
    nx,
    v_min,
    dv,
    nv,
    acc,
    series,
    store,
):
    """Advance one trajectory by n Euler steps; returns (x, v, V, xi, alive)."""
    L = xbuf.shape[0]
    for i in range(n):
        s = s0 + i
        j = s % L
        xbuf[j] = x
        vbuf[j] = v
        j1 = (s - k1) % L
        j1m = (s - k1 - 1) % L
        xd = xbuf[j1] * (1.0 - f1) + xbuf[j1m] * f1
        j2 = (s - k2) % L
        j2m = (s - k2 - 1) % L
        vd = vbuf[j2] * (1.0 - f2) + vbuf[j2m] * f2
        drive = xi + forcing[i]
        if s >= skip:
            acc[0] += v * drive
            acc[1] += V * V
            acc[2] += 1.0
            ix = int(np.floor((x - x_min) / dx))
            iv = int(np.floor((v - v_min) / dv))
            if 0 <= ix < nx and 0 <= iv < nv:
                hist[ix, iv] += 1
            if store >= STORE_X:
                series[0, s - skip] = x
            if store == STORE_XVV:
                series[1, s - skip] = v
                series[2, s - skip] = V
        a = (
            -beta * v
            + delta1 * x
            - delta3 * x * x * x
            - kappa * V
            + mu * xd
            + nu * vd
            + drive
        )
        # semi-implicit step: position advances with the updated velocity,
        # which avoids the secular energy injection of the fully explicit form
        V = V + dt * (v - alpha * V)
        v = v + dt * a
        x = x + dt * v
        xi = xi * E_ou + S_ou * draws[i]
        if abs(x) > DIVERGENCE_LIMIT:
            return x, v, V, xi, False
    return x, v, V, xi, True


def _chunk_batch(
    x,
    v,
    V,
    xi,
    alive,
    xbuf,
    vbuf,
    s0,
    n,
    forcing,
    draws,
    dt,
    beta,
    delta1,
    delta3,
    kappa,
    alpha,
    mu,
    nu,
    k1,
    f1,
    k2,
    f2,
    E_ou,
    S_ou,
    skip,
    hist,
    x_min,
    dx,
    nx,
    v_min,
    dv,
    nv,
    acc,
    series,
    store,
):
    """Lockstep version of _chunk_scalar over the whole ensemble.

    State arrays have shape (m,), buffers (m, L), draws (m, n), acc (m, 3),
    series (m, 3 or 1, n_post).  Mutates everything in place.
    """
    L = xbuf.shape[1]
    for i in range(n):
        s = s0 + i
        j = s % L
        xbuf[alive, j] = x[alive]
        vbuf[alive, j] = v[alive]
        j1 = (s - k1) % L
        j1m = (s - k1 - 1) % L
        xd = xbuf[:, j1] * (1.0 - f1) + xbuf[:, j1m] * f1
        j2 = (s - k2) % L
        j2m = (s - k2 - 1) % L
        vd = vbuf[:, j2] * (1.0 - f2) + vbuf[:, j2m] * f2
        drive = xi + forcing[i]
        if s >= skip:
            acc[alive, 0] += (v * drive)[alive]
            acc[alive, 1] += (V * V)[alive]
            acc[alive, 2] += 1.0
            ix = np.floor((x - x_min) / dx).astype(np.int64)
            iv = np.floor((v - v_min) / dv).astype(np.int64)
            ok = alive & (ix >= 0) & (ix < nx) & (iv >= 0) & (iv < nv)
            np.add.at(hist, (ix[ok], iv[ok]), 1)
            if store >= STORE_X:
                series[alive, 0, s - skip] = x[alive]
            if store == STORE_XVV:
                series[alive, 1, s - skip] = v[alive]
                series[alive, 2, s - skip] = V[alive]
        a = (
            -beta * v
            + delta1 * x
            - delta3 * x * x * x
            - kappa * V
            + mu * xd
            + nu * vd
            + drive
        )
        np.copyto(V, V + dt * (v - alpha * V), where=alive)
        np.copyto(v, v + dt * a, where=alive)
        np.copyto(x, x + dt * v, where=alive)
        np.copyto(xi, xi * E_ou + S_ou * draws[:, i], where=alive)
        alive &= np.abs(x) <= DIVERGENCE_LIMIT
