"""Numerical kernels for the focal-field accumulation.

Two interchangeable implementations of the same reduction are provided:

* a numba ``@njit(parallel=True)`` kernel that parallelizes over transverse
  grid nodes, and
* a pure-numpy fallback.

Both evaluate the identical sum in the identical (theta-outer, phi-inner,
z-inner) order, so each backend is deterministic: results do not depend on
the number of threads, because every output element is reduced by exactly
one worker in a fixed order.  The two backends agree to floating-point
rounding (~1e-14 relative), not bit-exactly.

Selection is controlled by the ``COTF_BACKEND`` environment variable:
``auto`` (default; numba if importable, else numpy), ``numba``, ``numpy``.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return wrap


ENV_VAR = "COTF_BACKEND"


def resolve_backend(requested: str | None = None) -> str:
    """Return the concrete backend name ("numba" or "numpy") to use.

    ``requested`` overrides the environment variable; invalid names or an
    explicit request for an unavailable backend raise.
    """
    name = requested if requested is not None else os.environ.get(ENV_VAR, "auto")
    name = name.strip().lower()
    if name not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}; expected auto, numba, or numpy")
    if name == "auto":
        return "numba" if HAVE_NUMBA else "numpy"
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested via COTF_BACKEND but numba is not importable")
    return name


@njit(parallel=True, cache=True)
def _accumulate_numba(x, y, kst, weights, cos_phi, sin_phi, zph, out):  # pragma: no cover - compiled
    nx = x.size
    ny = y.size
    n_theta = kst.size
    n_phi = cos_phi.size
    nz = zph.shape[1]
    for p in prange(nx * ny):
        ix = p // ny
        iy = p % ny
        xv = x[ix]
        yv = y[iy]
        for it in range(n_theta):
            sre = 0.0
            sim = 0.0
            for ip in range(n_phi):
                arg = -kst[it] * (xv * cos_phi[ip] + yv * sin_phi[ip])
                sre += math.cos(arg)
                sim += math.sin(arg)
            w = weights[it]
            ws = complex(w * sre, w * sim)
            for iz in range(nz):
                out[ix, iy, iz] += ws * zph[it, iz]


def _accumulate_numpy(x, y, kst, weights, cos_phi, sin_phi, zph, out):
    # Same reduction order as the numba kernel: theta outer, phi summed
    # first, then the axial phasor applied.  No BLAS call appears here, so
    # the summation order is fixed regardless of threading configuration.
    for it in range(kst.size):
        phase = -kst[it] * (
            x[:, None, None] * cos_phi[None, None, :]
            + y[None, :, None] * sin_phi[None, None, :]
        )
        p = np.exp(1j * phase).sum(axis=-1)
        out += (weights[it] * p)[:, :, None] * zph[it][None, None, :]


def accumulate_field(x, y, z, theta, theta_weights, phi, k, backend: str | None = None):
    """Evaluate sum_theta sum_phi w(theta) e^{-i k s.r} on the tensor grid.

    ``theta_weights`` are the full per-node quadrature weights (apodization
    and solid-angle factors included).  Returns the complex accumulation
    before any overall prefactor.
    """
    name = resolve_backend(backend)
    kst = np.ascontiguousarray(k * np.sin(theta))
    weights = np.ascontiguousarray(theta_weights)
    cos_phi = np.cos(phi)
    sin_phi = np.sin(phi)
    # Axial phasors are precomputed once, outside the parallel region.
    zph = np.exp(-1j * k * np.cos(theta)[:, None] * z[None, :])
    out = np.zeros((x.size, y.size, z.size), dtype=np.complex128)
    if name == "numba":
        _accumulate_numba(
            np.ascontiguousarray(x),
            np.ascontiguousarray(y),
            kst,
            weights,
            np.ascontiguousarray(cos_phi),
            np.ascontiguousarray(sin_phi),
            np.ascontiguousarray(zph),
            out,
        )
    else:
        _accumulate_numpy(x, y, kst, weights, cos_phi, sin_phi, zph, out)
    return out
