"""Hot numerical kernels: CSR matvec and preconditioned CG.

Two interchangeable implementations are provided: numba-compiled loops and a
pure-numpy path.  The active backend is chosen once at import time from the
environment variable ``ROBINOPT_BACKEND`` (``auto`` | ``numba`` | ``numpy``,
default ``auto`` = numba when importable).  Both implementations are always
importable individually so tests and benchmarks can compare them.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is normally installed
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# PCG status codes shared by both backends.
PCG_CONVERGED = 0
PCG_MAXITER = 1
PCG_NEGATIVE_CURVATURE = 2


def csr_matvec_numpy(indptr, indices, data, x):
    prod = data * x[indices]
    if prod.size == 0:
        return np.zeros(indptr.size - 1)
    out = np.add.reduceat(prod, np.minimum(indptr[:-1], prod.size - 1))
    out[np.diff(indptr) == 0] = 0.0
    return out


@njit(cache=True)
def csr_matvec_numba(indptr, indices, data, x):  # pragma: no cover - jitted
    n = indptr.size - 1
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        out[i] = s
    return out


def pcg_numpy(indptr, indices, data, invdiag, b, x0, tol, maxiter):
    """Jacobi-preconditioned CG on a CSR matrix; see pcg_numba for contract."""
    x = x0.copy()
    r = b - csr_matvec_numpy(indptr, indices, data, x)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0, PCG_CONVERGED
    if np.linalg.norm(r) <= tol * bnorm:
        return x, 0, np.linalg.norm(r) / bnorm, PCG_CONVERGED
    z = invdiag * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        ap = csr_matvec_numpy(indptr, indices, data, p)
        pap = float(p @ ap)
        if pap <= 0.0:
            return x, it, np.linalg.norm(r) / bnorm, PCG_NEGATIVE_CURVATURE
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        relres = np.linalg.norm(r) / bnorm
        if relres <= tol:
            return x, it, relres, PCG_CONVERGED
        z = invdiag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, np.linalg.norm(r) / bnorm, PCG_MAXITER


@njit(cache=True)
def pcg_numba(indptr, indices, data, invdiag, b, x0, tol, maxiter):  # pragma: no cover
    n = b.size
    x = x0.copy()
    r = np.empty(n)
    bnorm = 0.0
    for i in range(n):
        bnorm += b[i] * b[i]
    bnorm = np.sqrt(bnorm)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0, PCG_CONVERGED
    ax = csr_matvec_numba(indptr, indices, data, x)
    rn = 0.0
    for i in range(n):
        r[i] = b[i] - ax[i]
        rn += r[i] * r[i]
    rn = np.sqrt(rn)
    if rn <= tol * bnorm:
        return x, 0, rn / bnorm, PCG_CONVERGED
    z = invdiag * r
    p = z.copy()
    rz = 0.0
    for i in range(n):
        rz += r[i] * z[i]
    for it in range(1, maxiter + 1):
        ap = csr_matvec_numba(indptr, indices, data, p)
        pap = 0.0
        for i in range(n):
            pap += p[i] * ap[i]
        if pap <= 0.0:
            return x, it, rn / bnorm, PCG_NEGATIVE_CURVATURE
        alpha = rz / pap
        rn = 0.0
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * ap[i]
            rn += r[i] * r[i]
        rn = np.sqrt(rn)
        if rn <= tol * bnorm:
            return x, it, rn / bnorm, PCG_CONVERGED
        rz_new = 0.0
        for i in range(n):
            z[i] = invdiag[i] * r[i]
            rz_new += r[i] * z[i]
        beta = rz_new / rz
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        rz = rz_new
    return x, maxiter, rn / bnorm, PCG_MAXITER


def _pick_backend() -> str:
    choice = os.environ.get("ROBINOPT_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"ROBINOPT_BACKEND must be auto|numba|numpy, got {choice!r}")
    if choice == "numba" and not HAS_NUMBA:
        raise RuntimeError("ROBINOPT_BACKEND=numba but numba is not importable")
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    return choice


BACKEND = _pick_backend()

if BACKEND == "numba":
    csr_matvec = csr_matvec_numba
    pcg = pcg_numba
else:
    csr_matvec = csr_matvec_numpy
    pcg = pcg_numpy
