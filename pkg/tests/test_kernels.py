"""Both kernel backends must agree bit-for-bit in exact arithmetic terms."""

import numpy as np
import pytest

import robinopt as ro
from robinopt import _kernels


def _system(n=60, seed=0):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    A = B @ B.T + n * np.eye(n)
    rows, cols = np.nonzero(A)
    sp = ro.assembly.csr_from_coo(n, rows, cols, A[rows, cols])
    return sp, rng.standard_normal(n)


def test_matvec_backends_agree():
    A, x = _system()
    y_np = _kernels.csr_matvec_numpy(A.indptr, A.indices, A.data, x)
    assert np.allclose(y_np, A.toarray() @ x, rtol=1e-13)
    if _kernels.HAS_NUMBA:
        y_nb = _kernels.csr_matvec_numba(A.indptr, A.indices, A.data, x)
        assert np.allclose(y_nb, y_np, rtol=1e-14, atol=1e-14)


def test_pcg_backends_agree():
    A, b = _system(80, seed=3)
    invdiag = 1.0 / A.diagonal()
    x0 = np.zeros(80)
    xs = []
    impls = [_kernels.pcg_numpy]
    if _kernels.HAS_NUMBA:
        impls.append(_kernels.pcg_numba)
    for impl in impls:
        x, iters, relres, status = impl(
            A.indptr, A.indices, A.data, invdiag, b, x0, 1e-12, 1000
        )
        assert status == _kernels.PCG_CONVERGED
        assert relres <= 1e-12
        xs.append(x)
    if len(xs) == 2:
        assert np.allclose(xs[0], xs[1], rtol=1e-10, atol=1e-12)


def test_pcg_flags_negative_curvature():
    A = ro.assembly.csr_from_coo(2, [0, 1], [0, 1], [1.0, -2.0])
    invdiag = np.array([1.0, 0.5])
    for impl in ([_kernels.pcg_numpy, _kernels.pcg_numba] if _kernels.HAS_NUMBA
                 else [_kernels.pcg_numpy]):
        x, iters, relres, status = impl(
            A.indptr, A.indices, A.data, invdiag, np.array([1.0, 1.0]),
            np.zeros(2), 1e-10, 100,
        )
        assert status == _kernels.PCG_NEGATIVE_CURVATURE


def test_backend_selected():
    assert _kernels.BACKEND in ("numba", "numpy")
    if _kernels.HAS_NUMBA:
        import os

        if os.environ.get("ROBINOPT_BACKEND", "auto") == "auto":
            assert _kernels.BACKEND == "numba"
