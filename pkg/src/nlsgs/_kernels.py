"""Hot numeric kernels, JIT-compiled with numba when available.

Every kernel has a plain numpy/scipy implementation; set NLSGS_NO_NUMBA=1
to force the fallback path (used by the benchmark and by CI smoke runs).
The two paths agree to rounding; tests/test_kernels.py checks that.
"""
import os

import numpy as np

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    njit = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("NLSGS_NO_NUMBA", "0").lower() not in ("1", "true", "yes")


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def functionals_np(u, w, wmid, h, p, q):
    """Weighted quadrature of (T, Q, A, B) for a real field.

    T integrates the squared difference quotient at cell midpoints; Q, A, B
    integrate u^2, |u|^p, |u|^q with the node weights.
    """
    d = np.diff(u) / h
    T = float(np.dot(wmid, d * d))
    au = np.abs(u)
    T_ = au * au
    Q = float(np.dot(w, T_))
    A = float(np.dot(w, au ** p))
    B = float(np.dot(w, au ** q))
    return T, Q, A, B


def apply_lap_np(u, sub, diag, sup):
    """Tridiagonal radial Laplacian; last row is the Dirichlet row (zero)."""
    out = np.zeros_like(u)
    out[0] = diag[0] * u[0] + sup[0] * u[1]
    out[1:-1] = sub[1:-1] * u[:-2] + diag[1:-1] * u[1:-1] + sup[1:-1] * u[2:]
    return out


def thomas_np(sub, diag, sup, rhs):
    """Solve the tridiagonal system via scipy's banded LAPACK driver."""
    from scipy.linalg import solve_banded
    n = diag.shape[0]
    ab = np.zeros((3, n), dtype=np.result_type(diag, rhs))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = diag
    ab[2, :-1] = sub[1:]
    return solve_banded((1, 1), ab, rhs)


def phase_step_np(psi, dt, mu, p, q):
    """Exact nonlinear sub-flow: psi <- psi * exp(-i dt (mu|psi|^{p-2} - |psi|^{q-2}))."""
    a = np.abs(psi)
    return psi * np.exp(-1j * dt * (mu * a ** (p - 2.0) - a ** (q - 2.0)))


# ---------------------------------------------------------------------------
# numba versions (same arithmetic, fused loops)
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True)
    def _functionals_nb(u, w, wmid, h, p, q):
        n = u.shape[0]
        T = 0.0
        for i in range(n - 1):
            d = (u[i + 1] - u[i]) / h
            T += wmid[i] * d * d
        Q = 0.0
        A = 0.0
        B = 0.0
        for i in range(n):
            a = abs(u[i])
            Q += w[i] * a * a
            A += w[i] * a ** p
            B += w[i] * a ** q
        return T, Q, A, B

    @njit(cache=True)
    def _apply_lap_nb(u, sub, diag, sup):
        n = u.shape[0]
        out = np.zeros_like(u)
        out[0] = diag[0] * u[0] + sup[0] * u[1]
        for i in range(1, n - 1):
            out[i] = sub[i] * u[i - 1] + diag[i] * u[i] + sup[i] * u[i + 1]
        return out

    @njit(cache=True)
    def _thomas_nb(sub, diag, sup, rhs):
        n = diag.shape[0]
        cp = np.empty(n, dtype=rhs.dtype)
        dp = np.empty(n, dtype=rhs.dtype)
        cp[0] = sup[0] / diag[0]
        dp[0] = rhs[0] / diag[0]
        for i in range(1, n):
            m = diag[i] - sub[i] * cp[i - 1]
            cp[i] = sup[i] / m
            dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m
        x = np.empty(n, dtype=rhs.dtype)
        x[n - 1] = dp[n - 1]
        for i in range(n - 2, -1, -1):
            x[i] = dp[i] - cp[i] * x[i + 1]
        return x

    @njit(cache=True)
    def _phase_step_nb(psi, dt, mu, p, q):
        n = psi.shape[0]
        out = np.empty_like(psi)
        for i in range(n):
            a = abs(psi[i])
            out[i] = psi[i] * np.exp(-1j * dt * (mu * a ** (p - 2.0) - a ** (q - 2.0)))
        return out

    def functionals_nb(u, w, wmid, h, p, q):
        return _functionals_nb(u, w, wmid, h, p, q)

    apply_lap_nb = _apply_lap_nb
    thomas_nb = _thomas_nb
    phase_step_nb = _phase_step_nb
else:  # pragma: no cover
    functionals_nb = apply_lap_nb = thomas_nb = phase_step_nb = None


if USE_NUMBA:
    functionals_kernel = functionals_nb
    apply_lap = apply_lap_nb
    thomas_solve = thomas_nb
    phase_step = phase_step_nb
else:
    functionals_kernel = functionals_np
    apply_lap = apply_lap_np
    thomas_solve = thomas_np
    phase_step = phase_step_np
