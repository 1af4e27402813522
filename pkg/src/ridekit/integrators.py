"""Fixed-step RK4 integration of linear time-invariant systems.

The classical Runge-Kutta update for ``x' = A x + B u(t)`` with constant
``A``, ``B`` and fixed step collapses into a linear one-step recursion

    x[k+1] = Phi x[k] + G0 u[k] + Gm u[k+1/2] + G1 u[k+1]

with constant matrices, so the whole trajectory can be computed with a scalar
first-order filter per eigenmode instead of a Python loop.  Both paths produce
the same iterates (up to float rounding); the loop remains as a fallback for
defective propagators and as a cross-check in the test suite.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .errors import NumericFailure

__all__ = ["rk4_lti", "rk4_lti_loop", "half_grid_input"]


def half_grid_input(samples: np.ndarray) -> np.ndarray:
    """Resample step-grid input samples onto the half-step grid (2N-1 points).

    Midpoints are linear interpolations; RK4 needs the input at t, t+dt/2 and
    t+dt for every step.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    out_shape = (2 * n - 1,) + samples.shape[1:]
    out = np.empty(out_shape, dtype=float)
    out[0::2] = samples
    out[1::2] = 0.5 * (samples[:-1] + samples[1:])
    return out


def _rk4_matrices(A: np.ndarray, B: np.ndarray, dt: float):
    I = np.eye(A.shape[0])
    A2 = A @ A
    A3 = A2 @ A
    A4 = A3 @ A
    phi = I + dt * A + dt**2 / 2 * A2 + dt**3 / 6 * A3 + dt**4 / 24 * A4
    g0 = dt / 6 * B + dt**2 / 6 * (A @ B) + dt**3 / 12 * (A2 @ B) + dt**4 / 24 * (A3 @ B)
    gm = 2 * dt / 3 * B + dt**2 / 3 * (A @ B) + dt**3 / 12 * (A2 @ B)
    g1 = dt / 6 * B
    return phi, g0, gm, g1


def rk4_lti_loop(A, B, u_half: np.ndarray, dt: float, x0) -> np.ndarray:
    """Literal step-by-step classical RK4; reference implementation."""
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != A.shape[0]:
        B = B.T
    u = np.asarray(u_half, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    n_steps = (u.shape[0] - 1) // 2
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((n_steps + 1, A.shape[0]))
    out[0] = x
    for k in range(n_steps):
        u0 = u[2 * k]
        um = u[2 * k + 1]
        u1 = u[2 * k + 2]
        k1 = A @ x + B @ u0
        k2 = A @ (x + 0.5 * dt * k1) + B @ um
        k3 = A @ (x + 0.5 * dt * k2) + B @ um
        k4 = A @ (x + dt * k3) + B @ u1
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = x
    return out


def rk4_lti(A, B, u_half: np.ndarray, dt: float, x0) -> np.ndarray:
    """RK4 trajectory of ``x' = A x + B u`` for input sampled on the half grid.

    Parameters
    ----------
    A, B : array_like
        System matrices, shapes (n, n) and (n, m).
    u_half : np.ndarray
        Input samples at t0, t0+dt/2, ..., t0+N*dt; shape (2N+1, m) or (2N+1,)
        for single-input systems.
    dt : float
        Step size.
    x0 : array_like
        Initial state.

    Returns
    -------
    np.ndarray
        States at the step grid, shape (N+1, n).
    """
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != A.shape[0]:
        B = B.T
    u = np.asarray(u_half, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if (u.shape[0] - 1) % 2:
        raise NumericFailure("half-grid input must have odd sample count (2N+1)")
    n_steps = (u.shape[0] - 1) // 2
    x0 = np.asarray(x0, dtype=float)
    if n_steps == 0:
        return x0[None, :].copy()

    phi, g0, gm, g1 = _rk4_matrices(A, B, dt)
    w = u[0:-2:2] @ g0.T + u[1:-1:2] @ gm.T + u[2::2] @ g1.T  # (N, n)

    lam, V = np.linalg.eig(phi)
    if np.linalg.cond(V) > 1e8:
        return rk4_lti_loop(A, B, u, dt, x0)
    with np.errstate(over="ignore", invalid="ignore"):
        v_inv = np.linalg.inv(V)
        y0 = v_inv @ x0.astype(complex)
        wy = w @ v_inv.T
        ys = np.empty((n_steps + 1, A.shape[0]), dtype=complex)
        ys[0] = y0
        for i in range(A.shape[0]):
            zi = np.array([lam[i] * y0[i]])
            ys[1:, i], _ = lfilter([1.0], [1.0, -lam[i]], wy[:, i], zi=zi)
        states = (ys @ V.T).real
    if not np.all(np.isfinite(states)) or np.max(np.abs(states)) > 1e9:
        raise NumericFailure("state integration diverged")
    return states
