"""
Independent reference solutions used to validate the solvers.

None of these share code with the solver path: they work directly on the
scalar ODEs of the two-state family, closed-form OU moments, scipy's
matrix exponential and an exhaustive transport formulation of the flat metric.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import brentq

# ---------------------------------------------------------------------------
# two-state chains


def two_state_generator(lambda01: float, lambda10: float) -> np.ndarray:
    return np.array([[-lambda01, lambda01], [lambda10, -lambda10]])


def expm_weights(Q: np.ndarray, w0, t: float) -> np.ndarray:
    """Row-vector weights w0 exp(Q t)."""
    return np.asarray(w0, dtype=float) @ expm(Q * t)


def rk4(rhs: Callable, y0, t0: float, t1: float, h: float, record_every: int | None = None):
    """Classical RK4 with fixed step; returns (times, states) at the recorded steps."""
    n = int(round((t1 - t0) / h))
    y = np.array(y0, dtype=float)
    ts, ys = [t0], [y.copy()]
    every = record_every or n
    for k in range(n):
        t = t0 + k * h
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (k + 1) % every == 0:
            ts.append(t0 + (k + 1) * h)
            ys.append(y.copy())
    return np.array(ts), np.array(ys)


def nonlinear_two_state(lambda0: float, lambda1: float, kappa: float, p0: float, T: float,
                        h: float = 1e-5, record: float | None = None):
    """dp/dt = (lambda0 + kappa p)(1 - p) - lambda1 p by fine-step RK4."""

    def rhs(t, y):
        p = y[0]
        return np.array([(lambda0 + kappa * p) * (1 - p) - lambda1 * p])

    every = int(round(record / h)) if record else None
    ts, ys = rk4(rhs, [p0], 0.0, T, h, every)
    return ts, ys[:, 0]


def adapted_two_state(lambda0: float, lambda1: float, kappa: float, p0: float, T: float,
                      h: float = 1e-5, record: float | None = None):
    """Rate lambda0 + kappa (1/t) int_0^t p ds, integrated as the system (p, I) with I' = p."""

    def rhs(t, y):
        p, I = y
        avg = I / t if t > 0 else p
        return np.array([(lambda0 + kappa * avg) * (1 - p) - lambda1 * p, p])

    every = int(round(record / h)) if record else None
    ts, ys = rk4(rhs, [p0, 0.0], 0.0, T, h, every)
    return ts, ys[:, 0]


def linear_two_state_terminal(a: float, lambda1: float, p0: float, T: float) -> float:
    """p(T) for dp/dt = a (1 - p) - lambda1 p, in closed form."""
    r = a + lambda1
    eq = a / r
    return eq + (p0 - eq) * math.exp(-r * T)


def anticipating_root(lambda0: float, kappa: float, lambda1: float, p0: float, T: float) -> float:
    """Terminal occupancy q solving q = p(T; rate lambda0 + kappa q) by bisection."""

    def gap(q):
        return linear_two_state_terminal(lambda0 + kappa * q, lambda1, p0, T) - q

    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(lo) * gap(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck moments


def ou_variance(t, sigma: float, theta: float, v0: float):
    """Variance of dX = -theta (X - m) dt + sigma dW with constant m."""
    t = np.asarray(t, dtype=float)
    s = sigma**2 / (2 * theta)
    return s + (v0 - s) * np.exp(-2 * theta * t)


def ou_mean(t, theta: float, m0: float, target: float):
    t = np.asarray(t, dtype=float)
    return target + (m0 - target) * np.exp(-theta * t)


def terminal_mean_path(theta: float, m0: float, T: float, n: int = 200):
    """Mean path for drift -theta (x - m(T)): the consistency m(T) = m(T) + (m0 - m(T)) e^{-theta T} forces m(T) = m0."""
    mT = m0  # unique root of (m0 - q) e^{-theta T} = 0
    t = np.linspace(0.0, T, n + 1)
    return t, mT + (m0 - mT) * np.exp(-theta * t)


def avg_mean_path(theta: float, m0: float, T: float, h: float = 1e-4):
    """m' = -theta (m - (1/t) int_0^t m), integrated with I' = m."""

    def rhs(t, y):
        m, I = y
        avg = I / t if t > 0 else m
        return np.array([-theta * (m - avg), m])

    ts, ys = rk4(rhs, [m0, 0.0], 0.0, T, h, int(round(0.01 / h)))
    return ts, ys[:, 0]


# ---------------------------------------------------------------------------
# quadratic-cost two-state game


def mfg_two_state_terminal(
    base01: float,
    base10: float,
    u_max: float,
    running: tuple[float, float],
    terminal: tuple[float, float],
    crowd: float,
    p0: float,
    T: float,
) -> float:
    """Equilibrium terminal occupancy of state 1 via solve_ivp and brentq.

    Terminal reward of state i is terminal[i] - crowd * p_i(T).
    """

    def forward(q):
        VT = np.array([terminal[0] - crowd * (1 - q), terminal[1] - crowd * q])

        def back(t, V):
            d = V[1] - V[0]
            u01 = min(max(d, 0.0), u_max)
            u10 = min(max(-d, 0.0), u_max)
            h0 = running[0] + base01 * d + u01 * d - 0.5 * u01**2
            h1 = running[1] - base10 * d + u10 * (-d) - 0.5 * u10**2
            return [-h0, -h1]

        sol = solve_ivp(back, (T, 0.0), VT, rtol=1e-12, atol=1e-13, dense_output=True)

        def fwd(t, p):
            V = sol.sol(t)
            d = V[1] - V[0]
            u01 = min(max(d, 0.0), u_max)
            u10 = min(max(-d, 0.0), u_max)
            return [(base01 + u01) * (1 - p[0]) - (base10 + u10) * p[0]]

        out = solve_ivp(fwd, (0.0, T), [p0], rtol=1e-12, atol=1e-13)
        return float(out.y[0, -1])

    return brentq(lambda q: forward(q) - q, 0.0, 1.0, xtol=1e-13)


# ---------------------------------------------------------------------------
# flat distance by exhaustive transport


def _vertices(A: np.ndarray, b: np.ndarray, tol: float = 1e-12):
    """All basic feasible solutions of {x >= 0 : A x = b}."""
    m, n = A.shape
    rank = np.linalg.matrix_rank(A)
    rows = list(range(m))
    if rank < m:
        # drop dependent rows greedily
        keep = []
        for r in rows:
            if np.linalg.matrix_rank(A[keep + [r]]) > len(keep):
                keep.append(r)
        A, b = A[keep], b[keep]
        m = len(keep)
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xB = np.linalg.solve(B, b)
        if (xB >= -tol).all():
            x = np.zeros(n)
            x[list(cols)] = np.clip(xB, 0.0, None)
            yield x


def flat_distance_oracle(x, a, y, b) -> float:
    """Flat distance between probability measures sum a_i delta_{x_i} and sum b_j delta_{y_j}.

    For equal masses this is optimal transport with cost min(|x - y|, 2),
    solved by enumerating every vertex of the transport polytope.
    """
    x = np.asarray(x, dtype=float).reshape(len(a), -1)
    y = np.asarray(y, dtype=float).reshape(len(b), -1)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(a), len(b)
    cost = np.minimum(np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2), 2.0).reshape(-1)
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    rhs = np.concatenate([a, b])
    best = math.inf
    for v in _vertices(A, rhs):
        best = min(best, float(cost @ v))
    return best
