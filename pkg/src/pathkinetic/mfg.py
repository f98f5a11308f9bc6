"""
Two-state mean-field game with quadratic control cost.

A player in state i pays u^2/2 per unit time to add a rate u to the jump
i -> j and collects a running reward J_i plus a terminal reward V^T_i. The
value recursion is swept backward on the h_in grid with RK4 and the optimal
feedback is u_ij = clip(V_j - V_i, 0, u_max). Crowd aversion enters as
-crowd * (own-state occupancy) in the terminal reward and, optionally,
-running_crowd * (own-state occupancy) in the running reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .generators import Family, GeneratorSpec, Mode
from .measures import MeasurePath
from .testfunctions import indicator

_IND1 = indicator([1.0])


@dataclass(frozen=True)
class QuadraticCostGame:
    base01: float = 1.0
    base10: float = 1.0
    u_max: float = 2.0
    running: tuple[float, float] = (0.0, 0.0)
    terminal: tuple[float, float] = (0.0, 0.0)
    crowd: float = 0.0
    running_crowd: float = 0.0

    def __post_init__(self):
        vals = [self.base01, self.base10, self.u_max, *self.running, *self.terminal, self.crowd, self.running_crowd]
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("game rewards and rates must be finite")
        if self.base01 < 0 or self.base10 < 0:
            raise ValidationError("base rates must be >= 0")
        if self.u_max < 0:
            raise ValidationError("u_max must be >= 0")

    @property
    def coupled(self) -> bool:
        return self.crowd != 0.0 or self.running_crowd != 0.0

    def reward(self, p1: float) -> np.ndarray:
        return np.array([self.running[0] - self.running_crowd * (1 - p1), self.running[1] - self.running_crowd * p1])

    def terminal_reward(self, p1: float) -> np.ndarray:
        return np.array([self.terminal[0] - self.crowd * (1 - p1), self.terminal[1] - self.crowd * p1])

    def feedback(self, V: np.ndarray) -> tuple[float, float]:
        d = V[1] - V[0]
        return min(max(d, 0.0), self.u_max), min(max(-d, 0.0), self.u_max)

    def hamiltonian(self, V: np.ndarray, p1: float) -> np.ndarray:
        d = V[1] - V[0]
        u01, u10 = self.feedback(V)
        J = self.reward(p1)
        return np.array([
            J[0] + self.base01 * d + u01 * d - 0.5 * u01**2,
            J[1] - self.base10 * d - u10 * d - 0.5 * u10**2,
        ])


@dataclass(frozen=True)
class ControlTable:
    """Feedback rates u01, u10 tabulated on a time grid, linearly interpolated."""

    times: np.ndarray
    u: np.ndarray
    values: np.ndarray

    def at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.u[:, 0]), np.interp(t, self.times, self.u[:, 1])])

    def to_dict(self, every: int = 1) -> dict:
        sl = slice(None, None, every)
        return {
            "t": self.times[sl].tolist(),
            "u01": self.u[sl, 0].tolist(),
            "u10": self.u[sl, 1].tolist(),
            "V0": self.values[sl, 0].tolist(),
            "V1": self.values[sl, 1].tolist(),
        }


def backward_sweep(game: QuadraticCostGame, path: MeasurePath, h_in: float) -> ControlTable:
    """RK4 sweep of dV/dt = -H(V, p1(t)) from V(T) = V^T(p1(T)) back to t0."""
    t0, T = path.t0, path.T
    n = int(round((T - t0) / h_in))
    times = t0 + h_in * np.arange(n + 1)
    p1 = lambda t: path.pairing_at(_IND1, min(max(t, t0), T))
    V = game.terminal_reward(p1(T))
    Vs = np.empty((n + 1, 2))
    Vs[n] = V
    for k in range(n, 0, -1):
        t = times[k]
        f = lambda s, v: -game.hamiltonian(v, p1(s))
        k1 = f(t, V)
        k2 = f(t - h_in / 2, V - h_in / 2 * k1)
        k3 = f(t - h_in / 2, V - h_in / 2 * k2)
        k4 = f(t - h_in, V - h_in * k3)
        V = V - h_in / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        Vs[k - 1] = V
    if not np.all(np.isfinite(Vs)):
        raise ValidationError("value recursion produced non-finite values")
    u = np.array([game.feedback(v) for v in Vs])
    return ControlTable(times, u, Vs)


def control_builder(game: QuadraticCostGame, h_in: float):
    """Map a candidate population path to its optimal feedback table."""

    def build(path: MeasurePath) -> ControlTable:
        return backward_sweep(game, path, h_in)

    return build


def forward_generator(game: QuadraticCostGame):
    """Controlled two-state generator with rates base + u(t) read from a control table."""
    states = np.array([[0.0], [1.0]])

    def make(table: ControlTable) -> GeneratorSpec:
        def jumps(t, z, view):
            u01, u10 = table.at(t)
            r = np.where(z[:, 0] < 0.5, game.base01 + u01, game.base10 + u10)
            v = np.where(z[:, 0] < 0.5, 1.0, -1.0)
            return r[:, None], v[:, None, None]

        return GeneratorSpec(Family.FINITE_STATE_JUMP, Mode.ANTICIPATING, 1, jumps=jumps, states=states,
                             name="mfg_two_state", measure_independent=True)

    return make
