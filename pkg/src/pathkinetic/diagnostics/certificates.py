"""Bound certificates and solution validators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import EvaluationError, StructuralError, UnsupportedKindError
from ..generators import GeneratorSpec, apply
from ..measures import PROBABILITY, DiscreteMeasure, MeasurePath, coarse_flat_distance, flat_distance, moment, path_distance
from ..testfunctions import Dictionary

PASS = "pass"
FAIL = "fail"
ONE_SIDED = "one_sided"
MOMENT_KAPPA = 8.0


@dataclass(frozen=True)
class Certificate:
    name: str
    measured: float
    bound: float
    verdict: str
    slack: float = 0.0
    context: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict in (PASS, ONE_SIDED)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": float(self.measured),
            "bound": float(self.bound),
            "verdict": self.verdict,
            "slack": float(self.slack),
            "context": self.context,
        }


def certify(name: str, measured: float, bound: float, *, slack: float = 0.0, one_sided: bool = False,
            context: str = "") -> Certificate:
    """pass iff measured <= bound (1 + slack); a passing lower-estimate check is one_sided."""
    measured = float(measured)
    bound = float(bound)
    ok = measured <= bound * (1.0 + slack) if math.isfinite(measured) else False
    verdict = (ONE_SIDED if one_sided else PASS) if ok else FAIL
    return Certificate(name, measured, bound, verdict, slack, context)


# ---------------------------------------------------------------------------
# weak-form residual

_C4 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_F4 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_S4 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def time_derivative(v: np.ndarray, h: float) -> np.ndarray:
    """Node derivatives: 5-point centred stencils, one-sided 5-point stencils near the ends.

    Paths with 3 or 4 nodes fall back to second-order stencils.
    """
    v = np.asarray(v, dtype=float)
    n = len(v)
    if n < 3:
        raise StructuralError("need at least 3 nodes for a time derivative")
    out = np.empty(n)
    if n < 5:
        out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
        out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
        return out
    for k in range(2, n - 2):
        out[k] = _C4 @ v[k - 2 : k + 3] / h
    out[0] = _F4 @ v[:5] / h
    out[1] = _S4 @ v[:5] / h
    out[-1] = -(_F4 @ v[::-1][:5]) / h
    out[-2] = -(_S4 @ v[::-1][:5]) / h
    return out


def generator_series(path: MeasurePath, gen: GeneratorSpec, f) -> np.ndarray:
    """(A[t_k, path] f, mu_{t_k}) at every node."""
    out = np.empty(len(path))
    for k, (t, m) in enumerate(zip(path.grid, path.measures)):
        vals = apply(gen, float(t), gen.view(path, float(t)), f, m.atoms)
        out[k] = float(m.weights @ vals)
    return out


def weak_residual_profile(path: MeasurePath, gen: GeneratorSpec, dictionary: Dictionary) -> np.ndarray:
    """max over the dictionary of |d/dt (f, mu_t) - (A f, mu_t)| at each node."""
    if len(path) < 3:
        raise StructuralError("weak residual needs at least 3 nodes")
    worst = np.zeros(len(path))
    for f in dictionary:
        try:
            lhs = time_derivative(path.series(f), path.h)
            rhs = generator_series(path, gen, f)
        except EvaluationError as exc:
            raise EvaluationError(f"{f.label}: {exc}") from None
        worst = np.maximum(worst, np.abs(lhs - rhs))
    return worst


def weak_residual(path: MeasurePath, gen: GeneratorSpec, dictionary: Dictionary) -> float:
    return float(weak_residual_profile(path, gen, dictionary).max())


# ---------------------------------------------------------------------------
# time regularity and moments


def dyadic_pairs(n_nodes: int):
    """Node pairs (i 2^k, (i+1) 2^k) inside 0..n_nodes-1."""
    step = 1
    while step < n_nodes:
        for a in range(0, n_nodes - step, step):
            yield a, a + step
        step *= 2


def holder_table(path: MeasurePath) -> list[tuple[float, float]]:
    """(gap, max quotient at that gap) for each dyadic scale."""
    if len(path) < 2:
        raise StructuralError("holder estimate needs at least 2 nodes")
    best: dict[int, float] = {}
    for a, b in dyadic_pairs(len(path)):
        ma, mb = path[a], path[b]
        d = 0.0 if ma is mb else coarse_flat_distance(ma, mb)
        q = d / math.sqrt(float(path.grid[b] - path.grid[a]))
        best[b - a] = max(best.get(b - a, 0.0), q)
    return [(step * path.h, q) for step, q in sorted(best.items())]


def holder_estimate(path: MeasurePath) -> float:
    """max over dyadic node pairs of flat_distance(mu_a, mu_b) / sqrt(t_b - t_a)."""
    return max(q for _, q in holder_table(path))


def holder_bound(P: float, T: float, d: int = 1) -> float:
    """Coupling bound 2 sqrt(d P) + 3 P sqrt(T) on the square-root quotient."""
    return 2.0 * math.sqrt(d * P) + 3.0 * P * math.sqrt(T)


def holder_certificate(path: MeasurePath, P: float, slack: float = 0.1) -> Certificate:
    T = path.T - path.t0
    return certify(
        "HOLDER", holder_estimate(path), holder_bound(P, T, path.d), slack=slack, one_sided=True,
        context=f"dyadic pairs; P={P:.6g}; boundedness only",
    )


def moment_bound(P: float, T: float, initial_moment: float, kappa: float = MOMENT_KAPPA) -> float:
    return math.exp(kappa * P * T) * (1.0 + initial_moment)


def moment_certificate(path: MeasurePath, p: float, P_probe: float, kappa: float = MOMENT_KAPPA) -> Certificate:
    """sup_t moment(mu_t, p) against exp(kappa P T) (1 + moment(mu_0, p))."""
    if path.kind != PROBABILITY:
        raise UnsupportedKindError("moment certificate needs a probability path")
    if not 0 < p <= 2:
        raise StructuralError("moment order must lie in (0, 2]")
    sup = max(moment(m, p) for m in path.measures)
    T = path.T - path.t0
    bound = moment_bound(P_probe, T, moment(path.initial, p), kappa)
    return certify("MOMENT", sup, bound, context=f"p={p}; P={P_probe:.6g}; kappa={kappa}")


def time_lipschitz_certificate(path: MeasurePath, dictionary: Dictionary, bound: float,
                               allowance: float = 0.0) -> Certificate:
    """Largest dictionary estimate of |(f, mu_{k+1} - mu_k)| / h against c1 c2 (+ noise allowance)."""
    h = path.h
    worst = 0.0
    for f in dictionary:
        v = path.series(f)
        worst = max(worst, float(np.abs(np.diff(v)).max()) / h)
    return certify(
        "TIME_LIPSCHITZ", worst, bound + allowance, one_sided=True,
        context=f"{dictionary.cls.value} dictionary of {len(dictionary)}; noise allowance {allowance:.3g}",
    )


def sensitivity_certificate(
    solve: Callable[[DiscreteMeasure], MeasurePath],
    mu: DiscreteMeasure,
    eta: DiscreteMeasure,
    bound: float,
    *,
    slack: float = 0.0,
    name: str = "SENSITIVITY",
) -> Certificate:
    """path_distance(solve(mu), solve(eta)) / flat_distance(mu, eta) against the Gronwall factor."""
    d0 = flat_distance(mu, eta)
    if d0 == 0.0:
        return certify(name, 0.0, bound, slack=slack, context="identical initial data")
    ratio = path_distance(solve(mu), solve(eta)) / d0
    return certify(name, ratio, bound, slack=slack, context=f"initial distance {d0:.6g}")


def gronwall_factor(c1: float, c2: float, c3: float, K: float, T: float) -> float:
    return c2 * math.exp(c1 * c2 * c3 * K * T)
