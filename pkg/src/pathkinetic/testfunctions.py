"""
Test functions with certified norms and finite dictionaries that stand in for
the unit ball of a function class.

Every dictionary function is scaled so that sup|f| <= 1 and Lip(f) <= 1 on top
of its own class norm, so a dictionary sup is always a lower estimate of the
flat distance as well as of the class dual norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import StructuralError, ValidationError
from .measures import DiscreteMeasure, FunctionClass, pairing

# sup |d^2/du^2 tanh(u)| = 4 / (3 sqrt 3), attained at tanh(u) = 1/sqrt 3
TANH_CURV = 4.0 / (3.0 * np.sqrt(3.0))


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Vectorised function R^d -> R with optional derivatives.

    evaluator maps (n, d) -> (n,), gradient (n, d) -> (n, d) and hessian
    (n, d) -> (n, d, d). certified_norms holds upper bounds per class.
    """

    __test__ = False  # not a pytest class

    evaluator: Callable
    gradient: Callable | None = None
    hessian: Callable | None = None
    certified_norms: dict = field(default_factory=dict)
    label: str = "f"

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(np.atleast_2d(np.asarray(x, dtype=float)))

    def grad(self, x) -> np.ndarray:
        if self.gradient is None:
            raise AttributeError(f"{self.label} has no gradient")
        return self.gradient(np.atleast_2d(np.asarray(x, dtype=float)))

    def hess(self, x) -> np.ndarray:
        if self.hessian is None:
            raise AttributeError(f"{self.label} has no hessian")
        return self.hessian(np.atleast_2d(np.asarray(x, dtype=float)))

    def norm(self, cls: FunctionClass) -> float:
        return self.certified_norms.get(FunctionClass(cls), np.inf)

    def scaled(self, c: float, label: str | None = None) -> "TestFunction":
        ev, gr, he = self.evaluator, self.gradient, self.hessian
        return TestFunction(
            evaluator=lambda x: c * ev(x),
            gradient=None if gr is None else (lambda x: c * gr(x)),
            hessian=None if he is None else (lambda x: c * he(x)),
            certified_norms={k: abs(c) * v for k, v in self.certified_norms.items()},
            label=label or f"{c:g}*{self.label}",
        )

    def negated(self) -> "TestFunction":
        return self.scaled(-1.0, label=f"-{self.label}")


# ---------------------------------------------------------------------------
# elementary functions


def constant(value: float, d: int = 1) -> TestFunction:
    v = float(value)
    return TestFunction(
        evaluator=lambda x: np.full(len(x), v),
        gradient=lambda x: np.zeros_like(x),
        hessian=lambda x: np.zeros((len(x), x.shape[1], x.shape[1])),
        certified_norms={
            FunctionClass.SUP: abs(v),
            FunctionClass.C1: 0.0,
            FunctionClass.C2: 0.0,
            FunctionClass.LIP: abs(v),
        },
        label=f"const({v:g})",
    )


def coordinate(i: int = 0, d: int = 1) -> TestFunction:
    """f(x) = x_i; unbounded, so only the C1 norm is finite."""
    e = np.zeros(d)
    e[i] = 1.0
    return TestFunction(
        evaluator=lambda x: x[:, i].copy(),
        gradient=lambda x: np.broadcast_to(e, x.shape).copy(),
        hessian=lambda x: np.zeros((len(x), d, d)),
        certified_norms={FunctionClass.C1: 1.0},
        label=f"x{i}",
    )


def coordinate_square(i: int = 0, d: int = 1) -> TestFunction:
    """f(x) = x_i^2."""

    def grad(x):
        g = np.zeros_like(x)
        g[:, i] = 2.0 * x[:, i]
        return g

    def hess(x):
        h = np.zeros((len(x), d, d))
        h[:, i, i] = 2.0
        return h

    return TestFunction(evaluator=lambda x: x[:, i] ** 2, gradient=grad, hessian=hess, label=f"x{i}^2")


def indicator(point, tol: float = 1e-12) -> TestFunction:
    """Indicator of a single point; used to read rates of finite-state chains."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    return TestFunction(
        evaluator=lambda x: (np.abs(x - p).max(axis=1) <= tol * max(1.0, np.abs(p).max())).astype(float),
        certified_norms={FunctionClass.SUP: 1.0},
        label=f"1[{p.tolist()}]",
    )


def tanh_ridge(i: int, center: float, width: float, d: int = 1) -> TestFunction:
    """tanh((x_i - center) / width)."""
    c, w = float(center), float(width)

    def ev(x):
        return np.tanh((x[:, i] - c) / w)

    def grad(x):
        g = np.zeros_like(x)
        g[:, i] = (1.0 - np.tanh((x[:, i] - c) / w) ** 2) / w
        return g

    def hess(x):
        t = np.tanh((x[:, i] - c) / w)
        h = np.zeros((len(x), d, d))
        h[:, i, i] = -2.0 * t * (1.0 - t**2) / w**2
        return h

    lip = 1.0 / w
    return TestFunction(
        ev,
        grad,
        hess,
        certified_norms={
            FunctionClass.SUP: 1.0,
            FunctionClass.C1: lip,
            FunctionClass.C2: lip + TANH_CURV / w**2,
            FunctionClass.LIP: max(1.0, lip),
        },
        label=f"tanh((x{i}-{c:.3g})/{w:.3g})",
    )


def radial_bump(center, scale: float) -> TestFunction:
    """exp(-|x - center|^2 / scale)."""
    a = np.atleast_1d(np.asarray(center, dtype=float))
    s = float(scale)
    d = len(a)

    def ev(x):
        return np.exp(-((x - a) ** 2).sum(axis=1) / s)

    def grad(x):
        return (-2.0 / s) * (x - a) * ev(x)[:, None]

    def hess(x):
        y = x - a
        e = ev(x)[:, None, None]
        return e * ((4.0 / s**2) * y[:, :, None] * y[:, None, :] - (2.0 / s) * np.eye(d))

    g = np.sqrt(2.0 / s) * np.exp(-0.5)
    return TestFunction(
        ev,
        grad,
        hess,
        certified_norms={
            FunctionClass.SUP: 1.0,
            FunctionClass.C1: g,
            FunctionClass.C2: g + 2.0 / s,
            FunctionClass.LIP: max(1.0, g),
        },
        label=f"bump({a.round(3).tolist()},{s:.3g})",
    )


def ramp(i: int, center: float, d: int = 1) -> TestFunction:
    """Saturating ramp clip(x_i - center, -1, 1); Lipschitz but not C^1."""
    c = float(center)
    return TestFunction(
        evaluator=lambda x: np.clip(x[:, i] - c, -1.0, 1.0),
        certified_norms={FunctionClass.SUP: 1.0, FunctionClass.LIP: 1.0},
        label=f"ramp(x{i}-{c:.3g})",
    )


def _normalise(f: TestFunction, cls: FunctionClass) -> TestFunction:
    """Scale f so its class norm, sup norm and Lipschitz bound are all <= 1."""
    norms = f.certified_norms
    need = [norms[cls], norms.get(FunctionClass.SUP, np.inf), norms.get(FunctionClass.LIP, np.inf)]
    top = max(need)
    if not np.isfinite(top) or top <= 0:
        raise StructuralError(f"{f.label} has no finite {cls.value} norm")
    return f.scaled(1.0 / top, label=f.label)


# ---------------------------------------------------------------------------
# dictionaries


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Finite, negation-closed family of functions with class norm <= 1."""

    functions: tuple
    cls: FunctionClass
    seed: int = 0
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.functions:
            raise StructuralError("dictionary must be non-empty")
        for f in self.functions:
            if f.norm(self.cls) > 1.0 + 1e-12:
                raise StructuralError(f"{f.label} exceeds the {self.cls.value} unit ball")

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)


_KINDS = {
    FunctionClass.LIP: ("ramp", "tanh", "bump"),
    FunctionClass.SUP: ("tanh", "bump"),
    FunctionClass.C1: ("tanh", "bump"),
    FunctionClass.C2: ("tanh", "bump"),
}


def _base_function(cls: FunctionClass, d: int, k: int, seed: int, radius: float, centers) -> TestFunction:
    rng = np.random.default_rng([seed, k])
    kinds = _KINDS[cls]
    if centers is not None and k < len(centers):
        a = np.asarray(centers[k], dtype=float).reshape(-1)
        i = k % d
        if cls == FunctionClass.LIP:
            return ramp(i, a[i], d)
        return tanh_ridge(i, a[i], rng.uniform(0.5, 1.5), d)
    kind = kinds[k % len(kinds)]
    i = int(rng.integers(d))
    if kind == "ramp":
        return ramp(i, rng.uniform(-radius, radius), d)
    if kind == "tanh":
        return tanh_ridge(i, rng.uniform(-radius, radius), rng.uniform(0.5, 2.0), d)
    return radial_bump(rng.uniform(-radius, radius, size=d), rng.uniform(0.5, 4.0))


def build_dictionary(
    cls: FunctionClass | str,
    d: int,
    size: int,
    seed: int,
    radius: float = 10.0,
    centers=None,
) -> Dictionary:
    """Deterministic dictionary of 2 * ceil(size / 2) functions (pairs f, -f).

    Base function k depends only on (seed, k), so a smaller dictionary with the
    same seed is a prefix of a larger one. Optional centers pin the first base
    functions (ramps for LIP, tanh ridges otherwise) at given points, which is
    how solvers anchor dictionaries between the atoms of a state space.
    """
    cls = FunctionClass(cls)
    if size < 4:
        raise ValidationError("dictionary size must be >= 4")
    if d < 1:
        raise StructuralError("dimension must be >= 1")
    if cls not in _KINDS:
        raise StructuralError(f"no dictionary for class {cls}")
    if centers is not None:
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.shape[1] != d:
            raise StructuralError("centers have the wrong dimension")
    funcs = []
    for k in range((size + 1) // 2):
        f = _normalise(_base_function(cls, d, k, seed, radius, centers), cls)
        funcs.extend([f, f.negated()])
    spec = {"class": cls.value, "d": d, "size": size, "seed": seed, "radius": radius,
            "centers": None if centers is None else centers.tolist()}
    return Dictionary(tuple(funcs), cls, seed, spec)


def dual_norm_estimate(delta: tuple[DiscreteMeasure, DiscreteMeasure], dictionary: Dictionary) -> float:
    """max over the dictionary of |(f, mu) - (f, nu)|; a lower estimate of the dual norm."""
    mu, nu = delta
    if mu.d != nu.d:
        raise StructuralError("measures of different dimension")
    return max(abs(pairing(f, mu) - pairing(f, nu)) for f in dictionary)


def observed_norms(f: TestFunction, d: int, n: int = 1000, seed: int = 0, radius: float = 10.0) -> dict:
    """Sampled lower bounds of each norm of f on the box [-radius, radius]^d."""
    rng = np.random.default_rng(seed)
    if d == 1:
        x = np.linspace(-radius, radius, n).reshape(-1, 1)
    else:
        x = rng.uniform(-radius, radius, size=(n, d))
    out = {FunctionClass.SUP: float(np.abs(f(x)).max())}
    y = x + rng.normal(scale=0.05, size=x.shape)
    dist = np.linalg.norm(x - y, axis=1)
    lip = float((np.abs(f(x) - f(y)) / dist).max()) if d > 1 else float(
        (np.abs(np.diff(f(x))) / np.diff(x[:, 0])).max()
    )
    out[FunctionClass.LIP] = max(out[FunctionClass.SUP], lip)
    if f.gradient is not None:
        g = np.linalg.norm(f.grad(x), axis=1)
        out[FunctionClass.C1] = float(g.max())
        if f.hessian is not None:
            hn = np.linalg.norm(f.hess(x), ord=2, axis=(1, 2))
            out[FunctionClass.C2] = float((g + hn).max())
    return out
