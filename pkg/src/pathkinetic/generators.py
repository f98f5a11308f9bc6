"""
Levy-Khintchine generator families A[t, {mu_.}] and empirical probes of their
Lipschitz and boundedness constants.

A generator acts on a test function f at points z as

    1/2 (G grad, grad) f + (b, grad f)
        + int [f(z + y) - f(z) - (grad f(z), y) 1_{|y|<1}] nu(dy)

Coefficients are vectorised callables ``coef(t, z, view)`` with z of shape
(n, d). The view is a :class:`PathView` that only exposes the part of the
measure path allowed by the generator's dependence mode.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CapabilityError, EvaluationError, NumericError, StructuralError, ValidationError, VisibilityError
from .measures import DiscreteMeasure, MeasurePath, path_distance, uniform_grid
from .testfunctions import Dictionary, TestFunction, coordinate, indicator


class Family(str, enum.Enum):
    NONLINEAR_LEVY = "NONLINEAR_LEVY"
    MCKEAN_VLASOV = "MCKEAN_VLASOV"
    STABLE_LIKE = "STABLE_LIKE"
    ORDER_AT_MOST_ONE = "ORDER_AT_MOST_ONE"
    PURE_JUMP = "PURE_JUMP"
    FINITE_STATE_JUMP = "FINITE_STATE_JUMP"


class Mode(str, enum.Enum):
    PATH_INDEPENDENT = "PATH_INDEPENDENT"
    ADAPTED = "ADAPTED"
    ANTICIPATING = "ANTICIPATING"
    FULL_PATH = "FULL_PATH"


JUMP_FAMILIES = (Family.PURE_JUMP, Family.FINITE_STATE_JUMP)
_COMPENSATED = (Family.NONLINEAR_LEVY, Family.MCKEAN_VLASOV)

_COORDS: dict = {}


def _coord(i: int, d: int) -> TestFunction:
    key = (i, d)
    if key not in _COORDS:
        _COORDS[key] = coordinate(i, d)
    return _COORDS[key]


class PathView:
    """Window onto a measure path as seen by a coefficient at time t."""

    def __init__(self, path: MeasurePath, mode: Mode, t: float):
        self.path = path
        self.mode = Mode(mode)
        self.t = float(t)

    @property
    def horizon(self) -> float:
        return self.path.T

    @property
    def start(self) -> float:
        return self.path.t0

    def _check(self, s: float):
        tol = 1e-9 * max(1.0, abs(self.t))
        m = self.mode
        if m == Mode.PATH_INDEPENDENT and abs(s - self.t) > tol:
            raise VisibilityError(f"path-independent coefficient read mu at {s} (t={self.t})")
        if m == Mode.ADAPTED and s > self.t + tol:
            raise VisibilityError(f"adapted coefficient read the future mu at {s} (t={self.t})")
        if m == Mode.ANTICIPATING and s < self.t - tol:
            raise VisibilityError(f"anticipating coefficient read the past mu at {s} (t={self.t})")

    def at(self, s: float | None = None) -> DiscreteMeasure:
        s = self.t if s is None else s
        self._check(s)
        return self.path.at(s)

    def pairing(self, g: Callable, s: float | None = None) -> float:
        s = self.t if s is None else s
        self._check(s)
        return self.path.pairing_at(g, s)

    def integral(self, g: Callable, s0: float, s1: float) -> float:
        self._check(s0)
        self._check(s1)
        return self.path.integral(g, s0, s1)

    def mean(self, s: float | None = None) -> np.ndarray:
        d = self.path.d
        return np.array([self.pairing(_coord(i, d), s) for i in range(d)])

    def running_mean(self, g: Callable) -> float:
        """(1/(t - t0)) int_{t0}^t (g, mu_s) ds, equal to (g, mu_t0) at t = t0."""
        t0 = self.start
        if self.t - t0 <= 1e-12:
            return self.pairing(g, t0) if self.mode != Mode.PATH_INDEPENDENT else self.pairing(g)
        return self.integral(g, t0, self.t) / (self.t - t0)


@dataclass(frozen=True, eq=False)
class StableLike:
    """Truncated stable-like jump part along the 2d coordinate directions.

    a and alpha are floats or callables (t, z) -> (n, 2d); omega holds the
    weights of the directions (+e1, -e1, +e2, -e2, ...).
    """

    a: float | Callable
    alpha: float | Callable
    omega: np.ndarray
    k_trunc: float
    quad_points: int = 24
    cutoff_ratio: float = 1e-4

    @property
    def eps(self) -> float:
        return self.cutoff_ratio * self.k_trunc

    def directions(self, d: int) -> np.ndarray:
        eye = np.eye(d)
        return np.stack([s * eye[i] for i in range(d) for s in (1.0, -1.0)])

    def values(self, t: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n, d = z.shape
        m = 2 * d
        a = self.a(t, z) if callable(self.a) else self.a
        al = self.alpha(t, z) if callable(self.alpha) else self.alpha
        a = np.broadcast_to(np.asarray(a, dtype=float), (n, m))
        al = np.broadcast_to(np.asarray(al, dtype=float), (n, m))
        return a, al

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes in log r on [eps, K] with weights for dr/r."""
        u, w = np.polynomial.legendre.leggauss(self.quad_points)
        lo, hi = np.log(self.eps), np.log(self.k_trunc)
        return np.exp(0.5 * (hi - lo) * u + 0.5 * (hi + lo)), 0.5 * (hi - lo) * w


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    family: Family
    mode: Mode
    d: int = 1
    diffusion: Callable | None = None
    drift: Callable | None = None
    jumps: Callable | None = None
    stable: StableLike | None = None
    states: np.ndarray | None = None
    name: str = ""
    params: dict = field(default_factory=dict)
    measure_independent: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.states is not None:
            st = np.asarray(self.states, dtype=float).reshape(-1, self.d)
            st = st[np.lexsort(st.T[::-1])]
            st.setflags(write=False)
            object.__setattr__(self, "states", st)

    @property
    def compensated(self) -> bool:
        return self.family in _COMPENSATED

    @property
    def is_jump_family(self) -> bool:
        return self.family in JUMP_FAMILIES

    def view(self, path: MeasurePath, t: float) -> PathView:
        return PathView(path, self.mode, t)

    def coefficients(self, t: float, z: np.ndarray, view: PathView):
        """(G (n,d,d) | None, b (n,d) | None, (rates (n,k), vectors (n,k,d)) | None)."""
        n, d = z.shape
        G = b = J = None
        if self.diffusion is not None:
            G = np.broadcast_to(np.asarray(self.diffusion(t, z, view), dtype=float), (n, d, d))
        if self.drift is not None:
            b = np.broadcast_to(np.asarray(self.drift(t, z, view), dtype=float), (n, d))
        if self.jumps is not None:
            rates, vecs = self.jumps(t, z, view)
            rates = np.asarray(rates, dtype=float)
            rates = np.broadcast_to(rates, (n, rates.shape[-1]))
            vecs = np.asarray(vecs, dtype=float)
            vecs = np.broadcast_to(vecs, (n, rates.shape[1], d))
            if (rates < 0).any():
                raise EvaluationError(f"negative jump rate in {self.name or self.family.value}")
            J = (rates, vecs)
        return G, b, J


def _as_points(z, d: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim <= 1:
        z = z.reshape(-1, d)
    return z


def apply(gen: GeneratorSpec, t: float, view: PathView | MeasurePath, f: TestFunction, z) -> np.ndarray:
    """Evaluate (A[t, view] f)(z) for points z of shape (n, d) or (d,)."""
    if isinstance(view, MeasurePath):
        view = gen.view(view, t)
    z = _as_points(z, gen.d)
    n, d = z.shape
    G, b, J = gen.coefficients(t, z, view)
    out = np.zeros(n)
    need_grad = (b is not None and np.any(b != 0)) or (gen.stable is not None)
    if J is not None and gen.compensated:
        need_grad = need_grad or bool(np.any(np.linalg.norm(J[1], axis=-1) < 1.0))
    need_hess = G is not None and np.any(G != 0)
    if need_grad and f.gradient is None:
        raise CapabilityError(f"{f.label} supplies no gradient but the generator needs one")
    if need_hess and f.hessian is None:
        raise CapabilityError(f"{f.label} supplies no hessian but the generator has diffusion")
    grad = f.grad(z) if need_grad else None
    if need_hess:
        out += 0.5 * np.einsum("nij,nij->n", G, f.hess(z))
    if b is not None and need_grad:
        out += np.einsum("ni,ni->n", b, grad)
    if J is not None:
        rates, vecs = J
        fz = f(z)
        for k in range(rates.shape[1]):
            r = rates[:, k]
            if not np.any(r):
                continue
            y = vecs[:, k, :]
            incr = f(z + y) - fz
            if gen.compensated:
                small = np.linalg.norm(y, axis=1) < 1.0
                incr = incr - small * np.einsum("ni,ni->n", grad, y)
            out += r * incr
    if gen.stable is not None:
        out += _stable_part(gen.stable, t, z, f, grad)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite generator value for {f.label}")
    return out


def _stable_part(st: StableLike, t: float, z: np.ndarray, f: TestFunction, grad: np.ndarray) -> np.ndarray:
    n, d = z.shape
    dirs = st.directions(d)
    a, al = st.values(t, z)
    r, w = st.nodes()
    fz = f(z)
    out = np.zeros(n)
    for j, s in enumerate(dirs):
        if st.omega[j] == 0:
            continue
        gs = grad @ s
        shifted = (z[:, None, :] + r[None, :, None] * s).reshape(-1, d)
        incr = f(shifted).reshape(n, len(r)) - fz[:, None] - r[None, :] * gs[:, None]
        acc = (incr * w[None, :] * r[None, :] ** (-al[:, j : j + 1])).sum(axis=1)
        out += st.omega[j] * a[:, j] * acc
    if not np.all(np.isfinite(out)):
        raise NumericError("stable-like quadrature is not finite")
    return out


def stable_cutoff_bound(st: StableLike, c2_norm: float, alpha_max: float | None = None, a_max: float | None = None) -> float:
    """Bound on the dropped compensated integral over (0, eps): a |f''| eps^(2-al) / (2 (2-al))."""
    al = alpha_max if alpha_max is not None else float(np.max(st.alpha)) if not callable(st.alpha) else 1.999
    a = a_max if a_max is not None else float(np.max(st.a)) if not callable(st.a) else 1.0
    return float(np.sum(st.omega) * a * c2_norm * st.eps ** (2 - al) / (2 * (2 - al)))


def rate_matrix(gen: GeneratorSpec, t: float, view: PathView, states: np.ndarray) -> np.ndarray:
    """Q[i, j] = (A 1_{x_j})(x_i) for a pure-jump generator on a finite state list."""
    if not gen.is_jump_family or gen.diffusion is not None or gen.drift is not None or gen.stable is not None:
        raise CapabilityError(f"{gen.family.value} is not a finite-state jump family")
    return _rate_matrix(gen, t, view, states, None)


def _rate_matrix(gen, t, view, states, layout: dict | None) -> np.ndarray:
    """rate_matrix with an optional cache of the jump-target layout (reused while the vectors repeat)."""
    n = len(states)
    _, _, J = gen.coefficients(t, states, view)
    Q = np.zeros((n, n))
    if J is None:
        return Q
    rates, vecs = J
    if layout is not None and "vecs" in layout and np.array_equal(layout["vecs"], vecs):
        idx = layout["idx"]
    else:
        targets = states[:, None, :] + vecs
        idx = _state_index(states, targets.reshape(-1, states.shape[1])).reshape(rates.shape)
        if layout is not None:
            layout["vecs"] = np.array(vecs)
            layout["idx"] = idx
    rows = np.arange(n)
    for k in range(rates.shape[1]):
        Q[rows, idx[:, k]] += rates[:, k]
    Q[rows, rows] -= Q.sum(axis=1)
    return Q


def _state_index(states: np.ndarray, points: np.ndarray) -> np.ndarray:
    if states.shape[1] == 1:
        s = states[:, 0]
        p = points[:, 0]
        k = np.clip(np.searchsorted(s, p), 0, len(s) - 1)
        km = np.clip(k - 1, 0, len(s) - 1)
        best = np.where(np.abs(s[km] - p) < np.abs(s[k] - p), km, k)
        err = np.abs(s[best] - p)
    else:
        dist = np.abs(points[:, None, :] - states[None, :, :]).max(axis=2)
        best = dist.argmin(axis=1)
        err = dist[np.arange(len(points)), best]
    if np.any(err > 1e-9 * max(1.0, float(np.abs(states).max()))):
        bad = points[int(np.argmax(err))]
        raise StructuralError(f"jump target {bad.tolist()} is not on the state list")
    return best


# ---------------------------------------------------------------------------
# example families


def _check(cond: bool, msg: str):
    if not cond:
        raise ValidationError(msg)


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


_IND1 = indicator([1.0])


def _two_state(name, mode, rate01, lambda1, params, independent=False) -> GeneratorSpec:
    states = np.array([[0.0], [1.0]])

    def jumps(t, z, view):
        up = rate01(t, view)
        r = np.where(z[:, 0] < 0.5, up, lambda1)
        v = np.where(z[:, 0] < 0.5, 1.0, -1.0)
        return r[:, None], v[:, None, None]

    return GeneratorSpec(
        Family.PURE_JUMP if name == "pure_jump_2state" else Family.FINITE_STATE_JUMP,
        mode,
        d=1,
        jumps=jumps,
        states=states,
        name=name,
        params=dict(params),
        measure_independent=independent,
    )


def nonlinear_levy(sigma: float = 0.5, theta: float = 1.0, jump: float = 0.5, rate: float = 1.0) -> GeneratorSpec:
    """Coefficients independent of z: drift -theta tanh(m), jumps +-jump pulling the mean to 0."""
    _check(sigma >= 0, "sigma must be >= 0")
    _check(theta >= 0, "theta must be >= 0")
    _check(rate >= 0, "rate must be >= 0")
    _check(jump != 0, "jump must be non-zero")
    g = sigma**2

    def diffusion(t, z, view):
        return np.full((1, 1), g)

    def drift(t, z, view):
        return np.full((len(z), 1), -theta * np.tanh(view.mean()[0]))

    def jumps(t, z, view):
        m = view.mean()[0]
        r = np.array([rate * _logistic(-m), rate * _logistic(m)])
        return r[None, :], np.array([[jump], [-jump]])

    return GeneratorSpec(
        Family.NONLINEAR_LEVY, Mode.PATH_INDEPENDENT, 1, diffusion, drift, jumps,
        name="nonlinear_levy", params=dict(sigma=sigma, theta=theta, jump=jump, rate=rate),
        measure_independent=(theta == 0 and rate == 0),
    )


def mckean_vlasov_ou(sigma: float = 1.0, theta: float = 1.0) -> GeneratorSpec:
    """dX = -theta (X - m(mu_t)) dt + sigma dW."""
    _check(sigma >= 0, "sigma must be >= 0")
    _check(theta >= 0, "theta must be >= 0")
    g = sigma**2

    def diffusion(t, z, view):
        return np.full((1, 1), g)

    def drift(t, z, view):
        return -theta * (z - view.mean())

    return GeneratorSpec(
        Family.MCKEAN_VLASOV, Mode.PATH_INDEPENDENT, 1, diffusion, drift,
        name="mckean_vlasov_ou", params=dict(sigma=sigma, theta=theta), measure_independent=(theta == 0),
    )


def stable_like_1d(
    alpha: float = 1.5,
    a: float = 1.0,
    k_trunc: float = 1.0,
    omega=(0.5, 0.5),
    theta: float = 1.0,
    quad_points: int = 24,
    cutoff_ratio: float = 1e-4,
) -> GeneratorSpec:
    """Truncated stable-like jumps plus a mean-reverting drift -theta (x - m(mu_t))."""
    _check(0 < alpha < 2, "alpha must lie in (0, 2)")
    _check(a > 0, "a must be > 0")
    _check(k_trunc > 0, "k_trunc must be > 0")
    omega = np.asarray(omega, dtype=float)
    _check(omega.shape == (2,) and (omega >= 0).all(), "omega must be two non-negative weights")
    _check(theta >= 0, "theta must be >= 0")

    def drift(t, z, view):
        return -theta * (z - view.mean())

    st = StableLike(a=a, alpha=alpha, omega=omega, k_trunc=k_trunc, quad_points=quad_points, cutoff_ratio=cutoff_ratio)
    return GeneratorSpec(
        Family.STABLE_LIKE, Mode.PATH_INDEPENDENT, 1, drift=drift, stable=st,
        name="stable_like_1d",
        params=dict(alpha=alpha, a=a, k_trunc=k_trunc, omega=omega.tolist(), theta=theta,
                    quad_points=quad_points, cutoff_ratio=cutoff_ratio),
        measure_independent=(theta == 0),
    )


def order_at_most_one(
    theta: float = 1.0,
    jump: float = 0.5,
    rate: float = 1.0,
    alpha: float | None = None,
    a: float = 0.2,
    k_trunc: float = 1.0,
    eps: float = 0.1,
    quad_points: int = 16,
) -> GeneratorSpec:
    """Drift plus uncompensated jumps with finite first moment.

    With alpha < 1 an infinite-activity part a r^(-1-alpha) dr on (eps, K] in
    both directions is discretised by Gauss-Legendre into a finite jump list;
    jumps below eps are dropped and int_{|y|<eps} |y| nu(dy) is recorded.
    """
    _check(theta >= 0, "theta must be >= 0")
    _check(rate >= 0, "rate must be >= 0")
    params = dict(theta=theta, jump=jump, rate=rate, alpha=alpha, a=a, k_trunc=k_trunc, eps=eps, quad_points=quad_points)
    extra_r = np.zeros(0)
    extra_v = np.zeros(0)
    if alpha is not None:
        _check(0 < alpha < 1, "order-at-most-one requires alpha in (0, 1)")
        _check(0 < eps < k_trunc, "need 0 < eps < k_trunc")
        _check(a > 0, "a must be > 0")
        u, w = np.polynomial.legendre.leggauss(quad_points)
        lo, hi = np.log(eps), np.log(k_trunc)
        r = np.exp(0.5 * (hi - lo) * u + 0.5 * (hi + lo))
        wr = 0.5 * (hi - lo) * w * a * r ** (-alpha)  # r^(-1-alpha) dr = r^-alpha du
        extra_r = np.concatenate([wr, wr])
        extra_v = np.concatenate([r, -r])
        params["small_jump_drop_bound"] = float(2 * a * eps ** (1 - alpha) / (1 - alpha))

    def drift(t, z, view):
        return -theta * (z - view.mean())

    def jumps(t, z, view):
        m = view.mean()[0]
        r = np.concatenate([[rate * _logistic(-m), rate * _logistic(m)], extra_r])
        v = np.concatenate([[jump, -jump], extra_v])
        return r[None, :], v[:, None]

    return GeneratorSpec(
        Family.ORDER_AT_MOST_ONE, Mode.PATH_INDEPENDENT, 1, drift=drift, jumps=jumps,
        name="order_at_most_one", params=params, measure_independent=(theta == 0 and rate == 0),
    )


def pure_jump_2state(lambda0: float = 1.0, lambda1: float = 2.0, kappa: float = 0.0) -> GeneratorSpec:
    """Two-state chain with dp1/dt = (lambda0 + kappa p1)(1 - p1) - lambda1 p1."""
    _check(lambda0 >= 0 and lambda1 >= 0, "rates must be >= 0")
    _check(lambda0 + min(kappa, 0.0) >= 0, "lambda0 + kappa p1 must stay >= 0 on [0, 1]")
    return _two_state(
        "pure_jump_2state", Mode.PATH_INDEPENDENT,
        lambda t, view: lambda0 + kappa * view.pairing(_IND1),
        lambda1, dict(lambda0=lambda0, lambda1=lambda1, kappa=kappa), independent=(kappa == 0),
    )


def anticipating_2state(lambda0: float = 1.0, kappa: float = 1.0, lambda1: float = 2.0) -> GeneratorSpec:
    """Two-state chain whose 0 -> 1 rate reads the terminal occupancy: lambda0 + kappa p1(T)."""
    _check(lambda0 >= 0 and lambda1 >= 0, "rates must be >= 0")
    _check(lambda0 + min(kappa, 0.0) >= 0, "lambda0 + kappa p1(T) must stay >= 0")
    return _two_state(
        "anticipating_2state", Mode.ANTICIPATING,
        lambda t, view: lambda0 + kappa * view.pairing(_IND1, view.horizon),
        lambda1, dict(lambda0=lambda0, kappa=kappa, lambda1=lambda1), independent=(kappa == 0),
    )


def adapted_2state(lambda0: float = 1.0, lambda1: float = 2.0, kappa: float = 0.5) -> GeneratorSpec:
    """Two-state chain with 0 -> 1 rate lambda0 + kappa (1/t) int_0^t p1(s) ds."""
    _check(lambda0 >= 0 and lambda1 >= 0, "rates must be >= 0")
    _check(lambda0 + min(kappa, 0.0) >= 0, "rates must stay >= 0")
    return _two_state(
        "adapted_2state", Mode.ADAPTED,
        lambda t, view: lambda0 + kappa * view.running_mean(_IND1),
        lambda1, dict(lambda0=lambda0, lambda1=lambda1, kappa=kappa), independent=(kappa == 0),
    )


def full_path_2state(lambda0: float = 1.0, lambda1: float = 2.0, kappa: float = 0.5) -> GeneratorSpec:
    """Two-state chain with 0 -> 1 rate lambda0 + kappa times the whole-horizon average of p1."""
    _check(lambda0 >= 0 and lambda1 >= 0, "rates must be >= 0")
    _check(lambda0 + min(kappa, 0.0) >= 0, "rates must stay >= 0")

    def up(t, view):
        t0, T = view.start, view.horizon
        return lambda0 + kappa * view.integral(_IND1, t0, T) / (T - t0)

    return _two_state("full_path_2state", Mode.FULL_PATH, up, lambda1,
                      dict(lambda0=lambda0, lambda1=lambda1, kappa=kappa), independent=(kappa == 0))


def adapted_avg_ou(sigma: float = 1.0, theta: float = 1.0) -> GeneratorSpec:
    """Drift -theta (x - (1/t) int_0^t m(mu_s) ds), equal to -theta (x - m(mu_0)) at t = 0."""
    _check(sigma >= 0 and theta >= 0, "sigma and theta must be >= 0")
    g = sigma**2
    x0 = _coord(0, 1)

    def diffusion(t, z, view):
        return np.full((1, 1), g)

    def drift(t, z, view):
        return -theta * (z - view.running_mean(x0))

    return GeneratorSpec(
        Family.MCKEAN_VLASOV, Mode.ADAPTED, 1, diffusion, drift,
        name="adapted_avg_ou", params=dict(sigma=sigma, theta=theta), measure_independent=(theta == 0),
    )


def terminal_ou(sigma: float = 0.0, theta: float = 1.0) -> GeneratorSpec:
    """Terminal-anchored drift -theta (x - m(mu_T))."""
    _check(sigma >= 0 and theta >= 0, "sigma and theta must be >= 0")
    g = sigma**2

    def diffusion(t, z, view):
        return np.full((1, 1), g)

    def drift(t, z, view):
        return -theta * (z - view.mean(view.horizon))

    return GeneratorSpec(
        Family.MCKEAN_VLASOV, Mode.ANTICIPATING, 1, diffusion if sigma > 0 else None, drift,
        name="terminal_ou", params=dict(sigma=sigma, theta=theta), measure_independent=(theta == 0),
    )


def zero_generator(d: int = 1, states=None) -> GeneratorSpec:
    """A = 0; every propagator is the identity."""

    def jumps(t, z, view):
        return np.zeros((len(z), 1)), np.zeros((1, d))

    return GeneratorSpec(Family.PURE_JUMP, Mode.PATH_INDEPENDENT, d, jumps=jumps, states=states,
                         name="zero", measure_independent=True)


EXAMPLES: dict[str, Callable[..., GeneratorSpec]] = {
    "nonlinear_levy": nonlinear_levy,
    "mckean_vlasov_ou": mckean_vlasov_ou,
    "stable_like_1d": stable_like_1d,
    "order_at_most_one": order_at_most_one,
    "pure_jump_2state": pure_jump_2state,
    "anticipating_2state": anticipating_2state,
    "adapted_avg_ou": adapted_avg_ou,
    "adapted_2state": adapted_2state,
    "full_path_2state": full_path_2state,
    "terminal_ou": terminal_ou,
    "zero": zero_generator,
}


def make_example(name: str, **params) -> GeneratorSpec:
    try:
        ctor = EXAMPLES[name]
    except KeyError:
        raise ValidationError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None
    try:
        return ctor(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {name}: {exc}") from None


# ---------------------------------------------------------------------------
# probes


def _default_points(gen: GeneratorSpec) -> np.ndarray:
    if gen.states is not None:
        return gen.states
    if gen.d == 1:
        return np.linspace(-3.0, 3.0, 41).reshape(-1, 1)
    return np.random.default_rng(0).uniform(-3.0, 3.0, size=(128, gen.d))


def _default_sampler(gen: GeneratorSpec) -> Callable:
    if gen.states is not None:
        states = gen.states

        def sample(rng):
            return DiscreteMeasure(states, rng.dirichlet(np.ones(len(states))))

        return sample

    def sample(rng):
        k = int(rng.integers(1, 4))
        return DiscreteMeasure(rng.uniform(-2.0, 2.0, size=(k, gen.d)), rng.dirichlet(np.ones(k)))

    return sample


def _random_pair(rng, sampler, grid, constant: bool):
    if constant:
        a, b = sampler(rng), sampler(rng)
        return MeasurePath.constant(a, grid), MeasurePath.constant(b, grid)
    return (
        MeasurePath(grid, [sampler(rng) for _ in grid]),
        MeasurePath(grid, [sampler(rng) for _ in grid]),
    )


def _probe_grid(t: float, horizon: float | None, nodes: int) -> np.ndarray:
    H = horizon if horizon is not None else max(float(t), 1.0)
    if t > H + 1e-12:
        raise StructuralError("probe time beyond the horizon")
    return uniform_grid(0.0, H, H / (nodes - 1))


def _sup_apply(gen, t, path, dictionary, points) -> np.ndarray:
    view = gen.view(path, t)
    return np.stack([apply(gen, t, view, f, points) for f in dictionary])


def lipschitz_probe(
    gen: GeneratorSpec,
    t: float,
    trials: int,
    seed: int,
    dictionary: Dictionary,
    *,
    horizon: float | None = None,
    points=None,
    sampler: Callable | None = None,
    nodes: int = 5,
) -> float:
    """Largest observed sup_f |A[t,xi] f - A[t,eta] f|_sup / path_distance(xi, eta).

    Path pairs alternate between constant paths and node-wise random paths.
    The result is a lower estimate of the Lipschitz constant.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if gen.measure_independent:
        return 0.0
    rng = np.random.default_rng(seed)
    grid = _probe_grid(t, horizon, nodes)
    pts = _default_points(gen) if points is None else _as_points(points, gen.d)
    sampler = sampler or _default_sampler(gen)
    best = 0.0
    for k in range(trials):
        for _ in range(100):
            xi, eta = _random_pair(rng, sampler, grid, constant=(k % 2 == 0))
            dist = path_distance(xi, eta)
            if dist > 1e-12:
                break
        else:
            raise StructuralError("could not draw a pair of distinct paths")
        diff = np.abs(_sup_apply(gen, t, xi, dictionary, pts) - _sup_apply(gen, t, eta, dictionary, pts)).max()
        best = max(best, float(diff) / dist)
    return best


def boundedness_probe(
    gen: GeneratorSpec,
    t: float,
    trials: int,
    seed: int,
    dictionary: Dictionary,
    *,
    horizon: float | None = None,
    points=None,
    sampler: Callable | None = None,
    nodes: int = 5,
) -> float:
    """Largest observed sup_f sup_z |A[t, xi] f (z)| over random paths."""
    rng = np.random.default_rng(seed)
    grid = _probe_grid(t, horizon, nodes)
    pts = _default_points(gen) if points is None else _as_points(points, gen.d)
    sampler = sampler or _default_sampler(gen)
    best = 0.0
    for k in range(max(1, trials)):
        xi, _ = _random_pair(rng, sampler, grid, constant=(k % 2 == 0))
        best = max(best, float(np.abs(_sup_apply(gen, t, xi, dictionary, pts)).max()))
    return best


def levy_moment(gen: GeneratorSpec, t: float, z: np.ndarray, view: PathView, p: float) -> np.ndarray:
    """int min(|y|^2, |y|^p) nu(t, z, mu, dy) at each point z."""
    _, _, J = gen.coefficients(t, z, view)
    out = np.zeros(len(z))
    if J is not None:
        rates, vecs = J
        r = np.linalg.norm(vecs, axis=-1)
        out += (rates * np.minimum(r**2, r**p)).sum(axis=1)
    if gen.stable is not None:
        st = gen.stable
        a, al = st.values(t, z)
        K = st.k_trunc
        small = np.minimum(K, 1.0) ** (2 - al) / (2 - al)
        big = np.zeros_like(al)
        if K > 1.0:
            same = np.isclose(al, p)
            big = np.where(same, np.log(K), (K ** np.where(same, 1.0, p - al) - 1.0) / np.where(same, 1.0, p - al))
        out += (st.omega[None, :] * a * (small + big)).sum(axis=1)
    return out


def ebdd_probe(
    gen: GeneratorSpec,
    p: float,
    trials: int = 4,
    seed: int = 0,
    *,
    times=(0.0,),
    horizon: float | None = None,
    points=None,
    sampler: Callable | None = None,
) -> float:
    """Estimate P = sup max(|G|, |b|, int min(|y|^2, |y|^p) nu(dy)) over samples."""
    rng = np.random.default_rng(seed)
    pts = _default_points(gen) if points is None else _as_points(points, gen.d)
    sampler = sampler or _default_sampler(gen)
    H = horizon if horizon is not None else max(1.0, max(times))
    grid = uniform_grid(0.0, H, H / 4)
    best = 0.0
    for k in range(max(1, trials)):
        xi, _ = _random_pair(rng, sampler, grid, constant=(k % 2 == 0))
        for t in times:
            view = gen.view(xi, t)
            G, b, _ = gen.coefficients(t, pts, view)
            vals = [levy_moment(gen, t, pts, view, p).max()]
            if G is not None:
                vals.append(np.linalg.norm(G, ord=2, axis=(1, 2)).max())
            if b is not None:
                vals.append(np.linalg.norm(b, axis=1).max())
            best = max(best, float(max(vals)))
    return best
