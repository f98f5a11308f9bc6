"""
Frozen-coefficient dual propagators acting on measures.

Two backends:

* FINITE_STATE: RK4 on the forward master equation w' = Q(t)^T w for the
  state weights, where Q is read off the generator applied to indicators.
* PARTICLE: Euler-Maruyama stepping of N particles with categorical jump
  thinning. Random numbers come from counter-based Philox streams keyed by
  (seed, step index, channel), element i of each draw going to particle i.
  Propagations under different frozen paths therefore consume identical noise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, NumericError, StructuralError, ValidationError
from .generators import GeneratorSpec, _rate_matrix, _state_index
from .measures import (
    DiscreteMeasure,
    MeasurePath,
    coarse_flat_distance,
    flat_distance,
    moment,
    uniform_grid,
)

NEG_TOL = 1e-12
_CH_JUMP = 1
_CH_RADIUS = 2
_CH_NORMAL = 16


class BackendKind(str, enum.Enum):
    FINITE_STATE = "FINITE_STATE"
    PARTICLE = "PARTICLE"


@dataclass(frozen=True)
class BackendConfig:
    kind: BackendKind
    h_in: float
    states: np.ndarray | None = None
    n_particles: int = 10_000
    seed: int = 0
    guard: float = 0.1
    probe_particles: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "kind", BackendKind(self.kind))
        if not self.h_in > 0:
            raise ValidationError("h_in must be positive")
        if not 0 < self.guard <= 1:
            raise ValidationError("guard must lie in (0, 1]")
        if self.kind == BackendKind.PARTICLE:
            if self.n_particles < 100:
                raise ValidationError("PARTICLE backend needs n_particles >= 100")
            if self.seed < 0:
                raise ValidationError("seed must be non-negative")
        if self.states is not None:
            st = np.asarray(self.states, dtype=float)
            st = st.reshape(len(st), -1)
            st = st[np.lexsort(st.T[::-1])]
            st.setflags(write=False)
            object.__setattr__(self, "states", st)

    def steps_per(self, h: float) -> int:
        m = int(round(h / self.h_in))
        if m < 1 or abs(m * self.h_in - h) > 1e-12 * max(1.0, h):
            raise ValidationError(f"h_in={self.h_in} does not divide h={h}")
        return m

    def echo(self) -> dict:
        out = {"kind": self.kind.value, "h_in": self.h_in, "guard": self.guard}
        if self.kind == BackendKind.PARTICLE:
            out.update(n_particles=self.n_particles, seed=self.seed)
        if self.states is not None:
            out["states"] = self.states.tolist()
        return out


@dataclass
class PropagationStats:
    steps: int = 0
    guards_triggered: int = 0

    def as_dict(self) -> dict:
        return {"steps": self.steps, "guards_triggered": self.guards_triggered}


@dataclass
class ParticleEnsemble:
    positions: np.ndarray
    t: float
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.ids is None:
            self.ids = np.arange(len(self.positions))

    @property
    def size(self) -> int:
        return len(self.positions)

    def empirical(self) -> DiscreteMeasure:
        return DiscreteMeasure.from_samples(self.positions)


def stream(seed: int, step: int, channel: int) -> np.random.Generator:
    """Counter-based generator for one (step, channel) cell of the noise table."""
    bg = np.random.Philox(
        key=np.array([seed, 0], dtype=np.uint64),
        counter=np.array([0, 0, step, channel], dtype=np.uint64),
    )
    return np.random.Generator(bg)


def uniforms(seed: int, step: int, channel: int, n: int) -> np.ndarray:
    return stream(seed, step, channel).random(n)


def normals(seed: int, step: int, channel: int, n: int) -> np.ndarray:
    """Box-Muller normals from two uniform channels; element i belongs to particle i."""
    u1 = uniforms(seed, step, channel, n)
    u2 = uniforms(seed, step, channel + 1, n)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def initial_ensemble(mu: DiscreteMeasure, n: int, t: float = 0.0) -> ParticleEnsemble:
    """Place n particles: one per atom if mu is uniform on n atoms, else stratified inverse CDF."""
    if mu.size == n and np.allclose(mu.weights, 1.0 / n, rtol=0, atol=1e-15):
        return ParticleEnsemble(mu.atoms.copy(), t)
    cdf = np.cumsum(mu.weights)
    cdf[-1] = 1.0
    u = (np.arange(n) + 0.5) / n
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), mu.size - 1)
    return ParticleEnsemble(mu.atoms[idx].copy(), t)


def _step_index(backend: BackendConfig, t: float) -> int:
    k = int(round(t / backend.h_in))
    if abs(k * backend.h_in - t) > 1e-9 * max(1.0, abs(t)):
        raise StructuralError(f"time {t} is not a multiple of h_in={backend.h_in}")
    return k


# ---------------------------------------------------------------------------
# finite-state backend


def _states_for(backend: BackendConfig, gen: GeneratorSpec) -> np.ndarray:
    st = backend.states if backend.states is not None else gen.states
    if st is None:
        raise StructuralError("FINITE_STATE backend needs a state list")
    return st


def _weights_on(states: np.ndarray, mu: DiscreteMeasure) -> np.ndarray:
    idx = _state_index(states, mu.atoms)
    w = np.zeros(len(states))
    np.add.at(w, idx, mu.weights)
    return w


def _check_finite_family(gen: GeneratorSpec):
    if gen.diffusion is not None or gen.drift is not None or gen.stable is not None:
        raise CapabilityError(f"FINITE_STATE backend cannot run the {gen.family.value} family with drift or diffusion")


class _RateCache:
    def __init__(self, gen, frozen, states):
        self.gen, self.frozen, self.states = gen, frozen, states
        self.memo = {}
        self.layout = {}

    def __call__(self, t: float) -> np.ndarray:
        Q = self.memo.get(t)
        if Q is None:
            if len(self.memo) > 8:
                self.memo.clear()
            Q = _rate_matrix(self.gen, t, self.gen.view(self.frozen, t), self.states, self.layout)
            self.memo[t] = Q
        return Q


def _rk4_steps(rates: _RateCache, w: np.ndarray, k0: int, k1: int, backend: BackendConfig, stats) -> np.ndarray:
    h = backend.h_in
    for k in range(k0, k1):
        t = k * h
        Q0 = rates(t)
        load = h * float(np.max(-np.diag(Q0), initial=0.0))
        m = 1
        if load > backend.guard:
            m = int(np.ceil(load / backend.guard))
            if stats is not None:
                stats.guards_triggered += 1
        hs = h / m
        for j in range(m):
            ta = t + j * hs
            Qa = Q0 if j == 0 else rates(ta)
            Qm = rates(ta + 0.5 * hs)
            Qb = rates((k + 1) * h if j == m - 1 else ta + hs)
            k1_ = Qa.T @ w
            k2_ = Qm.T @ (w + 0.5 * hs * k1_)
            k3_ = Qm.T @ (w + 0.5 * hs * k2_)
            k4_ = Qb.T @ (w + hs * k3_)
            w = w + hs / 6.0 * (k1_ + 2 * k2_ + 2 * k3_ + k4_)
            lo = w.min()
            if lo < -NEG_TOL:
                raise NumericError(f"negative weight {lo:.3e} at t={ta:.6g}")
            if lo < 0:
                w = np.clip(w, 0.0, None)
            w = w / w.sum()
        if stats is not None:
            stats.steps += 1
    return w


def _finite_path(backend, gen, frozen, mu, grid, stats):
    _check_finite_family(gen)
    states = _states_for(backend, gen)
    w = _weights_on(states, mu)
    rates = _RateCache(gen, frozen, states)
    out = [DiscreteMeasure._trusted(states, w, mu.kind)]
    k = _step_index(backend, grid[0])
    for t in grid[1:]:
        k_next = _step_index(backend, t)
        w = _rk4_steps(rates, w, k, k_next, backend, stats)
        out.append(DiscreteMeasure._trusted(states, w, mu.kind))
        k = k_next
    return out


# ---------------------------------------------------------------------------
# particle backend


def _sqrt_psd(G: np.ndarray) -> np.ndarray:
    if G.shape[1] == 1:
        return np.sqrt(np.clip(G, 0.0, None))
    vals, vecs = np.linalg.eigh(G)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))[:, None, :]


def _stable_channels(st, t, X, h, budget):
    """Per-particle large-jump probabilities, cutoffs, compensation drift and small-jump variance."""
    n, d = X.shape
    dirs = st.directions(d)
    a, al = st.values(t, X)
    om = np.broadcast_to(st.omega, a.shape)
    active = st.omega > 0
    share = budget / max(1, int(active.sum()))
    K = st.k_trunc
    intensity = om * a
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = (share * al / (h * intensity) + K ** (-al)) ** (-1.0 / al)
    eps = np.where(intensity > 0, np.maximum(eps, st.eps), K)
    prob = np.where(intensity > 0, h * intensity * (eps ** (-al) - K ** (-al)) / al, 0.0)
    one = np.isclose(al, 1.0)
    safe = np.where(one, 2.0, al)
    comp = np.where(one, np.log(K / eps), (K ** (1 - safe) - eps ** (1 - safe)) / (1 - safe))
    comp = intensity * comp
    var = intensity * eps ** (2 - al) / (2 - al)
    drift = -(comp @ dirs)
    cov = np.einsum("nj,ja,jb->nab", var, dirs, dirs)
    return dirs, eps, al, prob, drift, cov


def _particle_step(backend, gen, frozen, X, k, stats, seed):
    h = backend.h_in
    t = k * h
    n, d = X.shape
    view = gen.view(frozen, t)
    G, b, J = gen.coefficients(t, X, view)
    drift = np.zeros((n, d)) if b is None else np.array(b, dtype=float)
    cov = None if G is None else G * h
    probs = []
    targets = []
    if J is not None:
        rates, vecs = J
        if gen.compensated:
            small = np.linalg.norm(vecs, axis=-1) < 1.0
            drift -= np.einsum("nk,nkd->nd", rates * small, vecs)
        probs.append(rates * h)
        targets.append(("list", vecs))
    st = gen.stable
    if st is not None:
        budget = 0.5 * backend.guard
        dirs, eps, al, sp, sdrift, scov = _stable_channels(st, t, X, h, budget)
        drift += sdrift
        cov = scov * h if cov is None else cov + scov * h
        probs.append(sp)
        targets.append(("stable", (dirs, eps, al)))
    Xn = X + drift * h
    if cov is not None and np.any(cov):
        S = _sqrt_psd(np.broadcast_to(cov, (n, d, d)))
        Z = np.stack([normals(seed, k, _CH_NORMAL + 2 * j, n) for j in range(d)], axis=1)
        Xn = Xn + np.einsum("nij,nj->ni", S, Z)
    if probs:
        P = np.concatenate(probs, axis=1)
        total = P.sum(axis=1)
        worst = float(total.max(initial=0.0))
        if worst > backend.guard * (1 + 1e-12):
            raise NumericError(
                f"jump step guard violated: h_in * total rate = {worst:.4g} > {backend.guard} at t={t:.6g}"
            )
        u = uniforms(seed, k, _CH_JUMP, n)
        cum = np.cumsum(P, axis=1)
        choice = (u[:, None] >= cum).sum(axis=1)
        offset = 0
        for (kind, data), p in zip(targets, probs):
            m = p.shape[1]
            sel = (choice >= offset) & (choice < offset + m)
            if sel.any():
                rows = np.flatnonzero(sel)
                col = choice[rows] - offset
                if kind == "list":
                    Xn[rows] += data[rows, col]
                else:
                    dirs, eps, al = data
                    v = uniforms(seed, k, _CH_RADIUS, n)[rows]
                    e = eps[rows, col]
                    a_ = al[rows, col]
                    K = st.k_trunc
                    r = (e ** (-a_) - v * (e ** (-a_) - K ** (-a_))) ** (-1.0 / a_)
                    Xn[rows] += r[:, None] * dirs[col]
            offset += m
    if not np.all(np.isfinite(Xn)):
        raise NumericError(f"particle positions became non-finite at t={t:.6g}")
    if stats is not None:
        stats.steps += 1
    return Xn


def advance(backend, gen, frozen, ens: ParticleEnsemble, t: float, stats=None) -> ParticleEnsemble:
    """Step an ensemble from ens.t to t under the frozen path."""
    k0 = _step_index(backend, ens.t)
    k1 = _step_index(backend, t)
    if k1 < k0:
        raise StructuralError("cannot propagate backwards in time")
    X = ens.positions
    for k in range(k0, k1):
        X = _particle_step(backend, gen, frozen, X, k, stats, backend.seed)
    return ParticleEnsemble(X, float(t), ens.ids)


def _particle_path(backend, gen, frozen, mu, grid, stats, n=None):
    ens = initial_ensemble(mu, n or backend.n_particles, float(grid[0]))
    out = [ens.empirical()]
    for t in grid[1:]:
        ens = advance(backend, gen, frozen, ens, float(t), stats)
        out.append(ens.empirical())
    return out


# ---------------------------------------------------------------------------
# public operations


def _check_window(frozen: MeasurePath, s: float, t: float):
    tol = 1e-9 * max(1.0, abs(frozen.T))
    if s < frozen.t0 - tol or t > frozen.T + tol or s > t + tol:
        raise StructuralError(f"need {frozen.t0} <= s <= t <= {frozen.T}, got s={s}, t={t}")


def propagate_path(
    backend: BackendConfig,
    gen: GeneratorSpec,
    frozen: MeasurePath,
    mu: DiscreteMeasure,
    grid=None,
    stats: PropagationStats | None = None,
) -> MeasurePath:
    """Propagate mu from grid[0] under the frozen path, recording every grid node."""
    grid = frozen.grid if grid is None else np.asarray(grid, dtype=float)
    _check_window(frozen, float(grid[0]), float(grid[-1]))
    if backend.kind == BackendKind.FINITE_STATE:
        ms = _finite_path(backend, gen, frozen, mu, grid, stats)
    else:
        ms = _particle_path(backend, gen, frozen, mu, grid, stats)
    return MeasurePath(grid, ms)


def propagate(
    backend: BackendConfig,
    gen: GeneratorSpec,
    frozen: MeasurePath,
    mu: DiscreteMeasure,
    s: float,
    t: float,
    stats: PropagationStats | None = None,
) -> DiscreteMeasure:
    """U^{t,s}[frozen] applied to mu."""
    _check_window(frozen, s, t)
    grid = np.array([s, t]) if t > s else np.array([s])
    if backend.kind == BackendKind.FINITE_STATE:
        return _finite_path(backend, gen, frozen, mu, grid, stats)[-1]
    return _particle_path(backend, gen, frozen, mu, grid, stats)[-1]


def chain_defect(backend, gen, frozen, mu, r: float, s: float, t: float) -> float:
    """Flat distance between U^{t,r} mu and U^{t,s} U^{s,r} mu."""
    if not r <= s <= t:
        raise StructuralError("chain_defect needs r <= s <= t")
    _check_window(frozen, r, t)
    if backend.kind == BackendKind.FINITE_STATE:
        direct = propagate(backend, gen, frozen, mu, r, t)
        mid = propagate(backend, gen, frozen, mu, r, s)
        return flat_distance(direct, propagate(backend, gen, frozen, mid, s, t))
    ens = initial_ensemble(mu, backend.n_particles, r)
    direct = advance(backend, gen, frozen, ens, t)
    two = advance(backend, gen, frozen, advance(backend, gen, frozen, ens, s), t)
    if np.array_equal(direct.positions, two.positions):
        return 0.0
    return coarse_flat_distance(direct.empirical(), two.empirical())


def martingale_defect(backend, gen, frozen: MeasurePath, f, checkpoints) -> list[tuple[float, float]]:
    """E[M_t] - E[M_t0] with standard errors, M_t = f(X_t) - sum_k h (A f)(X_k).

    The compensator uses left-point sums, which is the exact compensator of
    the discrete scheme for drift and jump terms.
    """
    from .generators import apply

    if backend.kind != BackendKind.PARTICLE:
        raise CapabilityError("martingale_defect needs the PARTICLE backend")
    checkpoints = sorted(float(c) for c in checkpoints)
    t0 = frozen.t0
    _check_window(frozen, t0, checkpoints[-1])
    h = backend.h_in
    ens = initial_ensemble(frozen.initial, backend.n_particles, t0)
    X = ens.positions
    f0 = f(X)
    comp = np.zeros(len(X))
    k = _step_index(backend, t0)
    out = []
    for c in checkpoints:
        kc = _step_index(backend, c)
        while k < kc:
            t = k * h
            comp += h * apply(gen, t, gen.view(frozen, t), f, X)
            X = _particle_step(backend, gen, frozen, X, k, None, backend.seed)
            k += 1
        inc = f(X) - comp - f0
        se = float(inc.std(ddof=1) / np.sqrt(len(inc)))
        out.append((float(inc.mean()), se))
    return out


def _probe_pairs(backend, gen, rng):
    if backend.kind == BackendKind.FINITE_STATE:
        states = _states_for(backend, gen)
        a = DiscreteMeasure(states, rng.dirichlet(np.ones(len(states))))
        b = DiscreteMeasure(states, rng.dirichlet(np.ones(len(states))))
        return a, b
    k = int(rng.integers(1, 4))
    a = DiscreteMeasure(rng.uniform(-2, 2, size=(k, gen.d)), rng.dirichlet(np.ones(k)))
    b = DiscreteMeasure(rng.uniform(-2, 2, size=(k, gen.d)), rng.dirichlet(np.ones(k)))
    return a, b


def propagator_probe(
    backend: BackendConfig,
    gen: GeneratorSpec,
    frozen: MeasurePath,
    trials: int = 4,
    seed: int = 0,
    horizon: float | None = None,
) -> float:
    """Largest observed flat_distance(U mu, U nu) / flat_distance(mu, nu) along the frozen grid."""
    rng = np.random.default_rng(seed)
    grid = frozen.grid
    if horizon is not None:
        grid = grid[grid <= grid[0] + horizon + 1e-12]
    if len(grid) < 2:
        grid = frozen.grid[:2]
    best = 0.0
    for _ in range(max(1, trials)):
        mu, nu = _probe_pairs(backend, gen, rng)
        d0 = flat_distance(mu, nu)
        if d0 <= 1e-12:
            continue
        if backend.kind == BackendKind.FINITE_STATE:
            pm = _finite_path(backend, gen, frozen, mu, grid, None)
            pn = _finite_path(backend, gen, frozen, nu, grid, None)
        else:
            n = min(backend.n_particles, backend.probe_particles)
            pm = _particle_path(backend, gen, frozen, mu, grid, None, n)
            pn = _particle_path(backend, gen, frozen, nu, grid, None, n)
        d = max(coarse_flat_distance(a, b) for a, b in zip(pm[1:], pn[1:]))
        best = max(best, d / d0)
    return best


def moment_profile(path: MeasurePath, p: float) -> np.ndarray:
    return np.array([moment(m, p) for m in path.measures])


def empirical_stats(path: MeasurePath) -> tuple[np.ndarray, np.ndarray]:
    """Node-wise mean and variance of the first coordinate."""
    means = np.array([m.mean()[0] for m in path.measures])
    var = np.array([float(m.weights @ (m.atoms[:, 0] - mu) ** 2) for m, mu in zip(path.measures, means)])
    return means, var


__all__ = [
    "BackendKind",
    "BackendConfig",
    "PropagationStats",
    "ParticleEnsemble",
    "stream",
    "uniforms",
    "normals",
    "initial_ensemble",
    "advance",
    "propagate_path",
    "propagate",
    "chain_defect",
    "martingale_defect",
    "propagator_probe",
    "moment_profile",
    "empirical_stats",
    "uniform_grid",
]
