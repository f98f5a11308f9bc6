"""
Fixed-point solvers for path-dependent kinetic equations.

Every solver iterates the map

    Phi(xi)_t = U^{t,t0}[xi] mu,

propagating the initial measure under coefficients frozen along a candidate
path xi, and compares iterates in the flat metric at the grid nodes.

* solve_local: Banach iteration, valid when c1 c2 c3 K T < 1.
* solve_global_pathindep: chains local solves over node-aligned
  sub-intervals, each with product below one half.
* solve_adapted: Picard iteration over the whole horizon, whose increments
  obey a factorial envelope.
* solve_anticipating: damped iteration xi <- (1 - beta) xi + beta Phi(xi) with
  beta halved whenever the residual grows; reports existence only.
* solve_mfg: the same damped loop where Phi first builds optimal controls
  against the candidate path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .diagnostics.certificates import (
    Certificate,
    certify,
    gronwall_factor,
    moment_certificate,
    sensitivity_certificate,
    time_lipschitz_certificate,
    weak_residual,
)
from .errors import DegenerateConstants, LocalityViolated, ValidationError
from .generators import GeneratorSpec, Mode, boundedness_probe, ebdd_probe, lipschitz_probe
from .measures import (
    DiscreteMeasure,
    MeasurePath,
    coarsen,
    concat_paths,
    mix,
    moment,
    path_distance,
    path_distance_profile,
    uniform_grid,
)
from .propagators import BackendConfig, BackendKind, PropagationStats, propagate_path, propagator_probe
from .testfunctions import Dictionary, FunctionClass, build_dictionary

CONVERGED = "CONVERGED"
MAX_ITER = "MAX_ITER"
NON_CONVERGED = "NON_CONVERGED"
UNIQUE = "UNIQUE"
EXISTENCE_ONLY = "EXISTENCE_ONLY"

C3_ASSUMPTION = "c3 = 1: the frozen backward propagators are taken to be sup-norm contractions (positivity preserving)"
MAX_SUBINTERVALS = 1_000_000
RESIDUAL_BOUND = 1e-4


@dataclass(frozen=True)
class ContractionConstants:
    c1: float
    c2: float
    c3: float = 1.0
    K_mass: float = 1.0
    T: float = 0.0
    c1_lipschitz: float = 0.0
    c1_bound: float = 0.0

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "K_mass", "T"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    @property
    def rate(self) -> float:
        return self.c1 * self.c2 * self.c3 * self.K_mass

    @property
    def product(self) -> float:
        return self.rate * self.T

    def with_T(self, T: float) -> "ContractionConstants":
        return replace(self, T=float(T))

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "K_mass": self.K_mass,
            "T": self.T,
            "product": self.product,
            "c1_lipschitz": self.c1_lipschitz,
            "c1_bound": self.c1_bound,
        }


@dataclass
class SolveReport:
    solver: str
    status: str
    semantics: str
    solution: MeasurePath
    iterations: int
    residual_trace: list
    ratios: list
    constants: ContractionConstants
    certificates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    backend: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    assumptions: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    tol: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def certified(self) -> bool:
        return all(c.ok for c in self.certificates.values())

    @property
    def contraction_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def add(self, cert: Certificate):
        self.certificates[cert.name] = cert

    def to_dict(self, max_atoms: int = 20_000) -> dict:
        sol = self.solution
        total = sum(m.size for m in sol.measures)
        summary = {
            "t0": sol.t0,
            "T": sol.T,
            "h": sol.h,
            "nodes": len(sol),
            "atoms_per_node": [m.size for m in sol.measures],
            "mean": [m.mean().tolist() for m in sol.measures],
        }
        if total <= max_atoms:
            summary["path"] = sol.to_dict()
        return {
            "solver": self.solver,
            "status": self.status,
            "semantics": self.semantics,
            "tol": self.tol,
            "iterations": self.iterations,
            "residual_trace": list(map(float, self.residual_trace)),
            "ratios": list(map(float, self.ratios)),
            "contraction_ratio": self.contraction_ratio,
            "constants": self.constants.to_dict(),
            "certificates": {k: v.to_dict() for k, v in sorted(self.certificates.items())},
            "diagnostics": _plain(self.diagnostics),
            "backend": _plain(self.backend),
            "seeds": _plain(self.seeds),
            "assumptions": list(self.assumptions),
            "extra": _plain(self.extra),
            "solution": summary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


# ---------------------------------------------------------------------------
# constants


def default_dictionary(gen: GeneratorSpec, size: int = 16, seed: int = 0, states=None,
                       cls: FunctionClass | str | None = None) -> Dictionary:
    """Dictionary in the class the generator needs: LIP for pure jumps, C1 without diffusion, C2 otherwise."""
    jump_only = gen.diffusion is None and gen.drift is None and gen.stable is None
    if cls is not None:
        cls = FunctionClass(cls)
    elif jump_only:
        cls = FunctionClass.LIP
    elif gen.diffusion is None and gen.stable is None:
        cls = FunctionClass.C1
    else:
        cls = FunctionClass.C2
    st = states if states is not None else gen.states
    centers = None
    if st is not None and gen.d == 1 and len(st) > 1:
        s = np.sort(np.asarray(st, dtype=float).reshape(-1))
        centers = (0.5 * (s[1:] + s[:-1])).tolist()
    return build_dictionary(cls, gen.d, size, seed, centers=centers)


def _probe_points(gen: GeneratorSpec, backend: BackendConfig):
    if backend.kind == BackendKind.FINITE_STATE:
        return backend.states if backend.states is not None else gen.states
    return None


def estimate_constants(
    gen: GeneratorSpec,
    backend: BackendConfig,
    mu: DiscreteMeasure,
    grid: np.ndarray,
    dictionary: Dictionary,
    *,
    trials: int = 8,
    seed: int = 0,
    c2_trials: int = 4,
) -> ContractionConstants:
    """Probe c1 (Lipschitz and boundedness) at a few times and c2 along a constant frozen path."""
    grid = np.asarray(grid, dtype=float)
    horizon = float(grid[-1])
    times = sorted({float(grid[0]), float(grid[len(grid) // 2]), float(grid[-1])})
    pts = _probe_points(gen, backend)
    lip = max(lipschitz_probe(gen, t, trials, seed + i, dictionary, horizon=horizon, points=pts)
              for i, t in enumerate(times))
    bnd = max(boundedness_probe(gen, t, max(2, trials // 2), seed + i, dictionary, horizon=horizon, points=pts)
              for i, t in enumerate(times))
    frozen = MeasurePath.constant(mu, grid)
    c2_horizon = min(horizon - grid[0], 1.0 if backend.kind == BackendKind.FINITE_STATE else 0.5)
    c2 = max(1.0, propagator_probe(backend, gen, frozen, c2_trials, seed, c2_horizon))
    T = float(grid[-1] - grid[0])
    return ContractionConstants(max(lip, bnd), c2, 1.0, 1.0, T, lip, bnd)


# ---------------------------------------------------------------------------
# iteration kernels


def _ratios(trace, floor: float) -> list:
    return [trace[k + 1] / trace[k] for k in range(len(trace) - 1) if trace[k] > floor]


def _banach(phi: Callable, xi: MeasurePath, tol: float, max_iter: int):
    """Iterate until r_n = d(Phi(xi^n), xi^n) <= tol; returns (Phi(xi^n), trace, status, n, iterates)."""
    trace = []
    for n in range(max_iter + 1):
        nxt = phi(xi)
        r = path_distance(nxt, xi)
        trace.append(r)
        if r <= tol:
            return nxt, trace, CONVERGED, n
        if n == max_iter:
            break
        xi = nxt
    return nxt, trace, MAX_ITER, max_iter


def _floor(backend: BackendConfig) -> float:
    # below one particle's mass, residual ratios reflect single jump flips
    return 1e-11 if backend.kind == BackendKind.FINITE_STATE else 1.0 / backend.n_particles


def _residual_allowance(backend: BackendConfig, constants: ContractionConstants, h: float) -> float:
    if backend.kind == BackendKind.FINITE_STATE:
        return 0.0
    return 5.0 * math.sqrt(max(constants.c1, 1.0) / (backend.n_particles * h))


def _common_certificates(report: SolveReport, gen, backend, dictionary, constants, residual_bound, h):
    sol = report.solution
    if len(sol) >= 3:
        res = weak_residual(sol, gen, dictionary)
        allow = _residual_allowance(backend, constants, h)
        report.add(certify("WEAK_RESIDUAL", res, residual_bound + allow,
                           context=f"{dictionary.cls.value} dictionary; particle noise allowance {allow:.3g}"))
        report.diagnostics["weak_residual"] = res
    allowance = 0.0
    if backend.kind == BackendKind.PARTICLE:
        allowance = 3.0 * math.sqrt(2.0) / (math.sqrt(backend.n_particles) * h)
    report.add(time_lipschitz_certificate(sol, dictionary, constants.c1 * constants.c2, allowance))


def _base_report(solver, gen, backend, dictionary, constants, tol, seed) -> dict:
    return dict(
        solver=solver,
        constants=constants,
        backend=backend.echo(),
        seeds={"probe": seed, "dictionary": dictionary.seed, "backend": backend.seed},
        assumptions=[C3_ASSUMPTION, "K_mass = 1 (probability measures)"],
        tol=tol,
    )


def _perturbation(mu: DiscreteMeasure, backend: BackendConfig, gen: GeneratorSpec, rng) -> DiscreteMeasure:
    if backend.kind == BackendKind.FINITE_STATE:
        states = backend.states if backend.states is not None else gen.states
        other = DiscreteMeasure(states, rng.dirichlet(np.ones(len(states))))
        return mix(mu, other, float(rng.uniform(0.05, 0.3)))
    shift = float(rng.uniform(-0.3, 0.3))
    return DiscreteMeasure(mu.atoms + shift, mu.weights)


def _setup(gen, mu, backend, T, h, t0, dictionary, constants, seed, probe_trials):
    if not T > 0:
        raise ValidationError("horizon T must be positive")
    backend.steps_per(h)
    grid = uniform_grid(t0, t0 + T, h)
    if dictionary is None:
        dictionary = default_dictionary(gen, states=backend.states)
    if constants is None:
        constants = estimate_constants(gen, backend, mu, grid, dictionary, trials=probe_trials, seed=seed)
    return grid, dictionary, constants.with_T(T)


# ---------------------------------------------------------------------------
# solvers


def solve_local(
    gen: GeneratorSpec,
    mu: DiscreteMeasure,
    backend: BackendConfig,
    T: float,
    tol: float,
    h: float,
    *,
    t0: float = 0.0,
    max_iter: int = 200,
    constants: ContractionConstants | None = None,
    dictionary: Dictionary | None = None,
    seed: int = 0,
    probe_trials: int = 8,
    residual_bound: float = RESIDUAL_BOUND,
    certificates: bool = True,
    stats: PropagationStats | None = None,
) -> SolveReport:
    """Banach iteration of xi -> {U^{t,t0}[xi] mu} on [t0, t0 + T] under the locality constraint."""
    if not tol > 0:
        raise ValidationError("tol must be positive")
    grid, dictionary, constants = _setup(gen, mu, backend, T, h, t0, dictionary, constants, seed, probe_trials)
    if constants.product >= 1.0 and not gen.measure_independent:
        raise LocalityViolated(constants.product)
    stats = stats if stats is not None else PropagationStats()

    def phi(xi):
        return propagate_path(backend, gen, xi, mu, grid, stats)

    sol, trace, status, n = _banach(phi, MeasurePath.constant(mu, grid), tol, max_iter)
    ratios = _ratios(trace, _floor(backend))
    if status == MAX_ITER and trace[-1] >= trace[0]:
        status = NON_CONVERGED
    report = SolveReport(
        status=status, semantics=UNIQUE, solution=sol, iterations=n, residual_trace=trace, ratios=ratios,
        **_base_report("solve_local", gen, backend, dictionary, constants, tol, seed),
    )
    if status == NON_CONVERGED:
        report.diagnostics["NO_CONTRACTION"] = True
    report.diagnostics["propagation"] = stats.as_dict()
    if certificates:
        report.add(certify("CONTRACTION", report.contraction_ratio, constants.product,
                           context=f"{len(ratios)} ratios above floor {_floor(backend):.0e}"))
        _common_certificates(report, gen, backend, dictionary, constants, residual_bound, h)
    return report


def _chunk_nodes(constants: ContractionConstants, h: float, T: float, safety: float, measure_free: bool) -> int:
    total = int(round(T / h))
    if measure_free or constants.rate == 0.0:
        return total
    L = safety / constants.rate
    nodes = int(math.floor(L / h + 1e-9))
    if nodes < 1:
        raise DegenerateConstants(
            f"sub-interval length {L:.3g} is shorter than the grid step {h}; refine h or check the constants"
        )
    if math.ceil(total / nodes) > MAX_SUBINTERVALS:
        raise DegenerateConstants(f"more than {MAX_SUBINTERVALS} sub-intervals needed")
    return min(nodes, total)


def _chain(gen, mu, backend, T, tol, h, t0, nodes, constants, dictionary, max_iter, stats):
    total = int(round(T / h))
    starts = list(range(0, total, nodes))
    pieces, traces, ratios, iters, status = [], [], [], 0, CONVERGED
    cur = mu
    for s in starts:
        e = min(s + nodes, total)
        rep = solve_local(gen, cur, backend, (e - s) * h, tol, h, t0=t0 + s * h, max_iter=max_iter,
                          constants=constants, dictionary=dictionary, certificates=False, stats=stats)
        pieces.append(rep.solution)
        traces.append(rep.residual_trace)
        ratios.extend(rep.ratios)
        iters = max(iters, rep.iterations)
        if rep.status != CONVERGED:
            status = rep.status
        cur = rep.solution.final
    solution = concat_paths(pieces)
    width = max(len(t) for t in traces)
    envelope = [max(t[min(k, len(t) - 1)] for t in traces) for k in range(width)]
    return solution, envelope, ratios, iters, status, traces, [t0 + s * h for s in starts]


def solve_global_pathindep(
    gen: GeneratorSpec,
    mu: DiscreteMeasure,
    backend: BackendConfig,
    T: float,
    tol: float,
    h: float,
    *,
    safety: float = 0.5,
    max_iter: int = 200,
    constants: ContractionConstants | None = None,
    dictionary: Dictionary | None = None,
    seed: int = 0,
    probe_trials: int = 8,
    residual_bound: float = RESIDUAL_BOUND,
    certificates=("CONTRACTION", "RESTART", "SENSITIVITY", "WEAK_RESIDUAL", "TIME_LIPSCHITZ"),
    perturbations: int = 1,
) -> SolveReport:
    """Chain local solves over sub-intervals whose product is at most `safety`."""
    if gen.mode != Mode.PATH_INDEPENDENT:
        raise ValidationError(f"solve_global_pathindep needs a PATH_INDEPENDENT generator, got {gen.mode.value}")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    grid, dictionary, constants = _setup(gen, mu, backend, T, h, 0.0, dictionary, constants, seed, probe_trials)
    nodes = _chunk_nodes(constants, h, T, safety, gen.measure_independent)
    stats = PropagationStats()
    sub = constants.with_T(nodes * h)
    sol, envelope, ratios, iters, status, traces, starts = _chain(
        gen, mu, backend, T, tol, h, 0.0, nodes, sub, dictionary, max_iter, stats)
    report = SolveReport(
        status=status, semantics=UNIQUE, solution=sol, iterations=iters, residual_trace=envelope, ratios=ratios,
        **_base_report("solve_global_pathindep", gen, backend, dictionary, constants, tol, seed),
    )
    report.diagnostics.update(
        propagation=stats.as_dict(),
        subintervals=len(starts),
        subinterval_nodes=nodes,
        subinterval_product=sub.product,
        subinterval_iterations=[len(t) - 1 for t in traces],
    )
    report.assumptions.append("initial-data Lipschitz constant certified in the explicit Gronwall form c2 exp(c1 c2 c3 K T)")
    wanted = set(certificates or ())
    if "CONTRACTION" in wanted:
        report.add(certify("CONTRACTION", report.contraction_ratio, sub.product,
                           context=f"per sub-interval product, {len(ratios)} ratios"))
    if "RESTART" in wanted and len(sol) > 2:
        report.add(_restart_certificate(gen, backend, sol, tol, h, nodes, sub, dictionary, max_iter, starts))
    if "SENSITIVITY" in wanted:
        rng = np.random.default_rng(seed + 1)
        bound = gronwall_factor(constants.c1, constants.c2, constants.c3, constants.K_mass, T)

        def rerun(m):
            return _chain(gen, m, backend, T, tol, h, 0.0, nodes, sub, dictionary, max_iter, None)[0]

        worst = None
        for _ in range(max(1, perturbations)):
            eta = _perturbation(mu, backend, gen, rng)
            cert = sensitivity_certificate(lambda m: sol if m is mu else rerun(m), mu, eta, bound)
            if worst is None or cert.measured > worst.measured:
                worst = cert
        report.add(worst)
    if wanted & {"WEAK_RESIDUAL", "TIME_LIPSCHITZ"}:
        _common_certificates(report, gen, backend, dictionary, constants, residual_bound, h)
    return report


def _restart_certificate(gen, backend, sol, tol, h, nodes, sub, dictionary, max_iter, starts) -> Certificate:
    """Re-solve from (s, mu_s) and compare with the original path on [s, T]."""
    n = len(sol) - 1
    if backend.kind == BackendKind.FINITE_STATE:
        k = n // 2
    else:
        # particle restarts re-seed the ensemble from mu_s; only chain boundaries replay the same ensemble
        bounds = [int(round((s - sol.t0) / h)) for s in starts[1:]] or [0]
        k = min(bounds, key=lambda b: abs(b - n // 2))
    s = float(sol.grid[k])
    rest, *_ = _chain(gen, sol[k], backend, sol.T - s, tol, h, s, nodes, sub, dictionary, max_iter, None)
    d = float(path_distance_profile(rest, sol.slice(k, n)).max())
    return certify("RESTART", d, 2 * tol, context=f"restart at t={s:.6g}")


def solve_adapted(
    gen: GeneratorSpec,
    mu: DiscreteMeasure,
    backend: BackendConfig,
    T: float,
    tol: float,
    h: float,
    *,
    max_iter: int = 50,
    constants: ContractionConstants | None = None,
    dictionary: Dictionary | None = None,
    seed: int = 0,
    probe_trials: int = 8,
    residual_bound: float = RESIDUAL_BOUND,
    certificates=("FACTORIAL", "GRONWALL", "WEAK_RESIDUAL", "TIME_LIPSCHITZ"),
    perturbations: int = 1,
) -> SolveReport:
    """Picard iteration xi^n = Phi(xi^{n-1}) from xi^0 = mu over the whole horizon."""
    if gen.mode not in (Mode.ADAPTED, Mode.PATH_INDEPENDENT):
        raise ValidationError(f"solve_adapted needs an ADAPTED generator, got {gen.mode.value}")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    grid, dictionary, constants = _setup(gen, mu, backend, T, h, 0.0, dictionary, constants, seed, probe_trials)
    stats = PropagationStats()

    def solve_from(m, st=None):
        def phi(xi):
            return propagate_path(backend, gen, xi, m, grid, st)

        return _banach(phi, MeasurePath.constant(m, grid), tol, max_iter)

    sol, trace, status, n = solve_from(mu, stats)
    report = SolveReport(
        status=status, semantics=UNIQUE, solution=sol, iterations=n, residual_trace=trace,
        ratios=_ratios(trace, _floor(backend)),
        **_base_report("solve_adapted", gen, backend, dictionary, constants, tol, seed),
    )
    report.diagnostics["propagation"] = stats.as_dict()
    wanted = set(certificates or ())
    cT = constants.product
    envelope = [2.0 * cT**k / math.factorial(k) for k in range(1, len(trace) + 1)]
    report.diagnostics["factorial_envelope"] = envelope
    if "FACTORIAL" in wanted:
        floor = _floor(backend)
        excess = [trace[k] / envelope[k] for k in range(len(trace)) if trace[k] > floor]
        report.add(certify("FACTORIAL", max(excess, default=0.0), 1.0,
                           context=f"max increment / 2 (cT)^n / n!, cT={cT:.6g}, increments above {floor:.0e}"))
    if "GRONWALL" in wanted:
        rng = np.random.default_rng(seed + 1)
        bound = gronwall_factor(constants.c1, constants.c2, constants.c3, constants.K_mass, T)
        worst = None
        for _ in range(max(1, perturbations)):
            eta = _perturbation(mu, backend, gen, rng)
            cert = sensitivity_certificate(lambda m: sol if m is mu else solve_from(m)[0], mu, eta, bound,
                                           name="GRONWALL")
            if worst is None or cert.measured > worst.measured:
                worst = cert
        report.add(worst)
    if wanted & {"WEAK_RESIDUAL", "TIME_LIPSCHITZ"}:
        _common_certificates(report, gen, backend, dictionary, constants, residual_bound, h)
    return report


def _mix_paths(a: MeasurePath, b: MeasurePath, beta: float, cap: int | None) -> MeasurePath:
    ms = [mix(x, y, beta) for x, y in zip(a.measures, b.measures)]
    if cap is not None:
        ms = [coarsen(m, cap) for m in ms]
    return MeasurePath(a.grid, ms)


def _damped(phi: Callable, xi: MeasurePath, tol: float, beta: float, max_iter: int, cap: int | None,
            on_iterate: Callable | None = None):
    trace, log = [], []
    for n in range(max_iter + 1):
        nxt = phi(xi)
        if on_iterate is not None:
            on_iterate(n, xi, nxt)
        r = path_distance(nxt, xi)
        if trace and r > trace[-1]:
            beta *= 0.5
            log.append({"iteration": n, "beta": beta})
        trace.append(r)
        if r <= tol:
            return nxt, trace, CONVERGED, n, log, beta
        if n == max_iter:
            break
        xi = _mix_paths(xi, nxt, beta, cap)
    return nxt, trace, NON_CONVERGED, max_iter, log, beta


def solve_anticipating(
    gen: GeneratorSpec,
    mu: DiscreteMeasure,
    backend: BackendConfig,
    T: float,
    tol: float,
    h: float,
    *,
    beta: float = 0.5,
    max_iter: int = 500,
    constants: ContractionConstants | None = None,
    dictionary: Dictionary | None = None,
    seed: int = 0,
    probe_trials: int = 8,
    residual_bound: float = RESIDUAL_BOUND,
    moment_p: float = 2.0,
    certificates=("WEAK_RESIDUAL", "MOMENT"),
) -> SolveReport:
    """Damped fixed-point iteration; the result carries existence-only semantics."""
    if gen.mode not in (Mode.ANTICIPATING, Mode.FULL_PATH):
        raise ValidationError(f"solve_anticipating needs an ANTICIPATING or FULL_PATH generator, got {gen.mode.value}")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    if not 0 < beta <= 1:
        raise ValidationError("beta must lie in (0, 1]")
    grid, dictionary, constants = _setup(gen, mu, backend, T, h, 0.0, dictionary, constants, seed, probe_trials)
    stats = PropagationStats()
    cap = 4 * backend.n_particles if backend.kind == BackendKind.PARTICLE else None
    moments = []

    def phi(xi):
        return propagate_path(backend, gen, xi, mu, grid, stats)

    def watch(n, xi, nxt):
        moments.append(max(moment(m, moment_p) for m in xi.measures))

    sol, trace, status, n, log, beta_final = _damped(phi, MeasurePath.constant(mu, grid), tol, beta, max_iter,
                                                   cap, watch)
    report = SolveReport(
        status=status, semantics=EXISTENCE_ONLY, solution=sol, iterations=n, residual_trace=trace,
        ratios=_ratios(trace, _floor(backend)),
        **_base_report("solve_anticipating", gen, backend, dictionary, constants, tol, seed),
    )
    report.diagnostics.update(propagation=stats.as_dict(), beta_log=log, beta_final=beta_final, beta_initial=beta)
    report.assumptions.append("no uniqueness claim: the damped iteration only exhibits a solution")
    wanted = set(certificates or ())
    if "MOMENT" in wanted:
        P = ebdd_probe(gen, moment_p, horizon=grid[-1], times=(0.0, float(grid[-1])),
                       points=_probe_points(gen, backend))
        cert = moment_certificate(sol, moment_p, P)
        sup_iter = max(moments + [cert.measured])
        report.add(certify("MOMENT", sup_iter, cert.bound, context=cert.context + "; sup over all iterates"))
    if "WEAK_RESIDUAL" in wanted and len(sol) >= 3:
        res = weak_residual(sol, gen, dictionary)
        allow = _residual_allowance(backend, constants, h)
        report.add(certify("WEAK_RESIDUAL", res, residual_bound + allow, context=f"{dictionary.cls.value} dictionary"))
        report.diagnostics["weak_residual"] = res
    return report


def solve_mfg(
    forward_gen: Callable,
    control_builder: Callable,
    mu: DiscreteMeasure,
    backend: BackendConfig,
    T: float,
    tol: float,
    h: float,
    *,
    beta: float = 1.0,
    max_iter: int = 500,
    seed: int = 0,
    residual_bound: float = RESIDUAL_BOUND,
) -> SolveReport:
    """Outer damped iteration on the anticipated population path mu_hat.

    forward_gen(controls) returns the controlled generator; control_builder(mu_hat)
    returns optimal feedback controls against mu_hat.
    """
    if backend.kind != BackendKind.FINITE_STATE:
        raise ValidationError("solve_mfg runs on the FINITE_STATE backend")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    if not 0 < beta <= 1:
        raise ValidationError("beta must lie in (0, 1]")
    backend.steps_per(h)
    grid = uniform_grid(0.0, T, h)
    stats = PropagationStats()
    tables = {}

    def phi(xi):
        table = control_builder(xi)
        tables["last"] = table
        gen = forward_gen(table)
        tables["gen"] = gen
        return propagate_path(backend, gen, xi, mu, grid, stats)

    sol, trace, status, n, log, beta_final = _damped(phi, MeasurePath.constant(mu, grid), tol, beta, max_iter, None)
    gen = tables["gen"]
    dictionary = default_dictionary(gen, states=backend.states)
    report = SolveReport(
        solver="solve_mfg", status=status, semantics=EXISTENCE_ONLY, solution=sol, iterations=n,
        residual_trace=trace, ratios=_ratios(trace, _floor(backend)),
        constants=ContractionConstants(0.0, 1.0, 1.0, 1.0, T), backend=backend.echo(), seeds={"backend": backend.seed},
        assumptions=["consistency residual is the flat path distance between the anticipated and generated paths"],
        tol=tol,
    )
    table = tables["last"]
    every = max(1, int(round(h / backend.h_in)))
    report.extra["control_table"] = table.to_dict(every)
    report.diagnostics.update(propagation=stats.as_dict(), beta_log=log, beta_final=beta_final,
                              consistency_residuals=list(trace))
    if len(sol) >= 3:
        res = weak_residual(sol, gen, dictionary)
        report.add(certify("WEAK_RESIDUAL", res, residual_bound, context="controlled generator"))
        report.diagnostics["weak_residual"] = res
    report.add(certify("CONSISTENCY", trace[-1], tol, context="final outer residual"))
    return report


__all__ = [
    "CONVERGED",
    "MAX_ITER",
    "NON_CONVERGED",
    "UNIQUE",
    "EXISTENCE_ONLY",
    "ContractionConstants",
    "SolveReport",
    "default_dictionary",
    "estimate_constants",
    "solve_local",
    "solve_global_pathindep",
    "solve_adapted",
    "solve_anticipating",
    "solve_mfg",
]
