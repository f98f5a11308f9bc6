"""Acceptance suite: one test (or group of tests) per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary ends with
one PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathkinetic import mfg
from pathkinetic.diagnostics.certificates import (
    gronwall_factor,
    holder_estimate,
    moment_certificate,
    sensitivity_certificate,
)
from pathkinetic.diagnostics.oracles import (
    anticipating_root,
    flat_distance_oracle,
    mfg_two_state_terminal,
    nonlinear_two_state,
    ou_variance,
)
from pathkinetic.fixpoint import (
    CONVERGED,
    solve_adapted,
    solve_anticipating,
    solve_global_pathindep,
    solve_local,
    solve_mfg,
)
from pathkinetic.generators import ebdd_probe, make_example
from pathkinetic.measures import DiscreteMeasure, MeasurePath, _lp_flat, flat_distance, uniform_grid
from pathkinetic.propagators import (
    BackendConfig,
    PropagationStats,
    chain_defect,
    martingale_defect,
    propagate_path,
)
from pathkinetic.testfunctions import coordinate, indicator

STATES = [[0.0], [1.0]]
DELTA0 = DiscreteMeasure([[0.0]], [1.0])


def _fs(h_in=0.0025):
    return BackendConfig("FINITE_STATE", h_in, states=STATES)


def _particles(h_in=0.005, n=10_000, seed=11):
    return BackendConfig("PARTICLE", h_in, n_particles=n, seed=seed)


def _p(p1):
    return DiscreteMeasure(STATES, [1 - p1, p1])


def _sup_flat_to_oracle(path, ts, ps):
    nodes = {round(float(t), 9): m for t, m in zip(path.grid, path.measures)}
    return max(flat_distance(nodes[round(float(t), 9)], _p(p)) for t, p in zip(ts, ps))


@pytest.fixture(scope="module")
def ou_solution():
    gen = make_example("mckean_vlasov_ou", sigma=1.0, theta=1.0)
    samples = np.random.default_rng(5).normal(1.0, math.sqrt(2.0), 10_000)
    mu = DiscreteMeasure.from_samples(samples)
    rep = solve_global_pathindep(gen, mu, _particles(), 2.0, 1e-6, 0.05, certificates=())
    return gen, rep


# ---------------------------------------------------------------------------


@pytest.mark.criterion(1, "oracle equivalence, two-state local and global")
def test_criterion_01_oracle_equivalence(record_property):
    gen = make_example("pure_jump_2state", lambda0=1.0, lambda1=2.0, kappa=0.5)
    ts, ps = nonlinear_two_state(1.0, 2.0, 0.5, 0.0, 5.0, h=1e-5, record=0.01)
    # frozen values of the reference itself
    assert ps[20] == pytest.approx(0.15657416617880068, abs=1e-12)
    assert ps[500] == pytest.approx(0.3722810926528147, abs=1e-12)

    t0 = time.perf_counter()
    loc = solve_local(gen, DELTA0, _fs(), 0.2, 1e-10, 0.01)
    t_loc = time.perf_counter() - t0
    t0 = time.perf_counter()
    glo = solve_global_pathindep(gen, DELTA0, _fs(), 5.0, 1e-10, 0.01)
    t_glo = time.perf_counter() - t0

    e_loc = _sup_flat_to_oracle(loc.solution, ts[:21], ps[:21])
    e_glo = _sup_flat_to_oracle(glo.solution, ts, ps)
    record_property("detail", f"local err {e_loc:.2e} in {t_loc:.1f}s, global err {e_glo:.2e} in {t_glo:.1f}s")
    assert loc.status == glo.status == CONVERGED
    assert e_loc <= 1e-4 and e_glo <= 1e-4
    assert t_loc < 10 and t_glo < 10


@pytest.mark.criterion(2, "per-iteration ratios below the measured product")
def test_criterion_02_contraction_certificate(record_property):
    rng = np.random.default_rng(2)
    violations, ratios, products = 0, 0, []
    for _ in range(20):
        lam0 = float(rng.uniform(0.5, 2.0))
        lam1 = float(rng.uniform(0.5, 2.0))
        kappa = float(rng.uniform(-0.5, 1.0))
        p0 = float(rng.uniform(0.0, 1.0))
        gen = make_example("pure_jump_2state", lambda0=lam0, lambda1=lam1, kappa=kappa)
        T = 0.01 * int(rng.integers(3, 11))
        while True:
            rep = solve_local(gen, _p(p0), _fs(), T, 1e-12, 0.01, seed=int(rng.integers(1000)))
            if rep.constants.product < 0.5 or T <= 0.03:
                break
            T = round(T / 2, 2)
        assert rep.constants.product < 0.5 and rep.status == CONVERGED
        products.append(rep.constants.product)
        ratios += len(rep.ratios)
        violations += sum(r > rep.constants.product for r in rep.ratios)
    record_property("detail", f"{ratios} ratios, {violations} violations, products in "
                              f"[{min(products):.3f}, {max(products):.3f}]")
    assert violations == 0


@pytest.mark.criterion(3, "factorial Picard envelope, adapted two-state")
def test_criterion_03_factorial_envelope(record_property):
    worst = 0.0
    for lam0, lam1, kappa, p0, T in [(1.0, 2.0, 0.5, 0.0, 1.0), (0.5, 1.0, 1.0, 0.2, 2.0),
                                     (2.0, 1.0, -0.5, 1.0, 1.5), (1.0, 1.0, 2.0, 0.5, 1.0)]:
        gen = make_example("adapted_2state", lambda0=lam0, lambda1=lam1, kappa=kappa)
        rep = solve_adapted(gen, _p(p0), _fs(), T, 1e-12, 0.01)
        cT = rep.constants.product
        for n, inc in enumerate(rep.residual_trace[:6], start=1):
            env = 2.0 * cT**n / math.factorial(n)
            worst = max(worst, inc / env)
    record_property("detail", f"max increment / envelope {worst:.3g}")
    assert worst <= 1.0


def _gronwall_family(solve, mu, draw, rng, pairs=10):
    rep = solve(mu)
    c = rep.constants
    bound = gronwall_factor(c.c1, c.c2, c.c3, c.K_mass, c.T)
    worst, violations = 0.0, 0
    for _ in range(pairs):
        eta = draw(rng)
        cert = sensitivity_certificate(lambda m: rep.solution if m is mu else solve(m).solution, mu, eta, bound)
        worst = max(worst, cert.measured)
        violations += not cert.ok
    return worst, bound, violations


@pytest.mark.criterion(4, "Gronwall sensitivity over random initial pairs")
def test_criterion_04_gronwall_sensitivity(record_property):
    rng = np.random.default_rng(4)
    fs_draw = lambda r: _p(float(r.uniform()))
    two = make_example("pure_jump_2state", kappa=0.5)
    ada = make_example("adapted_2state", kappa=0.5)
    ou = make_example("mckean_vlasov_ou", sigma=1.0, theta=1.0)
    mu_ou = DiscreteMeasure.from_samples(np.random.default_rng(0).normal(0.0, 1.0, 2000))
    ou_draw = lambda r: DiscreteMeasure(mu_ou.atoms + r.uniform(-0.5, 0.5), mu_ou.weights)
    pb = _particles(h_in=0.01, n=2000, seed=3)
    families = {
        "pure_jump_2state": (lambda m: solve_global_pathindep(two, m, _fs(), 2.0, 1e-10, 0.01, certificates=()),
                             _p(0.0), fs_draw),
        "adapted_2state": (lambda m: solve_adapted(ada, m, _fs(), 1.0, 1e-10, 0.01, certificates=()),
                           _p(0.0), fs_draw),
        "mckean_vlasov_ou": (lambda m: solve_global_pathindep(ou, m, pb, 1.0, 1e-8, 0.05, certificates=()),
                             mu_ou, ou_draw),
    }
    total, notes = 0, []
    for name, (solve, mu, draw) in families.items():
        worst, bound, v = _gronwall_family(solve, mu, draw, rng)
        total += v
        notes.append(f"{name} {worst:.3f}<={bound:.3f}")
    record_property("detail", ", ".join(notes) + f"; {total} violations")
    assert total == 0


@pytest.mark.criterion(5, "propagator laws")
def test_criterion_05_propagator_laws(record_property):
    gen = make_example("pure_jump_2state", kappa=0.5)
    frozen = MeasurePath(uniform_grid(0.0, 1.0, 0.25), tuple(_p(p) for p in (0.0, 0.4, 0.7, 0.3, 0.5)))
    fs = _fs(1e-3)
    chain = max(chain_defect(fs, gen, frozen, _p(p), r, s, t)
                for p in (0.0, 0.5, 1.0) for r, s, t in [(0.0, 0.5, 1.0), (0.0, 0.25, 0.75), (0.25, 0.5, 1.0)])

    ou = make_example("mckean_vlasov_ou")
    mu = DiscreteMeasure([[-1.0], [0.5], [2.0]], [0.3, 0.3, 0.4])
    pchain = chain_defect(_particles(h_in=0.01, n=5000), ou, MeasurePath.constant(mu, uniform_grid(0.0, 1.0, 0.5)),
                          mu, 0.0, 0.5, 1.0)

    long = MeasurePath(uniform_grid(0.0, 5.0, 0.5), tuple(_p(p) for p in np.linspace(0.9, 0.1, 11)))
    path = propagate_path(_fs(0.005), gen, long, _p(1.0))
    mass = max(abs(m.mass - 1.0) for m in path.measures)

    stiff = make_example("pure_jump_2state", lambda0=60.0, lambda1=40.0)
    stats = PropagationStats()
    spath = propagate_path(_fs(0.01), stiff, MeasurePath.constant(_p(0.0), uniform_grid(0.0, 1.0, 0.1)), _p(0.0),
                           stats=stats)
    lo = min(float(m.weights.min()) for m in spath.measures)
    record_property("detail", f"FS chain {chain:.1e}, particle chain {pchain}, mass {mass:.1e}, "
                              f"min weight {lo:.2e} with {stats.guards_triggered} guarded steps")
    assert chain <= 1e-8 and pchain == 0.0 and mass <= 1e-9
    assert stats.guards_triggered > 0 and lo >= 0.0


@pytest.mark.criterion(6, "martingale defects of the nonlinear process")
def test_criterion_06_martingale(ou_solution, record_property):
    gen, rep = ou_solution
    ou = martingale_defect(_particles(), gen, rep.solution, coordinate(0), [0.4, 0.8, 1.2, 1.6, 2.0])

    two = make_example("pure_jump_2state", kappa=0.5)
    sol = solve_global_pathindep(two, DELTA0, _fs(), 1.0, 1e-10, 0.01, certificates=()).solution
    jumps = martingale_defect(_particles(h_in=0.0025), two, sol, indicator([1.0]), [0.2, 0.4, 0.6, 0.8, 1.0])
    z = [abs(m) / se for m, se in ou + jumps]
    record_property("detail", f"max |defect|/SE {max(z):.2f} over {len(z)} checkpoints")
    assert all(v <= 3.0 for v in z)


@pytest.mark.criterion(7, "McKean-Vlasov OU mean and variance")
def test_criterion_07_ou_moments(ou_solution, record_property):
    _, rep = ou_solution
    sol = rep.solution
    m0 = sol.initial
    x0 = m0.atoms[:, 0]
    mean0 = float(m0.weights @ x0)
    v0 = float(m0.weights @ (x0 - mean0) ** 2)
    worst_m, worst_v = 0.0, 0.0
    for t in (0.4, 0.8, 1.2, 1.6, 2.0):
        m = sol.at(t)
        x, w = m.atoms[:, 0], m.weights
        mean = float(w @ x)
        var = float(w @ (x - mean) ** 2)
        m4 = float(w @ (x - mean) ** 4)
        n = 10_000
        worst_m = max(worst_m, abs(mean - mean0) / math.sqrt(var / n))
        worst_v = max(worst_v, abs(var - float(ou_variance(t, 1.0, 1.0, v0))) / math.sqrt((m4 - var**2) / n))
    record_property("detail", f"mean {worst_m:.2f} SE, variance {worst_v:.2f} SE")
    assert worst_m <= 3.0 and worst_v <= 3.0


@pytest.mark.criterion(8, "moment and Hoelder certificates")
def test_criterion_08_moment_and_holder(ou_solution, record_property):
    gen, rep = ou_solution
    P = ebdd_probe(gen, 2.0, horizon=2.0, times=(0.0, 2.0))
    ou_cert = moment_certificate(rep.solution, 2.0, P)

    stable = make_example("stable_like_1d", alpha=1.5, a=1.0, k_trunc=1.0, theta=1.0)
    mu = DiscreteMeasure.from_samples(np.random.default_rng(5).normal(1.0, math.sqrt(2.0), 10_000))
    srep = solve_global_pathindep(stable, mu, _particles(), 1.0, 1e-6, 0.05, certificates=())
    st_cert = moment_certificate(srep.solution, 1.0, ebdd_probe(stable, 1.0, horizon=1.0, times=(0.0, 1.0)))

    two = make_example("pure_jump_2state", kappa=0.5)
    est = []
    for h in (1e-2, 5e-3, 2.5e-3):
        sol = solve_global_pathindep(two, DELTA0, _fs(h / 4), 1.0, 1e-10, h, certificates=()).solution
        est.append(holder_estimate(sol))
    spread = max(est) / min(est)
    record_property("detail", f"OU moment {ou_cert.measured:.3g}<={ou_cert.bound:.3g}, stable moment "
                              f"{st_cert.measured:.3g}<={st_cert.bound:.3g}, Hoelder {[round(e, 4) for e in est]}")
    assert ou_cert.ok and st_cert.ok
    assert spread <= 3.0


@pytest.mark.criterion(9, "anticipating existence")
def test_criterion_09_anticipating(record_property):
    gen = make_example("anticipating_2state", lambda0=1.0, kappa=1.0, lambda1=2.0)
    rep = solve_anticipating(gen, DELTA0, _fs(), 1.0, 1e-9, 0.01)
    q = anticipating_root(1.0, 1.0, 2.0, 0.0, 1.0)
    assert q == pytest.approx(0.39758550677044835, abs=1e-12)
    err = abs(rep.solution.final.weight_at([1.0]) - q)

    ter = make_example("terminal_ou", sigma=0.0, theta=1.0)
    mu = DiscreteMeasure([[-1.0], [0.0], [0.5], [2.0], [3.0]], [0.1, 0.2, 0.3, 0.2, 0.2])
    trep = solve_anticipating(ter, mu, _particles(), 1.0, 1e-9, 0.05)
    m0 = float(mu.mean()[0])
    drift = max(abs(float(m.mean()[0]) - m0) for m in trep.solution.measures)
    res = max(rep.residual_trace[-1], trep.residual_trace[-1])
    record_property("detail", f"root err {err:.1e}, terminal-OU mean drift {drift:.1e}, final residual {res:.1e}")
    assert err <= 1e-6 and drift <= 1e-6 and res <= 1e-6


@pytest.mark.criterion(10, "mean-field game consistency")
def test_criterion_10_mfg(record_property):
    fs = _fs()

    def run(terminal, crowd):
        game = mfg.QuadraticCostGame(1.0, 1.0, 2.0, (0.0, 0.0), terminal, crowd)
        return solve_mfg(mfg.forward_generator(game), mfg.control_builder(game, fs.h_in), DELTA0, fs, 1.0, 1e-6, 0.01)

    free = run((0.0, 0.5), 0.0)
    crowd = run((0.0, 1.0), 1.0)
    q = mfg_two_state_terminal(1.0, 1.0, 2.0, (0.0, 0.0), (0.0, 1.0), 1.0, 0.0, 1.0)
    assert q == pytest.approx(0.5443600113589121, abs=1e-9)
    tr = crowd.residual_trace
    err = abs(crowd.solution.final.weight_at([1.0]) - q)
    record_property("detail", f"zero coupling {free.iterations} iteration, crowd {crowd.iterations} iterations, "
                              f"final residual {tr[-1]:.1e}, oracle err {err:.1e}")
    assert free.status == CONVERGED and free.iterations == 1
    assert all(b < a for a, b in zip(tr, tr[1:])) and tr[-1] <= 1e-4
    assert err <= 1e-4


def _corpus(n_pairs=100, seed=11):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_pairs):
        d = 1 if k < 70 else 2
        na, nb = (int(v) for v in rng.integers(1, 5, size=2))
        x = rng.uniform(-2.0, 2.0, (na, d))
        y = rng.uniform(-2.0, 2.0, (nb, d))
        if k % 10 == 0:
            y[0] = x[0]  # shared atom
        out.append((x, rng.dirichlet(np.ones(na)), y, rng.dirichlet(np.ones(nb))))
    return out


@pytest.mark.criterion(11, "flat metric against the exhaustive oracle")
def test_criterion_11_flat_metric_corpus(record_property):
    worst_prod, worst_lp = 0.0, 0.0
    for x, a, y, b in _corpus():
        ref = flat_distance_oracle(x, a, y, b)
        worst_prod = max(worst_prod, abs(flat_distance(DiscreteMeasure(x, a), DiscreteMeasure(y, b)) - ref))
        lp = _lp_flat(np.vstack([x, y]), np.concatenate([a, -b]))
        worst_lp = max(worst_lp, abs(lp - ref))
    record_property("detail", f"100 pairs, max err {worst_prod:.1e} (LP {worst_lp:.1e})")
    assert worst_prod <= 1e-8 and worst_lp <= 1e-8


def _measures(d):
    pt = st.lists(st.floats(-3, 3, allow_nan=False), min_size=d, max_size=d)
    return st.tuples(st.lists(pt, min_size=1, max_size=4), st.lists(st.floats(0.05, 1.0), min_size=4, max_size=4))


def _make(draw):
    atoms, w = draw
    w = np.array(w[: len(atoms)])
    return DiscreteMeasure(atoms, w / w.sum())


@pytest.mark.criterion(11, "flat metric against the exhaustive oracle")
@settings(max_examples=1000, deadline=None, derandomize=True)
@given(st.integers(1, 2).flatmap(lambda d: st.tuples(_measures(d), _measures(d), _measures(d))))
def test_criterion_11_flat_metric_axioms(triple):
    mu, nu, eta = (_make(m) for m in triple)
    d = flat_distance(mu, nu)
    assert 0.0 <= d <= 2.0 + 1e-12
    assert flat_distance(mu, mu) == 0.0
    assert d == pytest.approx(flat_distance(nu, mu), abs=1e-9)
    assert d <= flat_distance(mu, eta) + flat_distance(eta, nu) + 1e-9
    if d <= 1e-12:
        assert mu.allclose(nu, atol=1e-6)
