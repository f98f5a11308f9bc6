import json

import numpy as np
import pytest

from pathkinetic import mfg
from pathkinetic.errors import LocalityViolated, ValidationError
from pathkinetic.fixpoint import (
    CONVERGED,
    EXISTENCE_ONLY,
    UNIQUE,
    ContractionConstants,
    default_dictionary,
    solve_adapted,
    solve_anticipating,
    solve_global_pathindep,
    solve_local,
    solve_mfg,
)
from pathkinetic.generators import make_example
from pathkinetic.measures import DiscreteMeasure
from pathkinetic.propagators import BackendConfig
from pathkinetic.testfunctions import FunctionClass

STATES = [[0.0], [1.0]]
FS = BackendConfig("FINITE_STATE", 0.0025, states=STATES)
DELTA0 = DiscreteMeasure([[0.0]], [1.0])

# fine-step RK4 (h = 1e-5) on dp/dt = (1 + 0.5 p)(1 - p) - 2 p, p(0) = 0
P_NONLINEAR = {0.1: 0.0883497148923167, 0.2: 0.15657416617880068, 1.0: 0.3498500257517311}
# same with rate 1 + 0.5 (1/t) int_0^t p
P_ADAPTED = {0.5: 0.2704405884509941, 1.0: 0.3382223675122919}
# q = p(T; rate 1 + q), lambda1 = 2, T = 1, by bisection
Q_ANTICIPATING = 0.39758550677044835
# equilibrium terminal occupancies of the two-state game
Q_MFG_CROWD = 0.5443600113589121
Q_MFG_FREE = 0.49961608287874826


def _p1(report, t):
    return report.solution.at(t).weight_at([1.0])


def test_solve_local_matches_oracle():
    gen = make_example("pure_jump_2state", kappa=0.5)
    rep = solve_local(gen, DELTA0, FS, 0.2, 1e-10, 0.01)
    assert rep.status == CONVERGED and rep.semantics == UNIQUE
    for t in (0.1, 0.2):
        assert _p1(rep, t) == pytest.approx(P_NONLINEAR[t], abs=1e-8)
    assert max(rep.ratios) <= rep.constants.product
    assert rep.certified


def test_measure_free_generators_converge_in_one_iteration():
    two = make_example("pure_jump_2state", kappa=0.0)
    assert solve_local(two, DELTA0, FS, 0.2, 1e-10, 0.01).iterations == 1
    assert solve_adapted(make_example("adapted_2state", kappa=0.0), DELTA0, FS, 0.5, 1e-10, 0.01).iterations == 1
    rep = solve_anticipating(make_example("anticipating_2state", kappa=0.0), DELTA0, FS, 0.5, 1e-10, 0.01, beta=1.0)
    assert rep.iterations == 1


def test_locality_violation_is_raised():
    gen = make_example("pure_jump_2state", kappa=0.5)
    with pytest.raises(LocalityViolated):
        solve_local(gen, DELTA0, FS, 5.0, 1e-10, 0.01)
    big = ContractionConstants(c1=3.0, c2=1.0)
    with pytest.raises(LocalityViolated):
        solve_local(gen, DELTA0, FS, 0.5, 1e-10, 0.01, constants=big)


def test_solvers_reject_wrong_modes():
    with pytest.raises(ValidationError):
        solve_global_pathindep(make_example("adapted_2state"), DELTA0, FS, 1.0, 1e-8, 0.01)
    with pytest.raises(ValidationError):
        solve_anticipating(make_example("pure_jump_2state"), DELTA0, FS, 1.0, 1e-8, 0.01)
    with pytest.raises(ValidationError):
        solve_adapted(make_example("anticipating_2state"), DELTA0, FS, 1.0, 1e-8, 0.01)
    with pytest.raises(ValidationError):
        solve_local(make_example("pure_jump_2state"), DELTA0, FS, 0.2, 0.0, 0.01)
    with pytest.raises(ValidationError):
        solve_local(make_example("pure_jump_2state"), DELTA0, FS, 0.2, 1e-8, 0.0015)


def test_global_solve_chains_and_certifies():
    gen = make_example("pure_jump_2state", kappa=0.5)
    rep = solve_global_pathindep(gen, DELTA0, FS, 1.0, 1e-10, 0.01)
    assert rep.status == CONVERGED
    assert rep.diagnostics["subinterval_product"] <= 0.5
    assert _p1(rep, 1.0) == pytest.approx(P_NONLINEAR[1.0], abs=1e-8)
    assert rep.certificates["RESTART"].measured <= 2e-10
    assert set(rep.certificates) == {"CONTRACTION", "RESTART", "SENSITIVITY", "WEAK_RESIDUAL", "TIME_LIPSCHITZ"}
    assert rep.certified


def test_adapted_solve_matches_oracle_and_envelope():
    gen = make_example("adapted_2state", kappa=0.5)
    rep = solve_adapted(gen, DELTA0, FS, 1.0, 1e-10, 0.01)
    assert rep.status == CONVERGED
    for t, p in P_ADAPTED.items():
        assert _p1(rep, t) == pytest.approx(p, abs=1e-6)
    env = rep.diagnostics["factorial_envelope"]
    assert all(r <= e for r, e in zip(rep.residual_trace, env))
    assert rep.certificates["FACTORIAL"].ok and rep.certificates["GRONWALL"].ok


def test_anticipating_two_state_root():
    gen = make_example("anticipating_2state", lambda0=1.0, kappa=1.0, lambda1=2.0)
    rep = solve_anticipating(gen, DELTA0, FS, 1.0, 1e-9, 0.01)
    assert rep.semantics == EXISTENCE_ONLY and rep.status == CONVERGED
    assert _p1(rep, 1.0) == pytest.approx(Q_ANTICIPATING, abs=1e-6)
    assert rep.residual_trace[-1] <= 1e-9
    assert any("uniqueness" in a for a in rep.assumptions)


def test_full_path_two_state_converges():
    gen = make_example("full_path_2state", kappa=0.5)
    rep = solve_anticipating(gen, DELTA0, FS, 1.0, 1e-9, 0.01)
    assert rep.status == CONVERGED and rep.certified


def test_report_json_is_deterministic():
    gen = make_example("pure_jump_2state", kappa=0.5)
    a = solve_local(gen, DELTA0, FS, 0.2, 1e-10, 0.01).to_json()
    b = solve_local(gen, DELTA0, FS, 0.2, 1e-10, 0.01).to_json()
    assert a == b
    data = json.loads(a)
    assert data["solver"] == "solve_local" and data["constants"]["c3"] == 1.0


def test_default_dictionary_classes():
    assert default_dictionary(make_example("pure_jump_2state")).cls == FunctionClass.LIP
    assert default_dictionary(make_example("terminal_ou")).cls == FunctionClass.C1
    assert default_dictionary(make_example("mckean_vlasov_ou")).cls == FunctionClass.C2
    assert default_dictionary(make_example("mckean_vlasov_ou"), cls="LIP").cls == FunctionClass.LIP


def _game_report(terminal, crowd, tol=1e-6):
    game = mfg.QuadraticCostGame(1.0, 1.0, 2.0, (0.0, 0.0), terminal, crowd)
    return solve_mfg(mfg.forward_generator(game), mfg.control_builder(game, FS.h_in), DELTA0, FS, 1.0, tol, 0.01)


def test_mfg_zero_coupling_is_one_iteration():
    rep = _game_report((0.0, 0.5), 0.0)
    assert rep.status == CONVERGED and rep.iterations == 1
    assert _p1(rep, 1.0) == pytest.approx(Q_MFG_FREE, abs=1e-4)


def test_mfg_crowd_aversion_matches_oracle():
    rep = _game_report((0.0, 1.0), 1.0)
    trace = rep.residual_trace
    assert rep.status == CONVERGED and trace[-1] <= 1e-4
    assert all(b < a for a, b in zip(trace, trace[1:]))
    assert _p1(rep, 1.0) == pytest.approx(Q_MFG_CROWD, abs=1e-4)
    assert rep.certificates["CONSISTENCY"].ok


def test_mfg_rejects_particles():
    with pytest.raises(ValidationError):
        game = mfg.QuadraticCostGame()
        solve_mfg(mfg.forward_generator(game), mfg.control_builder(game, 0.01), DELTA0,
                  BackendConfig("PARTICLE", 0.01, n_particles=100), 1.0, 1e-6, 0.01)


def test_particle_solve_is_reproducible():
    gen = make_example("mckean_vlasov_ou")
    mu = DiscreteMeasure.from_samples(np.random.default_rng(0).normal(size=500))
    be = BackendConfig("PARTICLE", 0.01, n_particles=500, seed=3)
    a = solve_local(gen, mu, be, 0.2, 1e-8, 0.05, certificates=False)
    b = solve_local(gen, mu, be, 0.2, 1e-8, 0.05, certificates=False)
    assert a.to_json() == b.to_json()
