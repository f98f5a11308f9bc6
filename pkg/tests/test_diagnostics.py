import math

import numpy as np
import pytest

from pathkinetic.diagnostics.certificates import (
    FAIL,
    ONE_SIDED,
    PASS,
    certify,
    dyadic_pairs,
    gronwall_factor,
    holder_estimate,
    holder_table,
    moment_bound,
    moment_certificate,
    sensitivity_certificate,
    time_derivative,
    time_lipschitz_certificate,
    weak_residual,
    weak_residual_profile,
)
from pathkinetic.errors import StructuralError, UnsupportedKindError
from pathkinetic.fixpoint import default_dictionary, solve_local
from pathkinetic.generators import make_example
from pathkinetic.measures import SIGNED, DiscreteMeasure, MeasurePath, uniform_grid
from pathkinetic.propagators import BackendConfig, propagate_path

STATES = [[0.0], [1.0]]
FS = BackendConfig("FINITE_STATE", 1e-3, states=STATES)


def _p(p1):
    return DiscreteMeasure(STATES, [1 - p1, p1])


def _two_state_path(h=0.01, T=1.0, kappa=0.0, h_in=1e-3):
    gen = make_example("pure_jump_2state", kappa=kappa)
    grid = uniform_grid(0.0, T, h)
    frozen = MeasurePath.constant(_p(0.0), grid)
    return gen, propagate_path(BackendConfig("FINITE_STATE", h_in, states=STATES), gen, frozen, _p(0.0))


def test_certify_verdicts():
    assert certify("X", 1.0, 1.0).verdict == PASS
    assert certify("X", 1.05, 1.0, slack=0.1).verdict == PASS
    assert certify("X", 1.2, 1.0, slack=0.1).verdict == FAIL
    assert certify("X", 0.5, 1.0, one_sided=True).verdict == ONE_SIDED
    assert certify("X", 0.5, 1.0, one_sided=True).ok
    assert certify("X", math.nan, 1.0).verdict == FAIL


def test_time_derivative_is_exact_on_quartics():
    h = 0.1
    t = np.arange(11) * h
    v = 1 + 2 * t - t**2 + 0.5 * t**3 - 0.25 * t**4
    dv = 2 - 2 * t + 1.5 * t**2 - t**3
    np.testing.assert_allclose(time_derivative(v, h), dv, atol=1e-12)
    short = 1 + t[:4] - 3 * t[:4] ** 2
    np.testing.assert_allclose(time_derivative(short, h), 1 - 6 * t[:4], atol=1e-12)
    with pytest.raises(StructuralError):
        time_derivative([1.0, 2.0], h)


def test_dyadic_pairs():
    assert list(dyadic_pairs(5)) == [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2), (2, 4), (0, 4)]


def test_weak_residual_vanishes_for_stationary_flows():
    gen = make_example("zero", states=STATES)
    path = MeasurePath.constant(_p(0.4), uniform_grid(0.0, 1.0, 0.1))
    assert weak_residual(path, gen, default_dictionary(gen)) <= 1e-13


def test_weak_residual_small_on_fine_solution():
    gen, path = _two_state_path()
    assert weak_residual(path, gen, default_dictionary(gen)) <= 1e-5


def test_weak_residual_detects_a_corrupted_node():
    gen, path = _two_state_path()
    k, delta = 50, 0.1
    bad = path.replace(k, _p(path[k].weight_at([1.0]) + delta))
    D = default_dictionary(gen)
    assert weak_residual(bad, gen, D) >= delta / (2 * path.h)
    prof = weak_residual_profile(bad, gen, D)
    assert np.argmax(prof) in range(k - 2, k + 3)


def test_holder_estimates():
    const = MeasurePath.constant(_p(0.3), uniform_grid(0.0, 1.0, 0.125))
    assert holder_estimate(const) == 0.0
    _, path = _two_state_path(h=0.0625, h_in=0.00125)
    table = holder_table(path)
    assert [g for g, _ in table] == pytest.approx([0.0625 * 2**k for k in range(5)])
    assert holder_estimate(path) == max(q for _, q in table) > 0


def test_moment_certificate():
    path = MeasurePath.constant(DiscreteMeasure.point([0.0]), uniform_grid(0.0, 1.0, 0.5))
    c = moment_certificate(path, 2.0, 0.0)
    assert c.ok and c.measured == 0.0 and c.bound == 1.0
    assert moment_bound(1.0, 0.5, 2.0, kappa=2.0) == pytest.approx(3 * math.e)
    with pytest.raises(StructuralError):
        moment_certificate(path, 3.0, 1.0)
    signed = MeasurePath.constant(DiscreteMeasure([[0.0]], [2.0], kind=SIGNED), uniform_grid(0.0, 1.0, 0.5))
    with pytest.raises(UnsupportedKindError):
        moment_certificate(signed, 2.0, 1.0)


def test_time_lipschitz_is_one_sided():
    gen, path = _two_state_path()
    c = time_lipschitz_certificate(path, default_dictionary(gen), 10.0)
    assert c.verdict == ONE_SIDED and 0 < c.measured <= 3.0


def test_gronwall_factor():
    assert gronwall_factor(1.0, 2.0, 1.0, 1.0, 0.5) == pytest.approx(2 * math.e)
    assert gronwall_factor(1.0, 1.0, 1.0, 1.0, 1.0) < gronwall_factor(1.0, 1.0, 1.0, 1.0, 2.0)


def test_sensitivity_certificate():
    gen = make_example("pure_jump_2state", kappa=0.5)

    def solve(m):
        return solve_local(gen, m, FS, 0.2, 1e-12, 0.01, certificates=False).solution

    rep = solve_local(gen, _p(0.0), FS, 0.2, 1e-12, 0.01)
    c = rep.constants
    bound = gronwall_factor(c.c1, c.c2, c.c3, c.K_mass, c.T)
    same = sensitivity_certificate(solve, _p(0.0), _p(0.0), bound)
    assert same.measured == 0.0 and same.ok
    cert = sensitivity_certificate(solve, _p(0.0), DiscreteMeasure(STATES, [0.9, 0.1]), bound)
    assert cert.ok and 0.0 < cert.measured <= bound
