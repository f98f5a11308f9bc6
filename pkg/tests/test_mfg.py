import numpy as np
import pytest

from pathkinetic.errors import ValidationError
from pathkinetic.measures import DiscreteMeasure, MeasurePath, uniform_grid
from pathkinetic.mfg import QuadraticCostGame, backward_sweep, control_builder, forward_generator


def _path(p1, T=1.0):
    return MeasurePath.constant(DiscreteMeasure([[0.0], [1.0]], [1 - p1, p1]), uniform_grid(0.0, T, 0.1))


def test_feedback_is_clipped():
    g = QuadraticCostGame(u_max=0.5)
    assert g.feedback(np.array([0.0, 0.3])) == (0.3, 0.0)
    assert g.feedback(np.array([0.0, 2.0])) == (0.5, 0.0)
    assert g.feedback(np.array([1.0, 0.0])) == (0.0, 0.5)


def test_hamiltonian_at_equal_values_is_running_reward():
    g = QuadraticCostGame(running=(0.2, -0.1), running_crowd=1.0)
    np.testing.assert_allclose(g.hamiltonian(np.array([1.0, 1.0]), 0.25), [0.2 - 0.75, -0.1 - 0.25])


def test_terminal_reward_carries_crowd_term():
    g = QuadraticCostGame(terminal=(0.0, 1.0), crowd=1.0)
    np.testing.assert_allclose(g.terminal_reward(0.4), [-0.6, 0.6])
    assert g.coupled and not QuadraticCostGame().coupled


def test_sweep_without_rewards_has_no_control():
    table = backward_sweep(QuadraticCostGame(), _path(0.3), 0.01)
    assert np.all(table.u == 0.0) and np.all(table.values == 0.0)


def test_sweep_pushes_toward_rewarded_state():
    game = QuadraticCostGame(terminal=(0.0, 1.0))
    table = control_builder(game, 0.01)(_path(0.5))
    assert np.all(table.u[:, 0] > 0) and np.all(table.u[:, 1] == 0)
    # the value gap shrinks backward from the terminal reward of 1
    gap = table.values[:, 1] - table.values[:, 0]
    assert gap[-1] == pytest.approx(1.0) and np.all(np.diff(gap) > 0)
    gen = forward_generator(game)(table)
    rates, _ = gen.jumps(1.0, np.array([[0.0], [1.0]]), None)
    np.testing.assert_allclose(rates[:, 0], [2.0, 1.0])
    assert table.to_dict(10)["t"] == pytest.approx(list(np.arange(11) * 0.1))


def test_game_validation():
    with pytest.raises(ValidationError):
        QuadraticCostGame(base01=-1.0)
    with pytest.raises(ValidationError):
        QuadraticCostGame(terminal=(np.inf, 0.0))
