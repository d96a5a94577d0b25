import numpy as np
import pytest

from ctmctails.errors import EmptyAbsorbingSet, ExplosionGuardTripped, InvalidWindow
from ctmctails.simulate import empirical_qsd, empirical_stationary, simulate_ssa
from ctmctails.solver import SolverConfig, solve_stationary

from conftest import load


def test_reproducible_with_seed():
    m = load("schlogl.rxn")
    a = simulate_ssa(m, 3, 50.0, seed=11)
    b = simulate_ssa(m, 3, 50.0, seed=11)
    c = simulate_ssa(m, 3, 50.0, seed=12)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.states, b.states)
    assert not np.array_equal(a.states, c.states) or not np.array_equal(a.times, c.times)


def test_pure_death_hits_zero():
    tr = simulate_ssa(load("pure_death.model"), 5, 1e6, seed=0)
    assert list(tr.states) == [5, 4, 3, 2, 1, 0]
    assert tr.absorbed and tr.n_jumps == 5


def test_jumps_are_in_jump_set():
    m = load("three_step.rxn")
    tr = simulate_ssa(m, 1, 200.0, seed=4)
    assert set(np.diff(tr.states)) <= set(m.jumps)
    assert tr.times[-1] < 200.0


def test_holding_times_match_leaving_rate():
    m = load("mm_inf.model")
    tr = simulate_ssa(m, 0, 2e4, seed=5)
    hold = np.diff(tr.times)
    for x in (0, 1, 2):
        h = hold[tr.states[:-1] == x]
        expect = 1.0 / m.total_rate(x)
        assert h.size > 500
        assert h.mean() == pytest.approx(expect, rel=4 / np.sqrt(h.size))


def test_csv_layout():
    tr = simulate_ssa(load("pure_death.model"), 2, 10.0, seed=1)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,x" and lines[1] == "0.0,2" and len(lines) == 1 + len(tr.states)


def test_invalid_window():
    m = load("mm_inf.model")
    with pytest.raises(InvalidWindow):
        empirical_stationary(m, 0, 10.0, burn_in=10.0)
    with pytest.raises(InvalidWindow):
        empirical_stationary(m, 0, 10.0, replicas=0)


def test_qsd_needs_absorbing():
    with pytest.raises(EmptyAbsorbingSet):
        empirical_qsd(load("mm_inf.model"), 1, 10)


def test_explosion_guard():
    m = load("mm_inf.model")
    with pytest.raises(ExplosionGuardTripped):
        simulate_ssa(m, 0, 1e9, seed=0, max_steps=100)


def test_replicas_pool():
    m = load("mm_inf.model")
    d = empirical_stationary(m, 0, 2000.0, burn_in=10.0, replicas=4, seed=9)
    ref = solve_stationary(m, SolverConfig(N=40))
    assert d.total_variation(ref) < 0.03
    assert d.info["replicas"] == 4
