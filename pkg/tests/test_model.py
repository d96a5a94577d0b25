import numpy as np
import pytest

from ctmctails.errors import ModelError, ValidationError
from ctmctails.model import DistVector, JumpModel, normalize
from ctmctails.rates import polynomial

from conftest import load


def test_rate_table_shape_and_values():
    m = load("cmp22.model")
    t = m.rate_table(range(5))
    assert t.shape == (2, 5)
    assert list(t[m.jumps.index(-1)]) == [0, 1, 4, 9, 16]
    assert m.total_rate(3) == 2 + 9


def test_in_space_respects_lattice():
    m = JumpModel.from_dict({2: polynomial([1]), -4: polynomial([0, -6, 11, -6, 1])}, state_min=1)
    assert m.omega_star == 2
    assert m.in_space(1) and m.in_space(7) and not m.in_space(2) and not m.in_space(-1)


def test_normalize_maps_lattice_to_naturals():
    m = load("three_step.rxn")
    nm, amap = normalize(m)
    assert nm.state_min == 0 and amap.shift == 1 and amap.scale == 1
    for w in m.jumps:
        for y in range(10):
            assert nm.rate(w)(y) == m.rate(w)(y + 1)
    assert amap.to_normalized(5) == 4 and amap.to_original(4) == 5


def test_normalize_rejects_off_lattice():
    m = JumpModel.from_dict({2: polynomial([1]), -2: polynomial([0, 1])})
    _, amap = normalize(m)
    with pytest.raises(ModelError):
        amap.to_normalized(3)


def test_negative_jump_must_vanish_at_bottom():
    with pytest.raises(ValidationError):
        JumpModel.from_dict({1: polynomial([1]), -2: polynomial([0, 1])})


def test_distvector_tail_and_csv_roundtrip():
    d = DistVector(2, np.array([0.5, 0.25, 0.125, 0.125]), 5)
    assert list(d.states) == [2, 3, 4, 5]
    assert d.prob(4) == 0.125 and d.prob(9) == 0.0
    np.testing.assert_allclose(d.tail(), [1.0, 0.5, 0.25, 0.125])
    e = DistVector.from_csv(d.to_csv())
    np.testing.assert_array_equal(e.values, d.values)
    assert e.offset == 2
    assert d.total_variation(e) == 0.0


def test_total_variation_disjoint_supports():
    a = DistVector(0, np.array([1.0]), 0)
    b = DistVector(3, np.array([1.0]), 3)
    assert a.total_variation(b) == pytest.approx(1.0)
