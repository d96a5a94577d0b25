import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from ctmctails.errors import NegativeRate, ValidationError, ZeroPower
from ctmctails.rates import (
    Expansion,
    PowerSum,
    ShiftedRate,
    aplh_extract,
    evaluate,
    falling_factorial,
    gammaratio,
    polynomial,
    quotient,
)


def test_falling_factorial_matches_product():
    f = falling_factorial(3, 2.0)
    for x in range(8):
        assert f(x) == 2.0 * x * (x - 1) * (x - 2)


def test_polynomial_triple_minimal():
    # x^3 - 3x^2 + 3x: r2 = 2 is present, r3 = 1 is the next exponent
    assert aplh_extract(polynomial([0, 3, -3, 1])).as_tuple() == (3, 2, 1, 1.0, -3.0)


def test_triple_fills_missing_second_term():
    # x^2 + 1: no x^1 term, so r2 = 1 with b = 0 and r3 = 0
    assert aplh_extract(polynomial([1, 0, 1])).as_tuple() == (2, 1, 0, 1.0, 0.0)


def test_constant_rate_triple():
    assert aplh_extract(polynomial([2])).as_tuple() == (0, -1, -2, 2.0, 0.0)


def test_fractional_exponents():
    t = aplh_extract(PowerSum(((1.0, 2), (1.0, 1.5), (1.0, 0))))
    assert (t.r1, t.r2, t.r3) == (2, 1.5, 0)


def test_ratio_expansion():
    # x / (x + 2) = 1 - 2/x + 4/x^2 - ...
    f = quotient(polynomial([0, 1]), polynomial([2, 1]))
    ex = f.expansion()
    assert ex.coeff(0) == 1 and ex.coeff(-1) == -2 and ex.coeff(-2) == 4
    assert f.aplh().as_tuple() == (0, -1, -2, 1.0, -2.0)


def test_gammaratio_values_and_series():
    f = gammaratio(2.5)
    for x in (1, 2, 7, 40):
        assert math.isclose(f(x), gamma(x + 2.5) / gamma(x), rel_tol=1e-13)
    assert f(0) == 0.0
    ex = f.expansion()
    # Gamma(x+a)/Gamma(x) = x^a (1 + a(a-1)/(2x) + ...)
    assert ex.coeff(2.5) == 1
    assert ex.coeff(1.5) == Fraction(2.5 * 1.5 / 2)
    x = 1e4
    approx = sum(float(c) * x ** float(e) for e, c in ex.terms)
    # scipy's poch is good to a few 1e-12 relative at this size
    assert math.isclose(approx, f(int(x)), rel_tol=1e-11)


def test_gammaratio_integer_is_falling_factorial_shift():
    # Gamma(x+2)/Gamma(x) = x (x+1)
    f = gammaratio(2)
    assert all(f(x) == pytest.approx(x * (x + 1), rel=1e-14) for x in range(1, 30))


def test_negative_rate_detected():
    with pytest.raises(NegativeRate):
        polynomial([-1, 1])(0)


def test_zero_power_at_zero():
    with pytest.raises(ZeroPower):
        PowerSum(((1.0, -1),))(0)


def test_overrides_apply_below_valid_from():
    f = polynomial([2, 2], valid_from=2, overrides={1: 2.0})
    assert [f(x) for x in range(4)] == [0.0, 2.0, 6.0, 8.0]
    assert evaluate(f, 3) == 8.0


def test_zero_rate_is_not_aplh():
    with pytest.raises(ValidationError):
        PowerSum(()).aplh()


def test_expansion_reciprocal_roundtrip():
    ex = polynomial([1, 2, 1]).expansion()  # (x+1)^2
    prod = ex * ex.reciprocal(depth=6)
    assert prod.coeff(0) == 1
    for k in range(1, 5):
        assert prod.coeff(-k) == 0


def test_limit_ratio():
    ex = polynomial([0, 1, 3]).expansion()
    assert ex.limit_ratio(2) == 3
    assert ex.limit_ratio(1) == math.inf
    assert ex.limit_ratio(3) == 0


def test_shifted_rate_expansion_matches_values():
    base = polynomial([1, 0, 1])
    s = ShiftedRate(base, 2, 3)
    assert s(4) == base(11)
    ex = s.expansion()
    # (2x+3)^2 + 1 = 4x^2 + 12x + 10
    assert (ex.coeff(2), ex.coeff(1), ex.coeff(0)) == (4, 12, 10)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=5).filter(lambda c: c[-1] > 0), st.integers(0, 60))
def test_powersum_vectorized_matches_scalar(coeffs, x):
    f = polynomial(coeffs)
    assert f.evaluate_many(np.array([x]))[0] == pytest.approx(f(x), rel=1e-15)
    assert f(x) == pytest.approx(sum(c * x**k for k, c in enumerate(coeffs)), rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=5))
def test_expansion_addition_commutes(cs):
    a = Expansion.build([(k, c) for k, c in enumerate(cs)])
    b = Expansion.build([(k - 1, c) for k, c in enumerate(reversed(cs))])
    assert (a + b).terms == (b + a).terms
