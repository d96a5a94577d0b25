import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctmctails.errors import (
    ModelSyntaxError,
    NonPositiveRateConstant,
    SelfLoopReaction,
    UnboundedJumpSet,
    ValidationError,
)
from ctmctails.parser import format_model, parse_model, parse_reactions

from conftest import load


def test_reactions_give_mass_action_rates():
    m = load("schlogl.rxn")
    assert m.jumps == (-1, 1, 2)
    lam_m1, lam_1, lam_2 = m.rate(-1), m.rate(1), m.rate(2)
    for x in range(10):
        assert lam_1(x) == 1.0
        assert lam_m1(x) == x + x * (x - 1) * (x - 2)
        assert lam_2(x) == x * (x - 1)


def test_statemin_and_merging():
    m = load("three_step.rxn")
    assert m.state_min == 1
    assert m.jumps == (-2, 1)
    assert all(m.rate(1)(x) == x * x for x in range(1, 10))


def test_jump_dsl_overrides():
    m = load("harmonic_qsd.model")
    d = m.rate(-1)
    assert [d(x) for x in range(5)] == [0.0, 2.0, 6.0, 8.0, 10.0]
    assert m.absorbing == (0,)


def test_ratio_rates():
    m = load("ptail.model")
    assert m.rate(1)(3) == pytest.approx(3 / 5)
    assert m.rate(-1)(4) == pytest.approx(3 + 0.5)
    assert m.rate(-1)(0) == 0.0


def test_unbounded_jump_range_rejected_with_diagnostic():
    with pytest.raises(UnboundedJumpSet, match=r"jump set must be finite \(\(A1\)\)"):
        load("gene_unbounded.model")


def test_geometric_burst_rejected():
    with pytest.raises(UnboundedJumpSet):
        parse_reactions("S -> 0S @ 1\nburst @ 1 with geometric(0.5)")


def test_finite_burst_accepted():
    m = parse_reactions("S -> 0S @ 1\nburst @ 2 with {1: 0.25, 3: 0.75}")
    assert m.jumps == (-1, 1, 3)
    # bursts fire per molecule: 2 * 0.75 * x
    assert m.rate(3)(5) == pytest.approx(7.5)


def test_syntax_error_has_position():
    with pytest.raises(ModelSyntaxError) as exc:
        parse_model("jump +1: x\njump -1: x ^ ^ 2")
    assert exc.value.line == 2
    assert "line 2" in str(exc.value)


def test_second_species_rejected():
    with pytest.raises(ModelSyntaxError, match="one"):
        parse_reactions("S + E -> 2S @ 1")


def test_self_loop_rejected():
    with pytest.raises(SelfLoopReaction):
        parse_reactions("2S -> 2S @ 1")


def test_nonpositive_constant_rejected():
    with pytest.raises(NonPositiveRateConstant):
        parse_reactions("S -> 0 @ 0")


def test_backward_jump_below_space_rejected():
    with pytest.raises(ValidationError):
        parse_model("jump +1: 1\njump -1: x + 1")


def test_open_absorbing_set_rejected():
    with pytest.raises(ValidationError):
        parse_model("absorbing {0}\njump +1: x + 1\njump -1: x")


@pytest.mark.parametrize(
    "name",
    ["schlogl.rxn", "three_step.rxn", "harmonic_qsd.model", "geometric_qsd.model", "ptail.model", "gap.model", "quadratic.model"],
)
def test_format_roundtrip(name):
    m = load(name)
    m2 = parse_model(format_model(m))
    assert m2.jumps == m.jumps and m2.absorbing == m.absorbing and m2.state_min == m.state_min
    for w in m.jumps:
        for x in range(m.state_min, m.state_min + 40):
            assert m2.rate(w)(x) == pytest.approx(m.rate(w)(x), rel=1e-14, abs=0)


@settings(max_examples=50, deadline=None)
@given(
    st.dictionaries(st.integers(1, 3), st.lists(st.integers(0, 4), min_size=1, max_size=4).filter(lambda c: c[-1] > 0),
                    min_size=1, max_size=3),
    st.integers(1, 4),
)
def test_roundtrip_random_polynomials(forward, death_deg):
    lines = []
    for w, cs in forward.items():
        body = " + ".join(f"{c}*x^{k}" for k, c in enumerate(cs) if c) or "1"
        lines.append(f"jump +{w}: {body}")
    lines.append(f"jump -1: x^{death_deg}")
    m = parse_model("\n".join(lines))
    m2 = parse_model(format_model(m))
    for w in m.jumps:
        assert [m2.rate(w)(x) for x in range(30)] == [m.rate(w)(x) for x in range(30)]
