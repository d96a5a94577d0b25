import math

import numpy as np
import pytest

from ctmctails.analysis import (
    drift_ratio,
    fit_tail,
    sharp_bdp_prediction,
    sharp_drift_prediction,
    theta_from_dist,
    verify_identity_qsd,
    verify_identity_stationary,
    verify_tail_identity,
)
from ctmctails.asymptotics import compute_params
from ctmctails.errors import AlphaNonzero, DegenerateTail, EmptyAbsorbingSet, HypothesisViolated, NotBDP
from ctmctails.model import DistVector
from ctmctails.parser import parse_model
from ctmctails.solver import SolverConfig, reference_dist, solve_qsd, solve_stationary

from conftest import load


def _exact_harmonic(N=400):
    xs = np.arange(1, N + 1)
    return DistVector(1, 1 / (xs * (xs + 1)), N, kind="qsd", theta=1.0, tail_values=1 / xs)


def _exact_geometric(N=400):
    xs = np.arange(1, N + 1)
    return DistVector(1, 0.5**xs, N, kind="qsd", theta=1.0, tail_values=0.5 ** (xs - 1))


def test_poisson_exact_residual():
    d = reference_dist("poisson", 60, lam=1.0)
    assert verify_identity_stationary(load("mm_inf.model"), d).max_residual <= 1e-12
    assert verify_tail_identity(load("mm_inf.model"), d).max_residual <= 1e-12


def test_perturbation_detected():
    d = reference_dist("poisson", 60, lam=1.0)
    vals = d.values.copy()
    vals[5] *= 1.01
    bad = DistVector(0, vals, 60)
    rep = verify_identity_stationary(load("mm_inf.model"), bad)
    assert rep.max_residual > 1e-3
    assert rep.worst_x in (5, 6)


def test_per_omega_and_grouped_agree_on_schlogl():
    m = load("schlogl.rxn")
    d = solve_stationary(m, SolverConfig(N=150))
    a = verify_identity_stationary(m, d, form="per-omega")
    b = verify_identity_stationary(m, d, form="A_j-grouped")
    assert a.max_residual <= 1e-9 and b.max_residual <= 1e-9


def _gene(K, kappa=2.5, delta=0.4):
    # bursts at rate kappa with size P(k) = (1 - delta) delta^k, k >= 0, cut at K
    lines = ["jump -1: x"]
    for k in range(1, K + 1):
        lines.append(f"jump +{k}: {kappa * (1 - delta) * delta ** k!r}")
    return parse_model("\n".join(lines))


def test_burst_truncation_residual_decreases():
    d = reference_dist("negative_binomial", 80, a=2.5, delta=0.4)
    res = [verify_identity_stationary(_gene(K), d, form="A_j-grouped").max_residual for K in (5, 10, 20)]
    assert res[0] > res[1] > res[2]


def test_qsd_exact_residuals():
    assert verify_identity_qsd(load("harmonic_qsd.model"), _exact_harmonic()).max_residual <= 1e-12
    assert verify_identity_qsd(load("geometric_qsd.model"), _exact_geometric()).max_residual <= 1e-12
    assert verify_tail_identity(load("geometric_qsd.model"), _exact_geometric()).max_residual <= 1e-12


def test_qsd_wrong_theta_detected():
    rep = verify_identity_qsd(load("geometric_qsd.model"), _exact_geometric(), theta=2.0)
    assert rep.max_residual > 1e-2


def test_solved_qsd_identity_with_killing():
    m = load("quadratic.model")
    d = solve_qsd(m, SolverConfig(N=60))
    assert verify_identity_qsd(m, d).max_residual <= 1e-9


def test_theta_from_dist():
    assert theta_from_dist(load("geometric_qsd.model"), _exact_geometric()) == pytest.approx(1.0, rel=1e-15)
    # pure death at rate d x: all mass at 1 gives theta = d
    d = DistVector(1, np.array([1.0]), 1, kind="qsd")
    assert theta_from_dist(load("pure_death.model"), d) == 2.0
    # two backward jumps into {0}: theta = nu(1) l_{-1}(1) + nu(2) l_{-2}(2)
    m = parse_model("absorbing {0}\njump +1: x\njump -1: 3*x\njump -2: x*(x-1)")
    d = DistVector(1, np.array([0.5, 0.3, 0.2]), 3, kind="qsd")
    assert theta_from_dist(m, d) == pytest.approx(0.5 * 3 + 0.3 * 2, rel=1e-15)
    with pytest.raises(EmptyAbsorbingSet):
        theta_from_dist(load("cmp22.model"), d)


def test_lattice_scaling_invariance():
    # Poisson on 3 + 2N: jumps +-2 with death rate (x - 3)/2
    m = parse_model("statemin 3\njump +2: 1\njump -2: override 3 -> 0; 0.5*x - 1.5 from 4")
    p = reference_dist("poisson", 50, lam=1.0)
    d = DistVector(3, p.values, 3 + 2 * 50, step=2)
    assert verify_identity_stationary(m, d).max_residual <= 1e-12
    s = solve_stationary(m, SolverConfig(N=50))
    assert s.total_variation(d) <= 1e-12


@pytest.mark.parametrize(
    "kind,params,window,family,expect,tol",
    [
        ("cmp", {"a": 2, "b": 2}, (30, 150), "x log x", 2.0, 0.05),
        ("geometric", {"p": 0.5}, (10, 150), "x", math.log(2), 1e-6),
        ("zeta", {"a": 3}, (50, 2000), "log x", 2.0, 0.02),
        ("poisson", {"lam": 3.0}, (20, 150), "x log x", 1.0, 0.05),
        ("negative_binomial", {"a": 2.5, "delta": 0.4}, (40, 300), "x", -math.log(0.4), 0.01),
    ],
)
def test_fit_recovers_reference(kind, params, window, family, expect, tol):
    N = window[1] + 10
    fit = fit_tail(reference_dist(kind, N, **params), window)
    assert fit.family == family
    assert fit.exponent == pytest.approx(expect, abs=tol)


def test_fit_qsd_power_tail():
    xs = np.arange(1, 5001)
    d = DistVector(1, 1 / (xs * (xs + 1)), 5000, kind="qsd", theta=1.0, tail_values=1 / xs)
    fit = fit_tail(d, (100, 4000))
    assert fit.family == "log x" and fit.exponent == pytest.approx(1.0, abs=1e-3)


def test_fit_stretched():
    xs = np.arange(1, 3001)
    logt = -2.0 * xs**0.5
    t = np.exp(logt)
    vals = t - np.append(t[1:], np.exp(-2.0 * 3001**0.5))
    d = DistVector(1, vals, 3000, tail_values=t)
    fit = fit_tail(d, (50, 2500))
    assert fit.family == "x^a"
    assert fit.a == pytest.approx(0.5, abs=0.02)


def test_fit_degenerate():
    with pytest.raises(DegenerateTail):
        fit_tail(reference_dist("geometric", 10, p=0.5))


def test_fit_prefers_predicted_on_tie():
    d = reference_dist("geometric", 200, p=0.5)
    assert fit_tail(d, (10, 150), predicted="x").family == "x"


def test_sharp_bdp_cases():
    p = sharp_bdp_prediction(compute_params(load("powerlaw.model")))
    assert (p.family, p.exponent) == ("log x", 3)
    s = sharp_bdp_prediction(compute_params(parse_model("jump +1: x+1\njump -1: x + x^0.5")))
    assert s.family == "x^a" and s.exponent == 0.5 and s.coefficient == pytest.approx(2.0)
    with pytest.raises(NotBDP):
        sharp_bdp_prediction(compute_params(load("schlogl.rxn")))
    with pytest.raises(AlphaNonzero):
        sharp_bdp_prediction(compute_params(load("exponential.model")))


def test_sharp_drift_agrees_with_bdp():
    for text in ["jump +1: x^2+1\njump -1: x^2+2*x", "jump +1: (x+1)^3\njump -1: x^2*(x+5)"]:
        m = parse_model(text)
        a = sharp_bdp_prediction(compute_params(m))
        b = sharp_drift_prediction(m)
        assert a.family == b.family and a.exponent == b.exponent


def test_sharp_drift_hypotheses():
    with pytest.raises(HypothesisViolated):
        sharp_drift_prediction(load("geometric_qsd.model"))
    with pytest.raises(HypothesisViolated):
        sharp_drift_prediction(load("exponential.model"))


def test_drift_ratio_series_and_integral():
    m = load("powerlaw.model")
    h = drift_ratio(m)
    # 2 (1 - 2x) / (2x^2 + 2x + 1) = -2/x + 3/x^2 + ...
    (e0, c0), (e1, c1) = h.leading(2)
    assert (float(e0), c0) == (-1.0, -2) and (float(e1), c1) == (-2.0, 3)
    assert h.integral(500) == pytest.approx(-2 * math.log(500) + 3 * (1 - 1 / 500), rel=1e-14)
    for x in (10, 100, 1000):
        assert h(x) == pytest.approx(2 * (1 - 2 * x) / (2 * x * x + 2 * x + 1), rel=1e-14)
