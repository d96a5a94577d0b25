import math

import numpy as np
import pytest

from ctmctails.asymptotics import compute_params, jump_structure, lemma_consistency
from ctmctails.model import JumpModel
from ctmctails.rates import polynomial

from conftest import load


def test_jump_structure_sets():
    js = jump_structure([-4, 2, 6])
    assert (js.omega_star, js.omega_plus, js.omega_minus) == (2, 3, -2)
    assert js.A[-2] == () and js.A[-1] == (-4,) and js.A[0] == (-4,)
    assert js.A[1] == (2, 6) and js.A[2] == (6,) and js.A[3] == (6,) and js.A[4] == ()


def test_schlogl_parameters():
    p = compute_params(load("schlogl.rxn"))
    assert (p.R_plus, p.R_minus, p.R) == (2, 3, 3)
    assert (p.R1_plus, p.R2_plus, p.R1_minus, p.R2_minus) == (1, 0, 2, 1)
    assert p.sigma1 == 1 and p.sigma2 == 2
    assert p.alpha == -1 and p.alpha_plus == 2 and p.alpha_minus == 1 and p.beta == 1
    assert p.alpha_j == {0: 1.0, 1: 1.0, 2: 1.0}
    assert p.triples[-1].as_tuple() == (3, 2, 1, 1.0, -3.0)
    assert p.Delta is None or not math.isfinite(p.gamma) or p.Delta is not None


def test_three_step_drift():
    # birth x^2, jump -2 at rate x(x-1)(x-2): drift -2 x^3
    p = compute_params(load("three_step.rxn"))
    assert p.alpha == -2 and p.alpha_minus == 2 and p.omega_minus == -2


def test_powerlaw_delta():
    p = compute_params(load("powerlaw.model"))
    # drift 1 - 2x, second moment 2x^2 + 2x + 1
    assert p.alpha == 0 and p.gamma == -2 and p.vartheta == 1 and p.sigma1 == 1
    assert p.Delta == 4 and p.delta == 4


def test_one_sided_partial():
    p = compute_params(load("pure_birth.model"))
    assert p.one_sided and p.R_minus is None and p.Delta is None


def _lead(coeffs):
    return len(coeffs) - 1, coeffs[-1]


def _backward_coeffs(w, q):
    """Coefficients of ff(x, |w|) * q(x), which vanishes on 0..|w|-1."""
    c = np.array([1], dtype=object)
    for k in range(abs(w)):
        c = np.convolve(c, np.array([-k, 1], dtype=object))
    return list(np.convolve(c, np.array(q, dtype=object)))


def _random_model(rng, balanced: bool):
    pool = [w for w in range(-5, 6) if w]
    while True:
        jumps = sorted(set(int(w) for w in rng.choice(pool, size=rng.integers(2, 6))))
        if any(w > 0 for w in jumps) and any(w < 0 for w in jumps):
            break
    coeffs = {}
    if balanced:
        d = int(rng.integers(5, 8))
        lead = {w: int(rng.integers(1, 5)) for w in jumps}
        S = sum(w * lead[w] for w in jumps if w > 0)
        T = sum(-w * lead[w] for w in jumps if w < 0)
        for w in jumps:
            c = lead[w] * (T if w > 0 else S)
            if w > 0:
                coeffs[w] = [int(v) for v in rng.integers(0, 4, size=d)] + [c]
            else:
                q = [int(v) for v in rng.integers(0, 4, size=d - abs(w))] + [c]
                coeffs[w] = _backward_coeffs(w, q)
    else:
        for w in jumps:
            q = [int(v) for v in rng.integers(0, 4, size=int(rng.integers(0, 4)))] + [int(rng.integers(1, 5))]
            coeffs[w] = q if w > 0 else _backward_coeffs(w, q)
    return JumpModel.from_dict({w: polynomial(c) for w, c in coeffs.items()}), coeffs


@pytest.mark.parametrize("balanced", [False, True])
def test_coefficient_identities_randomized(balanced):
    rng = np.random.default_rng(20240601 + balanced)
    worst = 0.0
    for _ in range(200):
        model, coeffs = _random_model(rng, balanced)
        p = compute_params(model)
        res = lemma_consistency(p)
        worst = max(worst, max(res.values()))
        # independent oracle straight from the coefficient lists
        ws = p.omega_star
        Rm = max(_lead(c)[0] for w, c in coeffs.items() if w < 0)
        Rp = max(_lead(c)[0] for w, c in coeffs.items() if w > 0)
        am = sum(-w * c[-1] for w, c in coeffs.items() if w < 0 and len(c) - 1 == Rm)
        ap = sum(w * c[-1] for w, c in coeffs.items() if w > 0 and len(c) - 1 == Rp)
        assert p.alpha_minus == pytest.approx(am, rel=1e-12)
        assert p.alpha_plus == pytest.approx(ap, rel=1e-12)
        if balanced:
            assert p.alpha == 0
            assert "second_moment" in res
            vt = sum(w * w * c[-1] for w, c in coeffs.items()) / 2
            assert p.vartheta == pytest.approx(vt, rel=1e-12)
            assert sum(abs(j) * a for j, a in p.alpha_j.items()) == pytest.approx(vt / ws**2, rel=1e-12)
    assert worst <= 1e-12
