"""Jump structure and asymptotic tail parameters of a jump model.

All limits are read off exact-rational asymptotic series of the rate
functions (see :class:`ctmctails.rates.Expansion`), so models with rational
coefficients and integer exponents give exact parameters, rounded to
``float`` only at the end.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable

from .errors import ConsistencyFailure, ModelError
from .model import JumpModel
from .rates import APLHTriple, Expansion, canon_exp, exp_eq

LEMMA_TOL = 1e-12


@dataclass(frozen=True)
class JumpStructure:
    """gcd ``omega_star``, scaled extremes and the nested jump sets ``A_j``.

    For ``omega_minus <= j <= 0``: ``A_j = {w < 0 : j*omega_star > w}``;
    for ``1 <= j <= omega_plus + 1``: ``A_j = {w > 0 : j*omega_star <= w}``.
    ``omega_plus`` (``omega_minus``) is 0 when there are no forward
    (backward) jumps.
    """

    jumps: tuple[int, ...]
    omega_star: int
    omega_plus: int
    omega_minus: int
    A: dict[int, tuple[int, ...]]

    @property
    def forward(self) -> tuple[int, ...]:
        return tuple(w for w in self.jumps if w > 0)

    @property
    def backward(self) -> tuple[int, ...]:
        return tuple(w for w in self.jumps if w < 0)

    def to_json(self) -> dict:
        return {
            "jumps": list(self.jumps),
            "omega_star": self.omega_star,
            "omega_plus": self.omega_plus,
            "omega_minus": self.omega_minus,
            "A": {str(j): list(v) for j, v in sorted(self.A.items())},
        }


def jump_structure(model_or_jumps: JumpModel | Iterable[int]) -> JumpStructure:
    jumps = model_or_jumps.jumps if isinstance(model_or_jumps, JumpModel) else tuple(model_or_jumps)
    jumps = tuple(sorted(set(int(w) for w in jumps)))
    if not jumps or 0 in jumps:
        raise ModelError("jump set must be non-empty and exclude 0")
    ws = reduce(math.gcd, (abs(w) for w in jumps))
    fwd = [w for w in jumps if w > 0]
    bwd = [w for w in jumps if w < 0]
    wp = max(fwd) // ws if fwd else 0
    wm = min(bwd) // ws if bwd else 0
    A: dict[int, tuple[int, ...]] = {}
    for j in range(wm, 1):
        A[j] = tuple(w for w in bwd if j * ws > w)
    for j in range(1, wp + 2):
        A[j] = tuple(w for w in fwd if j * ws <= w)
    return JumpStructure(jumps, ws, wp, wm, A)


def _f(v) -> float | None:
    if v is None:
        return None
    return float(v)


@dataclass(frozen=True)
class AsymptoticParams:
    """Exponents, gaps and limiting coefficients of a model.

    Entries that need both jump directions are ``None`` when the model is
    one-sided (``one_sided`` is then ``True``). ``gamma`` may be infinite
    when forward and backward leading exponents differ.
    """

    omega_star: int
    omega_plus: int
    omega_minus: int
    R: float
    R_plus: float | None
    R_minus: float | None
    R1_plus: float | None
    R1_minus: float | None
    R2_plus: float | None
    R2_minus: float | None
    sigma1: float
    sigma2: float
    alpha: float
    alpha_plus: float | None
    alpha_minus: float | None
    beta: float | None
    gamma: float
    gamma_plus: float | None
    gamma_minus: float | None
    vartheta: float
    Delta: float | None
    delta: float | None
    alpha_j: dict[int, float] = field(default_factory=dict)
    gamma_j: dict[int, float] = field(default_factory=dict)
    triples: dict[int, APLHTriple] = field(default_factory=dict)
    one_sided: bool = False
    polynomial: bool = False

    @property
    def two_sided(self) -> bool:
        return not self.one_sided

    def to_json(self) -> dict:
        def num(v):
            if v is None:
                return None
            if isinstance(v, int):
                return v
            v = float(v)
            return v if math.isfinite(v) else None

        out = {}
        for k in (
            "omega_star omega_plus omega_minus R R_plus R_minus R1_plus R1_minus R2_plus R2_minus "
            "sigma1 sigma2 alpha alpha_plus alpha_minus beta gamma gamma_plus gamma_minus vartheta "
            "Delta delta"
        ).split():
            out[k] = num(getattr(self, k))
        out["alpha_j"] = {str(j): num(v) for j, v in sorted(self.alpha_j.items())}
        out["gamma_j"] = {str(j): num(v) for j, v in sorted(self.gamma_j.items())}
        out["triples"] = {str(w): list(map(float, t.as_tuple())) for w, t in sorted(self.triples.items())}
        out["one_sided"] = self.one_sided
        out["polynomial"] = self.polynomial
        return out

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _side_exponents(triples: list[APLHTriple]) -> list:
    vals: list = []
    for t in triples:
        for r in (t.r1, t.r2, t.r3):
            if not any(exp_eq(r, v) for v in vals):
                vals.append(canon_exp(r))
    return sorted(vals, key=float, reverse=True)


def _weighted(model: JumpModel, jumps, weight) -> Expansion:
    ex = Expansion((), -math.inf)
    for w in jumps:
        ex = ex + model.rate(w).expansion().scale(weight(w))
    return ex


def _minus_leading(ex: Expansion, e, c) -> Expansion:
    if c == 0 or not math.isfinite(float(c)):
        return ex
    return ex + Expansion(((canon_exp(e), -Fraction(c)),), -math.inf)


def _lim(ex: Expansion, e):
    v = ex.limit_ratio(e)
    return v if isinstance(v, Fraction) else float(v)


def _fin(v) -> bool:
    return isinstance(v, Fraction) or math.isfinite(v)


def compute_params(model: JumpModel) -> AsymptoticParams:
    """Asymptotic parameters of ``model`` (partial when one-sided)."""
    js = jump_structure(model)
    ws = js.omega_star
    triples = {w: model.rate(w).aplh() for w in model.jumps}
    fwd, bwd = js.forward, js.backward

    def side(jumps):
        if not jumps:
            return None, None, None
        E = _side_exponents([triples[w] for w in jumps])
        return E[0], E[1], E[2]

    Rp, R1p, R2p = side(fwd)
    Rm, R1m, R2m = side(bwd)
    sides = [(Rp, R1p, R2p), (Rm, R1m, R2m)]
    sides = [s for s in sides if s[0] is not None]
    R = max(float(s[0]) for s in sides)
    R = canon_exp(R)
    sigma1 = canon_exp(min(float(s[0]) - float(s[1]) for s in sides))
    sigma2 = canon_exp(min(float(s[0]) - float(s[2]) for s in sides))

    drift = _weighted(model, model.jumps, lambda w: w)
    second = _weighted(model, model.jumps, lambda w: w * w)
    alpha = _lim(drift, R)
    gamma = _lim(_minus_leading(drift, R, alpha), float(R) - float(sigma1))
    vartheta = _lim(second, R) / 2

    alpha_p = alpha_m = beta = gamma_p = gamma_m = None
    if fwd:
        s = _weighted(model, fwd, lambda w: w)
        alpha_p = _lim(s, Rp)
        gamma_p = _lim(_minus_leading(s, Rp, alpha_p), float(Rp) - float(sigma1))
    if bwd:
        s = _weighted(model, bwd, lambda w: -w)
        alpha_m = _lim(s, Rm)
        gamma_m = _lim(_minus_leading(s, Rm, alpha_m), float(Rm) - float(sigma1))
        beta = _lim(_weighted(model, bwd, lambda w: 1), Rm)

    alpha_j: dict[int, float] = {}
    gamma_j: dict[int, float] = {}
    for j, Aj in js.A.items():
        if not Aj:
            continue
        if j <= 0 and j == js.omega_minus:
            continue  # A_{omega_minus} is empty by construction
        if j > js.omega_plus:
            continue
        Rs = Rm if j <= 0 else Rp
        s = _weighted(model, Aj, lambda w: 1)
        a = _lim(s, Rs)
        g = _lim(_minus_leading(s, Rs, a), float(Rs) - float(sigma1))
        alpha_j[j] = float(a)
        gamma_j[j] = float(g)

    one_sided = not (fwd and bwd)
    Delta = delta = None
    if not one_sided and _fin(gamma):
        denom = alpha_p * ws
        if exp_eq(sigma1, 1):
            Delta = (-gamma + R * vartheta) / denom
        else:
            Delta = -gamma / denom
        delta = Delta / (js.omega_plus - js.omega_minus - 1)

    polynomial = all(model.rate(w).is_polynomial for w in model.jumps)
    return AsymptoticParams(
        omega_star=ws,
        omega_plus=js.omega_plus,
        omega_minus=js.omega_minus,
        R=R,
        R_plus=Rp,
        R_minus=Rm,
        R1_plus=R1p,
        R1_minus=R1m,
        R2_plus=R2p,
        R2_minus=R2m,
        sigma1=sigma1,
        sigma2=sigma2,
        alpha=float(alpha),
        alpha_plus=_f(alpha_p),
        alpha_minus=_f(alpha_m),
        beta=_f(beta),
        gamma=float(gamma),
        gamma_plus=_f(gamma_p),
        gamma_minus=_f(gamma_m),
        vartheta=float(vartheta),
        Delta=_f(Delta),
        delta=_f(delta),
        alpha_j=alpha_j,
        gamma_j=gamma_j,
        triples=triples,
        one_sided=one_sided,
        polynomial=polynomial,
    )


def _close(a: float, b: float, tol: float) -> float:
    """Relative residual of ``a == b`` (scaled by max(1, |a|, |b|))."""
    return abs(a - b) / max(1.0, abs(a), abs(b))


def lemma_consistency(params: AsymptoticParams, tol: float = LEMMA_TOL) -> dict[str, float]:
    """Check the linear identities tying per-``j`` coefficients to the totals.

    Returns a dict of relative residuals; raises :class:`ConsistencyFailure`
    when any exceeds ``tol``.
    """
    p = params
    ws = p.omega_star
    res: dict[str, float] = {}
    neg = [j for j in p.alpha_j if j <= 0]
    pos = [j for j in p.alpha_j if j >= 1]
    if p.alpha_minus is not None:
        res["alpha_minus"] = _close(p.alpha_minus, ws * math.fsum(p.alpha_j[j] for j in neg), tol)
        res["beta"] = _close(p.beta, p.alpha_j.get(0, 0.0), tol)
        if p.gamma_minus is not None and math.isfinite(p.gamma_minus):
            res["gamma_minus"] = _close(p.gamma_minus, ws * math.fsum(p.gamma_j[j] for j in neg), tol)
    if p.alpha_plus is not None:
        res["alpha_plus"] = _close(p.alpha_plus, ws * math.fsum(p.alpha_j[j] for j in pos), tol)
        if p.gamma_plus is not None and math.isfinite(p.gamma_plus):
            res["gamma_plus"] = _close(p.gamma_plus, ws * math.fsum(p.gamma_j[j] for j in pos), tol)
    if p.alpha_plus is not None and p.alpha_minus is not None:
        if exp_eq(p.R_plus, p.R_minus):
            expect = p.alpha_plus - p.alpha_minus
        elif float(p.R_minus) > float(p.R_plus):
            expect = -p.alpha_minus
        else:
            expect = p.alpha_plus
        res["alpha"] = _close(p.alpha, expect, tol)
        if p.alpha == 0:
            lhs = math.fsum(abs(j) * v for j, v in p.alpha_j.items())
            res["second_moment"] = _close(lhs, p.vartheta / ws**2, tol)
    bad = {k: v for k, v in res.items() if not v <= tol}
    if bad:
        raise ConsistencyFailure(f"parameter identities violated: {bad}")
    return res
