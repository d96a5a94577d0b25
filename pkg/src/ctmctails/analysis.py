"""Identity checks, absorption rate, empirical tail fits and sharp tail predictors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from .asymptotics import AsymptoticParams, compute_params, jump_structure
from .classifier import REL_TOL
from .errors import AlphaNonzero, DegenerateTail, EmptyAbsorbingSet, HypothesisViolated, NotBDP
from .model import FAMILY_CMP, FAMILY_POWER, FAMILY_STRETCHED, DecayBound, DistVector, JumpModel, normalize
from .rates import Expansion, exp_eq

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# identity residuals
# ---------------------------------------------------------------------------


@dataclass
class ResidualReport:
    """Pointwise residuals ``|L - R| / max(|L|, |R|, floor)`` over a window."""

    max_residual: float
    mean_residual: float
    worst_x: int | None
    form: str
    xs: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, dtype=int))
    residuals: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    def at(self, x: int) -> float:
        hit = np.nonzero(self.xs == x)[0]
        if hit.size == 0:
            raise KeyError(f"state {x} not in the checked window")
        return float(self.residuals[hit[0]])

    def to_json(self) -> dict:
        return {"max_residual": float(self.max_residual), "mean_residual": float(self.mean_residual),
                "worst_x": None if self.worst_x is None else int(self.worst_x), "form": self.form}


class _Frame:
    """A model and a distribution laid out on the normalized lattice ``0..K``."""

    def __init__(self, model: JumpModel, dist: DistVector):
        self.model = model
        self.nm, _ = normalize(model)
        self.js = jump_structure(self.nm)
        ws, n = model.omega_star, model.state_min
        if dist.step % ws and ws % dist.step:
            raise ValueError("distribution lattice incompatible with the model lattice")
        self.K = (dist.truncation - n) // ws
        if self.K < 1:
            raise ValueError("distribution window does not reach the model's state space")
        self.orig = n + ws * np.arange(self.K + 1)
        self.p = np.array([dist.prob(int(x)) for x in self.orig])
        # tails at 0..K+1; beyond the window they are exact only with tail_values
        tails = [dist.tail_at(int(x)) for x in self.orig]
        try:
            tails.append(dist.tail_at(int(n + ws * (self.K + 1))))
        except IndexError:
            tails.append(0.0)
        self.T = np.array(tails)
        pad = self.js.omega_plus + 2
        xs = np.arange(self.K + pad)
        self.table = self.nm.rate_table(xs)
        self.rates = {w: self.table[k] for k, w in enumerate(self.nm.jumps)}
        self.a = {}
        for j, Aj in self.js.A.items():
            v = np.zeros(xs.size)
            for w in Aj:
                v = v + self.rates[w]
            self.a[j] = v

    def aj(self, j: int, y: int) -> float:
        if y < 0 or j not in self.a:
            return 0.0
        return float(self.a[j][y])

    def pk(self, y: int) -> float:
        return float(self.p[y]) if 0 <= y <= self.K else 0.0

    def Tk(self, y: int) -> float:
        if y <= 0:
            return float(self.T[0])
        return float(self.T[y]) if y <= self.K + 1 else 0.0

    def leak_above(self, killed: bool) -> np.ndarray:
        """Per-state outflow past the window end (for killed QSD truncations)."""
        out = np.zeros(self.K + 1)
        if not killed:
            return out
        ys = np.arange(self.K + 1)
        for w, r in self.rates.items():
            if w > 0:
                out += np.where(ys + w > self.K, r[: self.K + 1], 0.0) * self.p
        return np.cumsum(out[::-1])[::-1]


def _report(xs, lhs, rhs, form: str, orig) -> ResidualReport:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    xs = np.asarray(xs, dtype=int)
    if xs.size == 0:
        return ResidualReport(0.0, 0.0, None, form, xs, np.zeros(0))
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    floor = max(_EPS * float(scale.max()), np.finfo(float).tiny)
    res = np.abs(lhs - rhs) / np.maximum(scale, floor)
    k = int(np.argmax(res))
    ox = orig[xs]
    return ResidualReport(float(res.max()), float(res.mean()), int(ox[k]), form, ox, res)


def _levels(fr: _Frame, qsd: bool, killed: bool) -> range:
    lo = 1
    if qsd and fr.nm.absorbing:
        lo = max(fr.nm.absorbing) + 1
    hi = fr.K + fr.js.omega_minus + 1
    if killed:
        hi = min(hi, fr.K - fr.js.omega_plus + 1)
    return range(lo, hi + 1)


def _per_omega(fr: _Frame, theta: float | None, killed: bool):
    leak = fr.leak_above(killed)
    xs, L, R = [], [], []
    for x in _levels(fr, theta is not None, killed):
        up, down = [], []
        for w, r in fr.rates.items():
            if w > 0:
                up.extend(fr.pk(y) * r[y] for y in range(max(0, x - w), x))
            else:
                down.extend(fr.pk(y) * r[y] for y in range(x, min(fr.K, x - w - 1) + 1))
        lhs = math.fsum(down) + (leak[x] if x <= fr.K else 0.0)
        rhs = math.fsum(up) + (theta * fr.Tk(x) if theta is not None else 0.0)
        xs.append(x)
        L.append(lhs)
        R.append(rhs)
    return xs, L, R


def _grouped(fr: _Frame, theta: float | None, killed: bool):
    leak = fr.leak_above(killed)
    wp, wm = fr.js.omega_plus, fr.js.omega_minus
    xs, L, R = [], [], []
    for x in _levels(fr, theta is not None, killed):
        lhs = math.fsum(fr.pk(x - j) * fr.aj(j, x - j) for j in range(wm + 1, 1))
        rhs = math.fsum(fr.pk(x - j) * fr.aj(j, x - j) for j in range(1, wp + 1))
        if killed and x <= fr.K:
            lhs += leak[x]
        if theta is not None:
            rhs += theta * fr.Tk(x)
        xs.append(x)
        L.append(lhs)
        R.append(rhs)
    return xs, L, R


def _tail_form(fr: _Frame, theta: float | None, killed: bool):
    leak = fr.leak_above(killed)
    wp, wm = fr.js.omega_plus, fr.js.omega_minus
    xs, L, R = [], [], []
    hi_ok = fr.K + wm
    for x in _levels(fr, theta is not None, killed):
        if x > hi_ok:
            break
        lhs = [fr.Tk(x) * (fr.aj(0, x) + fr.aj(1, x - 1))]
        for j in range(wm, 0):
            lhs.append(fr.Tk(x - j) * (fr.aj(j, x - j) - fr.aj(j + 1, x - j - 1)))
        rhs = [fr.Tk(x - j) * (fr.aj(j, x - j) - fr.aj(j + 1, x - j - 1)) for j in range(1, wp + 1)]
        if killed and x <= fr.K:
            lhs.append(leak[x])
        if theta is not None:
            rhs.append(theta * fr.Tk(x))
        xs.append(x)
        L.append(math.fsum(lhs))
        R.append(math.fsum(rhs))
    return xs, L, R


_FORMS = {"per-omega": _per_omega, "A_j-grouped": _grouped, "tail": _tail_form}


def _verify(model, dist, theta, form):
    fr = _Frame(model, dist)
    killed = bool(dist.info.get("killed_at_boundary")) if dist.info else False
    names = ("per-omega", "A_j-grouped") if form == "both" else (form,)
    reports = []
    for name in names:
        if name not in _FORMS:
            raise ValueError(f"unknown identity form {name!r}")
        xs, L, R = _FORMS[name](fr, theta, killed)
        reports.append(_report(xs, L, R, name, fr.orig))
    return max(reports, key=lambda r: r.max_residual)


def verify_identity_stationary(model: JumpModel, dist: DistVector, form: str = "both") -> ResidualReport:
    """Level-crossing balance of a stationary distribution.

    ``form="both"`` evaluates the per-jump double sum and the grouped form and
    returns the worse report.
    """
    if dist.kind != "stationary":
        raise ValueError("expected a stationary distribution")
    return _verify(model, dist, None, form)


def verify_identity_qsd(model: JumpModel, dist: DistVector, theta: float | None = None,
                        form: str = "A_j-grouped") -> ResidualReport:
    """Grouped balance of a QSD, including the ``theta * T(x)`` term.

    ``theta`` defaults to ``dist.theta``. Truncations that kill at the window
    end (``dist.info['killed_at_boundary']``) get the matching outflow term.
    """
    if dist.kind != "qsd":
        raise ValueError("expected a quasi-stationary distribution")
    th = dist.theta if theta is None else theta
    if th is None:
        raise ValueError("QSD check needs theta")
    return _verify(model, dist, float(th), form)


def verify_tail_identity(model: JumpModel, dist: DistVector, theta: float | None = None) -> ResidualReport:
    """The balance restated through tails ``T(x)``; QSDs add ``theta * T(x)``."""
    th = None
    if dist.kind == "qsd":
        th = dist.theta if theta is None else theta
        if th is None:
            raise ValueError("QSD check needs theta")
        th = float(th)
    return _verify(model, dist, th, "tail")


def theta_from_dist(model: JumpModel, dist: DistVector) -> float:
    """Absorption flux ``sum_{w<0} sum_{y notin A, y+w in A} nu(y) lambda_w(y)``."""
    if not model.absorbing:
        raise EmptyAbsorbingSet("theta needs a non-empty absorbing set")
    absorbing = set(model.absorbing)
    terms = []
    for w in model.backward:
        r = model.rate(w)
        for a in absorbing:
            y = a - w
            if y in absorbing or not model.in_space(y):
                continue
            p = dist.prob(y)
            if p:
                terms.append(p * r(y))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# tail fitting
# ---------------------------------------------------------------------------

FIT_FAMILIES = ("x log x", "x", "x^a", "log x")
_DECAY = {"x log x": FAMILY_CMP, "x": FAMILY_STRETCHED, "x^a": FAMILY_STRETCHED, "log x": FAMILY_POWER}
A_GRID = tuple(round(0.05 * k, 2) for k in range(1, 40) if k != 20)
TIE_REL = 0.05
MIN_POINTS = 20
SIGNIFICANT_SHARE = 1e-2


@dataclass
class TailCandidate:
    family: str
    exponent: float
    a: float | None
    coefficients: tuple[float, ...]
    rss: float
    bic: float
    valid: bool


@dataclass
class TailFit:
    """Best tail family for ``log T(x)`` on a window.

    ``exponent`` is the decay parameter in the family's own terms: the
    ``x log x`` coefficient, the exponential rate, the stretched coefficient
    (with shape ``a``), or the power-law exponent.
    """

    family: str
    exponent: float
    a: float | None
    rss: float
    r2: float
    window: tuple[int, int]
    candidates: list[TailCandidate]
    tie_broken: bool = False

    @property
    def decay(self) -> DecayBound:
        if self.family == "x log x":
            return DecayBound(FAMILY_CMP, 1.0, self.exponent)
        if self.family == "x":
            return DecayBound(FAMILY_STRETCHED, 1.0, self.exponent)
        if self.family == "x^a":
            return DecayBound(FAMILY_STRETCHED, self.a, self.exponent)
        return DecayBound(FAMILY_POWER, self.exponent)

    def to_json(self) -> dict:
        return {
            "family": self.family, "exponent": self.exponent, "a": self.a, "rss": self.rss, "r2": self.r2,
            "window": list(self.window), "tie_broken": self.tie_broken,
            "candidates": [{"family": c.family, "exponent": c.exponent, "a": c.a, "rss": c.rss, "bic": c.bic,
                            "valid": c.valid} for c in self.candidates],
        }


def _lstsq(B: np.ndarray, y: np.ndarray):
    # column scaling keeps the normal equations well conditioned
    s = np.abs(B).max(axis=0)
    s[s == 0] = 1.0
    coef, *_ = np.linalg.lstsq(B / s, y, rcond=None)
    coef = coef / s
    r = y - B @ coef
    return coef, float(r @ r)


def _stretched(x, y, a):
    B = np.column_stack([np.ones_like(x), x ** a, np.log(x)])
    return _lstsq(B, y)


def _log_tail(dist: DistVector) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lt = np.log(dist.tail())
    if dist.log_values is not None:
        acc = np.logaddexp.accumulate(dist.log_values[::-1])[::-1]
        bad = ~np.isfinite(lt)
        lt[bad] = acc[bad]
    return lt


def fit_tail(dist: DistVector, window: tuple[int, int] | None = None, predicted: str | None = None) -> TailFit:
    """Least-squares fits of ``log T(x)`` against the four tail families.

    Candidates are compared by BIC after discarding fits whose decay
    coefficient has the wrong sign. When ``predicted`` (a fit family or a
    decay family) is within 5% of the best residual, it wins the tie.
    """
    lo, hi = window if window is not None else (dist.offset, dist.truncation)
    xs_all = dist.states
    sel = (xs_all >= lo) & (xs_all <= hi)
    x = xs_all[sel].astype(float)
    if x.size < MIN_POINTS:
        raise DegenerateTail(f"window [{lo}, {hi}] has {x.size} points; need at least {MIN_POINTS}")
    if x[0] <= 0:
        raise DegenerateTail("window must lie in x > 0")
    y = _log_tail(dist)[sel]
    if not np.all(np.isfinite(y)):
        raise DegenerateTail("tail underflows or vanishes on the window")
    n = x.size
    # residual floor: exact tails fit several bases to rounding level
    floor = n * (64 * _EPS * max(1.0, float(np.abs(y).max()))) ** 2
    lx = np.log(x)
    span = float(y.max() - y.min())

    def bic(rss, k):
        return n * math.log((rss + floor) / n) + k * math.log(n)

    cands: list[TailCandidate] = []
    # x log x: y = c0 - b x log x + c1 x + c2 log x
    B = np.column_stack([np.ones_like(x), -x * lx, x, lx])
    c, rss = _lstsq(B, y)
    cands.append(TailCandidate("x log x", float(c[1]), 1.0, tuple(map(float, c)), rss, bic(rss, 4),
                               _significant(c[1] * np.ptp(x * lx), span)))
    # x: y = c0 - r x + c2 log x
    B = np.column_stack([np.ones_like(x), -x, lx])
    c, rss = _lstsq(B, y)
    cands.append(TailCandidate("x", float(c[1]), 1.0, tuple(map(float, c)), rss, bic(rss, 3),
                               _significant(c[1] * np.ptp(x), span)))
    # x^a: grid then bounded scalar refinement, a excluded at 1
    best_a = min(A_GRID, key=lambda a: _stretched(x, y, a)[1])
    lo_a, hi_a = max(0.01, best_a - 0.05), min(1.99, best_a + 0.05)
    ref = minimize_scalar(lambda a: _stretched(x, y, a)[1], bounds=(lo_a, hi_a), method="bounded",
                          options={"xatol": 1e-6})
    a = float(ref.x) if ref.success and ref.fun <= _stretched(x, y, best_a)[1] else float(best_a)
    c, rss = _stretched(x, y, a)
    cands.append(TailCandidate("x^a", float(-c[1]), a, tuple(map(float, c)), rss, bic(rss, 4),
                               _significant(-c[1] * np.ptp(x ** a), span) and abs(a - 1.0) > 1e-3))
    # log x: y = c0 - e log x + c2 / x
    B = np.column_stack([np.ones_like(x), -lx, 1.0 / x])
    c, rss = _lstsq(B, y)
    cands.append(TailCandidate("log x", float(c[1]), None, tuple(map(float, c)), rss, bic(rss, 3),
                               _significant(c[1] * np.ptp(lx), span)))

    valid = [cd for cd in cands if cd.valid]
    if not valid:
        raise DegenerateTail("no tail family fits with a decaying coefficient")
    best = min(valid, key=lambda cd: cd.bic)
    tie = False
    if predicted is not None:
        fams = [f for f in FIT_FAMILIES if f == predicted or _DECAY[f] == predicted]
        pref = [cd for cd in valid if cd.family in fams and cd is not best]
        if pref:
            p = min(pref, key=lambda cd: cd.rss)
            if p.rss + floor <= (1 + TIE_REL) * (best.rss + floor):
                best, tie = p, True
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - best.rss / tss if tss > 0 else 1.0
    return TailFit(best.family, best.exponent, best.a if best.family == "x^a" else None, best.rss, r2,
                   (int(lo), int(hi)), cands, tie)


def _significant(drop: float, span: float) -> bool:
    """A decay term must be positive and carry at least 1% of the decline.

    The x log x basis contains the exponential one, so on a geometric-like
    tail it picks up a tiny x log x coefficient from the ``O(1/x)``
    corrections; the 1% floor rejects that.
    """
    return bool(drop > 0 and drop >= SIGNIFICANT_SHARE * span)


# ---------------------------------------------------------------------------
# sharp predictors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SharpPrediction:
    """Leading tail behaviour ``T(x)``.

    ``family`` is ``"log x"`` (``T ~ x**-exponent``) or ``"x^a"``
    (``T ~ exp(-coefficient * x**exponent)``, possibly with a power prefactor
    ``x**prefactor``).
    """

    case: str
    family: str
    exponent: float
    coefficient: float | None = None
    prefactor: float | None = None
    formula: str = ""

    def to_json(self) -> dict:
        return {"case": self.case, "family": self.family, "exponent": self.exponent,
                "coefficient": self.coefficient, "prefactor": self.prefactor, "formula": self.formula}


def _zero(v: float, scale: float) -> bool:
    return abs(v) <= REL_TOL * max(1.0, abs(scale))


def sharp_bdp_prediction(params: AsymptoticParams) -> SharpPrediction:
    """Tail of a critical (``alpha = 0``) birth-death stationary distribution."""
    p = params
    if not (p.omega_plus == 1 and p.omega_minus == -1):
        raise NotBDP("sharp BDP prediction needs jumps {-w, +w}")
    if not _zero(p.alpha, max(p.alpha_plus or 0.0, p.alpha_minus or 0.0)):
        raise AlphaNonzero(f"alpha = {p.alpha!r}; prediction needs alpha = 0")
    s1, s2, R, D = float(p.sigma1), float(p.sigma2), float(p.R), p.Delta
    ws = p.omega_star
    if D is None:
        raise HypothesisViolated("Delta undefined (infinite gamma)")
    if exp_eq(p.sigma1, 1):
        if not D > 1:
            raise HypothesisViolated(f"sigma1 = 1 needs Delta > 1 for a stationary law; Delta = {D!r}")
        e = D - 1
        return SharpPrediction("sigma1=1", FAMILY_POWER, e, formula=f"T(x) ~ x^-{e:g}")
    if s1 < 1 and D > 0 and not _zero(D, 1.0):
        e = 1 - s1
        coef = D / e
        return SharpPrediction("Delta>0,sigma1<1", FAMILY_STRETCHED, e, coef * ws ** (-e),
                               formula=f"T(x) ~ exp(-{coef:g} (x/{ws})^{e:g})")
    if s1 < 1 and _zero(D, 1.0) and min(2 * s1, s2) > 1:
        if not R > 1:
            raise HypothesisViolated("power-law case needs R > 1")
        e = R - 1
        return SharpPrediction("Delta=0,sigma1<1", FAMILY_POWER, e, formula=f"T(x) ~ x^-{e:g}")
    raise HypothesisViolated(f"no sharp BDP case applies (sigma1={s1:g}, sigma2={s2:g}, Delta={D:g})")


@dataclass(frozen=True)
class DriftRatio:
    """``h = 2 m1 / m2`` as an asymptotic series in normalized coordinates."""

    series: Expansion
    model: JumpModel

    def __call__(self, x: float) -> float:
        xs = np.atleast_1d(np.asarray(x, dtype=int))
        t = self.model.rate_table(xs)
        ws = np.array(self.model.jumps, dtype=float)[:, None]
        num = (t * ws).sum(axis=0)
        den = (t * ws * ws).sum(axis=0)
        out = 2 * num / den
        return out if np.ndim(x) else float(out[0])

    def leading(self, k: int = 2):
        return self.series.terms[:k]

    def integral(self, x: float, k: int = 2) -> float:
        """``int_1^x`` of the leading ``k`` series terms of ``h``, in closed form."""
        acc = 0.0
        for e, c in self.leading(k):
            e = float(e)
            if abs(e + 1) < 1e-12:
                acc += float(c) * math.log(x)
            else:
                acc += float(c) * (x ** (e + 1) - 1) / (e + 1)
        return acc


def drift_ratio(model: JumpModel) -> DriftRatio:
    nm, _ = normalize(model)
    drift = Expansion((), -math.inf)
    second = Expansion((), -math.inf)
    for w in nm.jumps:
        ex = nm.rate(w).expansion()
        drift = drift + ex.scale(w)
        second = second + ex.scale(w * w)
    return DriftRatio((drift * second.reciprocal()).scale(2), nm)


def sharp_drift_prediction(model: JumpModel) -> SharpPrediction:
    """Tail from the drift-to-diffusion ratio of the embedded chain."""
    if model.absorbing:
        raise HypothesisViolated("needs an empty absorbing set")
    nm, _ = normalize(model)
    p = compute_params(nm)
    if p.one_sided:
        raise HypothesisViolated("needs forward and backward jumps")
    if not _zero(p.alpha, max(p.alpha_plus, p.alpha_minus)):
        raise HypothesisViolated(f"alpha = 0 fails (alpha = {p.alpha!r})")
    if not p.gamma + p.vartheta < 0:
        raise HypothesisViolated(f"gamma + vartheta < 0 fails (gamma + vartheta = {p.gamma + p.vartheta!r})")
    h = drift_ratio(model)
    lead = h.leading(1)
    R, s1, s2 = p.R, float(p.sigma1), float(p.sigma2)
    ws = model.omega_star
    # gamma / vartheta as an exact ratio when the series allows it
    gv = Fraction(lead[0][1]) if lead and exp_eq(lead[0][0], -float(p.sigma1)) else Fraction(p.gamma / p.vartheta)
    if exp_eq(p.sigma1, 1):
        # R - gamma/vartheta equals Delta for birth-death chains
        e = float(_frac_exp(R) - gv) - 1
        return SharpPrediction("sigma1=1", FAMILY_POWER, e, formula=f"T(x) ~ x^-{e:g}")
    e = 1 - s1
    coef = float(-gv) / e
    m = min(2 * s1, s2)
    pref = None if abs(m - 1) < 1e-12 else 1 - float(R) + s1
    formula = f"T(x) ~ exp(-{coef:g} (x/{ws})^{e:g})"
    if pref is not None:
        formula = f"T(x) ~ x^{pref:g} " + formula[len("T(x) ~ "):]
    return SharpPrediction("sigma1<1", FAMILY_STRETCHED, e, coef * ws ** (-e), pref, formula)


def _frac_exp(R) -> Fraction:
    return Fraction(R) if isinstance(R, int) else Fraction(float(R))
