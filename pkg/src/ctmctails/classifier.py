"""Decision tables mapping asymptotic parameters to tail regimes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .asymptotics import AsymptoticParams
from .errors import NecessaryConditionViolated, PartialParams, TwoSidedModel
from .model import (
    FAMILY_CMP,
    FAMILY_POWER,
    FAMILY_STRETCHED,
    DecayBound,
    JumpModel,
    Regime,
    TailClassification,
)
from .rates import exp_eq

REL_TOL = 1e-9
WARN_MARGIN = 1e-6
SUPPORT_SCAN = 200


class _Ctx:
    """Collects clauses and near-boundary warnings while deciding."""

    def __init__(self):
        self.clauses: list[str] = []
        self.warnings: list[str] = []
        self.notes: list[str] = []

    def cmp(self, a: float, b: float, scale: float, label: str) -> int:
        """Sign of ``a - b`` with ties at relative tolerance ``REL_TOL``."""
        scale = max(abs(scale), abs(a), abs(b), 1e-300)
        d = a - b
        if abs(d) <= REL_TOL * scale:
            if d != 0:
                self.warnings.append(f"NearBoundary: {label} treated as equality (margin {d:.3e})")
            return 0
        if abs(d) <= WARN_MARGIN * scale:
            self.warnings.append(f"NearBoundary: {label} decided with margin {d:.3e}")
        return 1 if d > 0 else -1

    def result(self, regime: Regime, lower=None, upper=None) -> TailClassification:
        return TailClassification(regime, lower, upper, tuple(self.clauses), tuple(self.warnings), tuple(self.notes))


def _sign_alpha(p: AsymptoticParams, ctx: _Ctx) -> int:
    scale = max(p.alpha_plus or 0.0, p.alpha_minus or 0.0)
    return ctx.cmp(p.alpha, 0.0, scale, "alpha = 0")


def _exp_cmp(a, b) -> int:
    if exp_eq(a, b):
        return 0
    return 1 if float(a) > float(b) else -1


def classify_stationary(params: AsymptoticParams) -> TailClassification:
    """Tail regime of an unboundedly supported stationary distribution."""
    p = params
    if p.one_sided:
        raise PartialParams("stationary classification needs forward and backward jumps")
    ctx = _Ctx()
    sa = _sign_alpha(p, ctx)
    if sa > 0:
        ctx.clauses.append("alpha > 0: no stationary distribution with unbounded support")
        return ctx.result(Regime.NoUnboundedStationary)
    ws, wp = p.omega_star, p.omega_plus
    rel = _exp_cmp(p.R_minus, p.R_plus)
    if rel > 0:
        gap = float(p.R_minus) - float(p.R_plus)
        ctx.clauses.append("R- > R+")
        return ctx.result(
            Regime.CMPLike,
            lower=DecayBound(FAMILY_CMP, gap / ws),
            upper=DecayBound(FAMILY_CMP, gap / (wp * ws)),
        )
    if sa < 0:
        ctx.clauses.append("R- = R+ and alpha < 0")
        return ctx.result(Regime.Exponential, DecayBound(FAMILY_STRETCHED, 1.0), DecayBound(FAMILY_STRETCHED, 1.0))

    # alpha = 0 (hence R- = R+)
    s1 = p.sigma1
    D = p.Delta
    if exp_eq(s1, 1):
        if ctx.cmp(D, 1.0, 1.0, "Delta = 1") <= 0:
            ctx.clauses.append("alpha = 0, sigma1 = 1 and Delta <= 1: necessary condition Delta > 1 fails")
            return ctx.result(Regime.NoUnboundedStationary)
        ctx.clauses.append("alpha = 0 and sigma1 = 1")
        lower = None
        if ctx.cmp(p.delta, 1.0, 1.0, "delta = 1") > 0:
            ctx.clauses.append("delta > 1")
            lower = DecayBound(FAMILY_POWER, p.delta - 1)
        return ctx.result(Regime.PowerLaw, lower, DecayBound(FAMILY_POWER, D - 1))
    sD = ctx.cmp(D, 0.0, 1.0, "Delta = 0")
    if sD < 0:
        ctx.clauses.append("alpha = 0, sigma1 < 1 and Delta < 0: necessary condition Delta >= 0 fails")
        return ctx.result(Regime.NoUnboundedStationary)
    if sD > 0:
        ctx.clauses.append("alpha = 0, Delta > 0 and sigma1 < 1")
        a = 1 - float(s1)
        return ctx.result(Regime.StretchedExponential, DecayBound(FAMILY_STRETCHED, a), DecayBound(FAMILY_STRETCHED, a))
    # the gap case: only lower bounds are known
    ctx.clauses.append("alpha = 0, sigma1 < 1 and Delta = 0 (gap case: no upper bound)")
    if float(p.sigma2) < 1 and not exp_eq(p.sigma2, 1):
        ctx.clauses.append("sigma2 < 1")
        lower = DecayBound(FAMILY_STRETCHED, 1 - float(p.sigma2))
    else:
        ctx.clauses.append("sigma2 >= 1")
        lower = DecayBound(FAMILY_POWER, None)
    return ctx.result(Regime.GapIndeterminate, lower, None)


def classify_qsd(params: AsymptoticParams, theta: float) -> TailClassification:
    """Tail bounds for a quasi-stationary distribution with absorption rate ``theta``."""
    p = params
    if p.one_sided:
        raise PartialParams("QSD classification needs forward and backward jumps; see support_obstruction")
    if not (theta > 0 and math.isfinite(theta)):
        raise NecessaryConditionViolated(f"theta must be positive and finite, got {theta!r}")
    ctx = _Ctx()
    sa = _sign_alpha(p, ctx)
    R = float(p.R)
    rel = _exp_cmp(p.R_minus, p.R_plus)
    sR = 0 if exp_eq(R, 0) else (1 if R > 0 else -1)
    am, ap, beta = p.alpha_minus, p.alpha_plus, p.beta
    ws, wp, wm = p.omega_star, p.omega_plus, p.omega_minus

    if sa > 0:
        raise NecessaryConditionViolated("alpha <= 0 fails")
    if sR < 0:
        raise NecessaryConditionViolated("R >= 0 fails")
    s_am = ctx.cmp(am, theta, max(am, theta), "alpha- = theta") if sR == 0 else None
    if sR == 0:
        if s_am < 0:
            raise NecessaryConditionViolated("R = 0 requires alpha- >= theta")
        if rel == 0 and ctx.cmp(p.alpha, -theta, max(am, theta), "alpha = -theta") > 0:
            raise NecessaryConditionViolated("R = 0 and R- = R+ require alpha <= -theta")
        if rel > 0 and ctx.cmp(beta, theta, max(beta, theta), "beta = theta") < 0:
            raise NecessaryConditionViolated("R = 0 and R- > R+ require beta >= theta")
    if rel == 0 and sR > 0 and sa == 0 and not float(R) > float(p.sigma1) + 1e-12:
        raise NecessaryConditionViolated("R- = R+ > 0 and alpha = 0 require R > sigma1")

    s_at = None
    if sR == 0:
        s_at = ctx.cmp(p.alpha + theta, 0.0, max(am, theta), "alpha + theta = 0")
    lower = upper = None
    if rel > 0:
        gap = float(p.R_minus) - float(p.R_plus)
        if sR == 0:
            sb = ctx.cmp(beta, theta, max(beta, theta), "beta = theta")
            if sb > 0:
                ctx.clauses.append("R- > R+, R = 0, beta > theta")
                lower = DecayBound(FAMILY_CMP, gap / ws)
            elif gap <= 1 + 1e-12:
                ctx.clauses.append("R- > R+, R = 0, beta = theta, R- - R+ <= 1")
                lower = DecayBound(FAMILY_STRETCHED, 1.0)
            else:
                ctx.notes.append("R = 0, beta = theta and R- - R+ > 1: no lower bound available")
        else:
            ctx.clauses.append("R- > R+, R > 0")
            lower = DecayBound(FAMILY_CMP, gap / ws)
            if R > 1 + 1e-12:
                ctx.clauses.append("R > 1")
                upper = DecayBound(FAMILY_CMP, gap / (wp * ws))
    else:  # R- = R+
        if sR > 0 and sa < 0:
            ctx.clauses.append("R- = R+, R > 0, alpha < 0")
            lower = DecayBound(FAMILY_STRETCHED, 1.0)
            if R > 1 + 1e-12:
                ctx.clauses.append("R > 1")
                upper = DecayBound(FAMILY_STRETCHED, 1.0)
        elif sR > 0:
            s1 = float(p.sigma1)
            if exp_eq(R, s1) and s1 < 1:
                ctx.clauses.append("alpha = 0, R = sigma1 < 1")
                lower = DecayBound(FAMILY_STRETCHED, 1 - R)
            elif exp_eq(s1, 1) and R >= 1 - 1e-12:
                ctx.clauses.append("alpha = 0, R >= sigma1 = 1")
                lower = DecayBound(FAMILY_POWER, None)
            elif min(1.0, R) > s1 + 1e-12:
                ctx.clauses.append("alpha = 0, min(1, R) > sigma1")
                ctx.notes.append("lower bound exponent read as 1 - sigma1 (stretched exponential)")
                lower = DecayBound(FAMILY_STRETCHED, 1 - s1)
        else:
            if s_at == 0:
                if exp_eq(p.sigma1, 1):
                    ctx.clauses.append("R = 0, alpha + theta = 0, sigma1 = 1")
                    lower = DecayBound(FAMILY_POWER, None)
                else:
                    ctx.clauses.append("R = 0, alpha + theta = 0, sigma1 < 1")
                    lower = DecayBound(FAMILY_STRETCHED, 1 - float(p.sigma1))
            else:
                ctx.clauses.append("R = 0, alpha + theta < 0")
                lower = DecayBound(FAMILY_STRETCHED, 1.0)

    # upper bounds independent of R- vs R+
    if upper is None:
        if exp_eq(R, 1):
            ctx.clauses.append("R = 1")
            upper = DecayBound(FAMILY_POWER, theta / ap)
        elif 0 < R < 1:
            ctx.clauses.append("0 < R < 1")
            upper = DecayBound(FAMILY_STRETCHED, 1 - R)
        elif sR == 0 and s_am > 0:
            ctx.clauses.append("R = 0, alpha- > theta")
            upper = DecayBound(FAMILY_STRETCHED, 1.0)
        elif sR == 0 and s_am == 0:
            ctx.clauses.append("R = 0, alpha- = theta")
            upper = DecayBound(FAMILY_CMP, -float(p.sigma1) / wm)

    # tail type
    light = (rel > 0 and float(p.R_minus) > max(1.0, float(p.R_plus)) + 1e-12) or (sR == 0 and s_am == 0)
    expo = rel == 0 and ((sR == 0 and s_at < 0) or (R > 1 + 1e-12 and sa < 0))
    heavy = rel == 0 and ((sR > 0 and sa == 0) or (sR == 0 and s_at == 0))
    if light:
        if lower is None:
            ctx.notes.append("no QSD decays faster than a CMP distribution")
            lower = DecayBound(FAMILY_CMP, None)
        return ctx.result(Regime.CMPLike, lower, upper)
    if expo:
        return ctx.result(Regime.Exponential, lower, upper)
    if heavy and lower is not None:
        regime = Regime.PowerLaw if lower.family == FAMILY_POWER else Regime.StretchedExponential
        return ctx.result(regime, lower, upper)
    if lower is not None and upper is None:
        return ctx.result(Regime.LowerBoundOnly, lower, None)
    if lower is not None and upper is not None and lower.family == upper.family:
        regime = {FAMILY_CMP: Regime.CMPLike, FAMILY_POWER: Regime.PowerLaw}.get(lower.family)
        if regime is None:
            regime = Regime.Exponential if lower.a == 1.0 and upper.a == 1.0 else Regime.StretchedExponential
        return ctx.result(regime, lower, upper)
    ctx.notes.append("bounds do not pin down a single decay family")
    return ctx.result(Regime.GapIndeterminate, lower, upper)


@dataclass(frozen=True)
class ErgodicityVerdict:
    verdict: str  # "Ergodic" or "Unknown"
    failed: tuple[str, ...] = ()
    margin: float | None = None

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "failed": list(self.failed), "margin": self.margin}


def ergodicity_check(params: AsymptoticParams, absorbing_empty: bool = True) -> ErgodicityVerdict:
    """Sufficient condition for ergodicity of any unboundedly supported stationary law."""
    p = params
    failed = []
    if not absorbing_empty:
        failed.append("absorbing set must be empty")
    if p.one_sided:
        failed.append("model must have forward and backward jumps")
    if not p.polynomial:
        failed.append("rates must be polynomials")
    if not float(p.R) >= 3:
        failed.append("R >= 3")
    margin = None
    if p.alpha_plus is not None:
        margin = (float(p.R) - 1) * p.vartheta - p.alpha_plus
        if margin > 0:
            failed.append("(R - 1) * vartheta - alpha+ <= 0")
    return ErgodicityVerdict("Unknown" if failed else "Ergodic", tuple(failed), margin)


@dataclass(frozen=True)
class SupportObstruction:
    """Support restrictions for one-sided models.

    ``stationary_support`` lists the states (within the scanned window) where
    every rate vanishes; any stationary distribution lives there. ``qsd`` is
    ``"NoQSDPossible"``, ``"NotObstructed"`` or ``"SupportRestricted"``
    (``None`` without absorbing states).
    """

    direction: str
    stationary_support: tuple[int, ...]
    window: tuple[int, int]
    qsd: str | None
    notes: tuple[str, ...] = ()

    @property
    def regime(self) -> Regime | None:
        return Regime.NoQSDPossible if self.qsd == "NoQSDPossible" else None

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "stationary_support": list(self.stationary_support),
            "window": list(self.window),
            "qsd": self.qsd,
            "notes": list(self.notes),
        }


def support_obstruction(model: JumpModel, window: int = SUPPORT_SCAN) -> SupportObstruction:
    if model.two_sided:
        raise TwoSidedModel("support obstruction applies to models with only forward or only backward jumps")
    ws, n = model.omega_star, model.state_min
    hi = n + ws * window
    for _, f in model.rates:
        if f.valid_from is not None:
            hi = max(hi, f.valid_from + ws * window)
    xs = list(range(n, hi + 1, ws))
    table = model.rate_table(xs)
    positive = table.sum(axis=0) > 0
    zero_states = tuple(x for x, pos in zip(xs, positive) if not pos)
    direction = "forward-only" if model.forward else "backward-only"
    notes = [f"stationary distributions are supported on zero-rate states (scanned {xs[0]}..{xs[-1]})"]
    qsd = None
    if model.absorbing:
        if model.backward:
            qsd = "NotObstructed"
            notes.append("backward-only models are not obstructed")
        else:
            absorbing = set(model.absorbing)
            nonabs = [x for x in xs if x not in absorbing]
            support = {x for x, pos in zip(xs, positive) if pos}
            if set(nonabs) == support:
                qsd = "NoQSDPossible"
                notes.append("every non-absorbing state has a positive rate")
            else:
                qsd = "SupportRestricted"
                notes.append("QSD mass restricted to non-absorbing zero-rate states")
    return SupportObstruction(direction, zero_states, (xs[0], xs[-1]), qsd, tuple(notes))
