"""Rate functions with asymptotic power-law expansions.

A rate is a non-negative function on the integers that, for large ``x``,
admits an expansion ``a*x**r1 + b*x**r2 + O(x**r3)``. The concrete classes are

* :class:`PowerSum` -- finite sums ``sum_k c_k x**r_k`` (polynomials, falling
  factorials, negative or fractional powers),
* :class:`RatioRate` -- quotients ``c * p(x)/q(x)`` of power sums,
* :class:`GammaRatioRate` -- ``c * Gamma(x+xi)/Gamma(x)``,
* :class:`SumRate` -- sums of the above,
* :class:`ShiftedRate` -- ``f(s*x + n)``, produced by state normalization.

Each rate exposes :meth:`Rate.expansion`, an exact-rational
:class:`Expansion`, from which :func:`aplh_extract` reads the minimal
:class:`APLHTriple`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import poch

from .errors import ModelError, NegativeRate, ValidationError, ZeroPower

EXP_TOL = 1e-12
SERIES_DEPTH = 5  # relative depth kept in truncated asymptotic series
_NEG_SLACK = 1e-12  # relative cancellation slack before a value counts as negative

Exponent = int | float


def canon_exp(e) -> Exponent:
    """Canonical exponent: exact ``int`` when within 1e-12 of an integer."""
    f = float(e)
    r = round(f)
    if abs(f - r) <= EXP_TOL:
        return int(r)
    return f


def exp_eq(a, b) -> bool:
    return abs(float(a) - float(b)) <= EXP_TOL


def _frac(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    c = float(c)
    if not math.isfinite(c):
        raise ModelError(f"non-finite coefficient {c!r}")
    return Fraction(c)


# ---------------------------------------------------------------------------
# asymptotic series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expansion:
    """Truncated asymptotic series ``sum c_e x**e + O(x**remainder)``.

    ``terms`` are sorted by decreasing exponent, have non-zero
    :class:`~fractions.Fraction` coefficients and all exponents exceed
    ``remainder``. ``remainder == -inf`` means the series is exact.
    """

    terms: tuple[tuple[Exponent, Fraction], ...]
    remainder: float = -math.inf

    @staticmethod
    def build(pairs: Iterable[tuple[object, object]], remainder: float = -math.inf) -> "Expansion":
        acc: dict[Exponent, Fraction] = {}
        for e, c in pairs:
            e = canon_exp(e)
            if float(e) <= remainder + EXP_TOL:
                continue
            key = _match_key(acc, e)
            acc[key] = acc.get(key, Fraction(0)) + _frac(c)
        terms = tuple(sorted(((e, c) for e, c in acc.items() if c != 0), key=lambda t: -float(t[0])))
        return Expansion(terms, float(remainder))

    @property
    def exact(self) -> bool:
        return self.remainder == -math.inf

    @property
    def is_zero(self) -> bool:
        return not self.terms and self.exact

    def exponents(self) -> list[Exponent]:
        return [e for e, _ in self.terms]

    def leading(self) -> tuple[Exponent, Fraction]:
        if not self.terms:
            raise ModelError("expansion has no determined terms")
        return self.terms[0]

    def coeff(self, e) -> Fraction:
        """Coefficient of ``x**e``; raises if ``e`` is not resolved by the series."""
        if float(e) <= self.remainder + EXP_TOL:
            raise ModelError(f"coefficient of x^{e} is below the series remainder")
        for te, c in self.terms:
            if exp_eq(te, e):
                return c
        return Fraction(0)

    def limit_ratio(self, e) -> float | Fraction:
        """``lim f(x) / x**e`` as ``x -> inf`` (may be +-inf)."""
        for te, c in self.terms:
            if float(te) > float(e) + EXP_TOL:
                return math.inf if c > 0 else -math.inf
            if exp_eq(te, e):
                return c
            break
        if float(e) <= self.remainder + EXP_TOL:
            raise ModelError(f"limit against x^{e} is not resolved by the series")
        return Fraction(0)

    def __add__(self, other: "Expansion") -> "Expansion":
        rem = max(self.remainder, other.remainder)
        return Expansion.build(list(self.terms) + list(other.terms), rem)

    def scale(self, k) -> "Expansion":
        k = _frac(k)
        if k == 0:
            return Expansion((), -math.inf)
        return Expansion(tuple((e, c * k) for e, c in self.terms), self.remainder)

    def __mul__(self, other: "Expansion") -> "Expansion":
        if self.is_zero or other.is_zero:
            return Expansion((), -math.inf)
        la = float(self.leading()[0]) if self.terms else self.remainder
        lb = float(other.leading()[0]) if other.terms else other.remainder
        rem = max(la + other.remainder, lb + self.remainder)
        pairs = [(float(ea) + float(eb), ca * cb) for ea, ca in self.terms for eb, cb in other.terms]
        return Expansion.build(pairs, rem)

    def reciprocal(self, depth: int = SERIES_DEPTH) -> "Expansion":
        """Series of ``1/f`` truncated ``depth`` orders below the leading term."""
        e0, c0 = self.leading()
        e0 = float(e0)
        u = Expansion(tuple((float(e) - e0, c / c0) for e, c in self.terms[1:]),
                      self.remainder - e0)
        one = Expansion(((0, Fraction(1)),), -math.inf)
        if u.is_zero:
            acc = one
        else:
            rem = max(-float(depth), u.remainder)
            acc = Expansion(one.terms, rem)
            power = one
            neg_u = u.scale(-1)
            for _ in range(10_000):
                power = (neg_u * power).truncate_below(rem)
                if not power.terms:
                    break
                acc = acc + power
            else:  # pragma: no cover - pathological exponent gaps
                raise ModelError("reciprocal series did not terminate")
        return Expansion(tuple((canon_exp(e - e0), c / c0) for e, c in acc.terms), acc.remainder - e0)

    def truncate_below(self, rem: float) -> "Expansion":
        return Expansion.build(self.terms, max(rem, self.remainder))


def _match_key(acc: dict, e):
    for k in acc:
        if exp_eq(k, e):
            return k
    return e


# ---------------------------------------------------------------------------
# APLH triple
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class APLHTriple:
    """Minimal exponents ``r1 > r2 > r3`` and leading coefficients ``a``, ``b``.

    ``f(x) = a x**r1 + b x**r2 + O(x**r3)`` with ``a > 0`` and
    ``r2 + 1 >= r1 > r2 > r3 >= r1 - 2``.
    """

    r1: Exponent
    r2: Exponent
    r3: Exponent
    a: float
    b: float

    def as_tuple(self) -> tuple:
        return (self.r1, self.r2, self.r3, self.a, self.b)


def triple_from_expansion(ex: Expansion) -> APLHTriple:
    if not ex.terms:
        raise ValidationError("rate is identically zero for large x (not asymptotically power-law)")
    e0, c0 = ex.terms[0]
    if c0 <= 0:
        raise ValidationError(f"leading coefficient {float(c0)} of rate is not positive")
    r1 = e0
    rest = list(ex.terms[1:])
    if rest and float(rest[0][0]) >= float(r1) - 1 - EXP_TOL:
        r2, b = rest[0]
        rest = rest[1:]
    else:
        r2, b = canon_exp(float(r1) - 1), Fraction(0)
    cands = [float(r1) - 2]
    if rest:
        cands.append(float(rest[0][0]))
    if ex.remainder > -math.inf:
        cands.append(ex.remainder)
    r3 = canon_exp(max(cands))
    if float(r3) >= float(r2) - EXP_TOL:
        raise ModelError("series too short to resolve the third exponent")
    return APLHTriple(r1, r2, r3, float(c0), float(b))


# ---------------------------------------------------------------------------
# rate classes
# ---------------------------------------------------------------------------


def _overrides_tuple(overrides) -> tuple[tuple[int, float], ...]:
    if not overrides:
        return ()
    items = overrides.items() if isinstance(overrides, dict) else overrides
    out = []
    for k, v in items:
        v = float(v)
        if v < 0 or not math.isfinite(v):
            raise ValidationError(f"override value {v!r} at x={k} must be finite and non-negative")
        out.append((int(k), v))
    return tuple(sorted(out))


class Rate:
    """Base class. Subclasses implement :meth:`_raw` and :meth:`expansion`.

    For ``x < valid_from`` the value is taken from ``overrides`` (default 0).
    """

    valid_from: int | None
    overrides: tuple[tuple[int, float], ...]

    def _raw(self, x: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def _raw_scale(self, x: float) -> float:
        """Magnitude used to judge cancellation error in :meth:`_raw`."""
        return abs(self._raw(x))

    def expansion(self) -> Expansion:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, x) -> float:
        x = int(x)
        if self.valid_from is not None and x < self.valid_from:
            for k, v in self.overrides:
                if k == x:
                    return v
            return 0.0
        v = self._raw(float(x))
        if v < 0:
            if v >= -_NEG_SLACK * self._raw_scale(float(x)):
                return 0.0
            raise NegativeRate(x, v)
        return v

    def evaluate_many(self, xs: Sequence[int] | np.ndarray) -> np.ndarray:
        return np.array([self(int(x)) for x in np.asarray(xs)], dtype=float)

    def aplh(self) -> APLHTriple:
        return triple_from_expansion(self.expansion())

    @property
    def is_polynomial(self) -> bool:
        ex = self.expansion()
        return ex.exact and all(isinstance(e, int) and e >= 0 for e in ex.exponents())

    def to_source(self) -> str:
        raise ModelError(f"{type(self).__name__} has no DSL representation")

    # source helpers shared by subclasses
    def _wrap_source(self, body: str) -> str:
        if self.valid_from is None:
            return body
        pre = ""
        if self.overrides:
            pre = "override " + ", ".join(f"{k} -> {v!r}" for k, v in self.overrides) + "; "
        return f"{pre}{body} from {self.valid_from}"


@dataclass(frozen=True, eq=True)
class PowerSum(Rate):
    """``sum_k c_k x**r_k``; ``terms`` is a tuple of ``(coeff, exponent)``."""

    terms: tuple[tuple[float, Exponent], ...]
    valid_from: int | None = None
    overrides: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", _merge_terms(self.terms))
        object.__setattr__(self, "overrides", _overrides_tuple(self.overrides))
        if self.valid_from is not None:
            object.__setattr__(self, "valid_from", int(self.valid_from))

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[object, object]], valid_from=None, overrides=()) -> "PowerSum":
        return PowerSum(tuple((c, e) for c, e in pairs), valid_from, overrides)

    def _raw(self, x: float) -> float:
        tot = 0.0
        for c, r in self.terms:
            tot += c * _pow(x, r)
        return tot

    def _raw_scale(self, x: float) -> float:
        return sum(abs(c * _pow(x, r)) for c, r in self.terms)

    def evaluate_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        out = np.zeros(xs.shape, dtype=float)
        scale = np.zeros(xs.shape, dtype=float)
        main = np.ones(xs.shape, dtype=bool) if self.valid_from is None else xs >= self.valid_from
        xf = xs[main].astype(float)
        acc = np.zeros(xf.shape)
        for c, r in self.terms:
            if float(r) < 0 and np.any(xf == 0):
                raise ZeroPower(r)
            t = c * np.power(xf, float(r)) if not isinstance(r, int) else c * xf ** r
            acc += t
            scale[main] += np.abs(t)
        out[main] = acc
        if self.valid_from is not None:
            ov = dict(self.overrides)
            for i in np.nonzero(~main)[0]:
                out[i] = ov.get(int(xs[i]), 0.0)
        neg = out < 0
        if np.any(neg):
            bad = neg & (out < -_NEG_SLACK * scale)
            if np.any(bad):
                i = int(np.nonzero(bad)[0][0])
                raise NegativeRate(int(xs[i]), float(out[i]))
            out[neg] = 0.0
        return out

    def expansion(self) -> Expansion:
        return Expansion.build(((r, c) for c, r in self.terms))

    def to_source(self) -> str:
        return self._wrap_source(_powersum_source(self.terms))


@dataclass(frozen=True, eq=True)
class RatioRate(Rate):
    """``coeff * num(x) / den(x)``."""

    num: PowerSum
    den: PowerSum
    coeff: float = 1.0
    valid_from: int | None = None
    overrides: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if not self.den.terms:
            raise ValidationError("ratio denominator is identically zero")
        object.__setattr__(self, "overrides", _overrides_tuple(self.overrides))

    def _raw(self, x: float) -> float:
        d = self.den._raw(x)
        if d == 0:
            raise ModelError(f"ratio denominator vanishes at x={x:g}")
        return self.coeff * self.num._raw(x) / d

    def expansion(self) -> Expansion:
        return (self.num.expansion() * self.den.expansion().reciprocal()).scale(self.coeff)

    def to_source(self) -> str:
        body = f"ratio({_powersum_source(self.num.terms)}; {_powersum_source(self.den.terms)})"
        if self.coeff != 1.0:
            body = f"{self.coeff!r}*{body}"
        return self._wrap_source(body)


@dataclass(frozen=True, eq=True)
class GammaRatioRate(Rate):
    """``coeff * Gamma(x + xi) / Gamma(x)`` (zero at ``x = 0``)."""

    xi: float
    coeff: float = 1.0
    valid_from: int | None = None
    overrides: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if not (self.xi > 0 and math.isfinite(self.xi)):
            raise ValidationError(f"gammaratio exponent must be positive, got {self.xi!r}")
        object.__setattr__(self, "overrides", _overrides_tuple(self.overrides))

    def _raw(self, x: float) -> float:
        if x <= 0:
            return 0.0
        return self.coeff * float(poch(x, self.xi))

    def expansion(self) -> Expansion:
        return gamma_ratio_expansion(self.xi).scale(self.coeff)

    def to_source(self) -> str:
        body = f"gammaratio({self.xi!r})"
        if self.coeff != 1.0:
            body = f"{self.coeff!r}*{body}"
        return self._wrap_source(body)


@dataclass(frozen=True, eq=True)
class SumRate(Rate):
    """Sum of rates without their own overrides."""

    parts: tuple[Rate, ...]
    valid_from: int | None = None
    overrides: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "overrides", _overrides_tuple(self.overrides))

    def _raw(self, x: float) -> float:
        return math.fsum(p._raw(x) for p in self.parts)

    def _raw_scale(self, x: float) -> float:
        return sum(abs(p._raw(x)) for p in self.parts)

    def expansion(self) -> Expansion:
        ex = Expansion((), -math.inf)
        for p in self.parts:
            ex = ex + p.expansion()
        return ex

    def to_source(self) -> str:
        srcs = []
        for p in self.parts:
            s = p.to_source()
            srcs.append(s)
        body = " + ".join(srcs).replace("+ -", "- ")
        return self._wrap_source(body)


@dataclass(frozen=True, eq=True)
class ShiftedRate(Rate):
    """``base(scale*x + shift)``; evaluation is delegated verbatim."""

    base: Rate
    scale: int
    shift: int
    valid_from: int | None = field(default=None, init=False)
    overrides: tuple = field(default=(), init=False)

    def __call__(self, x) -> float:
        return self.base(self.scale * int(x) + self.shift)

    def _raw(self, x: float) -> float:
        return self.base._raw(self.scale * x + self.shift)

    def evaluate_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        return self.base.evaluate_many(self.scale * xs + self.shift)

    def expansion(self) -> Expansion:
        base = self.base.expansion()
        s = Fraction(self.scale)
        n = Fraction(self.shift)
        pairs = []
        rems = [base.remainder]
        lead = float(base.terms[0][0]) if base.terms else 0.0
        cutoff = lead - SERIES_DEPTH
        for r, c in base.terms:
            rf = float(r)
            sr = s ** r if isinstance(r, int) else Fraction(float(self.scale) ** rf)
            rq = _frac(r)
            k = 0
            binom = Fraction(1)
            while binom != 0:
                e = rf - k
                if e <= cutoff + EXP_TOL:
                    rems.append(cutoff)
                    break
                pairs.append((e, c * sr * binom * (n / s) ** k))
                if self.shift == 0:
                    break
                binom = binom * (rq - k) / (k + 1)
                k += 1
        return Expansion.build(pairs, max(rems))


def _pow(x: float, r: Exponent) -> float:
    if x == 0:
        if float(r) < 0:
            raise ZeroPower(r)
        return 1.0 if float(r) == 0 else 0.0
    if isinstance(r, int):
        return x ** r
    return math.exp(r * math.log(x))


def _merge_terms(terms) -> tuple[tuple[float, Exponent], ...]:
    acc: dict[Exponent, Fraction] = {}
    for c, e in terms:
        e = canon_exp(e)
        key = _match_key(acc, e)
        acc[key] = acc.get(key, Fraction(0)) + _frac(c)
    out = [(float(c), e) for e, c in acc.items() if c != 0]
    out = [(c, e) for c, e in out if c != 0.0]
    out.sort(key=lambda t: -float(t[1]))
    return tuple(out)


def _fmt_exp(e: Exponent) -> str:
    return str(e) if isinstance(e, int) else repr(float(e))


def _powersum_source(terms) -> str:
    if not terms:
        return "0"
    parts = []
    for i, (c, e) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = repr(abs(c))
        if e == 0:
            body = mag
        elif e == 1:
            body = f"{mag}*x"
        else:
            body = f"{mag}*x^{_fmt_exp(e)}"
        if i == 0:
            parts.append(("-" if sign == "-" else "") + body)
        else:
            parts.append(f" {sign} {body}")
    return "".join(parts)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def polynomial(coeffs: Sequence[float], valid_from=None, overrides=()) -> PowerSum:
    """Polynomial from ascending coefficients ``c0 + c1 x + ...``."""
    return PowerSum(tuple((c, k) for k, c in enumerate(coeffs)), valid_from, overrides)


def falling_factorial(n: int, coeff: float = 1.0) -> PowerSum:
    """``coeff * x (x-1) ... (x-n+1)`` expanded into powers of ``x``."""
    if n < 0:
        raise ValidationError("falling factorial order must be non-negative")
    poly = [Fraction(1)]
    for k in range(n):
        new = [Fraction(0)] * (len(poly) + 1)
        for i, c in enumerate(poly):
            new[i + 1] += c
            new[i] -= k * c
        poly = new
    c = _frac(coeff)
    return PowerSum(tuple((c * a, i) for i, a in enumerate(poly)))


def quotient(num: PowerSum, den: PowerSum, coeff: float = 1.0, valid_from=None, overrides=()) -> RatioRate:
    return RatioRate(num, den, float(coeff), valid_from, overrides)


def gammaratio(xi: float, coeff: float = 1.0, valid_from=None, overrides=()) -> GammaRatioRate:
    return GammaRatioRate(float(xi), float(coeff), valid_from, overrides)


def _bernoulli_poly(n: int, t: Fraction) -> Fraction:
    b = [Fraction(1), Fraction(-1, 2), Fraction(1, 6), Fraction(0), Fraction(-1, 30), Fraction(0)]
    return sum(math.comb(n, k) * b[k] * t ** (n - k) for k in range(n + 1))


def gamma_ratio_expansion(xi: float, depth: int = 4) -> Expansion:
    """Series of ``Gamma(x+xi)/Gamma(x)`` in powers ``x**(xi-k)``.

    Uses ``log Gamma(x+a) - log Gamma(x) = a log x + sum_n l_n x**-n`` with
    ``l_n = (-1)**(n+1) (B_{n+1}(a) - B_{n+1}(0)) / (n (n+1))`` and
    exponentiates the inner series.
    """
    a = Fraction(float(xi))
    logs = [Fraction(0)] + [
        (-1) ** (n + 1) * (_bernoulli_poly(n + 1, a) - _bernoulli_poly(n + 1, Fraction(0))) / (n * (n + 1))
        for n in range(1, depth)
    ]
    # exp of sum_{n>=1} l_n y^n as a power series in y, up to y^(depth-1)
    coeffs = [Fraction(1)] + [Fraction(0)] * (depth - 1)
    for k in range(1, depth):
        # c_k = (1/k) sum_{j=1..k} j l_j c_{k-j}
        coeffs[k] = sum(j * logs[j] * coeffs[k - j] for j in range(1, k + 1)) / k
    xf = float(xi)
    return Expansion.build(((xf - k, c) for k, c in enumerate(coeffs)), xf - depth)


def evaluate(f: Rate, x: int) -> float:
    """Evaluate a rate at integer ``x``."""
    return f(x)


def aplh_extract(f: Rate) -> APLHTriple:
    """Minimal APLH triple of ``f``."""
    return f.aplh()
