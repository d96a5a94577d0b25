"""Text formats for jump models.

Two entry points share one tokenizer and expression grammar:

* :func:`parse_model` reads the direct jump DSL (``.model`` files)::

      statemin 0
      absorbing {0}
      jump -1: override 1 -> 2; 2*x + 2 from 2
      jump +1: x

* :func:`parse_reactions` reads single-species mass-action networks
  (``.rxn`` files), one reaction per line or separated by ``;``::

      0S -> S @ 1.0; S -> 0S @ 1.0
      burst @ 2.0 with {1: 0.5, 2: 0.5}

Rate expressions combine numbers, ``x``, ``x^p``, ``ff(x,n)``,
``gammaratio(xi)`` and ``ratio(p; q)`` with ``+ - * /`` and parentheses.
Division is limited to constants and single monomials; use ``ratio`` for
rational functions. :func:`format_model` prints a model back to the jump DSL.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    ModelSyntaxError,
    NonPositiveRateConstant,
    SelfLoopReaction,
    UnboundedJumpSet,
    ValidationError,
)
from .model import JumpModel
from .rates import (
    GammaRatioRate,
    PowerSum,
    RatioRate,
    Rate,
    SumRate,
    canon_exp,
    falling_factorial,
)

UNBOUNDED_MSG = "jump set must be finite ((A1))"

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>->|\.\.|[-+*/^(){}:;,@])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | op | newline | eof
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    out: list[Token] = []
    pos, line, col0 = 0, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ModelSyntaxError(f"unexpected character {src[pos]!r}", line, pos - col0 + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "newline":
            out.append(Token("newline", text, line, pos - col0 + 1))
            line += 1
            col0 = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, text, line, pos - col0 + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - col0 + 1))
    return out


# ---------------------------------------------------------------------------
# symbolic values built while parsing a rate expression
# ---------------------------------------------------------------------------


@dataclass
class _Val:
    ps: dict  # exponent -> Fraction
    specials: list  # [(coeff Fraction, kind, payload)], kind in {"ratio", "gamma"}

    @staticmethod
    def const(c) -> "_Val":
        return _Val({0: Fraction(c)} if c else {}, [])

    @property
    def is_const(self) -> bool:
        return not self.specials and all(e == 0 for e in self.ps)

    @property
    def is_monomial(self) -> bool:
        return not self.specials and len(self.ps) == 1

    def const_value(self) -> Fraction:
        return self.ps.get(0, Fraction(0))


def _add_ps(a: dict, b: dict, sign: int = 1) -> dict:
    out = dict(a)
    for e, c in b.items():
        key = next((k for k in out if abs(float(k) - float(e)) <= 1e-12), e)
        out[key] = out.get(key, Fraction(0)) + sign * c
    return {e: c for e, c in out.items() if c != 0}


def _mul_ps(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            out = _add_ps(out, {canon_exp(float(ea) + float(eb)): ca * cb})
    return out


def _ps_rate(ps: dict) -> PowerSum:
    return PowerSum(tuple((c, e) for e, c in ps.items()))


class _Parser:
    def __init__(self, src: str, reactions: bool):
        self.toks = tokenize(src)
        self.i = 0
        self.reactions = reactions
        self.state_min: int | None = None
        self.absorbing: set[int] = set()
        self.jump_rates: dict[int, Rate] = {}
        self.rxn_rates: dict[int, list[PowerSum]] = {}
        self.species: str | None = None

    # -- token helpers --------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def err(self, msg: str, expected: str | None = None, tok: Token | None = None) -> ModelSyntaxError:
        t = tok or self.tok
        return ModelSyntaxError(msg, t.line, t.col, expected)

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "ident")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.err(f"unexpected {self._desc(self.tok)}", repr(text))
        return self.advance()

    @staticmethod
    def _desc(t: Token) -> str:
        if t.kind == "eof":
            return "end of input"
        if t.kind == "newline":
            return "end of line"
        return repr(t.text)

    def number(self) -> float:
        sign = 1
        if self.at("-") or self.at("+"):
            sign = -1 if self.advance().text == "-" else 1
        if self.tok.kind != "number":
            raise self.err(f"unexpected {self._desc(self.tok)}", "NUMBER")
        return sign * float(self.advance().text)

    def integer(self, signed: bool = False) -> int:
        sign = 1
        if signed and (self.at("-") or self.at("+")):
            sign = -1 if self.advance().text == "-" else 1
        t = self.tok
        if t.kind != "number" or not t.text.isdigit():
            raise self.err(f"unexpected {self._desc(t)}", "SIGNED_INT" if signed else "INT")
        self.advance()
        return sign * int(t.text)

    def _is_separator(self) -> bool:
        t = self.tok
        return t.kind in ("newline", "eof") or (self.reactions and t.text == ";" and t.kind == "op")

    # -- statements -----------------------------------------------------

    def parse(self) -> JumpModel:
        while self.tok.kind != "eof":
            if self._is_separator():
                self.advance()
                continue
            self.statement()
            if not self._is_separator():
                raise self.err(f"unexpected {self._desc(self.tok)}", "end of statement")
        return self.build()

    def statement(self) -> None:
        t = self.tok
        if t.kind == "ident" and t.text == "statemin":
            self.advance()
            if self.state_min is not None:
                raise self.err("statemin declared twice", tok=t)
            self.state_min = self.integer()
        elif t.kind == "ident" and t.text == "absorbing":
            self.advance()
            self.expect("{")
            if not self.at("}"):
                self.absorbing.add(self.integer())
                while self.at(","):
                    self.advance()
                    self.absorbing.add(self.integer())
            self.expect("}")
        elif t.kind == "ident" and t.text == "jump":
            if self.reactions:
                raise self.err("jump declarations belong in .model files; use parse_model")
            self.advance()
            self.jump_decl(t)
        elif t.kind == "ident" and t.text == "burst":
            self.advance()
            self.burst_decl()
        else:
            self.reaction()

    def jump_decl(self, start: Token) -> None:
        lo = self.integer(signed=True)
        hi = lo
        if self.at(".."):
            self.advance()
            if self.tok.kind == "ident" and self.tok.text == "inf":
                raise UnboundedJumpSet(f"{UNBOUNDED_MSG}: jump range {lo}..inf at line {start.line}")
            hi = self.integer(signed=True)
            if hi < lo:
                raise self.err("empty jump range", tok=start)
        self.expect(":")
        rate = self.rate()
        for w in range(lo, hi + 1):
            if w == 0:
                raise ValidationError(f"line {start.line}: jump 0 is not allowed")
            if w in self.jump_rates:
                raise ValidationError(f"line {start.line}: jump {w} declared twice")
            self.jump_rates[w] = rate

    def burst_decl(self) -> None:
        self.expect("@")
        c = self.number()
        if c <= 0:
            raise NonPositiveRateConstant(f"burst rate constant must be positive, got {c!r}")
        if not (self.tok.kind == "ident" and self.tok.text == "with"):
            raise self.err(f"unexpected {self._desc(self.tok)}", "'with'")
        self.advance()
        if self.tok.kind == "ident" and self.tok.text == "geometric":
            raise UnboundedJumpSet(f"{UNBOUNDED_MSG}: geometric burst sizes are unbounded")
        self.expect("{")
        weights: dict[int, float] = {}
        while True:
            k = self.integer()
            self.expect(":")
            p = self.number()
            if k <= 0:
                raise ValidationError(f"burst size must be positive, got {k}")
            if p < 0:
                raise ValidationError(f"burst weight must be non-negative, got {p!r}")
            weights[k] = weights.get(k, 0.0) + p
            if not self.at(","):
                break
            self.advance()
        self.expect("}")
        if sum(weights.values()) > 1 + 1e-12:
            raise ValidationError("burst weights sum to more than 1")
        for k, p in weights.items():
            if p > 0:
                self.rxn_rates.setdefault(k, []).append(PowerSum(((Fraction(c) * Fraction(p), 1),)))

    def complex_(self) -> int:
        t = self.tok
        n = None
        if t.kind == "number":
            n = self.integer()
        if self.tok.kind == "ident" and self.tok.text not in ("burst", "jump"):
            name = self.advance()
            if self.species is None:
                self.species = name.text
            elif name.text != self.species:
                raise self.err(
                    f"second species {name.text!r}: only single-species (one-dimensional) networks are supported",
                    tok=name,
                )
            if self.at("+"):
                raise self.err("complexes with several species are outside the one-dimensional scope")
            return 1 if n is None else n
        if n == 0:
            return 0
        raise self.err(f"unexpected {self._desc(self.tok)}", "species complex such as '2S' or '0'")

    def reaction(self) -> None:
        start = self.tok
        n = self.complex_()
        self.expect("->")
        m = self.complex_()
        self.expect("@")
        k = self.number()
        if m == n:
            raise SelfLoopReaction(f"line {start.line}: reaction {n}S -> {m}S has zero net change")
        if k <= 0:
            raise NonPositiveRateConstant(f"line {start.line}: rate constant must be positive, got {k!r}")
        self.rxn_rates.setdefault(m - n, []).append(falling_factorial(n, k))

    # -- rate expressions -------------------------------------------------

    def rate(self) -> Rate:
        overrides: dict[int, float] = {}
        if self.tok.kind == "ident" and self.tok.text == "override":
            self.advance()
            while True:
                k = self.integer()
                self.expect("->")
                overrides[k] = self.number()
                if not self.at(","):
                    break
                self.advance()
            self.expect(";")
        val = self.expr()
        valid_from = None
        if self.tok.kind == "ident" and self.tok.text == "from":
            self.advance()
            valid_from = self.integer()
        elif overrides:
            raise self.err("overrides require a 'from' bound", "'from'")
        if valid_from is not None and any(k >= valid_from for k in overrides):
            raise ValidationError("override states must lie below the 'from' bound")
        return self._to_rate(val, valid_from, tuple(sorted(overrides.items())))

    def _to_rate(self, val: _Val, valid_from, overrides) -> Rate:
        parts: list[Rate] = []
        if val.ps:
            parts.append(_ps_rate(val.ps))
        for c, kind, payload in val.specials:
            if kind == "ratio":
                num, den = payload
                parts.append(RatioRate(num, den, float(c)))
            else:
                parts.append(GammaRatioRate(payload, float(c)))
        if not parts:
            parts.append(PowerSum(()))
        if len(parts) == 1:
            p = parts[0]
            if isinstance(p, PowerSum):
                return PowerSum(p.terms, valid_from, overrides)
            if isinstance(p, RatioRate):
                return RatioRate(p.num, p.den, p.coeff, valid_from, overrides)
            return GammaRatioRate(p.xi, p.coeff, valid_from, overrides)
        return SumRate(tuple(parts), valid_from, overrides)

    def expr(self) -> _Val:
        val = self.term()
        while self.at("+") or self.at("-"):
            sign = 1 if self.advance().text == "+" else -1
            rhs = self.term()
            val = _Val(_add_ps(val.ps, rhs.ps, sign),
                       val.specials + [(sign * c, k, p) for c, k, p in rhs.specials])
        return val

    def term(self) -> _Val:
        val = self.factor()
        while self.at("*") or self.at("/"):
            op = self.advance()
            rhs = self.factor()
            val = self._mul(val, rhs, op) if op.text == "*" else self._div(val, rhs, op)
        return val

    def factor(self) -> _Val:
        if self.at("-") or self.at("+"):
            sign = -1 if self.advance().text == "-" else 1
            v = self.factor()
            return _Val({e: sign * c for e, c in v.ps.items()}, [(sign * c, k, p) for c, k, p in v.specials])
        return self.power()

    def power(self) -> _Val:
        start = self.tok
        base = self.atom()
        if self.at("^"):
            self.advance()
            p = self.number()
            if base.is_monomial and not base.specials:
                (e, c), = base.ps.items()
                if c == 1:
                    return _Val({canon_exp(float(e) * p): Fraction(1)}, [])
            if not base.specials and float(p).is_integer() and p >= 0:
                out = _Val.const(1)
                for _ in range(int(p)):
                    out = _Val(_mul_ps(out.ps, base.ps), [])
                return out
            raise self.err("'^' applies to x or to sums raised to non-negative integer powers", tok=start)
        return base

    def atom(self) -> _Val:
        t = self.tok
        if t.kind == "number":
            return _Val.const(Fraction(self.number()))
        if t.kind == "ident":
            name = t.text
            if name == "x":
                self.advance()
                return _Val({1: Fraction(1)}, [])
            if name == "ff":
                self.advance()
                self.expect("(")
                self.expect("x")
                self.expect(",")
                n = self.integer()
                self.expect(")")
                ff = falling_factorial(n)
                return _Val({e: Fraction(c) for c, e in ff.terms}, [])
            if name == "gammaratio":
                self.advance()
                self.expect("(")
                xi = self.number()
                self.expect(")")
                if xi <= 0:
                    raise self.err("gammaratio exponent must be positive", tok=t)
                return _Val({}, [(Fraction(1), "gamma", xi)])
            if name == "ratio":
                self.advance()
                self.expect("(")
                num = self.expr()
                self.expect(";")
                den = self.expr()
                self.expect(")")
                if num.specials or den.specials:
                    raise self.err("ratio() arguments must be power sums", tok=t)
                if not den.ps:
                    raise self.err("ratio() denominator is zero", tok=t)
                return _Val({}, [(Fraction(1), "ratio", (_ps_rate(num.ps), _ps_rate(den.ps)))])
            raise self.err(f"unknown identifier {name!r}", "x, ff, gammaratio, ratio or NUMBER")
        if t.text == "(" and t.kind == "op":
            self.advance()
            v = self.expr()
            self.expect(")")
            return v
        raise self.err(f"unexpected {self._desc(t)}", "expression")

    def _mul(self, a: _Val, b: _Val, op: Token) -> _Val:
        if a.is_const or b.is_const:
            k, v = (a.const_value(), b) if a.is_const else (b.const_value(), a)
            return _Val({e: k * c for e, c in v.ps.items() if k * c != 0},
                        [(k * c, kind, p) for c, kind, p in v.specials] if k != 0 else [])
        if not a.specials and not b.specials:
            return _Val(_mul_ps(a.ps, b.ps), [])
        # power sum times a single ratio folds into the numerator
        for s, o in ((a, b), (b, a)):
            if not s.ps and len(s.specials) == 1 and s.specials[0][1] == "ratio" and not o.specials:
                c, _, (num, den) = s.specials[0]
                new_num = _mul_ps({e: Fraction(cc) for cc, e in num.terms}, o.ps)
                return _Val({}, [(c, "ratio", (_ps_rate(new_num), den))])
        raise self.err("unsupported product of special rate terms", tok=op)

    def _div(self, a: _Val, b: _Val, op: Token) -> _Val:
        if b.is_const:
            k = b.const_value()
            if k == 0:
                raise self.err("division by zero", tok=op)
            return _Val({e: c / k for e, c in a.ps.items()}, [(c / k, kind, p) for c, kind, p in a.specials])
        if b.is_monomial and not a.specials:
            (e, c), = b.ps.items()
            return _Val({canon_exp(float(ea) - float(e)): ca / c for ea, ca in a.ps.items()}, [])
        raise self.err("division by a non-monomial; write ratio(p; q)", tok=op)

    # -- assembly -------------------------------------------------------

    def build(self) -> JumpModel:
        rates: dict[int, Rate] = dict(self.jump_rates)
        for w, polys in self.rxn_rates.items():
            pairs = [(c, e) for p in polys for c, e in p.terms]
            # accumulate exactly so that reaction order does not matter
            merged = PowerSum(tuple((Fraction(c), e) for c, e in pairs))
            if w in rates:
                old = rates[w]
                if isinstance(old, PowerSum) and old.valid_from is None:
                    merged = PowerSum(tuple((Fraction(c), e) for c, e in old.terms + merged.terms))
                else:
                    merged = SumRate((old, merged))
            rates[w] = merged
        if not rates:
            raise ValidationError("model declares no jumps")
        return JumpModel(tuple(rates.items()), self.state_min or 0, tuple(self.absorbing))


def parse_model(src: str) -> JumpModel:
    """Parse the jump DSL into a validated :class:`JumpModel`."""
    return _Parser(src, reactions=False).parse()


def parse_reactions(src: str) -> JumpModel:
    """Parse a single-species reaction network (mass-action kinetics)."""
    return _Parser(src, reactions=True).parse()


def parse_file(path) -> JumpModel:
    """Dispatch on extension: ``.rxn`` reactions, anything else jump DSL."""
    from pathlib import Path

    p = Path(path)
    text = p.read_text()
    return parse_reactions(text) if p.suffix == ".rxn" else parse_model(text)


def format_model(model: JumpModel) -> str:
    """Render a model in the jump DSL; parsing the result gives an equal model."""
    lines = [f"statemin {model.state_min}"]
    if model.absorbing:
        lines.append("absorbing {" + ", ".join(str(a) for a in model.absorbing) + "}")
    for w, f in model.rates:
        lines.append(f"jump {w:+d}: {f.to_source()}")
    return "\n".join(lines) + "\n"
