"""Jump models, state normalization and result containers."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping

import numpy as np

from .errors import ModelError, ValidationError
from .rates import Rate, ShiftedRate

_VALIDATION_SPAN = 200  # states scanned for non-negativity at construction


@dataclass(frozen=True)
class JumpModel:
    """One-dimensional CTMC given by a finite jump set and rate functions.

    The state space is the lattice ``state_min + omega_star * N0``; rates are
    zero off that lattice and below ``state_min``. ``absorbing`` is a closed
    set of states (possibly empty).
    """

    rates: tuple[tuple[int, Rate], ...]
    state_min: int = 0
    absorbing: tuple[int, ...] = ()

    def __post_init__(self):
        items = self.rates.items() if isinstance(self.rates, Mapping) else self.rates
        pairs = sorted(((int(w), f) for w, f in items), key=lambda t: t[0])
        object.__setattr__(self, "rates", tuple(pairs))
        object.__setattr__(self, "absorbing", tuple(sorted({int(a) for a in self.absorbing})))
        object.__setattr__(self, "state_min", int(self.state_min))
        self._validate()

    # -- construction --------------------------------------------------

    @staticmethod
    def from_dict(rates: Mapping[int, Rate], state_min: int = 0, absorbing: Iterable[int] = ()) -> "JumpModel":
        return JumpModel(tuple(rates.items()), state_min, tuple(absorbing))

    def _validate(self) -> None:
        if not self.rates:
            raise ValidationError("jump set is empty")
        seen = set()
        for w, f in self.rates:
            if w == 0:
                raise ValidationError("jump 0 is not allowed")
            if w in seen:
                raise ValidationError(f"jump {w} declared twice")
            seen.add(w)
            if not isinstance(f, Rate):
                raise ValidationError(f"rate for jump {w} is not a Rate")
            try:
                f.aplh()
            except ValidationError as exc:
                raise ValidationError(f"jump {w}: {exc}") from None
        if self.state_min < 0:
            raise ValidationError("state_min must be non-negative")
        ws = self.omega_star
        for a in self.absorbing:
            if not self.in_space(a):
                raise ValidationError(f"absorbing state {a} is not in the state space")
        # values must be non-negative on a scan window
        top = self.state_min + ws * _VALIDATION_SPAN
        for w, f in self.rates:
            hi = max(top, (f.valid_from or 0) + 2 * ws)
            f.evaluate_many(np.arange(self.state_min, hi + 1, ws))
        for w, f in self.rates:
            if w >= 0:
                continue
            for x in range(self.state_min, self.state_min - w, ws):
                if f(x) > 0:
                    raise ValidationError(
                        f"jump {w} has positive rate at x={x} but leads below state_min={self.state_min}"
                    )
        absorbing = set(self.absorbing)
        for a in self.absorbing:
            for w, f in self.rates:
                if f(a) > 0 and (a + w) not in absorbing:
                    raise ValidationError(f"absorbing set is not closed: jump {w} leaves state {a}")

    # -- structure ------------------------------------------------------

    @property
    def jumps(self) -> tuple[int, ...]:
        return tuple(w for w, _ in self.rates)

    @property
    def forward(self) -> tuple[int, ...]:
        return tuple(w for w in self.jumps if w > 0)

    @property
    def backward(self) -> tuple[int, ...]:
        return tuple(w for w in self.jumps if w < 0)

    @property
    def omega_star(self) -> int:
        return reduce(math.gcd, (abs(w) for w in self.jumps))

    @property
    def two_sided(self) -> bool:
        return bool(self.forward) and bool(self.backward)

    @property
    def is_bdp(self) -> bool:
        return set(self.jumps) == {-1, 1}

    def rate(self, w: int) -> Rate:
        for ww, f in self.rates:
            if ww == w:
                return f
        raise KeyError(w)

    def in_space(self, x: int) -> bool:
        return x >= self.state_min and (x - self.state_min) % self.omega_star == 0

    def rate_at(self, w: int, x: int) -> float:
        if not self.in_space(x):
            return 0.0
        return self.rate(w)(x)

    def rates_at(self, x: int) -> np.ndarray:
        """Rates of all jumps (in ``jumps`` order) at state ``x``."""
        if not self.in_space(x):
            return np.zeros(len(self.rates))
        return np.array([f(x) for _, f in self.rates])

    def rate_table(self, xs) -> np.ndarray:
        """Matrix ``[len(jumps), len(xs)]`` of rates; zero off the state space."""
        xs = np.asarray(xs, dtype=np.int64)
        ok = (xs >= self.state_min) & ((xs - self.state_min) % self.omega_star == 0)
        out = np.zeros((len(self.rates), xs.size))
        for i, (_, f) in enumerate(self.rates):
            if np.any(ok):
                out[i, ok] = f.evaluate_many(xs[ok])
        return out

    def total_rate(self, x: int) -> float:
        return float(self.rates_at(x).sum())


@dataclass(frozen=True)
class AffineMap:
    """``y = scale * x + shift`` between normalized and original states."""

    scale: int
    shift: int

    def to_original(self, x):
        return self.scale * np.asarray(x) + self.shift if not isinstance(x, int) else self.scale * x + self.shift

    def to_normalized(self, y):
        if isinstance(y, int):
            if (y - self.shift) % self.scale:
                raise ModelError(f"state {y} is off the lattice")
            return (y - self.shift) // self.scale
        return (np.asarray(y) - self.shift) // self.scale


def normalize(model: JumpModel) -> tuple[JumpModel, AffineMap]:
    """Map the state space to ``N0`` with unit jump gcd.

    Rates of the result evaluate the original rates at the mapped states, so
    values agree exactly; their expansions are re-derived for the shifted
    argument.
    """
    ws, n = model.omega_star, model.state_min
    amap = AffineMap(ws, n)
    if ws == 1 and n == 0:
        return model, amap
    rates = tuple((w // ws, ShiftedRate(f, ws, n)) for w, f in model.rates)
    absorbing = tuple((a - n) // ws for a in model.absorbing)
    return JumpModel(rates, 0, absorbing), amap


# ---------------------------------------------------------------------------
# classification results
# ---------------------------------------------------------------------------


class Regime(str, enum.Enum):
    NoUnboundedStationary = "NoUnboundedStationary"
    CMPLike = "CMPLike"
    Exponential = "Exponential"
    StretchedExponential = "StretchedExponential"
    PowerLaw = "PowerLaw"
    LowerBoundOnly = "LowerBoundOnly"
    GapIndeterminate = "GapIndeterminate"
    NoQSDPossible = "NoQSDPossible"


FAMILY_CMP = "x log x"
FAMILY_STRETCHED = "x^a"
FAMILY_POWER = "log x"
FAMILIES = (FAMILY_CMP, FAMILY_STRETCHED, FAMILY_POWER)


@dataclass(frozen=True)
class DecayBound:
    """Tail bound ``T(x) ~ exp(-b * g(x))`` with ``g`` from ``family``.

    * ``x log x``: ``g = a x log x`` (Conway-Maxwell-Poisson-like),
    * ``x^a``: ``g = x**a`` (exponential when ``a == 1``),
    * ``log x``: ``g = a log x`` (power law ``x**-a``).

    ``a`` may be ``None`` when only the family is known; ``b`` is an optional
    coefficient.
    """

    family: str
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown decay family {self.family!r}")

    def to_json(self) -> dict:
        out = {"family": self.family, "a": _json_num(self.a)}
        if self.b is not None:
            out["b"] = _json_num(self.b)
        return out


@dataclass(frozen=True)
class TailClassification:
    regime: Regime
    lower: DecayBound | None = None
    upper: DecayBound | None = None
    clauses: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.regime not in (Regime.GapIndeterminate, Regime.NoUnboundedStationary, Regime.NoQSDPossible):
            if self.lower is None and self.upper is None:
                raise ValueError(f"regime {self.regime.value} requires a bound")

    def to_json(self) -> dict:
        return {
            "regime": self.regime.value,
            "lower": self.lower.to_json() if self.lower else None,
            "upper": self.upper.to_json() if self.upper else None,
            "clauses": list(self.clauses),
            "warnings": list(self.warnings),
            "notes": list(self.notes),
        }


def _json_num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


# ---------------------------------------------------------------------------
# distributions on a window
# ---------------------------------------------------------------------------


@dataclass
class DistVector:
    """Probabilities on ``offset, offset+step, ..., truncation``.

    ``mass_defect`` estimates probability outside the window. ``tail_values``
    optionally carries exact tails ``T(x) = sum_{y >= x} p(y)`` (otherwise
    tails are window sums). ``log_values`` optionally carries log
    probabilities for tails that underflow.
    """

    offset: int
    values: np.ndarray
    truncation: int
    mass_defect: float = 0.0
    kind: str = "stationary"
    theta: float | None = None
    step: int = 1
    tail_values: np.ndarray | None = None
    log_values: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in ("stationary", "qsd"):
            raise ValueError("kind must be 'stationary' or 'qsd'")
        expected = self.offset + self.step * (len(self.values) - 1)
        if expected != self.truncation:
            raise ValueError(f"truncation {self.truncation} inconsistent with window end {expected}")
        if self.tail_values is not None:
            self.tail_values = np.asarray(self.tail_values, dtype=float)
            if self.tail_values.shape != self.values.shape:
                raise ValueError("tail_values must match values")

    @property
    def states(self) -> np.ndarray:
        return self.offset + self.step * np.arange(len(self.values))

    def index(self, x: int) -> int | None:
        k, r = divmod(x - self.offset, self.step)
        if r or k < 0 or k >= len(self.values):
            return None
        return k

    def prob(self, x: int) -> float:
        k = self.index(x)
        return 0.0 if k is None else float(self.values[k])

    def tail(self) -> np.ndarray:
        if self.tail_values is not None:
            return self.tail_values
        return np.cumsum(self.values[::-1])[::-1]

    def tail_at(self, x: int) -> float:
        """``T(x)``; below the window this is ``T(offset)``, past it 0 or exact."""
        t = self.tail()
        if x <= self.offset:
            return float(t[0])
        k = -(-(x - self.offset) // self.step)
        if k < len(t):
            return float(t[k])
        if k == len(t) and self.tail_values is not None:
            return float(t[-1] - self.values[-1])
        if self.tail_values is not None:
            raise IndexError(f"tail at {x} is beyond the window")
        return 0.0

    def log_tail(self) -> np.ndarray:
        if self.log_values is not None:
            rev = np.logaddexp.accumulate(self.log_values[::-1])[::-1]
            return rev
        with np.errstate(divide="ignore"):
            return np.log(self.tail())

    def total_variation(self, other: "DistVector") -> float:
        lo = min(self.offset, other.offset)
        hi = max(self.truncation, other.truncation)
        step = math.gcd(self.step, other.step)
        xs = range(lo, hi + 1, step)
        return 0.5 * math.fsum(abs(self.prob(x) - other.prob(x)) for x in xs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "p(x)", "T(x)"])
        for x, p, t in zip(self.states, self.values, self.tail()):
            w.writerow([int(x), repr(float(p)), repr(float(t))])
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, kind: str = "stationary", theta: float | None = None) -> "DistVector":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]][:2] != ["x", "p(x)"]:
            raise ValueError("CSV must start with header x,p(x)[,T(x)]")
        rows = [r for r in rows[1:] if r]
        xs = [int(r[0]) for r in rows]
        ps = [float(r[1]) for r in rows]
        ts = [float(r[2]) for r in rows] if rows and len(rows[0]) > 2 else None
        if not xs:
            raise ValueError("empty distribution")
        step = xs[1] - xs[0] if len(xs) > 1 else 1
        if step <= 0 or any(b - a != step for a, b in zip(xs, xs[1:])):
            raise ValueError("states must be equally spaced and increasing")
        return DistVector(xs[0], np.array(ps), xs[-1], kind=kind, theta=theta, step=step,
                          tail_values=np.array(ts) if ts is not None else None)
