"""Gillespie simulation for cross-checking solver output.

Randomness comes from NumPy's PCG64 bit generator. A master seed feeds a
``numpy.random.SeedSequence``; replicas use ``SeedSequence.spawn`` children,
so streams are independent and results depend only on (model, arguments,
seed).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyAbsorbingSet, ExplosionGuardTripped, InvalidWindow, NoAbsorptions
from .model import DistVector, JumpModel

MAX_STEPS = 10**8
_BATCH = 8192


@dataclass
class Trajectory:
    """Jump chain with holding times: ``states[i]`` is occupied on ``[times[i], times[i+1])``."""

    times: np.ndarray
    states: np.ndarray
    absorbed: bool
    seed: int | None
    t_end: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=np.int64)
        if self.times.shape != self.states.shape:
            raise ValueError("times and states must have equal length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_jumps(self) -> int:
        return int(self.states.size - 1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x"])
        for t, x in zip(self.times, self.states):
            w.writerow([repr(float(t)), int(x)])
        return buf.getvalue()


class _Kernel:
    """Per-state jump tables, computed once per visited state."""

    def __init__(self, model: JumpModel):
        self.model = model
        self.jumps = np.array(model.jumps, dtype=np.int64)
        self.absorbing = frozenset(model.absorbing)
        self._cache: dict[int, tuple[float, np.ndarray]] = {}

    def at(self, x: int) -> tuple[float, np.ndarray]:
        hit = self._cache.get(x)
        if hit is None:
            r = np.array([self.model.rate(int(w))(x) for w in self.jumps], dtype=float)
            total = float(r.sum())
            cum = np.cumsum(r) / total if total > 0 else r
            hit = (total, cum)
            self._cache[x] = hit
        return hit


class _Uniforms:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.buf = rng.random(_BATCH)
        self.i = 0

    def __call__(self) -> float:
        if self.i == _BATCH:
            self.buf = self.rng.random(_BATCH)
            self.i = 0
        u = self.buf[self.i]
        self.i += 1
        return u


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _streams(seed, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def _step(kern: _Kernel, x: int, unif: _Uniforms):
    """Holding time and next state from ``x`` (``None`` when no jump is possible)."""
    total, cum = kern.at(x)
    if total <= 0:
        return None
    dt = -math.log(1.0 - unif()) / total
    k = int(np.searchsorted(cum, unif(), side="right"))
    k = min(k, cum.size - 1)
    return dt, x + int(kern.jumps[k])


def _check_start(model: JumpModel, x0: int) -> int:
    x0 = int(x0)
    if not model.in_space(x0):
        raise ValueError(f"start state {x0} is not in the state space")
    return x0


def simulate_ssa(model: JumpModel, x0: int, t_end: float, seed: int, max_steps: int = MAX_STEPS) -> Trajectory:
    """Exact path on ``[0, t_end]``, stopped early by absorption."""
    x = _check_start(model, x0)
    kern = _Kernel(model)
    unif = _Uniforms(_rng(seed))
    times, states = [0.0], [x]
    t = 0.0
    steps = 0
    while x not in kern.absorbing:
        nxt = _step(kern, x, unif)
        if nxt is None:
            break
        dt, y = nxt
        if t + dt >= t_end:
            break
        steps += 1
        if steps > max_steps:
            raise ExplosionGuardTripped(f"{max_steps} steps by time {t:.6g} < t_end = {t_end:g}")
        t += dt
        x = y
        times.append(t)
        states.append(x)
    return Trajectory(np.array(times), np.array(states), x in kern.absorbing, seed, float(t_end))


def _to_dist(occ: dict[int, float], step: int, kind: str, theta=None, info=None) -> DistVector:
    xs = sorted(occ)
    lo, hi = xs[0], xs[-1]
    vals = np.zeros((hi - lo) // step + 1)
    for x, w in occ.items():
        vals[(x - lo) // step] += w
    vals /= vals.sum()
    return DistVector(lo, vals, hi, kind=kind, theta=theta, step=step, info=info or {})


def empirical_stationary(model: JumpModel, x0: int, t_end: float, burn_in: float = 0.0, replicas: int = 1,
                         seed: int = 0, max_steps: int = MAX_STEPS) -> DistVector:
    """Time-weighted occupancy on ``[burn_in, t_end]``, pooled over replicas."""
    if not 0 <= burn_in < t_end:
        raise InvalidWindow(f"need 0 <= burn_in < t_end, got burn_in={burn_in}, t_end={t_end}")
    if replicas < 1:
        raise InvalidWindow("replicas must be at least 1")
    x0 = _check_start(model, x0)
    kern = _Kernel(model)
    occ: dict[int, float] = {}
    for rng in _streams(seed, replicas):
        unif = _Uniforms(rng)
        x, t, steps = x0, 0.0, 0
        while t < t_end:
            nxt = _step(kern, x, unif)
            if nxt is None:
                dt, y = t_end - t, x
            else:
                dt, y = nxt
            a, b = max(t, burn_in), min(t + dt, t_end)
            if b > a:
                occ[x] = occ.get(x, 0.0) + (b - a)
            t += dt
            x = y
            steps += 1
            if steps > max_steps and t < t_end:
                raise ExplosionGuardTripped(f"{max_steps} steps by time {t:.6g} < t_end = {t_end:g}")
            if x in kern.absorbing:
                occ[x] = occ.get(x, 0.0) + max(0.0, t_end - max(t, burn_in))
                break
    return _to_dist(occ, model.omega_star, "stationary",
                    info={"method": "ssa", "replicas": replicas, "t_end": t_end, "burn_in": burn_in})


def empirical_qsd(model: JumpModel, x0: int, n_cycles: int, seed: int = 0, burn_in_fraction: float = 0.2,
                  max_steps: int = MAX_STEPS) -> DistVector:
    """Resample-on-absorption estimate of a QSD and its absorption rate.

    On absorption the path restarts from a state drawn from its own
    time-weighted occupancy so far. Occupancy and ``theta`` are recorded
    after the first ``burn_in_fraction * n_cycles`` absorptions; ``theta`` is
    absorptions per unit recorded time.
    """
    if not model.absorbing:
        raise EmptyAbsorbingSet("QSD simulation needs a non-empty absorbing set")
    if n_cycles < 1 or not 0 <= burn_in_fraction < 1:
        raise InvalidWindow("need n_cycles >= 1 and 0 <= burn_in_fraction < 1")
    x = _check_start(model, x0)
    if x in model.absorbing:
        raise InvalidWindow("start state must not be absorbing")
    kern = _Kernel(model)
    rng = _rng(seed)
    unif = _Uniforms(rng)
    history: dict[int, float] = {}
    occ: dict[int, float] = {}
    burn = int(burn_in_fraction * n_cycles)
    absorbed = 0
    rec_time = 0.0
    steps = 0
    while absorbed < n_cycles:
        nxt = _step(kern, x, unif)
        if nxt is None:
            raise NoAbsorptions(f"state {x} has no outgoing jumps and is not absorbing")
        dt, y = nxt
        history[x] = history.get(x, 0.0) + dt
        if absorbed >= burn:
            occ[x] = occ.get(x, 0.0) + dt
            rec_time += dt
        steps += 1
        if steps > max_steps:
            if absorbed == 0:
                raise NoAbsorptions(f"no absorption within {max_steps} steps")
            raise ExplosionGuardTripped(f"{max_steps} steps after {absorbed} absorptions")
        if y in kern.absorbing:
            absorbed += 1
            states = np.fromiter(history.keys(), dtype=np.int64)
            w = np.fromiter(history.values(), dtype=float)
            c = np.cumsum(w)
            k = int(np.searchsorted(c, unif() * c[-1], side="right"))
            x = int(states[min(k, states.size - 1)])
        else:
            x = y
    recorded = n_cycles - burn
    theta = recorded / rec_time
    return _to_dist(occ, model.omega_star, "qsd", theta=theta,
                    info={"method": "resample_on_absorption", "cycles": n_cycles, "recorded_cycles": recorded})
