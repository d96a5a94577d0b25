"""Numerical stationary and quasi-stationary distributions.

All solvers work on the normalized model (states ``0..N``, unit jump gcd) and
return a :class:`~ctmctails.model.DistVector` in original coordinates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import stats
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln, zeta

from .asymptotics import compute_params, jump_structure
from .errors import (
    EmptyAbsorbingSet,
    InvalidTruncation,
    NegativeMass,
    NonConvergence,
    ParameterDomain,
    SeedDimension,
    SingularSystem,
    SolverError,
    ThetaMismatch,
    ZeroPivot,
    ZeroRateInProduct,
)
from .model import DistVector, JumpModel, normalize
from .rates import Rate

_EPS = np.finfo(float).eps
STATIONARY_METHODS = ("truncated_linear", "recursive", "bdp_closed_form")
QSD_METHODS = ("inverse_iteration", "power_iteration")
METHODS = STATIONARY_METHODS + QSD_METHODS


class TruncationWarning(UserWarning):
    """The truncation boundary measurably biases a result."""


@dataclass(frozen=True)
class SolverConfig:
    N: int = 1000
    tolerance: float = 1e-10
    max_iterations: int = 10_000
    method: str = "truncated_linear"
    strict_theta: bool = True

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidTruncation(f"truncation N must be a positive integer, got {self.N!r}")
        if not self.tolerance > 0:
            raise SolverError("tolerance must be positive")
        if self.max_iterations < 1:
            raise SolverError("max_iterations must be positive")
        if self.method not in METHODS:
            raise SolverError(f"unknown method {self.method!r}; choose from {METHODS}")


def _check_N(nm: JumpModel, N: int) -> None:
    js = jump_structure(nm)
    need = js.omega_plus - js.omega_minus + 2
    if N < need:
        raise InvalidTruncation(f"N={N} too small; need at least omega_plus - omega_minus + 2 = {need}")


def _to_original(model: JumpModel, values: np.ndarray, **kw) -> DistVector:
    ws, n = model.omega_star, model.state_min
    N = len(values) - 1
    return DistVector(n, values, n + ws * N, step=ws, **kw)


# ---------------------------------------------------------------------------
# truncated linear solve (GTH state reduction on a band)
# ---------------------------------------------------------------------------


def _band_rates(nm: JumpModel, N: int):
    """Off-diagonal rates of the augmented truncation as a band matrix.

    ``P[i, d]`` is the rate from ``i`` to ``i + d - bl``; jumps past ``N``
    are redirected to ``N``.
    """
    jumps = nm.jumps
    bl = max([-w for w in jumps if w < 0], default=0)
    bu = max([w for w in jumps if w > 0], default=0)
    xs = np.arange(N + 1)
    table = nm.rate_table(xs)
    P = np.zeros((N + 1, bl + bu + 1))
    for k, w in enumerate(jumps):
        tgt = np.minimum(xs + w, N)
        keep = (tgt >= 0) & (tgt != xs)
        d = tgt[keep] - xs[keep] + bl
        np.add.at(P, (xs[keep], d), table[k, keep])
    return P, bl, bu


def _closed_classes(P: np.ndarray, bl: int) -> list[np.ndarray]:
    n = P.shape[0]
    rows, ds = np.nonzero(P > 0)
    cols = rows + ds - bl
    adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    closed = []
    for c in range(ncomp):
        members = np.nonzero(labels == c)[0]
        out = cols[np.isin(rows, members)]
        if np.all(labels[out] == c):
            closed.append(members)
    return closed


def _gth_band(P: np.ndarray, bl: int, bu: int) -> np.ndarray:
    """Stationary vector of the chain with band off-diagonal rates ``P``."""
    P = P.copy()
    n = P.shape[0]
    s = np.zeros(n)
    for k in range(n - 1, 0, -1):
        jlo = max(0, k - bl)
        # row k -> lower states j in [jlo, k-1]
        low = P[k, jlo - k + bl: bl]
        sk = math.fsum(low)
        if not sk > 0:
            raise SingularSystem(f"state {k} cannot reach lower states in the truncated chain")
        s[k] = sk
        ilo = max(0, k - bu)
        for i in range(ilo, k):
            pik = P[i, k - i + bl]
            if pik == 0.0:
                continue
            f = pik / sk
            # P[i, j] += f * P[k, j] for j in [jlo, k-1]
            d0 = jlo - i + bl
            P[i, d0: d0 + (k - jlo)] += f * low
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        ilo = max(0, k - bu)
        acc = 0.0
        for i in range(ilo, k):
            acc += pi[i] * P[i, k - i + bl]
        # fill beyond the original band never reaches below k - bu
        pi[k] = acc / s[k]
    return pi


def solve_stationary_truncated(model: JumpModel, cfg: SolverConfig | None = None) -> DistVector:
    """Stationary distribution of the augmented truncation on ``N + 1`` states."""
    cfg = cfg or SolverConfig()
    if model.absorbing:
        raise SolverError("stationary solve requires an empty absorbing set; use solve_qsd")
    if not model.two_sided:
        raise SolverError("stationary solve requires forward and backward jumps")
    nm, _ = normalize(model)
    N = int(cfg.N)
    _check_N(nm, N)
    P, bl, bu = _band_rates(nm, N)
    closed = _closed_classes(P, bl)
    if len(closed) != 1:
        raise SingularSystem(f"truncated chain has {len(closed)} closed classes; stationary law is not unique")
    C = closed[0]
    pi = np.zeros(N + 1)
    if C[-1] == N and np.all(np.diff(C) == 1):
        lo = int(C[0])
        # band offsets are row-relative, so the suffix is again a band
        pi[lo:] = _gth_band(P[lo:], bl, bu)
    else:
        pi[C] = _dense_gth(P, bl, C)
    total = math.fsum(pi)
    if not (total > 0 and math.isfinite(total)):
        raise SingularSystem("stationary vector could not be normalized")
    pi = pi / total
    defect = _tail_mass_estimate(model, pi)
    return _to_original(model, pi, mass_defect=defect, kind="stationary",
                        info={"method": "truncated_linear", "closed_class": [int(C[0]), int(C[-1])]})


def _dense_gth(P: np.ndarray, bl: int, C: np.ndarray) -> np.ndarray:
    idx = {int(c): i for i, c in enumerate(C)}
    M = np.zeros((C.size, C.size))
    rows, ds = np.nonzero(P > 0)
    for r, d in zip(rows, ds):
        c = r + d - bl
        if int(r) in idx and int(c) in idx:
            M[idx[int(r)], idx[int(c)]] += P[r, d]
    m = C.size
    for k in range(m - 1, 0, -1):
        sk = M[k, :k].sum()
        if not sk > 0:
            raise SingularSystem("reducible closed class")
        M[:k, :k] += np.outer(M[:k, k] / sk, M[k, :k])
        M[k, k] = sk
    pi = np.zeros(m)
    pi[0] = 1.0
    for k in range(1, m):
        pi[k] = pi[:k] @ M[:k, k] / M[k, k]
    return pi


def _tail_mass_estimate(model: JumpModel, values: np.ndarray) -> float:
    """Predicted probability beyond the window, from the tail class."""
    v = values
    if v.size < 4 or v[-2] <= 0:
        return 0.0
    try:
        from .classifier import classify_stationary

        cls = classify_stationary(compute_params(model))
        if cls.upper is not None and cls.upper.family == "log x" and cls.upper.a and cls.upper.a > 0:
            N = v.size - 1
            return float(v[-2] * (N - 1) / cls.upper.a)
    except Exception:  # estimate only; fall back to geometric extrapolation
        pass
    r = v[-2] / v[-3] if v[-3] > 0 else 0.0
    if not 0 < r < 1:
        return float(v[-1])
    return float(v[-2] * r / (1 - r))


# ---------------------------------------------------------------------------
# recursion from the level-crossing identity
# ---------------------------------------------------------------------------


def _group_rates(nm: JumpModel, xs: np.ndarray) -> dict[int, np.ndarray]:
    """``a_j(x) = sum_{w in A_j} lambda_w(x)`` for every ``j`` with non-empty ``A_j``."""
    js = jump_structure(nm)
    table = nm.rate_table(xs)
    idx = {w: k for k, w in enumerate(nm.jumps)}
    out = {}
    for j, Aj in js.A.items():
        if Aj:
            out[j] = sum(table[idx[w]] for w in Aj)
    return out


def solve_stationary_recursive(model: JumpModel, seeds=None, cfg: SolverConfig | None = None) -> DistVector:
    """Stationary distribution from the level-crossing identity.

    Each step solves for the highest-index unknown. ``seeds`` are the
    (unnormalized) probabilities of the lowest ``-omega_minus`` normalized
    states; by default they are taken from the truncated linear solve. Values
    are set to zero once rounding dominates them (recorded in
    ``info['resolved_until']``).
    """
    cfg = cfg or SolverConfig()
    if model.absorbing:
        raise SolverError("stationary solve requires an empty absorbing set")
    if not model.two_sided:
        raise SolverError("stationary solve requires forward and backward jumps")
    nm, _ = normalize(model)
    N = int(cfg.N)
    _check_N(nm, N)
    js = jump_structure(nm)
    wp, wm = js.omega_plus, js.omega_minus
    m = -wm
    if seeds is None:
        base = solve_stationary_truncated(model, cfg)
        seeds = base.values[:m]
    seeds = np.asarray(seeds, dtype=float).ravel()
    if seeds.size != m:
        raise SeedDimension(f"expected {m} seeds (one per state 0..{m - 1}), got {seeds.size}")
    if np.any(seeds < 0) or not np.any(seeds > 0):
        raise SeedDimension("seeds must be non-negative and not all zero")
    xs = np.arange(N + wp + 2)
    a = _group_rates(nm, xs)
    pi = np.zeros(N + 1)
    err = np.zeros(N + 1)
    pi[:m] = seeds
    err[:m] = 4 * _EPS * np.abs(seeds)
    pivot_j = wm + 1
    resolved = N
    for x in range(1, N - m + 2):
        t = x + m - 1
        piv = a[pivot_j][t]
        if piv == 0:
            raise ZeroPivot(model.state_min + model.omega_star * t)
        terms = []
        eterm = 0.0
        for j in range(1, wp + 1):
            y = x - j
            if y >= 0 and a[j][y] != 0:
                terms.append(pi[y] * a[j][y])
                eterm += err[y] * a[j][y]
        for j in range(wm + 2, 1):
            y = x - j
            if a[j][y] != 0:
                terms.append(-pi[y] * a[j][y])
                eterm += err[y] * a[j][y]
        val = math.fsum(terms) / piv
        e = (eterm + 2 * _EPS * sum(abs(v) for v in terms)) / piv + _EPS * abs(val)
        if abs(val) <= 8 * e:
            resolved = t - 1
            break
        if val < 0:
            raise NegativeMass(model.state_min + model.omega_star * t, val)
        pi[t] = val
        err[t] = e
    if resolved < N:
        pi[resolved + 1:] = 0.0
    total = math.fsum(pi)
    pi = pi / total
    res = _identity_residual(nm, pi[: resolved + 1])
    return _to_original(model, pi, mass_defect=_tail_mass_estimate(model, pi), kind="stationary",
                        info={"method": "recursive", "resolved_until": model.state_min + model.omega_star * resolved,
                              "max_residual": res})


def _identity_residual(nm: JumpModel, pi: np.ndarray) -> float:
    js = jump_structure(nm)
    wp, wm = js.omega_plus, js.omega_minus
    N = pi.size - 1
    a = _group_rates(nm, np.arange(N + wp + 2))
    sides = []
    for x in range(0, N + wm + 2):
        lhs = math.fsum(pi[x - j] * a[j][x - j] for j in range(wm + 1, 1) if 0 <= x - j <= N)
        rhs = math.fsum(pi[x - j] * a[j][x - j] for j in range(1, wp + 1) if 0 <= x - j <= N)
        sides.append((lhs, rhs))
    if not sides:
        return 0.0
    floor = max(_EPS * max(max(l, r) for l, r in sides), np.finfo(float).tiny)
    return max(abs(l - r) / max(l, r, floor) for l, r in sides)


# ---------------------------------------------------------------------------
# birth-death closed form
# ---------------------------------------------------------------------------


def bdp_stationary(birth: Rate, death: Rate, cfg: SolverConfig | None = None) -> DistVector:
    """``pi(j) = pi(0) prod_{i<j} b(i)/d(i+1)`` on ``0..N``, normalized in log space."""
    cfg = cfg or SolverConfig()
    N = int(cfg.N)
    b = birth.evaluate_many(np.arange(0, N))
    d = death.evaluate_many(np.arange(1, N + 1))
    bad = np.nonzero((b <= 0) | (d <= 0))[0]
    if bad.size:
        j = int(bad[0]) + 1
        raise ZeroRateInProduct(f"birth rate at {j - 1} or death rate at {j} vanishes")
    logp = np.concatenate([[0.0], np.cumsum(np.log(b) - np.log(d))])
    lz = np.logaddexp.reduce(logp)
    logp = logp - lz
    vals = np.exp(logp)
    return DistVector(0, vals, N, kind="stationary", log_values=logp,
                      mass_defect=0.0, info={"method": "bdp_closed_form"})


def bdp_stationary_model(model: JumpModel, cfg: SolverConfig | None = None) -> DistVector:
    nm, _ = normalize(model)
    if not nm.is_bdp:
        raise SolverError("bdp_closed_form needs jumps {-1, +1} after normalization")
    if model.absorbing:
        raise SolverError("stationary solve requires an empty absorbing set")
    d = bdp_stationary(nm.rate(1), nm.rate(-1), cfg)
    return _to_original(model, d.values, kind="stationary", log_values=d.log_values,
                        mass_defect=_tail_mass_estimate(model, d.values), info=d.info)


def solve_stationary(model: JumpModel, cfg: SolverConfig | None = None, seeds=None) -> DistVector:
    cfg = cfg or SolverConfig()
    if cfg.method == "recursive":
        return solve_stationary_recursive(model, seeds, cfg)
    if cfg.method == "bdp_closed_form":
        return bdp_stationary_model(model, cfg)
    return solve_stationary_truncated(model, cfg)


# ---------------------------------------------------------------------------
# quasi-stationary distribution
# ---------------------------------------------------------------------------


def _subgenerator(nm: JumpModel, N: int):
    absorbing = set(nm.absorbing)
    states = np.array([x for x in range(N + 1) if x not in absorbing])
    pos = -np.ones(N + 1, dtype=np.int64)
    pos[states] = np.arange(states.size)
    table = nm.rate_table(states)
    rows, cols, vals = [], [], []
    out_total = table.sum(axis=0)
    leak = np.zeros(states.size)
    for k, w in enumerate(nm.jumps):
        tgt = states + w
        inside = (tgt >= 0) & (tgt <= N)
        tpos = np.where(inside, pos[np.clip(tgt, 0, N)], -1)
        keep = tpos >= 0
        rows.append(np.nonzero(keep)[0])
        cols.append(tpos[keep])
        vals.append(table[k, keep])
        leak += np.where(tgt > N, table[k], 0.0)
    n = states.size
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(-out_total)
    Q = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return states, Q, leak, out_total


def solve_qsd(model: JumpModel, cfg: SolverConfig | None = None) -> DistVector:
    """Quasi-stationary distribution of the truncated sub-generator.

    Transitions past ``N`` are dropped (killed). ``theta`` is minus the
    principal eigenvalue. ``info`` records the absorption-flux value of theta
    and the boundary outflow; ``mass_defect`` is the share of theta caused by
    killing at ``N``. With ``cfg.strict_theta`` a discrepancy above
    ``100 * tolerance`` between eigenvalue and absorption flux raises
    :class:`ThetaMismatch`.
    """
    cfg = cfg or SolverConfig(N=4000)
    if not model.absorbing:
        raise EmptyAbsorbingSet("QSD requires a non-empty absorbing set")
    nm, _ = normalize(model)
    N = int(cfg.N)
    _check_N(nm, N)
    states, Q, leak_rates, out_total = _subgenerator(nm, N)
    A = (-Q).T.tocsc()
    method = "power_iteration" if cfg.method == "power_iteration" else "inverse_iteration"
    if method == "inverse_iteration":
        try:
            nu, theta = _inverse_iteration(A, cfg)
        except (RuntimeError, SingularSystem):
            method = "power_iteration"
    if method == "power_iteration":
        nu, theta = _power_iteration(Q, out_total, cfg)
    full = np.zeros(N + 1)
    full[states] = nu
    lo = int(states[0])
    vals = full[lo:]
    dist = DistVector(model.state_min + model.omega_star * lo, vals, model.state_min + model.omega_star * N,
                      kind="qsd", theta=theta, step=model.omega_star)
    from .analysis import theta_from_dist

    theta_abs = theta_from_dist(model, dist)
    leak = float(nu @ leak_rates)
    consistency = abs(theta - theta_abs - leak)
    scale = max(1.0, theta)
    if consistency > 100 * cfg.tolerance * scale + 1e3 * _EPS * scale:
        raise ThetaMismatch(f"eigenvalue theta={theta!r} inconsistent with absorption {theta_abs!r} + leak {leak!r}")
    if abs(theta - theta_abs) > 100 * cfg.tolerance * scale:
        msg = (f"truncation N={N} biases theta: eigenvalue {theta:.12g} vs absorption formula {theta_abs:.12g} "
               f"(boundary outflow {leak:.3e})")
        if cfg.strict_theta:
            raise ThetaMismatch(msg)
        warnings.warn(msg, TruncationWarning, stacklevel=2)
    # killing at N inflates theta; the relative share is the reported defect
    dist.mass_defect = leak / theta if theta > 0 else 0.0
    dist.info = {"method": method, "theta_absorption": theta_abs, "boundary_outflow": leak,
                 "killed_at_boundary": True, "tail_beyond_N": _qsd_tail_estimate(vals)}
    return dist


def qsd_from_theta(model: JumpModel, theta: float, cfg: SolverConfig | None = None) -> DistVector:
    """QSD with a prescribed absorption rate, for downward skip-free models.

    The absorption flux fixes the mass of the state just above the absorbing
    state; the grouped balance with its ``theta * T(x)`` term then determines
    the rest one state at a time. Unlike :func:`solve_qsd`, this can reach
    non-minimal QSDs (which truncation never selects).
    """
    cfg = cfg or SolverConfig(N=4000)
    if not model.absorbing:
        raise EmptyAbsorbingSet("QSD requires a non-empty absorbing set")
    if not theta > 0:
        raise ParameterDomain("theta must be positive")
    nm, _ = normalize(model)
    js = jump_structure(nm)
    if js.omega_minus != -1 or sorted(nm.absorbing) != [0]:
        raise SolverError("qsd_from_theta needs backward jumps of one lattice step and absorbing set {lowest state}")
    N = int(cfg.N)
    _check_N(nm, N)
    a = _group_rates(nm, np.arange(N + js.omega_plus + 2))
    nu = np.zeros(N + 1)
    d1 = a[0][1]
    if d1 <= 0:
        raise ZeroPivot(model.state_min + model.omega_star)
    nu[1] = theta / d1
    below = [nu[1]]
    for x in range(2, N + 1):
        piv = a[0][x]
        if piv == 0:
            raise ZeroPivot(model.state_min + model.omega_star * x)
        tail = 1.0 - math.fsum(below)
        terms = [nu[x - j] * a[j][x - j] for j in range(1, js.omega_plus + 1) if x - j >= 1]
        val = (math.fsum(terms) + theta * tail) / piv
        if val < 0 or tail < 0:
            raise NegativeMass(model.state_min + model.omega_star * x, val)
        nu[x] = val
        below.append(val)
    vals = nu[1:]
    return DistVector(model.state_min + model.omega_star, vals, model.state_min + model.omega_star * N,
                      mass_defect=max(0.0, 1.0 - math.fsum(vals)), kind="qsd", theta=float(theta),
                      step=model.omega_star, info={"method": "qsd_from_theta"})


def _qsd_tail_estimate(v: np.ndarray) -> float:
    if v.size < 4 or v[-3] <= 0:
        return 0.0
    r = v[-2] / v[-3]
    if not 0 < r < 1:
        return float(v[-1])
    return float(v[-1] * r / (1 - r))


def _collatz(A, v):
    Av = A @ v
    mask = v > 0
    ratio = Av[mask] / v[mask]
    return float(ratio.min()), float(ratio.max())


def _rel_change(v_new, v_old) -> float:
    """Largest componentwise relative change over entries above the rounding floor."""
    big = v_new > np.finfo(float).tiny / _EPS
    if not big.any():
        return math.inf
    return float((np.abs(v_new - v_old)[big] / v_new[big]).max())


def _inverse_iteration(A, cfg: SolverConfig):
    n = A.shape[0]
    v = np.full(n, 1.0 / n)
    shift = 0.0
    eye = sp.identity(n, format="csc")
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from None
    theta_prev = None
    for it in range(cfg.max_iterations):
        y = lu.solve(v)
        if not np.all(np.isfinite(y)):
            raise SingularSystem("non-finite iterate in inverse iteration")
        y = np.maximum(y, 0.0)
        s = y.sum()
        if not s > 0:
            raise SingularSystem("inverse iteration collapsed")
        v_new = y / s
        theta = shift + 1.0 / s
        dv = _rel_change(v_new, v)
        v = v_new
        if theta_prev is not None and dv <= cfg.tolerance and abs(theta - theta_prev) <= cfg.tolerance * theta:
            return v, theta
        theta_prev = theta
        # move the shift up to a Collatz-Wielandt lower bound; A - shift I stays a nonsingular M-matrix
        if it % 3 == 2:
            lo, _ = _collatz(A, v)
            new_shift = (1 - 1e-4) * lo
            if lo > 0 and new_shift > shift * (1 + 1e-6):
                shift = new_shift
                lu = spla.splu((A - shift * eye).tocsc())
    raise NonConvergence(f"inverse iteration did not converge in {cfg.max_iterations} iterations")


def _power_iteration(Q, out_total, cfg: SolverConfig):
    n = Q.shape[0]
    h = 0.5 / max(float(out_total.max()), 1e-300)
    M = (sp.identity(n, format="csr") + h * Q.tocsr()).T.tocsr()
    v = np.full(n, 1.0 / n)
    for _ in range(cfg.max_iterations):
        y = M @ v
        s = y.sum()
        v_new = y / s
        if _rel_change(v_new, v) <= cfg.tolerance * h:
            theta = (1.0 - s) / h
            return v_new, theta
        v = v_new
    raise NonConvergence(f"power iteration did not converge in {cfg.max_iterations} iterations")


# ---------------------------------------------------------------------------
# reference distributions
# ---------------------------------------------------------------------------


def _ref(offset: int, logp: np.ndarray, logtail: np.ndarray, mass_beyond: float, kind="stationary") -> DistVector:
    return DistVector(offset, np.exp(logp), offset + logp.size - 1, mass_defect=float(mass_beyond), kind=kind,
                      tail_values=np.exp(logtail), log_values=logp)


def reference_dist(kind: str, N: int, **params) -> DistVector:
    """Closed-form distributions on a window ending at ``N``.

    ``values`` are exact probabilities, ``mass_defect`` the exact mass beyond
    ``N`` and ``tail_values`` exact tails.

    * ``cmp`` (``a``, ``b``): ``a**x / (x!)**b / Z`` on ``0..N``
    * ``zeta`` (``a``): ``x**-a / zeta(a)`` on ``1..N``
    * ``geometric`` (``p``): ``p**(x-1) (1-p)`` on ``1..N``
    * ``poisson`` (``lam``) on ``0..N``
    * ``negative_binomial`` (``a``, ``delta``):
      ``Gamma(x+a)/(Gamma(x+1)Gamma(a)) delta**x (1-delta)**a`` on ``0..N``
    """
    N = int(N)
    if kind == "cmp":
        a, b = float(params["a"]), float(params["b"])
        if not (a > 0 and b > 0):
            raise ParameterDomain("cmp needs a > 0 and b > 0")
        M = N + 1
        while True:
            xs = np.arange(M + 1)
            logq = xs * math.log(a) - b * gammaln(xs + 1)
            if M > N and logq[-1] < logq.max() - 800 and np.all(np.diff(logq[N:]) < 0):
                break
            M *= 2
        lz = np.logaddexp.reduce(logq)
        logp = logq - lz
        logtail_all = np.logaddexp.accumulate(logp[::-1])[::-1]
        beyond = float(np.exp(logtail_all[N + 1]))
        return _ref(0, logp[: N + 1], logtail_all[: N + 1], beyond)
    if kind == "zeta":
        a = float(params["a"])
        if not a > 1:
            raise ParameterDomain("zeta needs a > 1")
        xs = np.arange(1, N + 1, dtype=float)
        z = zeta(a)
        logp = -a * np.log(xs) - math.log(z)
        tail = zeta(a, xs) / z
        return _ref(1, logp, np.log(tail), zeta(a, N + 1) / z)
    if kind == "geometric":
        p = float(params["p"])
        if not 0 < p < 1:
            raise ParameterDomain("geometric needs 0 < p < 1")
        xs = np.arange(1, N + 1, dtype=float)
        logp = (xs - 1) * math.log(p) + math.log1p(-p)
        return _ref(1, logp, (xs - 1) * math.log(p), p ** N)
    if kind == "poisson":
        lam = float(params["lam"])
        if not lam > 0:
            raise ParameterDomain("poisson needs lam > 0")
        xs = np.arange(N + 1)
        logp = stats.poisson.logpmf(xs, lam)
        logtail = stats.poisson.logsf(xs - 1, lam)
        return _ref(0, logp, logtail, stats.poisson.sf(N, lam))
    if kind == "negative_binomial":
        a, d = float(params["a"]), float(params["delta"])
        if not (a > 0 and 0 < d < 1):
            raise ParameterDomain("negative_binomial needs a > 0 and 0 < delta < 1")
        xs = np.arange(N + 1)
        logp = stats.nbinom.logpmf(xs, a, 1 - d)
        logtail = stats.nbinom.logsf(xs - 1, a, 1 - d)
        return _ref(0, logp, logtail, stats.nbinom.sf(N, a, 1 - d))
    raise ParameterDomain(f"unknown reference family {kind!r}")
