"""Quantitative bounds on the identity of the leading group.

The offspring mean ``m`` of the comparison branching process is a sum of
products of moment generating functions; the constants ``C1, C2`` are
closed-form; the large-deviation rate ``c_n(r, M)`` is estimated by Monte
Carlo.  Together they bound ``P(Lead in G_n)`` and, combined with the urn
bound, give a lower bound on ``P(Lead = 1)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _kernels as K
from .errors import (ConfigurationError, DivergentScheme, InfeasibleTheta, RejectionStarvation,
                     SpbNotEstablished)
from .urn import estur_series
from .weights import WeightScheme, check_spb, theta_k, _theta_array

__all__ = [
    "BoundInputs",
    "MgfPair",
    "MValue",
    "CnEstimate",
    "LeadBound",
    "mgf_products",
    "compute_m",
    "constants_C",
    "estimate_cn",
    "lead_tail_bound",
    "lead_tail_grid",
    "lead_lower_bound",
]


@dataclass(frozen=True)
class BoundInputs:
    """A group-independent monotone-phase scheme and the bound ``p`` on ``s_n``."""

    scheme: WeightScheme
    p: float
    tol: float = 1e-8

    def __post_init__(self):
        if self.scheme.group_dependent:
            raise ConfigurationError("bounds need a group-independent scheme")
        if not 0 <= self.p < 1:
            raise ConfigurationError("p must lie in [0, 1)")
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive")

    def require_spb(self) -> None:
        if self.scheme.summable(1) is False:
            raise DivergentScheme(f"sum 1/f diverges for {self.scheme}")
        if not check_spb(self.scheme, self.p, k_max=200).holds:
            raise SpbNotEstablished(f"the monopoly conditions are not established for {self.scheme}")

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.to_dict(), "p": self.p, "tol": self.tol}


# --------------------------------------------------------------------------
# moment generating functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MgfPair:
    """``E[exp(theta Y_k)]`` and ``E[exp(-theta Z)]`` with certified log-errors."""

    ey: float
    ez: float
    log_ey: float
    log_ez: float
    log_err_y: float
    log_err_z: float
    terms: int

    def __iter__(self):
        return iter((self.ey, self.ez))


def _inf_beyond(scheme: WeightScheme, k: int) -> float:
    """``inf_{s>k} f(s)``."""
    if scheme.is_monotone():
        return scheme.eval(1, k + 1)
    vals = np.asarray(scheme.values, dtype=float)
    head = vals[k:].min() if k < vals.size else math.inf
    nxt = scheme.eval(1, max(k + 1, vals.size + 1))
    return min(head, nxt) if scheme.gamma is None or scheme.gamma >= 0 else 0.0


_SERIES_ORDER = 4


def _log_products(scheme: WeightScheme, p: float, k: int, theta: float, tol: float,
                  terms: Optional[int] = None):
    """Log of both products, explicit up to level ``S`` plus a series remainder.

    For ``s > S`` let ``x_s = theta / ((1-p) f(s))`` and ``X_j = sum_{s>S} x_s**j``.
    The remainders are expanded to order ``J``:
    ``sum -log(1-x_s) = sum_j X_j / j`` with the rest at most
    ``X_{J+1} / ((J+1)(1 - x_max))``, and ``sum log(1+x_s)`` is the
    alternating version with the rest at most ``X_{J+1} / (J+1)``.
    """
    q = 1 - p
    J = _SERIES_ORDER
    # the Y product starts after k, so at least k + 1 factors are explicit
    S = max(k + 16, 64) if terms is None else max(int(terms), k + 1)
    while True:
        lf = scheme.log_table(S + 1)
        x = theta * np.exp(-lf[1:S + 1]) / q
        x_max = theta / (q * _inf_beyond(scheme, S))
        Xs, Xerr = [], []
        for j in range(1, J + 2):
            t = scheme.reciprocal_tail(S + 1, q=j, tol=1e-15)
            Xs.append((theta / q) ** j * t.value)
            Xerr.append((theta / q) ** j * t.abs_error)
        rem_y = sum(Xs[j - 1] / j for j in range(1, J + 1))
        rem_z = sum((-1) ** (j + 1) * Xs[j - 1] / j for j in range(1, J + 1))
        tab_err = sum(Xerr[:J])
        err_y = Xs[J] / ((J + 1) * (1 - x_max)) + tab_err
        err_z = Xs[J] / (J + 1) + tab_err
        explicit_y = -float(np.sum(np.log1p(-x[k:])))
        explicit_z = float(np.sum(np.log1p(x)))
        rounding = 4 * np.finfo(float).eps * (abs(explicit_y) + abs(explicit_z) + S)
        err_y += rounding
        err_z += rounding
        if x_max >= 1:
            # the log series of the remainder need not converge
            err_y = err_z = math.inf
        if terms is not None or max(err_y, err_z) <= tol / 2 or S > 10 ** 7:
            break
        S *= 2
    return explicit_y + rem_y, -(explicit_z + rem_z), err_y, err_z, S


def mgf_products(scheme: WeightScheme, p: float, k: int, theta: float, tol: float = 1e-10,
                 terms: Optional[int] = None) -> MgfPair:
    """Moment generating functions behind the offspring mean.

    ``E[exp(theta Y_k)] = prod_{s>k} (1-p) f(s) / ((1-p) f(s) - theta)`` and
    ``E[exp(-theta Z)] = prod_{s>=1} (1-p) f(s) / ((1-p) f(s) + theta)``.

    Parameters
    ----------
    terms
        Fix the truncation level (raised to ``k + 1`` if smaller) instead of
        adapting it to ``tol``.  The reported errors are infinite when the
        remainder series cannot be certified at that level.

    Raises
    ------
    InfeasibleTheta
        If ``theta >= (1-p) inf_{s>k} f(s)``.
    """
    if not 0 <= p < 1:
        raise ConfigurationError("p must lie in [0, 1)")
    if k < 0:
        raise ConfigurationError("k must be nonnegative")
    if theta < 0:
        raise ConfigurationError("theta must be nonnegative")
    if scheme.summable(1) is not True:
        raise DivergentScheme(f"sum 1/f is not finite for {scheme}")
    if theta >= (1 - p) * _inf_beyond(scheme, k):
        raise InfeasibleTheta(f"theta = {theta} reaches the first pole of the Y_{k} product")
    if theta == 0:
        return MgfPair(1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0)
    ly, lz, ey, ez, S = _log_products(scheme, p, k, theta, tol, terms)
    return MgfPair(math.exp(ly), math.exp(lz), ly, lz, ey, ez, S)


# --------------------------------------------------------------------------
# offspring mean
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MValue:
    """Offspring mean ``m`` with its error budget and partial sums."""

    value: float
    abs_error: float
    terms: int
    remainder: float
    partial_sums: tuple = field(repr=False, default=())

    def __float__(self) -> float:
        return self.value


def _m_remainder(scheme: WeightScheme, K_: int) -> float:
    """Bound on ``sum_{k>K} E[e^{-theta_k Z}] E[e^{theta_k Y_k}]``.

    Each summand is at most ``e * prod_{s<=k} (1 + x_s)^{-1}``, and
    ``theta_k >= (1-p) / (sqrt 2 F_{k+1})`` for any scheme, so keeping the
    first ``J`` factors gives ``e 2^{J/2} prod_{s<=J} f(s) F_{k+1}^J``.
    """
    best = math.inf
    log_f = scheme.log_table(min(K_, 40))
    for J in range(1, min(K_, 40) + 1):
        tail = scheme.tail_power_sum_bound(K_ + 1, J)
        if not 0 < tail < math.inf:
            continue
        v = math.exp(1 + J * math.log(2) / 2 + float(np.sum(log_f[1:J + 1])) + math.log(tail))
        best = min(best, v)
    return best


def compute_m(scheme: WeightScheme, p: float, tol: float = 1e-8, k_max: int = 1000,
              k_min: int = 0) -> MValue:
    """``m = sum_{k>=1} E[exp(-theta_k Z)] E[exp(theta_k Y_k)]``.

    Summation stops at the first power of two (at least ``k_min``) where the
    certified remainder plus accumulated rounding falls below ``tol``, and no
    later than ``k_max``.
    """
    BoundInputs(scheme, p, tol).require_spb()
    thetas = _theta_array(scheme, p, k_max)
    total, err = 0.0, 0.0
    partial = []
    rem = math.inf
    for k in range(1, k_max + 1):
        pair = mgf_products(scheme, p, k, float(thetas[k - 1]), tol=tol / (8 * (1 + total)))
        a = pair.ey * pair.ez
        total += a
        err += a * (math.expm1(pair.log_err_y + pair.log_err_z))
        partial.append(total)
        if k >= k_min and (k & (k - 1)) == 0 and k >= 8:
            rem = _m_remainder(scheme, k)
            if rem + err <= tol:
                break
    else:
        rem = _m_remainder(scheme, k_max)
    return MValue(total + rem / 2, err + rem / 2, len(partial), rem, tuple(partial))


def constants_C(scheme: WeightScheme, p: float) -> tuple[float, float]:
    """``C1 = exp(3 (1-p)^2 F)`` and ``C2 = (1-p)^2 inf_k f(k)``."""
    if not 0 <= p < 1:
        raise ConfigurationError("p must lie in [0, 1)")
    if scheme.summable(1) is not True:
        raise DivergentScheme(f"F = sum 1/f is not finite for {scheme}")
    F = scheme.reciprocal_tail(1, tol=1e-14).value
    q2 = (1 - p) ** 2
    return math.exp(3 * q2 * F), q2 * scheme.infimum()


# --------------------------------------------------------------------------
# large-deviation rate
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CnEstimate:
    value: float
    std_error: float
    k_star: int
    q: tuple
    acceptance: float
    samples: int
    argument: float

    def __float__(self) -> float:
        return self.value


_ARRIVALS_PAST_KSTAR = 64
_Z_LEVELS = 64


def _clock_tables(scheme: WeightScheme, p: float, n_levels: int):
    log_f = scheme.log_table(n_levels)
    inv_f = np.exp(-log_f)
    inv_f[0] = 0.0
    F = np.empty(n_levels + 2)
    F[n_levels + 1] = scheme.reciprocal_tail(n_levels + 1, tol=1e-14).value
    F[1:n_levels + 1] = F[n_levels + 1] + np.cumsum(inv_f[1:][::-1])[::-1]
    F[0] = F[1]
    return inv_f, F / (1 - p)


def offspring_tail(scheme: WeightScheme, p: float, samples: int, rng: np.random.Generator,
                   arrivals: int = 128) -> np.ndarray:
    """Monte Carlo ``q_k = P(eta >= k) / P(eta >= 1)`` for ``k = 0..max observed``.

    ``eta`` counts the indices ``k`` at which a fresh clock sum undercuts the
    suffix ``sum_{s>k}`` of a reference clock (the pending Bernoulli condition
    is dropped, which only enlarges ``eta``).
    """
    inv_f, resid = _clock_tables(scheme, p, arrivals + 2)
    rate_inv = inv_f[:_Z_LEVELS + 1] / (1 - p)
    z_resid = float(resid[_Z_LEVELS + 1])
    eta = np.empty(samples, dtype=np.int64)
    K.eta_samples(rng, p, inv_f, resid, rate_inv, z_resid, arrivals, samples, eta)
    counts = np.bincount(eta)
    ge = counts[::-1].cumsum()[::-1].astype(float)
    if ge.size < 2 or ge[1] == 0:
        return np.array([1.0, 1.0, 0.0])
    return np.append(ge / ge[1], 0.0)


def _kl_half(q: float) -> float:
    """Relative entropy ``D(1/2 || q)``; the Chernoff rate of ``P(Bin(n, q) >= n/2)``."""
    if q <= 0:
        return math.inf
    return 0.5 * math.log(0.5 / q) + 0.5 * math.log(0.5 / (1 - q))


def choose_k_star(q: np.ndarray, r: float, m: float) -> int:
    """Smallest ``k`` with ``q_k < 1/2`` and ``exp(-n D(1/2 || q_k)) <= (r m)^{-n}``."""
    target = math.log(r * m)
    for k in range(1, q.size):
        if q[k] < 0.5 and _kl_half(float(q[k])) >= target:
            return k
    return q.size


def _legendre(e: np.ndarray, a: float, min_ess: float) -> float:
    """``sup_{theta>=0} [-theta a - log mean exp(-theta e)]`` over the range with enough effective samples."""
    if a >= e.mean():
        return 0.0
    e = np.sort(e)
    e0 = e[0]
    d = e - e0

    def ess(theta: float) -> float:
        w = np.exp(-theta * d)
        return w.sum() ** 2 / (w * w).sum()

    hi = 1.0 / max(e.std(), 1e-300)
    while ess(hi) > min_ess and hi < 1e12:
        hi *= 2
    if ess(hi) < min_ess:
        hi = brentq(lambda t: ess(t) - min_ess, 0.0, hi)

    def neg(theta: float) -> float:
        lm = -theta * e0 + math.log(np.mean(np.exp(-theta * d)))
        return theta * a + lm

    res = minimize_scalar(neg, bounds=(0.0, hi), method="bounded", options={"xatol": hi * 1e-8})
    return max(0.0, -float(res.fun))


def estimate_cn(scheme: WeightScheme, p: float, r: float, M: float, n: int, samples: int = 10_000,
                seed: int = 0, m: Optional[float] = None, batches: int = 20) -> CnEstimate:
    """Monte Carlo estimate of the rate ``c_n(r, M)``.

    Accepted variates ``e ~ Exp(f(1))`` conditioned on lying below an
    independent clock difference are pooled, and the rate is
    ``(k/n) Lambda*(M/k)`` with ``k = floor(n/2)`` and ``Lambda*`` the
    empirical Legendre transform of ``e`` (Chernoff exponent of
    ``P(e_1 + ... + e_k <= M)``).  The standard error comes from
    ``batches`` disjoint sub-samples.

    Raises
    ------
    RejectionStarvation
        If fewer than one proposal in ``10^4`` is accepted.
    """
    BoundInputs(scheme, p).require_spb()
    if r <= 1 or M < 1 or n < 1:
        raise ConfigurationError("need r > 1, M >= 1, n >= 1")
    if samples < 1000:
        raise ConfigurationError("estimate_cn needs at least 1000 samples")
    rng = np.random.default_rng(seed)
    m_val = float(compute_m(scheme, p).value) if m is None else float(m)
    q = offspring_tail(scheme, p, samples, rng)
    k_star = choose_k_star(q, r, m_val)
    n_arr = k_star + _ARRIVALS_PAST_KSTAR
    inv_f, resid = _clock_tables(scheme, p, n_arr + 2)
    inv_f1 = math.exp(-scheme.log_eval(1, 1))
    out = np.empty(samples)
    pilot = 100_000
    acc, prop = K.rejection_e(rng, p, inv_f, resid, inv_f1, k_star, n_arr, pilot, samples, out)
    if acc < samples and acc / prop < 1e-4:
        raise RejectionStarvation(f"acceptance rate {acc / prop:.2e} below 1e-4 (k* = {k_star})")
    while acc < samples:
        a2, p2 = K.rejection_e(rng, p, inv_f, resid, inv_f1, k_star, n_arr, 10 ** 9,
                               samples - acc, out[acc:])
        acc += a2
        prop += p2
    half = n // 2
    if half == 0:
        return CnEstimate(0.0, 0.0, k_star, tuple(q.tolist()), acc / prop, samples, math.inf)
    arg = M / half
    min_ess = max(50.0, 0.01 * samples)
    rate = half / n * _legendre(out, arg, min_ess)
    parts = np.array_split(out, batches)
    sub = np.array([half / n * _legendre(b, arg, max(20.0, 0.01 * b.size)) for b in parts])
    se = float(sub.std(ddof=1) / math.sqrt(batches))
    return CnEstimate(rate, se, k_star, tuple(q.tolist()), acc / prop, samples, arg)


# --------------------------------------------------------------------------
# assembled bounds
# --------------------------------------------------------------------------

@dataclass
class LeadBound:
    """``m^n exp(-c_n n) + r^{-n} + C1 exp(-M C2)`` with its ingredients."""

    n: int
    r: float
    M: float
    m_value: float
    c_n: float
    C1: float
    C2: float
    value: float
    mc_error: float
    inputs: dict = field(default_factory=dict)
    grid: list = field(default_factory=list)

    @property
    def summands(self) -> tuple[float, float, float]:
        return (self.m_value ** self.n * math.exp(-self.c_n * self.n), self.r ** (-self.n),
                self.C1 * math.exp(-self.M * self.C2))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["summands"] = list(self.summands)
        return d

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _assemble(inputs: BoundInputs, n: int, r: float, M: float, m_val: float, C1: float,
              C2: float, c_n: float, se: float) -> LeadBound:
    first = m_val ** n * math.exp(-c_n * n)
    value = first + r ** (-n) + C1 * math.exp(-M * C2)
    # error of the first summand from the c_n standard error
    err = first * (math.exp(n * se) - 1) if se > 0 else 0.0
    return LeadBound(n, r, M, m_val, c_n, C1, C2, value, err, inputs.to_dict())


def lead_tail_bound(inputs: BoundInputs, n: int, r: float, M: float, samples: int = 10_000,
                    seed: int = 0, c_n: Optional[float] = None) -> LeadBound:
    """Upper bound on ``P(Lead in G_n)`` at fixed ``(r, M)``.

    Passing ``c_n=0`` gives the conservative bound without Monte Carlo.
    """
    inputs.require_spb()
    if r <= 1 or M < 1 or n < 1:
        raise ConfigurationError("need r > 1, M >= 1, n >= 1")
    m_val = compute_m(inputs.scheme, inputs.p, inputs.tol)
    C1, C2 = constants_C(inputs.scheme, inputs.p)
    m_up = m_val.value + m_val.abs_error
    if c_n is None:
        est = estimate_cn(inputs.scheme, inputs.p, r, M, n, samples, seed, m=m_up)
        c, se = est.value, est.std_error
    else:
        c, se = float(c_n), 0.0
    return _assemble(inputs, n, r, M, m_up, C1, C2, c, se)


def lead_tail_grid(inputs: BoundInputs, n: int, rs: Sequence[float], Ms: Sequence[float],
                   samples: int = 10_000, seed: int = 0) -> LeadBound:
    """Minimize :func:`lead_tail_bound` over a grid; the full grid is kept on the result."""
    inputs.require_spb()
    m_val = compute_m(inputs.scheme, inputs.p, inputs.tol)
    m_up = m_val.value + m_val.abs_error
    C1, C2 = constants_C(inputs.scheme, inputs.p)
    results = []
    for i, r in enumerate(rs):
        for j, M in enumerate(Ms):
            est = estimate_cn(inputs.scheme, inputs.p, r, M, n, samples,
                              seed + 1000 * i + j, m=m_up)
            results.append(_assemble(inputs, n, r, M, m_up, C1, C2, est.value, est.std_error))
    best = min(results, key=lambda b: b.value)
    best.grid = [{"r": b.r, "M": b.M, "c_n": b.c_n, "value": b.value, "mc_error": b.mc_error}
                 for b in results]
    return best


def lead_lower_bound(inputs: BoundInputs, r, M, samples: int = 10_000, seed: int = 0) -> float:
    """Lower bound on ``P(Lead = 1)``, floored at 0.

    ``1 - sum_k (urn bound at k) - [m^2 e^{-2 c_2} + r^{-2} + C1 e^{-M C2}]``,
    the bracket minimized over the supplied ``r`` and ``M`` values.
    """
    rs = np.atleast_1d(r).tolist()
    Ms = np.atleast_1d(M).tolist()
    series = estur_series(inputs.scheme, tol=inputs.tol)
    tail = lead_tail_grid(inputs, 2, rs, Ms, samples, seed)
    return max(0.0, 1.0 - (series.value + series.abs_error) - tail.value)
