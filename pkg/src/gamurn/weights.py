"""Reinforcement schemes, certified reciprocal tail sums and phase classification.

A weight scheme is a positive function ``f_j(n)`` of a group's index ``j`` and
its current size ``n`` with ``f_j(0) = 0``.  Everything downstream consumes
weights through :meth:`WeightScheme.log_eval` (or the vectorised tables built
from it) so that schemes such as ``exp(j**3 + n)`` never overflow.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .errors import ConfigurationError, DivergentTail, InconclusiveError

__all__ = [
    "Family",
    "TailRule",
    "Verdict",
    "Phase",
    "WeightScheme",
    "TailSum",
    "SpbEvidence",
    "SpbCheck",
    "PhaseReport",
    "tail_sum",
    "theta_k",
    "check_spb",
    "classify_phase",
]

_EPS = np.finfo(float).eps


class Family(str, enum.Enum):
    POWER = "power"
    LINEAR = "linear"
    CONSTANT = "constant"
    GROUP_EXPONENTIAL = "group_exponential"
    EXPONENTIAL = "exponential"
    TABLE = "table"


class TailRule(str, enum.Enum):
    REPEAT_LAST = "repeat_last"
    POWER_EXTEND = "power_extend"


class Verdict(str, enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


class Phase(str, enum.Enum):
    MONOPOLY = "monopoly"
    ALL_INFINITE = "all_infinite"
    AT_MOST_ONE_INFINITE = "at_most_one_infinite"
    ALL_OR_NOTHING = "all_or_nothing"
    INCONCLUSIVE = "inconclusive"


# --------------------------------------------------------------------------
# tail sums of c * j**(-a)
# --------------------------------------------------------------------------

def _zeta_tail(a: float, k: int, tol: float) -> tuple[float, float, int]:
    """Return ``(value, abs_error, N)`` for ``sum_{j>=k} j**(-a)``, ``a > 1``.

    Explicit terms ``k..N-1`` followed by a three-term Euler-Maclaurin tail.
    ``x**(-a)`` is completely monotone, so the remainder is bounded by the
    first omitted correction ``a(a+1)(a+2) N**(-a-3) / 720``.
    """
    if a <= 1:
        raise DivergentTail(f"sum j^-{a} diverges")
    n = max(k, 8)
    while a * (a + 1) * (a + 2) / 720.0 * n ** (-a - 3) > tol / 4:
        n *= 2
    n = max(n, k)
    js = np.arange(k, n, dtype=float)
    head = math.fsum(js ** (-a)) if js.size else 0.0
    em = n ** (1 - a) / (a - 1) + 0.5 * n ** (-a) + a * n ** (-a - 1) / 12.0
    value = head + em
    err = a * (a + 1) * (a + 2) / 720.0 * n ** (-a - 3) + 4 * _EPS * value * (1 + math.log2(max(n - k, 1)))
    return value, err, n


def _zeta_tail_upper(a: float, k: int) -> float:
    """Cheap analytic upper bound on ``sum_{j>=k} j**(-a)`` (integral test)."""
    return k ** (-a) + k ** (1 - a) / (a - 1)


@dataclass(frozen=True)
class TailSum:
    """Certified value of ``sum_{j>=k} f(j)**(-q)``.

    ``value`` is ``math.inf`` when the series is known to diverge.
    """

    value: float
    abs_error: float
    truncation_index: int

    @property
    def divergent(self) -> bool:
        return math.isinf(self.value)

    @property
    def interval(self) -> tuple[float, float]:
        return (self.value - self.abs_error, self.value + self.abs_error)


# --------------------------------------------------------------------------
# the scheme
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightScheme:
    """A reinforcement function ``f_group(size)``.

    Build instances with the named constructors (:meth:`power`,
    :meth:`linear`, ...) rather than the raw dataclass fields.
    """

    family: Family
    gamma: Optional[float] = None
    c: Optional[float] = None
    base: Optional[float] = None
    values: tuple = ()
    tail_rule: Optional[TailRule] = None

    # ---- constructors -------------------------------------------------
    @classmethod
    def power(cls, gamma: float) -> "WeightScheme":
        if not gamma > 0:
            raise ConfigurationError("power exponent must be positive")
        return cls(Family.POWER, gamma=float(gamma))

    @classmethod
    def linear(cls) -> "WeightScheme":
        return cls(Family.LINEAR)

    @classmethod
    def constant(cls, c: float = 1.0) -> "WeightScheme":
        if not c > 0:
            raise ConfigurationError("constant weight must be positive")
        return cls(Family.CONSTANT, c=float(c))

    @classmethod
    def group_exponential(cls) -> "WeightScheme":
        return cls(Family.GROUP_EXPONENTIAL)

    @classmethod
    def exponential(cls, base: float = math.e) -> "WeightScheme":
        if not base > 1:
            raise ConfigurationError("exponential base must exceed 1")
        return cls(Family.EXPONENTIAL, base=float(base))

    @classmethod
    def table(cls, values, tail_rule=None, gamma: Optional[float] = None) -> "WeightScheme":
        vals = tuple(float(v) for v in values)
        if not vals or any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise ConfigurationError("table values must be finite and positive")
        rule = TailRule(tail_rule) if tail_rule is not None else None
        if rule is TailRule.POWER_EXTEND:
            if gamma is None or not gamma > 0:
                raise ConfigurationError("power_extend needs a positive gamma")
            gamma = float(gamma)
        else:
            gamma = None
        return cls(Family.TABLE, values=vals, tail_rule=rule, gamma=gamma)

    # ---- basic properties ---------------------------------------------
    @property
    def group_dependent(self) -> bool:
        return self.family is Family.GROUP_EXPONENTIAL

    def __str__(self) -> str:
        f = self.family
        if f is Family.POWER:
            return f"Power({self.gamma:g})"
        if f is Family.CONSTANT:
            return f"Constant({self.c:g})"
        if f is Family.EXPONENTIAL:
            return f"Exponential({self.base:g})"
        if f is Family.TABLE:
            return f"Table(len={len(self.values)}, {self.tail_rule.value if self.tail_rule else None})"
        return {Family.LINEAR: "Linear", Family.GROUP_EXPONENTIAL: "GroupExponential"}[f]

    # ---- evaluation ---------------------------------------------------
    def _table_log(self, n: int) -> float:
        vals = self.values
        if n <= len(vals):
            return math.log(vals[n - 1])
        if self.tail_rule is TailRule.REPEAT_LAST:
            return math.log(vals[-1])
        if self.tail_rule is TailRule.POWER_EXTEND:
            big_n = len(vals)
            return math.log(vals[-1]) + self.gamma * (math.log(n) - math.log(big_n))
        raise ConfigurationError(f"table has no value for size {n} and no tail rule")

    def log_eval(self, group: int, size: int) -> float:
        """``log f_group(size)``; ``-inf`` for size 0."""
        if size < 0:
            raise ConfigurationError("size must be nonnegative")
        if group < 1:
            raise ConfigurationError("group index starts at 1")
        if size == 0:
            return -math.inf
        f = self.family
        if f is Family.POWER:
            return self.gamma * math.log(size)
        if f is Family.LINEAR:
            return math.log(size)
        if f is Family.CONSTANT:
            return math.log(self.c)
        if f is Family.EXPONENTIAL:
            return size * math.log(self.base)
        if f is Family.GROUP_EXPONENTIAL:
            return float(group) ** 3 + size
        return self._table_log(size)

    def eval(self, group: int, size: int) -> float:
        """``f_group(size)``; may overflow to ``inf`` for huge exponents."""
        if size == 0:
            if group < 1:
                raise ConfigurationError("group index starts at 1")
            return 0.0
        f = self.family
        if f is Family.POWER:
            return float(size) ** self.gamma
        if f is Family.LINEAR:
            return float(size)
        if f is Family.CONSTANT:
            return self.c
        if f is Family.EXPONENTIAL:
            try:
                return self.base ** size
            except OverflowError:
                return math.inf
        if f is Family.TABLE and size <= len(self.values):
            return self.values[size - 1]
        try:
            return math.exp(self.log_eval(group, size))
        except OverflowError:
            return math.inf

    def log_table(self, nmax: int) -> np.ndarray:
        """Array ``t`` with ``t[n] = log f(n)`` for ``n = 0..nmax`` (group offset excluded)."""
        n = np.arange(nmax + 1, dtype=float)
        out = np.empty(nmax + 1)
        out[0] = -np.inf
        sizes = n[1:]
        f = self.family
        if f is Family.POWER:
            out[1:] = self.gamma * np.log(sizes)
        elif f is Family.LINEAR:
            out[1:] = np.log(sizes)
        elif f is Family.CONSTANT:
            out[1:] = math.log(self.c)
        elif f is Family.EXPONENTIAL:
            out[1:] = sizes * math.log(self.base)
        elif f is Family.GROUP_EXPONENTIAL:
            out[1:] = sizes
        else:
            m = min(nmax, len(self.values))
            out[1:m + 1] = np.log(self.values[:m])
            if nmax > len(self.values):
                rest = sizes[len(self.values):]
                if self.tail_rule is TailRule.REPEAT_LAST:
                    out[len(self.values) + 1:] = math.log(self.values[-1])
                elif self.tail_rule is TailRule.POWER_EXTEND:
                    big_n = len(self.values)
                    out[big_n + 1:] = math.log(self.values[-1]) + self.gamma * (np.log(rest) - math.log(big_n))
                else:
                    raise ConfigurationError("table too short for the requested horizon and no tail rule")
        return out

    def group_log_offset(self, groups) -> np.ndarray:
        """Additive log-weight offset of each group (``j**3`` for GroupExponential)."""
        g = np.asarray(groups, dtype=float)
        if self.family is Family.GROUP_EXPONENTIAL:
            return g ** 3
        return np.zeros_like(g)

    def log_weights(self, sizes, groups=None) -> np.ndarray:
        """Vectorised ``log f_j(sizes[j-1])`` for groups ``1..len(sizes)``."""
        sizes = np.asarray(sizes, dtype=np.int64)
        if groups is None:
            groups = np.arange(1, sizes.size + 1)
        table = self.log_table(int(sizes.max()) if sizes.size else 0)
        return table[sizes] + self.group_log_offset(groups)

    # ---- analytic facts -----------------------------------------------
    def summable(self, q: int = 1) -> Optional[bool]:
        """Is ``sum_n f(n)**(-q)`` finite?  ``None`` when not decidable.

        For group-dependent schemes the answer refers to every ``f_j``.
        """
        f = self.family
        if f is Family.POWER:
            return q * self.gamma > 1
        if f is Family.LINEAR:
            return q > 1
        if f is Family.CONSTANT:
            return False
        if f in (Family.EXPONENTIAL, Family.GROUP_EXPONENTIAL):
            return True
        if self.tail_rule is TailRule.REPEAT_LAST:
            return False
        if self.tail_rule is TailRule.POWER_EXTEND:
            return q * self.gamma > 1
        return None

    def is_monotone(self) -> bool:
        """True when ``n -> f(n)`` is provably nondecreasing on ``n >= 1``."""
        f = self.family
        if f in (Family.POWER, Family.LINEAR, Family.CONSTANT, Family.EXPONENTIAL, Family.GROUP_EXPONENTIAL):
            return True
        vals = self.values
        if any(b < a for a, b in zip(vals, vals[1:])):
            return False
        return self.tail_rule in (TailRule.REPEAT_LAST, TailRule.POWER_EXTEND)

    def infimum(self) -> float:
        """``inf_{k>=1} f(k)`` (group 1 for group-dependent schemes)."""
        f = self.family
        if f in (Family.POWER, Family.LINEAR, Family.EXPONENTIAL, Family.GROUP_EXPONENTIAL):
            return self.eval(1, 1)
        if f is Family.CONSTANT:
            return self.c
        if self.tail_rule is None:
            raise ConfigurationError("table without tail rule has no defined infimum")
        return min(self.values)

    # ---- reciprocal tails ---------------------------------------------
    def reciprocal_tail(self, k: int, q: int = 1, tol: float = 1e-12, group: int = 1) -> TailSum:
        """Certified ``sum_{j>=k} f_group(j)**(-q)``."""
        if k < 1:
            raise ConfigurationError("tail index starts at 1")
        if not tol > 0:
            raise ConfigurationError("tol must be positive")
        if self.summable(q) is False:
            return TailSum(math.inf, 0.0, k)
        f = self.family
        if f in (Family.POWER, Family.LINEAR):
            a = q * (self.gamma if f is Family.POWER else 1.0)
            v, e, n = _zeta_tail(a, k, tol)
            return TailSum(v, e, n)
        if f is Family.EXPONENTIAL:
            r = self.base ** (-q)
            v = math.exp(-q * k * math.log(self.base)) / (1 - r)
            return TailSum(v, 4 * _EPS * v, k)
        if f is Family.GROUP_EXPONENTIAL:
            v = math.exp(-q * (float(group) ** 3 + k)) / (1 - math.exp(-q))
            return TailSum(v, 4 * _EPS * v, k)
        # table with power extension
        vals = np.asarray(self.values)
        big_n = len(vals)
        head = math.fsum(vals[k - 1:] ** (-q)) if k <= big_n else 0.0
        if self.tail_rule is not TailRule.POWER_EXTEND:
            raise InconclusiveError("table tail is not certified summable")
        scale = big_n ** (q * self.gamma) / vals[-1] ** q
        v, e, n = _zeta_tail(q * self.gamma, max(k, big_n + 1), tol / max(scale, 1.0))
        value = head + scale * v
        return TailSum(value, scale * e + 4 * _EPS * value * big_n, n)

    def tail_power_sum_bound(self, K: int, J: int) -> float:
        """Upper bound on ``sum_{k>K} F_k**J`` with ``F_k = sum_{j>=k} 1/f(j)``.

        Returns ``inf`` when no certified bound is available for this ``J``.
        """
        f = self.family
        if self.summable(1) is not True or self.group_dependent:
            return math.inf
        if f is Family.POWER:
            g = self.gamma
            if J * (g - 1) <= 1:
                return math.inf
            cst = (g / (g - 1)) ** J
            return cst * K ** (1 - J * (g - 1)) / (J * (g - 1) - 1)
        if f is Family.EXPONENTIAL:
            b = self.base
            return (1 - 1 / b) ** (-J) * b ** (-J * (K + 1)) / (1 - b ** (-J))
        if f is Family.TABLE and self.tail_rule is TailRule.POWER_EXTEND:
            g = self.gamma
            if J * (g - 1) <= 1:
                return math.inf
            big_n = len(self.values)
            total = 0.0
            k = K + 1
            while k <= big_n + 1:
                total += self.reciprocal_tail(k).value ** J
                k += 1
            scale = big_n ** g / self.values[-1]
            start = max(K, big_n + 1)
            cst = (scale * g / (g - 1)) ** J
            return total + cst * start ** (1 - J * (g - 1)) / (J * (g - 1) - 1)
        return math.inf

    # ---- serialization ------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"family": self.family.value}
        if self.family is Family.POWER:
            d["gamma"] = self.gamma
        elif self.family is Family.CONSTANT:
            d["c"] = self.c
        elif self.family is Family.EXPONENTIAL:
            d["base"] = self.base
        elif self.family is Family.TABLE:
            d["values"] = list(self.values)
            d["tail_rule"] = self.tail_rule.value if self.tail_rule else None
            if self.tail_rule is TailRule.POWER_EXTEND:
                d["gamma"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "WeightScheme":
        try:
            fam = Family(d["family"])
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"unknown weight family in {d!r}") from exc
        if fam is Family.POWER:
            return cls.power(d["gamma"])
        if fam is Family.LINEAR:
            return cls.linear()
        if fam is Family.CONSTANT:
            return cls.constant(d.get("c", 1.0))
        if fam is Family.EXPONENTIAL:
            return cls.exponential(d.get("base", math.e))
        if fam is Family.GROUP_EXPONENTIAL:
            return cls.group_exponential()
        return cls.table(d["values"], d.get("tail_rule"), d.get("gamma"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "WeightScheme":
        return cls.from_dict(json.loads(s))


# --------------------------------------------------------------------------
# module-level operations
# --------------------------------------------------------------------------

def tail_sum(scheme: WeightScheme, group: int, k: int, tol: float) -> TailSum:
    """``F_k = sum_{j>=k} 1/f_group(j)`` with ``abs_error <= tol``."""
    return scheme.reciprocal_tail(k, q=1, tol=tol, group=group)


def theta_k(scheme: WeightScheme, p: float, k: int, tol: float = 1e-10) -> float:
    """``(sum_{s>k} 2 / ((1-p)**2 f(s)**2))**(-1/2)``, relative error <= tol."""
    if not 0 <= p < 1:
        raise ConfigurationError("p must lie in [0, 1)")
    if scheme.summable(2) is False:
        raise DivergentTail(f"sum 1/f^2 diverges for {scheme}")
    rough = scheme.reciprocal_tail(k + 1, q=2, tol=1e-3)
    t = scheme.reciprocal_tail(k + 1, q=2, tol=max(tol * rough.value * 0.5, 1e-300))
    return (1 - p) / math.sqrt(2 * t.value)


def _theta_array(scheme: WeightScheme, p: float, k_max: int) -> np.ndarray:
    """``theta_k`` for ``k = 1..k_max`` from one reverse cumulative sum."""
    s = np.arange(2, k_max + 2, dtype=float)
    inv2 = np.exp(-2 * scheme.log_table(k_max + 1)[2:])
    rest = scheme.reciprocal_tail(k_max + 2, q=2, tol=1e-14).value
    tails = np.cumsum(inv2[::-1])[::-1] + rest
    assert tails.size == s.size
    return (1 - p) / np.sqrt(2 * tails)


def _product_terms(scheme: WeightScheme, p: float, k_max: int, chunk: int = 256) -> np.ndarray:
    """``prod_{s<=k} 1/(1 + theta_k/(f(s)(1-p)))`` for ``k = 1..k_max``."""
    theta = _theta_array(scheme, p, k_max)
    inv_f = np.exp(-scheme.log_table(k_max)[1:]) / (1 - p)
    out = np.empty(k_max)
    for lo in range(0, k_max, chunk):
        hi = min(lo + chunk, k_max)
        ks = np.arange(lo + 1, hi + 1)
        x = theta[lo:hi, None] * inv_f[None, :hi]
        mask = np.arange(1, hi + 1)[None, :] <= ks[:, None]
        logs = np.where(mask, np.log1p(x), 0.0)
        out[lo:hi] = np.exp(-logs.sum(axis=1))
    return out


@dataclass
class SpbEvidence:
    theta_samples: list = field(default_factory=list)
    partial_product_sums: list = field(default_factory=list)
    analytic: bool = False


@dataclass
class SpbCheck:
    summable_reciprocals: Verdict
    product_condition: Verdict
    evidence: SpbEvidence

    @property
    def holds(self) -> bool:
        return self.summable_reciprocals is Verdict.HOLDS and self.product_condition is Verdict.HOLDS


def check_spb(scheme: WeightScheme, p: float, tol: float = 1e-10, k_max: int = 10_000) -> SpbCheck:
    """Decide both summability conditions of the monopoly criterion.

    The first condition is decided per family.  The second is proved for
    nondecreasing schemes with summable reciprocals; in every other case the
    partial sums up to ``k_max`` are reported and the verdict stays UNKNOWN.
    """
    if scheme.group_dependent:
        raise ConfigurationError("check_spb needs a group-independent scheme")
    if not 0 <= p < 1:
        raise ConfigurationError("p must lie in [0, 1)")
    s1 = scheme.summable(1)
    first = {True: Verdict.HOLDS, False: Verdict.FAILS, None: Verdict.UNKNOWN}[s1]
    analytic = s1 is True and scheme.is_monotone()
    evidence = SpbEvidence(analytic=analytic)
    second = Verdict.HOLDS if analytic else Verdict.UNKNOWN
    if scheme.summable(2) is not False and (scheme.family is not Family.TABLE or scheme.tail_rule is not None):
        horizon = min(k_max, 200) if analytic else k_max
        terms = _product_terms(scheme, p, horizon)
        theta = _theta_array(scheme, p, horizon)
        marks = sorted({int(x) for x in np.unique(np.geomspace(1, horizon, 12).astype(int))})
        partial = np.cumsum(terms)
        evidence.theta_samples = [(k, float(theta[k - 1])) for k in marks]
        evidence.partial_product_sums = [(k, float(partial[k - 1])) for k in marks]
    return SpbCheck(first, second, evidence)


@dataclass
class PhaseReport:
    verdict: Phase
    p_bound: float
    spb_evidence: Optional[SpbEvidence] = None
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"verdict": self.verdict.value, "p_bound": self.p_bound, "note": self.note}
        if self.spb_evidence is not None:
            d["spb_evidence"] = {
                "analytic": self.spb_evidence.analytic,
                "theta_samples": self.spb_evidence.theta_samples,
                "partial_product_sums": self.spb_evidence.partial_product_sums,
            }
        return d


def classify_phase(scheme: WeightScheme, p: float, k_max: int = 10_000) -> PhaseReport:
    """Phase of ``GAM(scheme, s_n <= p)``."""
    if not 0 <= p < 1:
        raise ConfigurationError("p must lie in [0, 1)")
    if scheme.group_dependent:
        s1 = scheme.summable(1)
        if s1 is True:
            return PhaseReport(Phase.AT_MOST_ONE_INFINITE, p,
                               note="some f_j has summable reciprocals")
        if s1 is False:
            return PhaseReport(Phase.ALL_OR_NOTHING, p,
                               note="every f_j has divergent reciprocal sum")
        return PhaseReport(Phase.INCONCLUSIVE, p)
    s1 = scheme.summable(1)
    if s1 is False:
        return PhaseReport(Phase.ALL_INFINITE, p, note="sum 1/f diverges")
    if s1 is None:
        return PhaseReport(Phase.INCONCLUSIVE, p, note="reciprocal summability undecided")
    spb = check_spb(scheme, p, k_max=k_max)
    if spb.holds:
        return PhaseReport(Phase.MONOPOLY, p, spb.evidence, note="both summability conditions proved")
    return PhaseReport(Phase.INCONCLUSIVE, p, spb.evidence, note="product condition only evidenced numerically")
