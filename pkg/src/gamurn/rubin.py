"""Exponential embedding of the attachment model.

Every group ``m`` owns a clock: a sequence of points on the half line whose
increments are ``W_i / f(N_m(i))`` with ``W_i ~ Exp(1)`` and a counter
``N_m`` that only advances when the Bernoulli attached to the previous point
is 0.  A point whose Bernoulli is 1 founds the next group at that position.
Merging all clocks and reading the points left to right reproduces the label
sequence of the sequential model with ``s_n = p``.

Each group's clock sum converges to a finite limit ``x*_m`` when
``sum 1/f < inf``; the group with the smallest limit is the one that grows
forever.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels as K
from ._util import derive_seed, tree_capacity
from .errors import (ConfigurationError, DivergentScheme, MissingCounterfactual,
                     PrecisionLoss, UnsupportedSchedule)
from .gam import GamConfig, Trajectory
from .weights import WeightScheme

__all__ = [
    "ClockState",
    "RubinTrace",
    "XStarEstimate",
    "LeadReport",
    "GenerationTree",
    "simulate_rubin",
    "sample_clock",
    "estimate_xstar",
    "detect_lead",
    "build_generation_tree",
    "label_sequences",
]

# explicit terms in the Chernoff log-MGF before the certified tail bound
_CHERNOFF_TERMS = 2000


@dataclass(frozen=True)
class ClockState:
    """Where a group's clock stands at the end of a trace.

    ``partial_sum`` is the pending point (already drawn, not yet reached by
    the merged sequence) and ``thinned_count`` the level ``N_m`` used for it.
    """

    group: int
    arrivals_used: int
    thinned_count: int
    partial_sum: float
    last_fired: float


@dataclass
class RubinTrace:
    """The first ``n`` points of the merged point process.

    Arrays are indexed by point (``positions``, ``labels``, ``bernoulli``,
    ``firer``) or by group minus one (``tau``, ``parent`` and the clock
    arrays).  ``firer[i]`` is the group whose clock produced point ``i``
    (0 for the origin).
    """

    scheme: WeightScheme
    p: float
    positions: np.ndarray
    labels: np.ndarray
    bernoulli: np.ndarray
    firer: np.ndarray
    tau: np.ndarray
    parent: np.ndarray
    arrivals: np.ndarray
    thinned_count: np.ndarray
    partial_sum: np.ndarray
    last_fired: np.ndarray
    sizes: np.ndarray

    @property
    def n_points(self) -> int:
        return int(self.positions.size)

    @property
    def L(self) -> int:
        return int(self.tau.size)

    def clock(self, group: int) -> ClockState:
        j = self._index(group)
        return ClockState(group, int(self.arrivals[j]), int(self.thinned_count[j]),
                          float(self.partial_sum[j]), float(self.last_fired[j]))

    @property
    def clocks(self) -> list:
        return [self.clock(m) for m in range(1, self.L + 1)]

    @property
    def points(self) -> list:
        return [{"position": float(x), "label": int(l), "bernoulli": int(b)}
                for x, l, b in zip(self.positions, self.labels, self.bernoulli)]

    def _index(self, group: int) -> int:
        if not 1 <= group <= self.L:
            raise ConfigurationError(f"group {group} does not exist in this trace")
        return group - 1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["position", "label", "bernoulli"])
            for x, l, b in zip(self.positions, self.labels, self.bernoulli):
                w.writerow([repr(float(x)), int(l), int(b)])


def simulate_rubin(config: GamConfig, n_points: int, seed: Optional[int] = None) -> RubinTrace:
    """Generate the first ``n_points`` points of the embedded process.

    Raises
    ------
    UnsupportedSchedule
        If the creation probability is not constant.
    PrecisionLoss
        If a clock increment vanishes next to its position in double
        precision (GroupExponential beyond a handful of groups).
    """
    if not config.schedule.is_constant:
        raise UnsupportedSchedule("the exponential embedding needs a constant s_n")
    if n_points < 1:
        raise ConfigurationError("n_points must be at least 1")
    scheme, p = config.scheme, config.p
    rng = np.random.default_rng(config.seed if seed is None else seed)
    n = int(n_points)
    log_f = scheme.log_table(n + 1)
    cap = tree_capacity(n)
    pos = np.empty(n)
    lab = np.empty(n, dtype=np.int64)
    bern = np.empty(n, dtype=np.int8)
    firer = np.empty(n, dtype=np.int64)
    last = np.empty(n)
    cand = np.empty(n)
    arrivals = np.empty(n, dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    level = np.empty(n, dtype=np.int64)
    mintree = np.full(2 * cap, np.inf)
    L, status = K.rubin_run(rng, p, log_f, scheme.group_dependent, n, pos, lab, bern, firer,
                            last, cand, arrivals, size, parent, level, mintree, cap)
    if status == K.STATUS_PRECISION:
        raise PrecisionLoss(f"clock increments of {scheme} underflow next to their positions "
                            f"after {L} groups")
    new = np.flatnonzero(bern == 1)
    return RubinTrace(scheme, p, pos, lab, bern, firer, new[:L].astype(np.int64),
                      parent[:L].copy(), arrivals[:L].copy(), level[:L].copy(),
                      cand[:L].copy(), last[:L].copy(), size[:L].copy())


def sample_clock(scheme: WeightScheme, p: float, n: int, rng: np.random.Generator,
                 group: int = 1):
    """Positions, Bernoulli marks and levels of the first ``n`` points of one isolated clock.

    The clock starts at 0; ``levels[i]`` is ``N(i + 1)``, the counter used for
    increment ``i + 1``.
    """
    log_f = scheme.log_table(n + 1)
    offset = float(scheme.group_log_offset([group])[0])
    pos = np.empty(n)
    bern = np.empty(n, dtype=np.int8)
    lev = np.empty(n, dtype=np.int64)
    K.clock_path(rng, p, log_f, offset, n, pos, bern, lev)
    return pos, bern, lev


def label_sequences(config: GamConfig, length: int, replicates: int, master_seed: int) -> np.ndarray:
    """First ``length`` labels of ``replicates`` independent embedded runs."""
    out = np.empty((replicates, length), dtype=np.int64)
    for r in range(replicates):
        out[r] = simulate_rubin(config, length, seed=derive_seed(master_seed, r)).labels
    return out


# --------------------------------------------------------------------------
# accumulation points
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class XStarEstimate:
    """Bracket on a group's accumulation point ``x*``.

    ``lower`` is a realized partial sum of the clock, so ``lower <= x*``
    always.  ``tail_mean`` is the exact expectation of ``x* - lower`` and
    ``upper_quantile`` satisfies ``P(x* <= upper_quantile) >= confidence``.
    """

    group: int
    lower: float
    tail_mean: float
    upper_quantile: float
    truncation: int
    confidence: float
    method: str = "markov"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _require_summable(scheme: WeightScheme) -> None:
    if scheme.summable(1) is not True:
        raise DivergentScheme(f"sum 1/f is not finite for {scheme}; x* is infinite")


def _base_tail(scheme: WeightScheme, k: int, tol: float = 1e-12) -> float:
    """``sum_{j>=k} exp(-log_table[j])``, i.e. the reciprocal tail without group offset."""
    return scheme.reciprocal_tail(k, tol=tol).value * math.exp(float(scheme.group_log_offset([1])[0]))


def _tail_table(scheme: WeightScheme, kmax: int, tol: float = 1e-12) -> np.ndarray:
    """``F[k] = sum_{j>=k} 1/f(j)`` for ``k = 0..kmax+1`` (``F[0]`` unused)."""
    inv = np.exp(-scheme.log_table(kmax))
    F = np.empty(kmax + 2)
    F[kmax + 1] = _base_tail(scheme, kmax + 1, tol)
    F[1:kmax + 1] = F[kmax + 1] + np.cumsum(inv[:0:-1])[::-1]
    F[0] = np.nan
    return F


def _residual_mean(p: float, log_fN: np.ndarray, F_next: np.ndarray, offset: np.ndarray) -> np.ndarray:
    # remaining draws at the current level are geometric with mean p/(1-p)
    scale = np.exp(-offset)
    return (p * np.exp(-log_fN) + F_next) / (1 - p) * scale


def _chernoff_excess(scheme: WeightScheme, p: float, level: int, offset: float,
                     confidence: float) -> float:
    """Upper ``confidence``-quantile of ``x* - lower`` from the product MGF.

    The residual splits into a geometric number of ``Exp(f(N))`` terms at the
    current level and one ``Exp((1-p) f(i))`` block per later level ``i``.
    The log-MGF over levels beyond the explicit window is bounded above by
    ``x F / (1 - x_max)``, which keeps the quantile conservative.
    """
    lf = scheme.log_table(level + _CHERNOFF_TERMS + 1) + offset
    fN = math.exp(lf[level])
    a = (1 - p) * fN
    inv_next = np.exp(-lf[level + 1:level + _CHERNOFF_TERMS + 1])
    s_far = level + _CHERNOFF_TERMS + 1
    F_far = _base_tail(scheme, s_far) * math.exp(-offset)
    F_far_hi = F_far * (1 + 1e-9) + 1e-300
    inv_far = math.exp(-lf[s_far])
    log_alpha = math.log1p(-confidence)

    def objective(theta: float) -> float:
        x = theta / (1 - p) * inv_next
        x_far = theta / (1 - p) * inv_far
        log_m = (math.log((1 - p) * (fN - theta)) - math.log(a - theta)
                 - float(np.sum(np.log1p(-x)))
                 + theta / (1 - p) * F_far_hi / (1 - x_far))
        return (log_m - log_alpha) / theta

    res = minimize_scalar(objective, bounds=(a * 1e-9, a * (1 - 1e-9)), method="bounded",
                          options={"xatol": a * 1e-6})
    return float(res.fun)


def estimate_xstar(config: GamConfig, trace: RubinTrace, group: int, extra_terms: int = 0,
                   confidence: float = 0.95, rng: Optional[np.random.Generator] = None) -> XStarEstimate:
    """Bracket the accumulation point of ``group``'s clock.

    Parameters
    ----------
    config, trace
        The configuration and a trace produced from it.
    group
        1-based group index.
    extra_terms
        Clock increments simulated beyond the trace before bounding the rest.
    confidence
        Coverage of ``upper_quantile``.
    rng
        Generator for the extension; a fresh one seeded from the config
        otherwise.

    Returns
    -------
    XStarEstimate
        Markov quantile, replaced by the Chernoff quantile when that is
        smaller (monotone weights only).
    """
    scheme, p = config.scheme, config.p
    _require_summable(scheme)
    if not 0 < confidence < 1:
        raise ConfigurationError("confidence must lie in (0, 1)")
    j = trace._index(group)
    level = int(trace.thinned_count[j])
    lower = float(trace.partial_sum[j])
    offset = float(scheme.group_log_offset([group])[0])
    done = 0
    if extra_terms > 0:
        rng = rng if rng is not None else np.random.default_rng(derive_seed(config.seed, group))
        lf = scheme.log_table(level + extra_terms + 1)
        lower, level, done = K.clock_extend(rng, p, lf, offset, level, lower, int(extra_terms))
        level = int(level)
    F_next = _base_tail(scheme, level + 1)
    mean = float(_residual_mean(p, np.array([scheme.log_eval(1, level)]),
                                np.array([F_next]), np.array([offset]))[0])
    excess = mean / (1 - confidence)
    method = "markov"
    if scheme.is_monotone():
        ch = _chernoff_excess(scheme, p, level, offset, confidence)
        if ch < excess:
            excess, method = ch, "chernoff"
    return XStarEstimate(group, lower, mean, lower + excess, int(trace.arrivals[j]) + int(done),
                         confidence, method)


@dataclass
class LeadReport:
    lead: int
    separated: bool
    estimates: list
    trace: RubinTrace = field(repr=False)

    def to_dict(self) -> dict:
        return {"lead": self.lead, "separated": self.separated,
                "estimates": [e.to_dict() for e in self.estimates]}


def detect_lead(config: GamConfig, horizon: int, margin: float = 0.05,
                seed: Optional[int] = None) -> LeadReport:
    """Identify the group with the smallest accumulation point.

    ``margin`` is the allowed miss probability of the leader's upper
    quantile (confidence ``1 - margin``).  The lead is *separated* when the
    candidate's upper quantile lies below every other group's realized
    partial sum.  Unborn groups start beyond the current frontier, which
    never exceeds the candidate's ``x*``, but are not otherwise controlled.
    """
    scheme, p = config.scheme, config.p
    _require_summable(scheme)
    if not 0 < margin < 1:
        raise ConfigurationError("margin must lie in (0, 1)")
    tr = simulate_rubin(config, horizon, seed)
    conf = 1 - margin
    L = tr.L
    levels = tr.thinned_count
    lower = tr.partial_sum
    groups = np.arange(1, L + 1)
    offs = scheme.group_log_offset(groups)
    F = _tail_table(scheme, int(levels.max()) + 1)
    log_f = scheme.log_table(int(levels.max()) + 1)
    means = _residual_mean(p, log_f[levels], F[levels + 1], offs)
    uppers = lower + means / (1 - conf)
    cand = int(np.argmin(lower))
    est = estimate_xstar(config, tr, cand + 1, 0, conf)
    uppers[cand] = est.upper_quantile
    others = np.delete(lower, cand)
    separated = bool(others.size == 0 or est.upper_quantile < others.min())
    lead = cand + 1 if separated else int(np.argmin(lower + means)) + 1
    estimates = [
        est if j == cand else
        XStarEstimate(j + 1, float(lower[j]), float(means[j]), float(uppers[j]),
                      int(tr.arrivals[j]), conf)
        for j in range(L)
    ]
    return LeadReport(lead, separated, estimates, tr)


# --------------------------------------------------------------------------
# generation tree
# --------------------------------------------------------------------------

@dataclass
class GenerationTree:
    """Parent links between groups; group 1 is the root at level 0."""

    parent: dict
    level: dict

    @classmethod
    def from_parents(cls, parents) -> "GenerationTree":
        parents = np.asarray(parents, dtype=np.int64)
        par, lev = {}, {1: 0}
        for i in range(2, parents.size + 1):
            u = int(parents[i - 1])
            if not 1 <= u < i:
                raise MissingCounterfactual(f"group {i} has no valid parent record")
            par[i] = u
            lev[i] = lev[u] + 1
        return cls(par, lev)

    @property
    def size(self) -> int:
        return len(self.level)

    def levels(self) -> np.ndarray:
        return np.array([self.level[i] for i in range(1, self.size + 1)], dtype=np.int64)

    def generation(self, n: int) -> list:
        """Groups at exactly level ``n``."""
        return [i for i, l in self.level.items() if l == n]

    def in_tail(self, group: int, n: int) -> bool:
        """Whether ``group`` lies at level ``n`` or deeper."""
        return self.level[group] >= n

    def to_dict(self) -> dict:
        children: dict = {i: [] for i in self.level}
        for c, u in self.parent.items():
            children[u].append(c)
        return {"root": 1,
                "parent": {str(k): v for k, v in self.parent.items()},
                "level": {str(k): v for k, v in self.level.items()},
                "children": {str(k): v for k, v in children.items()}}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def build_generation_tree(trace: Union[RubinTrace, Trajectory]) -> GenerationTree:
    """Tree linking every group to the group its founding arrival would have joined.

    Accepts an embedded trace or a sequential trajectory simulated with
    ``record_parents=True``.
    """
    parents = getattr(trace, "parent", None)
    if parents is None:
        parents = getattr(trace, "parents", None)
    if parents is None:
        raise MissingCounterfactual("trace carries no record of the firing group at creations")
    return GenerationTree.from_parents(parents)
