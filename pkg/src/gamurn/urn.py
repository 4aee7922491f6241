"""Two-colour reinforced urns.

``RUM(k, f)`` starts with ``k`` white balls and one red ball and draws white
with probability ``f(white) / (f(white) + f(red))``.  The general urn uses
separate sequences ``W`` and ``R`` for the two colours.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from ._util import derive_seed
from .errors import ConfigurationError, DivergentScheme, InconclusiveError, Undecidable
from .weights import WeightScheme

__all__ = [
    "UrnState",
    "UrnRun",
    "BoundReport",
    "Dichotomy",
    "rum_state",
    "rum_step",
    "general_urn_step",
    "run_general_urn",
    "run_rum",
    "urn_replicates",
    "white_stagnation",
    "estur_bound",
    "estur_series",
    "estur_closed_form_power2",
    "rubin_dichotomy",
]


@dataclass(frozen=True)
class UrnState:
    white: int
    red: int
    draws: int = 0
    initial_white: Optional[int] = None
    initial_red: Optional[int] = None

    def __post_init__(self):
        if self.white < 1 or self.red < 1:
            raise ConfigurationError("an urn needs at least one ball of each colour")
        if self.initial_white is None:
            object.__setattr__(self, "initial_white", self.white)
        if self.initial_red is None:
            object.__setattr__(self, "initial_red", self.red)
        if self.white + self.red != self.initial_white + self.initial_red + self.draws:
            raise ConfigurationError("ball count does not match the number of draws")

    def _next(self, white_drawn: bool) -> "UrnState":
        return UrnState(self.white + white_drawn, self.red + (not white_drawn), self.draws + 1,
                        self.initial_white, self.initial_red)


def rum_state(k: int) -> UrnState:
    """Initial composition of ``RUM(k, f)``."""
    return UrnState(int(k), 1)


def _white_prob(W: WeightScheme, R: WeightScheme, white: int, red: int) -> float:
    return 1.0 / (1.0 + math.exp(R.log_eval(1, red) - W.log_eval(1, white)))


def general_urn_step(state: UrnState, W: WeightScheme, R: WeightScheme,
                     rng: np.random.Generator) -> UrnState:
    """One draw: white with probability ``W(white) / (W(white) + R(red))``."""
    return state._next(bool(rng.random() < _white_prob(W, R, state.white, state.red)))


def rum_step(state: UrnState, f: WeightScheme, rng: np.random.Generator) -> UrnState:
    """One draw of ``RUM(k, f)``."""
    return general_urn_step(state, f, f, rng)


@dataclass
class UrnRun:
    """Composition of one urn at a list of draw counts."""

    checkpoints: np.ndarray
    white: np.ndarray
    red: np.ndarray
    white0: int
    red0: int

    @property
    def final(self) -> UrnState:
        return UrnState(int(self.white[-1]), int(self.red[-1]), int(self.checkpoints[-1]),
                        self.white0, self.red0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["draw", "white", "red"])
            w.writerows(zip(self.checkpoints.tolist(), self.white.tolist(), self.red.tolist()))


def _tables(W: WeightScheme, R: WeightScheme, white0: int, red0: int, n_draws: int):
    """Weight tables for the kernel; plain weights when they fit comfortably in a double."""
    tw, tr = W.log_table(white0 + n_draws), R.log_table(red0 + n_draws)
    lo = min(tw[1:].min(), tr[1:].min())
    hi = max(tw[1:].max(), tr[1:].max())
    if hi - lo < 600:
        return np.exp(tw - lo), np.exp(tr - lo), False
    return tw, tr, True


def run_general_urn(W: WeightScheme, R: WeightScheme, white0: int, red0: int,
                    checkpoints: Sequence[int], seed: int) -> UrnRun:
    """Draw until the last checkpoint, recording the composition at each one."""
    cps = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if cps.size == 0 or cps[0] < 0:
        raise ConfigurationError("checkpoints must be nonnegative draw counts")
    n = int(cps[-1])
    tw, tr, log_domain = _tables(W, R, white0, red0, n)
    ow = np.empty(cps.size, dtype=np.int64)
    orr = np.empty(cps.size, dtype=np.int64)
    K.urn_run(np.random.default_rng(seed), tw, tr, log_domain, white0, red0, n, cps, ow, orr)
    return UrnRun(cps, ow, orr, int(white0), int(red0))


def run_rum(f: WeightScheme, k: int, checkpoints: Sequence[int], seed: int) -> UrnRun:
    return run_general_urn(f, f, int(k), 1, checkpoints, seed)


def urn_replicates(W: WeightScheme, R: WeightScheme, white0: int, red0: int,
                   checkpoints: Sequence[int], replicates: int, master_seed: int):
    """White and red counts, shape ``(replicates, len(checkpoints))``, one seed stream per row."""
    cps = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    n = int(cps[-1])
    tw, tr, log_domain = _tables(W, R, white0, red0, n)
    white = np.empty((replicates, cps.size), dtype=np.int64)
    red = np.empty((replicates, cps.size), dtype=np.int64)
    for r in range(replicates):
        rng = np.random.default_rng(derive_seed(master_seed, r))
        K.urn_run(rng, tw, tr, log_domain, white0, red0, n, cps, white[r], red[r])
    return cps, white, red


def white_stagnation(run: UrnRun, start: int, end: int) -> bool:
    """Horizon proxy for "finitely many white draws": no white drawn in ``(start, end]``."""
    idx = {int(c): i for i, c in enumerate(run.checkpoints)}
    return bool(run.white[idx[end]] == run.white[idx[start]])


# --------------------------------------------------------------------------
# monopoly bound
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """A bound value with its propagated numerical error."""

    value: float
    abs_error: float
    terms: int
    inputs: dict

    def to_dict(self) -> dict:
        return {"value": self.value, "abs_error": self.abs_error, "terms": self.terms,
                "inputs": self.inputs}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _require_summable(f: WeightScheme) -> None:
    s = f.summable(1)
    if s is False:
        raise DivergentScheme(f"sum 1/f diverges for {f}")
    if s is None:
        raise InconclusiveError(f"summability of 1/f cannot be decided for {f}")


def _log_product(log_f: np.ndarray, log_F: float) -> float:
    # log prod f F / (1 + f F) = -sum log1p(1 / (f F))
    return -float(np.sum(np.log1p(np.exp(-(log_f + log_F)))))


def estur_bound(f: WeightScheme, k: int, tol: float = 1e-12) -> BoundReport:
    """Upper bound on the probability that ``RUM(k, f)`` draws white finitely often.

    ``(1/2) prod_{l<k} f(l) F_k / (1 + f(l) F_k)`` with ``F_k = sum_{j>=k} 1/f(j)``.
    Each factor is one minus a gambler's-ruin probability.
    """
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    _require_summable(f)
    inputs = {"scheme": f.to_dict(), "k": int(k), "tol": tol}
    if k == 1:
        return BoundReport(0.5, 0.0, 0, inputs)
    F = f.reciprocal_tail(k, tol=tol)
    log_f = f.log_table(k - 1)[1:]
    value = 0.5 * math.exp(_log_product(log_f, math.log(F.value)))
    # the product increases with F_k, so the interval endpoints bracket it
    lo, hi = F.interval
    v_hi = 0.5 * math.exp(_log_product(log_f, math.log(hi)))
    v_lo = 0.5 * math.exp(_log_product(log_f, math.log(lo))) if lo > 0 else 0.0
    err = max(v_hi - value, value - v_lo) + 8 * k * np.finfo(float).eps * value
    err = min(err, value, 1.0 - value)
    return BoundReport(value, err, k - 1, inputs)


def estur_series(f: WeightScheme, tol: float = 1e-8, k_max: int = 100_000) -> BoundReport:
    """``sum_{k>=1}`` of :func:`estur_bound`, with a certified remainder.

    For ``K >= J`` every term beyond ``K`` is at most
    ``(1/2) prod_{l<=J} f(l) F_k**J``, so the remainder is bounded through
    :meth:`WeightScheme.tail_power_sum_bound`.
    """
    _require_summable(f)
    if not f.is_monotone():
        raise InconclusiveError("the series remainder bound needs monotone weights")
    log_f = f.log_table(k_max)
    cum_log_f = np.cumsum(log_f[1:])
    total, err = 0.0, 0.0
    checkpoints = {2 ** i for i in range(4, 40)}
    for k in range(1, k_max + 1):
        rep = estur_bound(f, k, tol=min(tol, 1e-12))
        total += rep.value
        err += rep.abs_error
        if k in checkpoints:
            rem = _series_remainder(f, k, cum_log_f)
            if rem + err < tol:
                return BoundReport(total, err + rem, k, {"scheme": f.to_dict(), "tol": tol})
    raise InconclusiveError(f"series remainder not below {tol} by k = {k_max}")


def _series_remainder(f: WeightScheme, K: int, cum_log_f: np.ndarray) -> float:
    best = math.inf
    for J in range(1, min(K, 30) + 1):
        tail = f.tail_power_sum_bound(K, J)
        if math.isinf(tail) or tail <= 0:
            continue
        best = min(best, 0.5 * math.exp(cum_log_f[J - 1] + math.log(tail)))
    return best


def estur_closed_form_power2(k: int) -> float:
    """``(1/2) exp(-(k-1) + pi / (2 sqrt(k+2)))``, the closed form offered for ``f(j) = j**2``."""
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    return 0.5 * math.exp(-(k - 1) + math.pi / (2 * math.sqrt(k + 2)))


# --------------------------------------------------------------------------
# Rubin's dichotomy
# --------------------------------------------------------------------------

class Dichotomy(str, enum.Enum):
    BOTH_INFINITE = "both_infinite"
    # sum 1/W < inf, sum 1/R = inf: the red count stays finite, white takes over
    WHITE_MONOPOLY_AS = "white_monopoly_as"
    ONE_SIDED_MONOPOLY = "one_sided_monopoly"
    # mirror of WHITE_MONOPOLY_AS with the colours swapped
    RED_MONOPOLY_AS = "red_monopoly_as"


def rubin_dichotomy(W: WeightScheme, R: WeightScheme) -> Dichotomy:
    """Long-run behaviour of the two-sequence urn from summability of ``1/W`` and ``1/R``."""
    sw, sr = W.summable(1), R.summable(1)
    if sw is None or sr is None:
        raise Undecidable("summability cannot be decided for a table without a tail rule")
    if not sw and not sr:
        return Dichotomy.BOTH_INFINITE
    if sw and sr:
        return Dichotomy.ONE_SIDED_MONOPOLY
    return Dichotomy.WHITE_MONOPOLY_AS if sw else Dichotomy.RED_MONOPOLY_AS
