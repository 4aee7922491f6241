"""Sequential simulation of the generalized attachment model.

At time ``n`` there are ``n`` members spread over ``L_n`` groups.  The next
arrival founds group ``L_n + 1`` with probability ``s_n``; otherwise it joins
group ``k`` with probability proportional to ``f_k(A_k(n))``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels as K
from ._util import derive_seed, tree_capacity
from .errors import ConfigurationError
from .weights import WeightScheme

__all__ = [
    "Schedule",
    "GamConfig",
    "GamState",
    "Trajectory",
    "SAMPLERS",
    "step",
    "simulate",
    "label_sequences",
    "exact_label_law",
]

SAMPLERS = {"tree": K.MODE_TREE, "gumbel": K.MODE_GUMBEL, "linear": K.MODE_LINEAR}


@dataclass(frozen=True)
class Schedule:
    """New-group probabilities ``s_1, s_2, ...`` with a declared bound ``sup < 1``.

    ``s_n`` drives the transition from ``n`` to ``n + 1`` members, so ``s_1``
    decides the second arrival.  A finite ``values`` list repeats its last entry.
    """

    kind: str
    sup: float
    values: tuple = ()
    rule: Optional[Callable[[int], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 <= self.sup < 1:
            raise ConfigurationError("the bound on s_n must lie in [0, 1)")
        if self.kind == "sequence" and not self.values and self.rule is None:
            raise ConfigurationError("a sequence schedule needs values or a rule")
        if any(not 0 <= v <= self.sup for v in self.values):
            raise ConfigurationError("every s_n must lie in [0, sup]")

    @classmethod
    def constant(cls, p: float) -> "Schedule":
        return cls("constant", float(p))

    @classmethod
    def sequence(cls, values: Sequence[float], sup: Optional[float] = None) -> "Schedule":
        vals = tuple(float(v) for v in values)
        return cls("sequence", max(vals) if sup is None else float(sup), vals)

    @classmethod
    def from_rule(cls, rule: Callable[[int], float], sup: float) -> "Schedule":
        return cls("sequence", float(sup), (), rule)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def s(self, n: int) -> float:
        if n < 1:
            raise ConfigurationError("s_n is defined for n >= 1")
        if self.kind == "constant":
            return self.sup
        if self.rule is not None:
            v = float(self.rule(n))
            if not 0 <= v <= self.sup:
                raise ConfigurationError(f"s_{n} = {v} violates the declared bound {self.sup}")
            return v
        return self.values[min(n, len(self.values)) - 1]

    def array(self, horizon: int) -> np.ndarray:
        """``a[n] = s_n`` for ``n = 1..horizon`` (``a[0]`` unused)."""
        a = np.zeros(horizon + 1)
        if self.kind == "constant":
            a[1:] = self.sup
        elif self.rule is not None:
            a[1:] = [self.s(n) for n in range(1, horizon + 1)]
        else:
            vals = np.asarray(self.values)
            m = min(horizon, vals.size)
            a[1:m + 1] = vals[:m]
            a[m + 1:] = vals[-1]
        return a

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "p": self.sup}
        if self.rule is not None:
            raise ConfigurationError("rule-based schedules are not serializable")
        return {"kind": "sequence", "values": list(self.values), "sup": self.sup}

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        if d.get("kind", "constant") == "constant":
            return cls.constant(d["p"])
        return cls.sequence(d["values"], d.get("sup"))


@dataclass(frozen=True)
class GamConfig:
    scheme: WeightScheme
    schedule: Schedule
    seed: int = 0

    @property
    def p(self) -> float:
        return self.schedule.sup

    def with_seed(self, seed: int) -> "GamConfig":
        return GamConfig(self.scheme, self.schedule, int(seed))

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.to_dict(), "s": self.schedule.to_dict(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "GamConfig":
        """Inverse of :meth:`to_dict`; ``schedule`` and a bare ``p`` are accepted for ``s``."""
        if "s" in d or "schedule" in d:
            sched = Schedule.from_dict(d.get("s", d.get("schedule")))
        elif "p" in d:
            sched = Schedule.constant(d["p"])
        else:
            raise ConfigurationError("config needs a schedule under 's' (or a constant 'p')")
        if "scheme" not in d:
            raise ConfigurationError("config needs a weight 'scheme'")
        return cls(WeightScheme.from_dict(d["scheme"]), sched, int(d.get("seed", 0)))


@dataclass
class GamState:
    """Group sizes ``A_1(n), ..., A_L(n)`` and ``log sum_s f_s(A_s(n))``."""

    sizes: np.ndarray
    n: int
    log_total_weight: float

    @property
    def L(self) -> int:
        return int(self.sizes.size)

    @property
    def leader(self) -> int:
        return int(np.argmax(self.sizes)) + 1

    @classmethod
    def initial(cls, scheme: WeightScheme) -> "GamState":
        return cls(np.array([1], dtype=np.int64), 1, scheme.log_eval(1, 1))

    @classmethod
    def from_sizes(cls, scheme: WeightScheme, sizes) -> "GamState":
        sizes = np.asarray(sizes, dtype=np.int64)
        return cls(sizes, int(sizes.sum()), _log_total(scheme, sizes))


def _log_total(scheme: WeightScheme, sizes: np.ndarray) -> float:
    lw = scheme.log_weights(sizes)
    top = lw.max()
    return float(top + math.log(np.exp(lw - top).sum()))


def step(state: GamState, config: GamConfig, rng: np.random.Generator) -> GamState:
    """One arrival, with group selection by Gumbel-max over log-weights."""
    scheme = config.scheme
    sizes = state.sizes.copy()
    if rng.random() < config.schedule.s(state.n):
        sizes = np.append(sizes, 1)
    else:
        lw = scheme.log_weights(sizes)
        k = int(np.argmax(lw + rng.gumbel(size=lw.size)))
        sizes[k] += 1
    return GamState(sizes, state.n + 1, _log_total(scheme, sizes))


@dataclass
class Trajectory:
    steps: list
    snapshots: list
    leaders: list
    final: GamState
    labels: Optional[np.ndarray] = None
    parents: Optional[np.ndarray] = None

    def rows(self):
        """``(n, group_index, size)`` rows over all snapshots."""
        for n, st in zip(self.steps, self.snapshots):
            for j, a in enumerate(st.sizes, start=1):
                yield n, j, int(a)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "group_index", "size"])
            w.writerows(self.rows())

    def to_dict(self) -> dict:
        return {
            "snapshots": [
                {"n": n, "sizes": st.sizes.tolist(), "leader": ld,
                 "log_total_weight": st.log_total_weight}
                for n, st, ld in zip(self.steps, self.snapshots, self.leaders)
            ],
            "final": {"n": self.final.n, "sizes": self.final.sizes.tolist()},
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


class _Engine:
    """Buffers for one run of the compiled sampler."""

    def __init__(self, config: GamConfig, horizon: int, sampler: str):
        if sampler not in SAMPLERS:
            raise ConfigurationError(f"unknown sampler {sampler!r}")
        scheme = config.scheme
        self.mode = SAMPLERS[sampler]
        self.log_f = scheme.log_table(horizon + 1)
        self.cubic = scheme.group_dependent
        if self.mode == K.MODE_LINEAR:
            hi = np.max(self.log_f[1:]) + (float(horizon) ** 3 if self.cubic else 0.0)
            if self.cubic or hi > 600 or np.min(self.log_f[1:]) < -600:
                raise ConfigurationError("the linear-scan sampler needs weights within double range")
        self.s_arr = config.schedule.array(horizon)
        self.cap = tree_capacity(horizon)
        self.sizes = np.zeros(horizon + 1, dtype=np.int64)
        self.logw = np.full(horizon + 1, -np.inf)
        self.w = np.zeros(horizon + 1)
        self.total = np.zeros(1)
        self.tree = np.full(2 * self.cap if self.mode == K.MODE_TREE else 2, -np.inf)
        self.labels = np.zeros(horizon + 1, dtype=np.int64)
        self.parents = np.zeros(horizon + 2, dtype=np.int64)
        self.sizes[0] = 1
        lw0 = self.log_f[1] + (1.0 if self.cubic else 0.0)
        self.logw[0] = lw0
        if self.mode == K.MODE_TREE:
            K.lse_tree_set(self.tree, self.cap, 0, lw0)
        elif self.mode == K.MODE_LINEAR:
            self.w[0] = math.exp(lw0)
            self.total[0] = self.w[0]
        self.labels[0] = 1
        self.L, self.n = 1, 1

    def advance(self, rng, target: int, record_labels: bool, record_parents: bool) -> None:
        self.L, self.n = K.gam_advance(
            rng, self.mode, self.sizes, self.logw, self.w, self.total, self.tree, self.cap,
            self.L, self.n, target, self.s_arr, self.log_f, self.cubic,
            self.labels, self.parents, record_labels, record_parents)

    def state(self) -> GamState:
        sizes = self.sizes[:self.L].copy()
        lw = self.logw[:self.L]
        top = lw.max()
        return GamState(sizes, self.n, float(top + math.log(np.exp(lw - top).sum())))


def simulate(config: GamConfig, horizon: int, snapshot_at: Sequence[int] = (),
             sampler: str = "tree", record_labels: bool = False,
             record_parents: bool = False) -> Trajectory:
    """Run one trajectory to ``horizon`` members.

    ``snapshot_at`` lists member counts at which the state is recorded; the
    final state is always returned.  Leaders use the smallest index on ties.
    With ``record_parents`` the group that the founding arrival would have
    joined is drawn at every creation (needed for the generation tree).
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")
    rng = np.random.default_rng(config.seed)
    eng = _Engine(config, horizon, sampler)
    steps, snaps, leaders = [], [], []
    for t in sorted(set(int(x) for x in snapshot_at if 1 <= x <= horizon)):
        eng.advance(rng, t, record_labels, record_parents)
        st = eng.state()
        steps.append(t)
        snaps.append(st)
        leaders.append(st.leader)
    eng.advance(rng, horizon, record_labels, record_parents)
    final = eng.state()
    return Trajectory(
        steps, snaps, leaders, final,
        labels=eng.labels[:horizon].copy() if record_labels else None,
        parents=eng.parents[:eng.L].copy() if record_parents else None,
    )


def label_sequences(config: GamConfig, length: int, replicates: int, master_seed: int,
                    sampler: str = "tree") -> np.ndarray:
    """Group label of each of the first ``length`` arrivals, one row per replicate."""
    out = np.empty((replicates, length), dtype=np.int64)
    for r in range(replicates):
        tr = simulate(config.with_seed(derive_seed(master_seed, r)), length,
                      sampler=sampler, record_labels=True)
        out[r] = tr.labels
    return out


def exact_label_law(scheme: WeightScheme, schedule: Schedule, length: int) -> dict:
    """Exact law of the first ``length`` labels, by enumerating every path.

    Probabilities come straight from the transition rule; no sampling code is
    shared with the simulators.
    """
    law: dict = {}

    def rec(seq, sizes, prob):
        n = len(seq)
        if n == length:
            law[tuple(seq)] = law.get(tuple(seq), 0.0) + prob
            return
        s = schedule.s(n)
        if s > 0:
            rec(seq + [len(sizes) + 1], sizes + [1], prob * s)
        if s < 1:
            lw = [scheme.log_eval(j, a) for j, a in enumerate(sizes, start=1)]
            top = max(lw)
            ws = [math.exp(v - top) for v in lw]
            tot = math.fsum(ws)
            for j, wj in enumerate(ws):
                if wj == 0.0:
                    continue
                nxt = list(sizes)
                nxt[j] += 1
                rec(seq + [j + 1], nxt, prob * (1 - s) * wj / tot)

    rec([1], [1], 1.0)
    return law
