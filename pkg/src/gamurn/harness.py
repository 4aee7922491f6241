"""Replicated Monte Carlo experiments with reproducible seed streams.

An :class:`ExperimentSpec` names an experiment kind, its configuration and a
master seed.  Replicate ``i`` always draws from ``derive_seed(master_seed, i)``,
so results do not depend on the worker count or on execution order.
"""
from __future__ import annotations

import csv
import datetime as _dt
import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from scipy import stats

from . import __version__
from ._util import derive_seed
from .errors import ConfigurationError
from .gam import GamConfig, exact_label_law, simulate
from .rubin import build_generation_tree, detect_lead, simulate_rubin
from .urn import estur_bound, rubin_dichotomy, run_general_urn
from .weights import WeightScheme

__all__ = [
    "Kind",
    "ExperimentSpec",
    "ExperimentReport",
    "run",
    "leadership_switches",
    "finite_degree_census",
    "binomial_se",
    "chi_square_law",
    "aggregate",
]


class Kind(str, enum.Enum):
    PHASE_CENSUS = "PhaseCensus"
    LEADERSHIP_SWITCH = "LeadershipSwitch"
    LABEL_LAW_EQUIVALENCE = "LabelLawEquivalence"
    URN_MONOPOLY = "UrnMonopoly"
    LEAD_PROBABILITY = "LeadProbability"
    DICHOTOMY_CENSUS = "DichotomyCensus"


_URN_KINDS = (Kind.URN_MONOPOLY, Kind.DICHOTOMY_CENSUS)


@dataclass
class ExperimentSpec:
    """What to run.

    ``config`` is a :class:`GamConfig` dictionary for the attachment-model
    kinds and ``{"W": scheme, "R": scheme, "white0": int, "red0": int}`` for
    the urn kinds.  Kind-specific knobs live in ``params``.
    """

    kind: Kind
    config: dict
    horizons: list
    replicates: int
    master_seed: int
    output_path: Optional[str] = None
    params: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        self.kind = Kind(self.kind)
        self.horizons = [int(h) for h in self.horizons]
        if self.replicates < 1:
            raise ConfigurationError("replicates must be at least 1")
        if not self.horizons:
            raise ConfigurationError("at least one horizon is required")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ConfigurationError("horizons must be strictly increasing")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "config": self.config, "horizons": self.horizons,
                "replicates": self.replicates, "master_seed": self.master_seed,
                "output_path": self.output_path, "params": self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        return cls(d["kind"], d["config"], list(d["horizons"]), int(d["replicates"]),
                   int(d.get("master_seed", 0)), d.get("output_path"), dict(d.get("params", {})),
                   int(d.get("workers", 1)))

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def gam_config(self) -> GamConfig:
        return GamConfig.from_dict({**self.config, "seed": self.config.get("seed", 0)})


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    records: list
    aggregates: dict
    provenance: dict

    def csv_body(self) -> str:
        buf = io.StringIO()
        if self.records:
            cols = list(self.records[0].keys())
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(cols)
            for rec in self.records:
                w.writerow([_cell(rec[c]) for c in cols])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"aggregates": self.aggregates, "provenance": self.provenance}

    def write(self, path) -> tuple[Path, Path]:
        """Write ``<path>.csv`` (per replicate) and ``<path>.json`` (summary)."""
        base = Path(path)
        base.parent.mkdir(parents=True, exist_ok=True)
        csv_path = base.with_suffix(".csv")
        json_path = base.with_suffix(".json")
        with open(csv_path, "w", newline="") as fh:
            fh.write("# provenance: " + json.dumps(self.provenance, sort_keys=True) + "\n")
            fh.write(self.csv_body())
        with open(json_path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, default=_json_default)
        return csv_path, json_path


def _cell(v: Any) -> str:
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------

def binomial_se(successes: int, trials: int) -> dict:
    """Frequency with its standard error.

    Normal approximation when both counts are at least 5; otherwise the
    half-width of the one-sigma Wilson interval, which stays positive at 0
    and ``trials``.
    """
    if trials < 1:
        raise ConfigurationError("need at least one trial")
    p = successes / trials
    if min(successes, trials - successes) >= 5:
        return {"p": p, "se": math.sqrt(p * (1 - p) / trials), "method": "normal"}
    z = 1.0
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return {"p": p, "se": half, "method": "wilson", "centre": centre}


def chi_square_law(observed: dict, law: dict, replicates: int, min_expected: float = 5.0) -> dict:
    """Pearson test of observed sequence counts against an exact law.

    Cells are sorted by expected count and merged from the smallest upwards
    until every cell expects at least ``min_expected``.  An observed sequence
    outside the support gives p-value 0.
    """
    if any(k not in law or law[k] == 0 for k in observed):
        return {"statistic": math.inf, "dof": 0, "p_value": 0.0, "cells": 0}
    keys = sorted(law, key=lambda k: (law[k], k))
    cells_e, cells_o = [], []
    acc_e, acc_o = 0.0, 0
    for k in keys:
        acc_e += law[k] * replicates
        acc_o += observed.get(k, 0)
        if acc_e >= min_expected:
            cells_e.append(acc_e)
            cells_o.append(acc_o)
            acc_e, acc_o = 0.0, 0
    if acc_e > 0 or acc_o > 0:
        if cells_e:
            cells_e[-1] += acc_e
            cells_o[-1] += acc_o
        else:
            cells_e.append(acc_e)
            cells_o.append(acc_o)
    if len(cells_e) < 2:
        return {"statistic": 0.0, "dof": 0, "p_value": 1.0, "cells": len(cells_e)}
    e = np.array(cells_e)
    o = np.array(cells_o, dtype=float)
    e *= o.sum() / e.sum()
    stat, pv = stats.chisquare(o, e)
    return {"statistic": float(stat), "dof": len(cells_e) - 1, "p_value": float(pv),
            "cells": len(cells_e)}


def leadership_switches(trajectory) -> int:
    """Number of consecutive snapshot pairs whose leaders differ.

    Accepts a :class:`~gamurn.gam.Trajectory` or a plain sequence of leaders.
    """
    leaders = getattr(trajectory, "leaders", trajectory)
    return int(sum(a != b for a, b in zip(leaders, leaders[1:])))


# --------------------------------------------------------------------------
# per-replicate work
# --------------------------------------------------------------------------

def _powers_of_two(horizon: int) -> list:
    out, t = [], 1
    while t <= horizon:
        out.append(t)
        t *= 2
    return out


def _replicate(spec: ExperimentSpec, i: int) -> dict:
    seed = derive_seed(spec.master_seed, i)
    kind, P = spec.kind, spec.params
    rec: dict = {"replicate": i, "seed": seed}
    if kind in _URN_KINDS:
        W = WeightScheme.from_dict(spec.config["W"])
        R = WeightScheme.from_dict(spec.config.get("R", spec.config["W"]))
        w0, r0 = int(spec.config.get("white0", 1)), int(spec.config.get("red0", 1))
        urn = run_general_urn(W, R, w0, r0, [0] + spec.horizons, seed)
        for h, w, r in zip(urn.checkpoints[1:], urn.white[1:], urn.red[1:]):
            rec[f"white_{h}"] = int(w)
            rec[f"red_{h}"] = int(r)
        return rec
    cfg = spec.gam_config().with_seed(seed)
    if kind is Kind.PHASE_CENSUS:
        threshold = int(P.get("threshold", 1))
        first = int(P.get("first_groups", 5))
        tr = simulate(cfg, spec.horizons[-1], snapshot_at=spec.horizons,
                      sampler=P.get("sampler", "tree"))
        for h, st in zip(tr.steps, tr.snapshots):
            rec[f"count_{h}"] = int((st.sizes > threshold).sum())
            rec[f"groups_{h}"] = st.L
        rec["min_first_groups"] = int(tr.final.sizes[:first].min())
        rec["max_size"] = int(tr.final.sizes.max())
        return rec
    if kind is Kind.LEADERSHIP_SWITCH:
        snaps = P.get("snapshots") or _powers_of_two(spec.horizons[-1])
        tr = simulate(cfg, spec.horizons[-1], snapshot_at=snaps, sampler=P.get("sampler", "tree"))
        rec["switches"] = leadership_switches(tr)
        for h, ld in zip(tr.steps, tr.leaders):
            rec[f"leader_{h}"] = int(ld)
        return rec
    if kind is Kind.LABEL_LAW_EQUIVALENCE:
        length = spec.horizons[-1]
        sim = P.get("simulator", "sequential")
        if sim == "rubin":
            labels = simulate_rubin(cfg, length, seed=seed).labels
        else:
            labels = simulate(cfg, length, sampler=P.get("sampler", "tree"), record_labels=True).labels
        rec["labels"] = "-".join(str(int(x)) for x in labels)
        return rec
    if kind is Kind.LEAD_PROBABILITY:
        rep = detect_lead(cfg, spec.horizons[-1], float(P.get("margin", 0.05)), seed=seed)
        tree = build_generation_tree(rep.trace)
        rec["lead"] = rep.lead
        rec["separated"] = int(rep.separated)
        rec["lead_level"] = tree.level[rep.lead]
        rec["groups"] = rep.trace.L
        rec["size_argmax"] = int(np.argmax(rep.trace.sizes)) + 1
        return rec
    raise ConfigurationError(f"unhandled kind {kind}")


def _chunk(spec_dict: dict, start: int, stop: int) -> list:
    spec = ExperimentSpec.from_dict(spec_dict)
    return [_replicate(spec, i) for i in range(start, stop)]


# --------------------------------------------------------------------------
# aggregation
# --------------------------------------------------------------------------

def aggregate(spec: ExperimentSpec, records: Sequence[dict]) -> dict:
    """Summary statistics of a kind; a pure function of the records."""
    n = len(records)
    kind, P, H = spec.kind, spec.params, spec.horizons
    out: dict = {"replicates": n}
    if kind is Kind.PHASE_CENSUS:
        counts = np.array([[r[f"count_{h}"] for h in H] for r in records])
        out["mean_count"] = {str(h): float(counts[:, j].mean()) for j, h in enumerate(H)}
        if len(H) >= 2:
            same = int((counts[:, -1] == counts[:, -2]).sum())
            grew = int((counts[:, -1] > counts[:, -2]).sum())
            out["stabilization"] = binomial_se(same, n)
            out["growth"] = binomial_se(grew, n)
        thr = P.get("min_size_threshold")
        if thr is not None:
            above = int(sum(r["min_first_groups"] > thr for r in records))
            out["first_groups_above"] = {"threshold": thr, "count": above, **binomial_se(above, n)}
    elif kind is Kind.LEADERSHIP_SWITCH:
        sw = np.array([r["switches"] for r in records])
        lead_cols = [k for k in records[0] if k.startswith("leader_")]
        out["median_switches"] = float(np.median(sw))
        out["zero_switch"] = binomial_se(int((sw == 0).sum()), n)
        out["median_leader"] = {k[7:]: float(np.median([r[k] for r in records])) for k in lead_cols}
    elif kind is Kind.LABEL_LAW_EQUIVALENCE:
        cfg = spec.gam_config()
        law = exact_label_law(cfg.scheme, cfg.schedule, H[-1])
        observed: dict = {}
        for r in records:
            key = tuple(int(x) for x in r["labels"].split("-"))
            observed[key] = observed.get(key, 0) + 1
        out["chi_square"] = chi_square_law(observed, law, n)
        out["alpha"] = float(P.get("alpha", 0.01))
        out["passed"] = out["chi_square"]["p_value"] > out["alpha"]
    elif kind is Kind.URN_MONOPOLY:
        a, b = H[-2], H[-1]
        stag = int(sum(r[f"white_{a}"] == r[f"white_{b}"] for r in records))
        out["white_stagnation"] = binomial_se(stag, n)
        W = WeightScheme.from_dict(spec.config["W"])
        same = spec.config.get("R", spec.config["W"]) == spec.config["W"]
        if same and int(spec.config.get("red0", 1)) == 1 and W.summable(1):
            rep = estur_bound(W, int(spec.config.get("white0", 1)))
            out["bound"] = rep.value
            out["within_bound"] = (out["white_stagnation"]["p"]
                                   <= rep.value + 3 * out["white_stagnation"]["se"])
    elif kind is Kind.LEAD_PROBABILITY:
        lead1 = int(sum(r["lead"] == 1 for r in records))
        out["lead_is_1"] = binomial_se(lead1, n)
        for lvl in (1, 2, 3):
            c = int(sum(r["lead_level"] >= lvl for r in records))
            out[f"lead_in_G{lvl}"] = binomial_se(c, n)
        out["separated"] = binomial_se(int(sum(r["separated"] for r in records)), n)
    elif kind is Kind.DICHOTOMY_CENSUS:
        h = H[-1]
        thr = int(P.get("threshold", 100))
        both = int(sum(r[f"white_{h}"] > thr and r[f"red_{h}"] > thr for r in records))
        white_lead = int(sum(r[f"white_{h}"] > r[f"red_{h}"] for r in records))
        red_lead = int(sum(r[f"red_{h}"] > r[f"white_{h}"] for r in records))
        out["both_exceed"] = {"threshold": thr, **binomial_se(both, n)}
        out["white_leads"] = binomial_se(white_lead, n)
        out["red_leads"] = binomial_se(red_lead, n)
        W = WeightScheme.from_dict(spec.config["W"])
        R = WeightScheme.from_dict(spec.config.get("R", spec.config["W"]))
        out["dichotomy"] = rubin_dichotomy(W, R).value
    return out


def _provenance(spec: ExperimentSpec) -> dict:
    import numba
    import scipy
    return {"spec": spec.to_dict(), "master_seed": spec.master_seed, "version": __version__,
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}


def run(spec: ExperimentSpec, workers: Optional[int] = None) -> ExperimentReport:
    """Run every replicate, aggregate, and write the report if ``output_path`` is set."""
    workers = spec.workers if workers is None else int(workers)
    n = spec.replicates
    if workers <= 1:
        records = [_replicate(spec, i) for i in range(n)]
    else:
        bounds = np.linspace(0, n, min(n, 4 * workers) + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = ex.map(_chunk, [spec.to_dict()] * (bounds.size - 1), bounds[:-1].tolist(),
                           bounds[1:].tolist())
            records = [r for part in parts for r in part]
    report = ExperimentReport(spec, records, aggregate(spec, records), _provenance(spec))
    if spec.output_path:
        report.write(spec.output_path)
    return report


def finite_degree_census(config: GamConfig, horizons: Sequence[int], threshold: int,
                         replicates: int, seed: int, workers: int = 1,
                         output_path: Optional[str] = None) -> ExperimentReport:
    """Count groups larger than ``threshold`` at each horizon.

    ``aggregates["stabilization"]`` is the fraction of replicates whose count
    is unchanged between the last two horizons.
    """
    spec = ExperimentSpec(Kind.PHASE_CENSUS, config.to_dict(), list(horizons), replicates, seed,
                          output_path, {"threshold": int(threshold)}, workers)
    return run(spec)
