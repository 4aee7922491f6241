"""Acceptance suite: nine end-to-end checks at their stated tolerances.

Each check prints one ``[criterion N] PASS|FAIL`` line.  Run with
``pytest tests/test_acceptance.py -v`` or directly as a script.
"""
import math
import sys
import time

import numpy as np
import pytest
from scipy import stats

from gamurn.bounds import (BoundInputs, _theta_array, compute_m, constants_C, lead_lower_bound,
                           lead_tail_grid, mgf_products)
from gamurn.gam import GamConfig, Schedule
from gamurn.harness import ExperimentSpec, Kind, binomial_se, run
from gamurn.rubin import sample_clock
from gamurn.urn import (Dichotomy, estur_bound, estur_closed_form_power2, rubin_dichotomy,
                        urn_replicates)
from gamurn.weights import Phase, WeightScheme, classify_phase

POWER2 = WeightScheme.power(2.0)
LINEAR = WeightScheme.linear()


def _cfg(scheme, p):
    return GamConfig(scheme, Schedule.constant(p), 0).to_dict()


def _report(n, ok, detail, seconds):
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'} ({seconds:.1f}s): {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    return ok


# --------------------------------------------------------------------------

def criterion_1():
    """Both simulators reproduce the exact law of the first four labels."""
    details, ok = [], True
    for sim in ("sequential", "rubin"):
        spec = ExperimentSpec(Kind.LABEL_LAW_EQUIVALENCE, _cfg(POWER2, 0.3), [4], 100_000,
                              master_seed=101, params={"simulator": sim, "alpha": 0.01})
        agg = run(spec).aggregates
        chi = agg["chi_square"]
        ok &= bool(agg["passed"])
        details.append(f"{sim}: chi2={chi['statistic']:.2f} dof={chi['dof']} p={chi['p_value']:.3f}")
    return ok, "; ".join(details)


def criterion_2():
    """White stagnation over [1e4, 1e5] never exceeds the product bound by 3 SE."""
    details, ok = [], True
    for i, k in enumerate((1, 2, 3, 5)):
        _, white, _ = urn_replicates(POWER2, POWER2, k, 1, [10_000, 100_000], 10_000,
                                     master_seed=200 + i)
        stag = int((white[:, 0] == white[:, 1]).sum())
        freq = binomial_se(stag, white.shape[0])
        bound = estur_bound(POWER2, k).value
        good = freq["p"] <= bound + 3 * freq["se"]
        ok &= good
        details.append(f"k={k}: freq={freq['p']:.4f}+-{freq['se']:.4f} bound={bound:.4f}")
    return ok, "; ".join(details)


def criterion_3():
    """Product bound minus its error never exceeds the closed form, k = 1..50."""
    bad = []
    for k in range(1, 51):
        rep = estur_bound(POWER2, k)
        closed = estur_closed_form_power2(k)
        if rep.value - rep.abs_error > closed:
            bad.append((k, rep.value, closed))
    if not bad:
        return True, "product bound below closed form for all k <= 50"
    k, v, c = bad[0]
    return False, (f"{len(bad)} of 50 values violate; first k={k}: product={v:.5g} > "
                   f"closed form={c:.5g}; k=50: {bad[-1][1]:.3g} > {bad[-1][2]:.3g}")


def criterion_4():
    """Phase classification on a grid, and all-infinite growth in simulation."""
    wrong = []
    for g in (0.3, 0.5, 1.0, 1.5, 2.0, 3.0):
        for p in (0.0, 0.3, 0.9):
            v = classify_phase(WeightScheme.power(g), p).verdict
            expect = Phase.ALL_INFINITE if g <= 1 else Phase.MONOPOLY
            if v is not expect:
                wrong.append((g, p, v.value))
    spec = ExperimentSpec(Kind.PHASE_CENSUS, _cfg(WeightScheme.power(0.5), 0.2), [100_000], 100,
                          master_seed=400, params={"first_groups": 5, "min_size_threshold": 10})
    above = run(spec).aggregates["first_groups_above"]["count"]
    ok = not wrong and above >= 95
    return ok, f"misclassified={wrong}; min of first 5 groups > 10 in {above}/100 replicates"


def criterion_5():
    """GroupExponential: leadership keeps moving to newer groups."""
    snaps = [2 ** j for j in range(7, 15)]
    spec = ExperimentSpec(Kind.LEADERSHIP_SWITCH, _cfg(WeightScheme.group_exponential(), 0.5),
                          [2 ** 14], 1000, master_seed=500, params={"snapshots": snaps})
    agg = run(spec).aggregates
    med = [agg["median_leader"][str(s)] for s in snaps]
    increasing = all(b > a for a, b in zip(med, med[1:]))
    ok = agg["median_switches"] >= 2 and increasing
    return ok, f"median switches={agg['median_switches']}; median leader index by snapshot={med}"


def criterion_6():
    """Finitely many non-singleton groups for Power(2); steady growth for Linear."""
    H = [10_000, 100_000]
    stab = run(ExperimentSpec(Kind.PHASE_CENSUS, _cfg(POWER2, 0.5), H, 1000, master_seed=600,
                              params={"threshold": 1})).aggregates["stabilization"]
    grow = run(ExperimentSpec(Kind.PHASE_CENSUS, _cfg(LINEAR, 0.5), H, 1000, master_seed=601,
                              params={"threshold": 1})).aggregates["growth"]
    ok = stab["p"] >= 0.9 and grow["p"] >= 0.95
    return ok, (f"Power(2) count unchanged in {stab['p']:.3f} (need >= 0.90); "
                f"Linear grew in {grow['p']:.3f} (need >= 0.95)")


def criterion_7():
    """Two-sequence urn: the three summability cases, and monopoly in simulation."""
    cases = [rubin_dichotomy(LINEAR, LINEAR), rubin_dichotomy(POWER2, LINEAR),
             rubin_dichotomy(POWER2, POWER2)]
    expect = [Dichotomy.BOTH_INFINITE, Dichotomy.WHITE_MONOPOLY_AS, Dichotomy.ONE_SIDED_MONOPOLY]
    spec = ExperimentSpec(Kind.DICHOTOMY_CENSUS, {"W": POWER2.to_dict(), "R": POWER2.to_dict()},
                          [100_000], 1000, master_seed=700, params={"threshold": 100})
    agg = run(spec).aggregates
    both, wl, rl = agg["both_exceed"]["p"], agg["white_leads"]["p"], agg["red_leads"]["p"]
    ok = cases == expect and both < 0.01 and wl > 0 and rl > 0
    return ok, (f"cases={[c.value for c in cases]}; both > 100 in {both:.3f}; "
                f"white leads {wl:.3f}, red leads {rl:.3f}")


def criterion_8():
    """Offspring mean, constants, and both lead bounds against simulation."""
    p = 0.5
    m = compute_m(POWER2, p, k_max=1000, k_min=1000)
    ps = np.asarray(m.partial_sums)
    cauchy = float(ps[-1] - ps[len(ps) // 2 - 1])
    C1, C2 = constants_C(POWER2, p)
    F = math.pi ** 2 / 6
    c_ok = (math.isclose(C1, math.exp(3 * (1 - p) ** 2 * F), rel_tol=1e-10)
            and math.isclose(C2, (1 - p) ** 2, rel_tol=1e-10))

    inputs = BoundInputs(POWER2, p)
    grid = lead_tail_grid(inputs, 2, [2.0, 4.0, 8.0], [5.0, 10.0, 20.0], samples=10_000, seed=800)
    lower = lead_lower_bound(inputs, [2.0, 4.0, 8.0], [5.0, 10.0, 20.0], samples=10_000, seed=800)

    spec = ExperimentSpec(Kind.LEAD_PROBABILITY, _cfg(POWER2, p), [2000], 10_000, master_seed=801)
    agg = run(spec).aggregates
    g2, l1 = agg["lead_in_G2"], agg["lead_is_1"]
    tail_ok = all(cell["value"] >= g2["p"] - 3 * g2["se"] for cell in grid.grid)
    lower_ok = lower <= l1["p"] + 3 * l1["se"]
    ok = cauchy <= 1e-6 and c_ok and tail_ok and lower_ok
    return ok, (f"m={m.value:.8f} (sum over k in (500,1000] = {cauchy:.1e}); C1={C1:.10g} C2={C2:.10g}; "
                f"min tail bound={grid.value:.4f} vs MC P(Lead in G2)={g2['p']:.4f}+-{g2['se']:.4f}; "
                f"lower bound={lower:.4f} vs MC P(Lead=1)={l1['p']:.4f}+-{l1['se']:.4f}")


def _discrete_ks(sample, cdf, support):
    ecdf = np.searchsorted(np.sort(sample), support, side="right") / sample.size
    d = float(np.max(np.abs(ecdf - cdf(support))))
    # the continuous Kolmogorov law is conservative for discrete targets
    return d, float(stats.kstwobign.sf(d * math.sqrt(sample.size)))


def criterion_9():
    """Thinning law, the trivial MGF, and truncation budgets against longer truncations."""
    p, n, N = 0.4, 50, 100_000
    rng = np.random.default_rng(900)
    levels = np.array([sample_clock(POWER2, p, n, rng)[2][n - 1] for _ in range(N)])
    d, pv = _discrete_ks(levels - 1, lambda x: stats.binom.cdf(x, n - 1, 1 - p), np.arange(n))
    zero = mgf_products(POWER2, 0.5, 3, 0.0)
    zero_ok = zero.ey == 1.0 and zero.ez == 1.0

    worst, checked = 0.0, 0
    thetas = _theta_array(POWER2, 0.5, 64)
    for k in (1, 2, 4, 8, 16, 32, 64):
        for th in (float(thetas[k - 1]), 0.5 * float(thetas[k - 1])):
            base = mgf_products(POWER2, 0.5, k, th, tol=1e-10)
            for S in (base.terms, 16, 128, 1024):
                a = mgf_products(POWER2, 0.5, k, th, terms=S)
                b = mgf_products(POWER2, 0.5, k, th, terms=10 * S)
                # both sides carry their own budget; the longer one is the tighter
                for got, ref, err, err_ref in ((a.log_ey, b.log_ey, a.log_err_y, b.log_err_y),
                                               (a.log_ez, b.log_ez, a.log_err_z, b.log_err_z)):
                    if math.isfinite(err):
                        worst = max(worst, abs(got - ref) / (err + err_ref))
                        checked += 1
            assert base.log_err_y <= 0.5e-10 and base.log_err_z <= 0.5e-10
    ok = pv >= 0.01 and zero_ok and worst <= 1.0
    return ok, (f"thinning KS D={d:.5f} p={pv:.3f}; mgf(0)=({zero.ey}, {zero.ez}); "
                f"worst truncation error / budget = {worst:.3f} over {checked} comparisons")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9]


def _check(i):
    t = time.time()
    ok, detail = CRITERIA[i - 1]()
    _report(i, ok, detail, time.time() - t)
    return ok, detail


@pytest.mark.parametrize("i", range(1, 10), ids=[f"criterion_{i}" for i in range(1, 10)])
def test_acceptance(i):
    ok, detail = _check(i)
    assert ok, detail


if __name__ == "__main__":
    results = [_check(i)[0] for i in range(1, 10)]
    print(f"{sum(results)}/9 criteria passed")
    sys.exit(0 if all(results) else 1)
