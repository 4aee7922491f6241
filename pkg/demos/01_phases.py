"""Three growth regimes of the group attachment model.

Sublinear weights let every group grow without bound, superlinear weights
freeze all but one group, and group-dependent exponential weights keep
handing the lead to younger groups.
"""
import numpy as np

from gamurn.gam import GamConfig, Schedule, simulate
from gamurn.harness import leadership_switches
from gamurn.weights import WeightScheme, classify_phase

HORIZON = 100_000
SNAPS = [10 ** j for j in range(2, 6)]

for scheme, p in [(WeightScheme.power(0.5), 0.2), (WeightScheme.power(2.0), 0.5),
                  (WeightScheme.group_exponential(), 0.5)]:
    verdict = classify_phase(scheme, p).verdict.value
    print(f"\n{scheme}, new-group probability {p}: {verdict}")
    tr = simulate(GamConfig(scheme, Schedule.constant(p), seed=1), HORIZON, snapshot_at=SNAPS)
    for n, st in zip(tr.steps, tr.snapshots):
        big = np.sort(st.sizes)[::-1][:3]
        print(f"  n={n:>6}  groups={st.L:>6}  non-singletons={int((st.sizes > 1).sum()):>5}"
              f"  largest={big.tolist()}  leader=#{st.leader}")
    print(f"  leader changes across snapshots: {leadership_switches(tr)}")
