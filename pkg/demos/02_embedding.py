"""Continuous-time embedding: clocks, accumulation points and the lead.

Each group runs an exponential clock whose sum converges when 1/f is
summable.  The group with the smallest limit eventually takes every
arrival, which lets a short simulation name the long-run winner.
"""
import numpy as np

from gamurn.gam import GamConfig, Schedule
from gamurn.rubin import build_generation_tree, detect_lead, estimate_xstar

cfg = GamConfig.from_dict({"scheme": {"family": "power", "gamma": 2.0}, "p": 0.3, "seed": 7})
rep = detect_lead(cfg, 10_000, margin=0.05)
tr = rep.trace
print(f"{tr.n_points} points, {tr.L} groups, sizes of the first five: {tr.sizes[:5].tolist()}")

order = np.argsort(tr.partial_sum)[:4]
print("\nsmallest clock positions (lower bounds on x*):")
for j in order:
    est = estimate_xstar(cfg, tr, int(j) + 1, confidence=0.95)
    print(f"  group {j + 1:>4}: {est.lower:.4f} <= x* <= {est.upper_quantile:.4f}"
          f"  ({est.method}, mean excess {est.tail_mean:.2e})")

print(f"\nlead: group {rep.lead}, separated from the rest: {rep.separated}")
print(f"largest group so far: {int(np.argmax(tr.sizes)) + 1}")

tree = build_generation_tree(tr)
depths = np.bincount(tree.levels())
print(f"generation sizes: {depths.tolist()}; lead sits at generation {tree.level[rep.lead]}")
