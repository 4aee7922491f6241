"""Reinforced urns: how often does the favoured colour stall?

RUM(k, f) starts with k white balls and one red.  With f(j) = j^2 the urn
ends in a monopoly, and the chance that white is the loser is bounded by a
product over gambler's-ruin factors.
"""
from gamurn.harness import binomial_se
from gamurn.urn import (estur_bound, estur_closed_form_power2, rubin_dichotomy, urn_replicates)
from gamurn.weights import WeightScheme

f = WeightScheme.power(2.0)
print(" k   stalled over [1e3, 1e4]     bound   closed form")
for k in (1, 2, 3, 5):
    _, white, _ = urn_replicates(f, f, k, 1, [1000, 10_000], 2000, master_seed=k)
    est = binomial_se(int((white[:, 0] == white[:, 1]).sum()), white.shape[0])
    print(f"{k:>2}   {est['p']:.4f} +- {est['se']:.4f}          {estur_bound(f, k).value:.4f}"
          f"   {estur_closed_form_power2(k):.4f}")

lin = WeightScheme.linear()
for W, R in [(lin, lin), (f, lin), (f, f)]:
    print(f"W={W}, R={R}: {rubin_dichotomy(W, R).value}")
