"""Numerical ingredients of the lead-probability bounds for f(j) = j^2.

The offspring mean m, the constants C1 and C2, and a Monte Carlo rate c_n
combine into an upper bound on the chance that the eventual leader sits
deep in the generation tree.
"""
from gamurn.bounds import BoundInputs, compute_m, constants_C, estimate_cn, lead_tail_bound
from gamurn.weights import WeightScheme

inputs = BoundInputs(WeightScheme.power(2.0), 0.5)
m = compute_m(inputs.scheme, inputs.p)
print(f"m = {m.value:.10f} +- {m.abs_error:.1e} after {m.terms} terms")
C1, C2 = constants_C(inputs.scheme, inputs.p)
print(f"C1 = {C1:.6f}, C2 = {C2:.6f}")

for n in (64, 256):
    est = estimate_cn(inputs.scheme, inputs.p, r=2.0, M=1.0, n=n, samples=20_000, seed=n, m=m.value)
    print(f"c_{n}(r=2, M=1) = {est.value:.4f} +- {est.std_error:.4f}"
          f"  (k* = {est.k_star}, acceptance {est.acceptance:.3f})")

for n in (2, 64):
    b = lead_tail_bound(inputs, n, r=2.0, M=60.0, samples=20_000, seed=1)
    parts = ", ".join(f"{x:.3g}" for x in b.summands)
    print(f"P(lead in generation >= {n}) <= {b.value:.4g}  [{parts}]")
