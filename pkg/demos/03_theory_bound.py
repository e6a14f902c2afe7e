"""Expected-mistake bound: what the calculator says about a task sequence.

The bound has two pieces.  The main term sums per-task error rates that
scale with sqrt(entropy / budget) / gap: low-entropy contexts and large
gaps make tasks cheap.  The remainder term prices the chance that an early
mistake derails the later context chain.  Run:

    python demos/03_theory_bound.py
"""

import math

import numpy as np

from seqbai import (BoundInputs, allocation_trace, kl_discrete, oracle_bound,
                    optimal_allocation, theorem1_bound)

J, M = 10, 20

print("== Budget sweep ==")
print("Per-task gap 2, all context entropies at 30% of ln(J):")
ent = 0.3 * math.log(J)
print("   budget n |   main | remainder |  total")
for n in (100, 1_000, 10_000, 100_000):
    b = theorem1_bound(BoundInputs(n=n, J=J, gaps=(2.0,) * M,
                                   entropies=(ent,) * M))
    print(f"  {n:9d} | {b.main:6.3f} | {b.remainder:9.5f} | {b.total:6.3f}")

print()
print("== Entropy sweep (n = 10,000) ==")
print("Sharper context priors buy a smaller main term:")
for frac in (1.0, 0.5, 0.1, 0.0):
    b = theorem1_bound(BoundInputs(n=10_000, J=J, gaps=(2.0,) * M,
                                   entropies=(frac * math.log(J),) * M))
    print(f"  entropy = {frac:4.1f} * ln(J): main = {b.main:.4f},"
          f" total = {b.total:.4f}")

print()
print("== Oracle reference ==")
inp = BoundInputs(n=10_000, J=J, gaps=(2.0,) * M, entropies=(ent,) * M,
                  mistake_cost=3.0)
b = theorem1_bound(inp)
o = oracle_bound(inp)
print(f"expected mistakes <= {b.total:.4f}; summed per-task error rates ="
      f" {o.error_sum:.4f}, worth {o.expected_cost:.4f} at cost 3 per"
      " mistake")

print()
print("== Allocation diagnostics ==")
p_star = optimal_allocation(J=4, beta=0.5, best_arm=2)
print(f"Optimal pull fractions (J=4, beta=0.5, best arm 2): {p_star.round(3)}")
uniform = np.full(4, 0.25)
print(f"KL(uniform, optimal) = {kl_discrete(uniform, p_star):.4f} nats")

# a uniform warmup followed by pulls locked onto the optimal fractions
pulls = [1, 2, 3, 4] * 3 + [2, 1, 2, 3, 2, 4] * 18
kls = allocation_trace(pulls, best_arm=2, J=4, beta=0.5,
                       checkpoints=(12, 60, 120))
print("KL of the running empirical allocation at t=12, 60, 120: "
      + ", ".join(f"{float(k):.4f}" for k in kls))
