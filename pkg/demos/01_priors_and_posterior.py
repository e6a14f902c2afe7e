"""Mixture beliefs: how context priors shape the posterior over arms.

A task's belief is a J-component Gaussian mixture; component k encodes the
hypothesis "arm k pays the bonus".  Context (the previous task's answer)
sets the component weights, and each observed reward reweights the
components by its predictive likelihood.  Run:

    python demos/01_priors_and_posterior.py
"""

import numpy as np

from seqbai import (MarkovPrior, MixturePriorParams, RngStream,
                    build_mixture_prior, conditional_entropy)

J = 5
prior = MarkovPrior(p=0.8, J=J)

print("== Successor prior ==")
print(f"After answering arm 2, the next task's arm weights (p=0.8, J={J}):")
dist = prior.next_dist(2)
print("  " + "  ".join(f"arm{j + 1}={w:.3f}" for j, w in enumerate(dist)))
print(f"Conditional entropy of that row: {conditional_entropy(dist):.4f} nats"
      f" (uniform would be {np.log(J):.4f})")

print()
print("== Posterior updates ==")
params = MixturePriorParams(delta=2.0, sigma0=np.sqrt(0.2))
post = build_mixture_prior(dist, params, noise_var=1.0)
print("The mixture starts at the prior weights above.  Suppose the truth is")
print("arm 3 (the favoured successor).  We pull arm 3 and watch the belief:")

rng = RngStream(1).generator()
for t in range(1, 7):
    reward = rng.normal(2.0, 1.0)  # arm 3 pays mean 2 under the truth
    post.observe(3, float(reward))
    w = post.prob_optimal()
    print(f"  pull {t}: reward={reward:+.2f}  "
          f"P(arm 3 best)={w[2]:.3f}  P(arm 4 best)={w[3]:.3f}")

print()
print("Contradictory evidence revives discounted components rather than")
print("killing them: pulls on arm 3 that look like the no-bonus level push")
print("weight back toward the rivals.")
for t in range(1, 7):
    post.observe(3, 0.0)  # looks like arm 3 carries no bonus
    w = post.prob_optimal()
    print(f"  off-pull {t}: P(arm 3 best)={w[2]:.3f}  "
          f"max rival={max(w[i] for i in range(J) if i != 2):.3f}")

print()
print("== Batch folding ==")
print("observe_batch folds many rewards in one conjugate step (same law as")
print("repeated observe, one rounding for the moments):")
batch = build_mixture_prior(dist, params, noise_var=1.0)
batch.observe_batch(3, np.full(12, 2.0))
serial = build_mixture_prior(dist, params, noise_var=1.0)
for _ in range(12):
    serial.observe(3, 2.0)
print(f"  batch   P(arm 3 best)={batch.prob_optimal()[2]:.6f}")
print(f"  serial  P(arm 3 best)={serial.prob_optimal()[2]:.6f}")
