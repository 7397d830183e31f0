"""Posterior action distribution for one state, and whole simulated cycles.

Run: python3 demos/03_posterior_and_simulation.py
"""

import numpy as np

from maxent_demand import load_config, posterior_at, simulate_corpus

cfg = load_config()
r, prior, plan = cfg.reward, cfg.prior, cfg.plan

post = posterior_at(r, prior, q=120.0, d=10, price=plan.price)
below, above = post.density_jump()
print(f"P(no usage) = {post.nu:.4f}; density just below/above the quota = {below:.6g} / {above:.6g}")
draws = post.sample(np.random.default_rng(0), 100_000)
print(f"sampled zero fraction = {np.mean(draws == 0):.4f}, mean usage = {draws.mean():.2f}")

paths = simulate_corpus(r, prior, plan, n_cycles=5, seed=42)
for i, p in enumerate(paths):
    over = max(0.0, p.a.sum() - plan.quota)
    print(f"cycle {i}: total usage {p.a.sum():7.1f}, zero days {int(np.sum(p.a == 0)):2d}, "
          f"overage {over:6.1f}")
