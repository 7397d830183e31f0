"""Recover utility parameters from simulated histories by convex maximum likelihood.

Run: python3 demos/04_fit.py
"""

from maxent_demand import FitConfig, fit, ingest_csv, load_config, simulate_corpus
from maxent_demand.io import example_corpus_path
from maxent_demand.model import PARAM_NAMES

cfg = load_config()
truth = cfg.reward

corpus = simulate_corpus(truth, cfg.prior, cfg.plan, n_cycles=1000, seed=7)
res = fit(corpus, cfg.prior, FitConfig(lam=0.0))
print(f"converged={res.converged} in {res.iterations} iterations, NLL={res.nll:.3f}")
for name in PARAM_NAMES:
    est, true = getattr(res.raw, name), getattr(truth, name)
    print(f"{name:6s} true {true:.5f} est {est:.5f} ({est / true - 1:+.1%})")

# The shipped example corpus goes through the same path as a user's CSV.
shipped = ingest_csv(example_corpus_path(), price=cfg.plan.price)
print(f"example corpus: {len(shipped)} cycles, fitted eta = "
      f"{fit(shipped, cfg.prior).raw.eta:.4f}")
