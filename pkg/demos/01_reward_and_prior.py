"""Per-day utility, its feature representation, and the reference policy.

Run: python3 demos/01_reward_and_prior.py
"""

import numpy as np

from maxent_demand import PlanSpec, load_config, reward
from maxent_demand.dist import prior_spliced, _spliced_cdf
from maxent_demand.model import ConsumptionStep, FeatureScales, features, theta_from_raw

cfg = load_config()
r, prior, plan = cfg.reward, cfg.prior, cfg.plan
print("baseline plan:", plan)
print("utility params:", r)

# Utility of one day for a few usage levels, 10 days before the cycle ends.
for a in (0.0, 5.0, 20.0, 700.0):
    q = 600.0 if a < 700 else 500.0
    print(f"a={a:6.1f} q={q:5.0f} d=10 -> r = {reward(r, price=plan.price, a=a, q=q, d=10):+.5f}")

# The same number as a dot product of scaled parameters and features.
scales = FeatureScales.unit()
step = ConsumptionStep(a=20.0, q=600.0, d=10)
theta = theta_from_raw(r, scales, plan.price)
phi = features(step, scales)
print("theta . phi =", float(theta @ phi), "(matches a=20 above)")

# Reference policy: atom at zero plus a spliced Gaussian with a kink at the quota.
sp = prior_spliced(prior, 100.0, 10, plan.price)
grid = np.array([0.0, 25.0, 50.0, 100.0, 150.0])
print("prior CDF of positive usage at", grid, "->", np.round(_spliced_cdf(sp, grid), 4))
