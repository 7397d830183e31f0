"""Rank alternative plans and bound price sensitivity from an observed choice.

Run: python3 demos/05_counterfactual.py
"""

from maxent_demand import INFINITE_PRICE, PlanSpec, eta_bounds, load_config, rank_plans

cfg = load_config()
r, prior = cfg.reward, cfg.prior
plans = [
    PlanSpec(0.0, 600, 0.55, 30),
    PlanSpec(3.0, 900, 0.55, 30),
    PlanSpec(-2.0, 300, 0.55, 30),
    PlanSpec(5.0, 1000, INFINITE_PRICE, 30),
]
for i, v in enumerate(rank_plans(r, prior, plans, n_paths=5000, seed=1), start=1):
    print(f"{i}. fee {v.plan.fee:+5.1f} quota {v.plan.quota:5.0f} price {v.plan.price:5g}: "
          f"utility {v.total_utility:8.3f} +/- {v.std_error:.3f}")

# A customer on the baseline plan passed up the others: what does that say about eta?
# Under these parameters the baseline is not the best plan, so the implied
# interval need not contain the model's own eta.
b = eta_bounds(plans[0], plans[1:], r, prior, n_paths=5000, seed=1)
print(f"eta in [{b.lower:.4f}, {b.upper:.4f}] (model value {r.eta})")
for row in b.rows:
    print(f"  vs fee {row.alternative.fee:+.1f}: {row.kind} bound {row.bound:.4f}")
