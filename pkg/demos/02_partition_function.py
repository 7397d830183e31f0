"""The normalizer Z(q, d) in closed form, checked against adaptive quadrature.

Run: python3 demos/02_partition_function.py
"""

import math

from maxent_demand import INFINITE_PRICE, load_config, z_closed_form, z_quadrature

cfg = load_config()
r, prior = cfg.reward, cfg.prior
print(f"{'q':>8} {'d':>3} {'price':>6} {'log Z closed':>14} {'log Z quad':>14} {'rel err':>9}")
for q in (0.0, 1e-3, 10.0, 600.0, 1e4):
    for d in (1, 30):
        for price in (0.55, INFINITE_PRICE):
            cf = z_closed_form(r, prior, q, d, price).log_Z
            qd = z_quadrature(r, prior, q, d, price, log=True)
            print(f"{q:8g} {d:3d} {price:6g} {cf:14.8f} {qd:14.8f} {abs(math.expm1(cf - qd)):9.1e}")
