"""How much do estimates spread when each customer has only a few months of data?

A reduced version of the full study (see ``maxent-demand experiment``).
Run: python3 demos/06_finite_sample_study.py
"""

from maxent_demand import ExperimentConfig, load_config, run_finite_sample_experiment
from maxent_demand.model import PARAM_NAMES

cfg = load_config()
ecfg = ExperimentConfig((10, 100), 20, cfg.reward, cfg.prior, cfg.plan, master_seed=3)
stats = run_finite_sample_experiment(ecfg)
for n, s in stats.items():
    print(f"N_m={n}: {s.n_converged} converged fits")
    for j, name in enumerate(PARAM_NAMES):
        print(f"  {name:6s} mean {s.mean[j]:+.5f} std {s.std[j]:.5f} std/|mean| {s.ratio()[j]:.2f}")
