"""Finite-sample behaviour of the maximum-likelihood estimator.

For each history length ``N_m`` the harness simulates ``N_m`` cycles at fixed
true parameters, fits them, and repeats ``N_p`` times.  The spread of the
``N_p`` estimates shows how much apparent customer-to-customer variation is
pure estimation noise.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Mapping

import numpy as np

from .likelihood import FitConfig, fit
from .model import PARAM_NAMES, PlanSpec, PriorParams, RewardParams
from .posterior import simulate_corpus

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    n_months_list: tuple[int, ...]
    n_repeats: int
    true_reward: RewardParams
    prior: PriorParams
    plan: PlanSpec
    master_seed: int
    fit: FitConfig = FitConfig()
    n_bins: int = 30

    def __post_init__(self):
        object.__setattr__(self, "n_months_list", tuple(int(n) for n in self.n_months_list))
        if not self.n_months_list or min(self.n_months_list) < 1:
            raise ValueError("n_months_list must hold positive counts")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be at least 1")
        if self.n_bins < 1:
            raise ValueError("n_bins must be at least 1")
        self.prior.check_compatible(self.true_reward)


@dataclass(frozen=True)
class EstimatorStats:
    """Summary of the estimates for one history length.

    Arrays are indexed by parameter in ``PARAM_NAMES`` order.  ``std`` uses
    ``ddof=1`` and is 0 (with ``degenerate`` set) for a single estimate.
    """

    n_months: int
    estimates: np.ndarray
    truth: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    bias: np.ndarray
    n_converged: int
    n_failed: int
    degenerate: bool
    hist_edges: np.ndarray = field(repr=False)
    hist_counts: np.ndarray = field(repr=False)

    def ratio(self) -> np.ndarray:
        """``std / |mean|`` per parameter."""
        return self.std / np.abs(self.mean)


def repeat_seed(master_seed: int, n_months: int, repeat: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, n_months, repeat])


def _one_run(cfg: ExperimentConfig, n_months: int, repeat: int):
    corpus = simulate_corpus(cfg.true_reward, cfg.prior, cfg.plan, n_months,
                             repeat_seed(cfg.master_seed, n_months, repeat))
    try:
        res = fit(corpus, cfg.prior, cfg.fit)
    except ValueError as exc:
        log.warning("fit failed for N_m=%d repeat %d: %s", n_months, repeat, exc)
        return np.full(len(PARAM_NAMES), np.nan), False
    return res.raw.as_array(), res.converged


def _one_run_star(args):
    return _one_run(*args)


def run_finite_sample_experiment(cfg: ExperimentConfig,
                                 workers: int = 1) -> dict[int, EstimatorStats]:
    """Estimator statistics for every history length in ``cfg``.

    Each repeat has its own seed derived from ``(master_seed, N_m, repeat)``,
    so the output does not depend on ``workers``.  Non-converged fits are
    excluded and counted.  Histogram bins are shared across history lengths
    for each parameter.
    """
    tasks = [(cfg, n, r) for n in cfg.n_months_list for r in range(cfg.n_repeats)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one_run_star, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        outcomes = [_one_run_star(t) for t in tasks]

    by_n: dict[int, list] = {n: [] for n in cfg.n_months_list}
    for (_, n, _), outcome in zip(tasks, outcomes):
        by_n[n].append(outcome)

    kept = {
        n: np.array([est for est, ok in runs if ok]).reshape(-1, len(PARAM_NAMES))
        for n, runs in by_n.items()
    }
    pooled = np.concatenate(list(kept.values()))
    edges = _shared_edges(pooled, cfg.n_bins)
    truth = cfg.true_reward.as_array()

    out = {}
    for n, est in kept.items():
        k = len(est)
        mean = est.mean(axis=0) if k else np.full(len(truth), np.nan)
        std = est.std(axis=0, ddof=1) if k > 1 else np.zeros(len(truth))
        counts = np.array([np.histogram(est[:, j], bins=edges[j])[0] for j in range(len(truth))])
        out[n] = EstimatorStats(
            n_months=n, estimates=est, truth=truth, mean=mean, std=std, bias=mean - truth,
            n_converged=k, n_failed=cfg.n_repeats - k, degenerate=k < 2,
            hist_edges=edges, hist_counts=counts,
        )
    return out


def _shared_edges(pooled: np.ndarray, n_bins: int) -> np.ndarray:
    edges = []
    for j in range(pooled.shape[1] if pooled.size else len(PARAM_NAMES)):
        col = pooled[:, j] if pooled.size else np.array([0.0])
        lo, hi = float(col.min()), float(col.max())
        if hi <= lo:
            pad = max(abs(lo) * 1e-6, 1e-12)
            lo, hi = lo - pad, hi + pad
        edges.append(np.linspace(lo, hi, n_bins + 1))
    return np.array(edges)


def write_stats_csv(stats: Mapping[int, EstimatorStats], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("param", "n_months", "mean", "std", "bias", "n_converged"))
    for n in sorted(stats):
        s = stats[n]
        for j, name in enumerate(PARAM_NAMES):
            w.writerow((name, n, f"{s.mean[j]:.17g}", f"{s.std[j]:.17g}",
                        f"{s.bias[j]:.17g}", s.n_converged))


def write_histogram_csv(stats: Mapping[int, EstimatorStats], out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("param", "n_months", "bin_lo", "bin_hi", "count"))
    for n in sorted(stats):
        s = stats[n]
        for j, name in enumerate(PARAM_NAMES):
            e = s.hist_edges[j]
            for b, c in enumerate(s.hist_counts[j]):
                w.writerow((name, n, f"{e[b]:.17g}", f"{e[b + 1]:.17g}", int(c)))


def histogram_gnuplot_blocks(stats: Mapping[int, EstimatorStats], param: str) -> str:
    """Histogram of one parameter as gnuplot data blocks, one per history length.

    Each block has ``bin_center count`` lines and is separated by two blank
    lines, so ``plot 'file' index i with boxes`` selects a history length.
    """
    j = PARAM_NAMES.index(param)
    blocks = []
    for n in sorted(stats):
        s = stats[n]
        e = s.hist_edges[j]
        centers = 0.5 * (e[:-1] + e[1:])
        lines = [f"# {param} N_m={n}"]
        lines += [f"{c:.10g} {int(k)}" for c, k in zip(centers, s.hist_counts[j])]
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"
