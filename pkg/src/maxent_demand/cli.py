"""Command-line entry point ``maxent-demand``.

Exit codes: 0 success, 1 data or usage error, 2 numerical failure
(non-integrable parameters, failed quadrature or a fit that did not converge).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import io
from .counterfactual import eta_bounds, rank_plans
from .experiment import (
    ExperimentConfig,
    histogram_gnuplot_blocks,
    run_finite_sample_experiment,
    write_histogram_csv,
    write_stats_csv,
)
from .likelihood import FitConfig, fit
from .model import PARAM_NAMES, PlanSpec
from .partition import NonIntegrableError, QuadratureError
from .posterior import simulate_corpus

EXIT_OK, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("maxent_demand")


class NumericalFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    """Reports usage errors with exit code 1 so that 2 always means a numerical failure."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DATA, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _json_float(x: float):
    return x if math.isfinite(x) else None


def _plan_dict(plan: PlanSpec) -> dict:
    return {"fee": plan.fee, "quota": plan.quota, "price": _json_float(plan.price),
            "cycle_days": plan.cycle_days}


def _reward_params(args, cfg):
    return io.read_fit_params(args.params) if args.params else cfg.reward


def _plan(args, cfg) -> PlanSpec:
    return io.parse_plan(args.plan) if getattr(args, "plan", None) else cfg.plan


# --- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = io.load_config(args.config)
    plan = _plan(args, cfg)
    reward = _reward_params(args, cfg)
    n = args.months * args.users
    paths = simulate_corpus(reward, cfg.prior, plan, n, args.seed)
    ids = [(str(u), str(m)) for u in range(args.users) for m in range(args.months)]
    with _output(args.out) as fh:
        io.write_corpus_csv(paths, fh, ids)
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = io.load_config(args.config)
    price = io.parse_price(args.price) if args.price is not None else cfg.plan.price
    corpus = io.ingest_csv(args.corpus, price=price)
    if not corpus:
        raise io.CorpusFormatError(f"{args.corpus}: no consumption rows")
    fc = cfg.fit
    config = FitConfig(
        lam=fc.lam if args.lam is None else args.lam,
        norm=fc.norm if args.norm is None else args.norm,
        grad_tol=fc.grad_tol if args.grad_tol is None else args.grad_tol,
        max_iter=fc.max_iter if args.max_iter is None else args.max_iter,
    )
    result = fit(corpus, cfg.prior, config)
    with _output(args.out) as fh:
        fh.write(io.fit_result_json(result))
    if not result.converged:
        raise NumericalFailure(f"fit did not converge: {result.message}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = io.load_config(args.config)
    months = tuple(int(m) for m in args.months_list.split(",")) if args.months_list else cfg.n_months
    ecfg = ExperimentConfig(
        n_months_list=months,
        n_repeats=args.repeats if args.repeats is not None else cfg.n_repeats,
        true_reward=cfg.reward,
        prior=cfg.prior,
        plan=cfg.plan,
        master_seed=args.seed,
        fit=cfg.fit,
        n_bins=args.bins,
    )
    stats = run_finite_sample_experiment(ecfg, workers=args.workers)
    with _output(args.stats_out) as fh:
        write_stats_csv(stats, fh)
    if args.hist_out:
        with _output(args.hist_out) as fh:
            write_histogram_csv(stats, fh)
    if args.gnuplot_dir:
        out = Path(args.gnuplot_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in PARAM_NAMES:
            (out / f"hist_{name}.dat").write_text(histogram_gnuplot_blocks(stats, name))
    failed = sum(s.n_failed for s in stats.values())
    if failed:
        log.warning("%d fits did not converge and were excluded", failed)
    return EXIT_OK


def cmd_evaluate_plans(args) -> int:
    cfg = io.load_config(args.config)
    plans = io.read_plans_csv(args.plans)
    if not plans:
        raise io.CorpusFormatError(f"{args.plans}: no plans")
    ranking = rank_plans(_reward_params(args, cfg), cfg.prior, plans, args.paths, args.seed)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank", "fee", "quota", "price", "cycle_days", "total_utility", "std_error",
                    "expected_reward", "n_paths"))
        for i, v in enumerate(ranking, start=1):
            p = v.plan
            w.writerow((i, io.fmt(p.fee), io.fmt(p.quota), io.fmt(p.price), p.cycle_days,
                        io.fmt(v.total_utility), io.fmt(v.std_error), io.fmt(v.expected_reward),
                        v.n_paths))
    return EXIT_OK


def cmd_bound_eta(args) -> int:
    cfg = io.load_config(args.config)
    chosen = io.parse_plan(args.chosen)
    alternatives = io.read_plans_csv(args.alternatives)
    res = eta_bounds(chosen, alternatives, _reward_params(args, cfg), cfg.prior, args.paths,
                     args.seed)
    report = {
        "chosen": _plan_dict(chosen),
        "chosen_expected_reward": res.chosen_reward,
        "eta_lower_bound": _json_float(res.lower),
        "eta_upper_bound": _json_float(res.upper),
        "n_paths": args.paths,
        "alternatives": [
            {"plan": _plan_dict(r.alternative), "kind": r.kind, "bound": r.bound}
            for r in res.rows
        ],
    }
    with _output(args.out) as fh:
        fh.write(json.dumps(report, indent=2, allow_nan=False) + "\n")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="maxent-demand",
                description="Maximum-entropy model of metered consumption.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeded=True):
        sp.add_argument("--config", help="TOML run config (default: shipped baseline)")
        sp.add_argument("--out", help="output file (default: stdout)")
        if seeded:
            sp.add_argument("--seed", type=int, required=True, help="random seed")

    s = sub.add_parser("simulate", help="simulate consumption cycles to a CSV corpus")
    common(s)
    s.add_argument("--months", type=_positive_int, required=True, help="cycles per user")
    s.add_argument("--users", type=_positive_int, default=1)
    s.add_argument("--plan", help="override plan as fee,quota,price,cycle_days")
    s.add_argument("--params", help="fit-result JSON with the reward parameters")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit reward parameters to a CSV corpus")
    common(f, seeded=False)
    f.add_argument("corpus", help="consumption CSV")
    f.add_argument("--price", help="overage price of the corpus plan (inf for none)")
    f.add_argument("--lam", type=float)
    f.add_argument("--norm", choices=("L1", "L2"))
    f.add_argument("--grad-tol", type=float)
    f.add_argument("--max-iter", type=_positive_int)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("experiment", help="finite-sample study of the estimator")
    e.add_argument("--config", help="TOML run config (default: shipped baseline)")
    e.add_argument("--seed", type=int, required=True, help="master seed")
    e.add_argument("--months-list", help="comma-separated history lengths")
    e.add_argument("--repeats", type=_positive_int)
    e.add_argument("--bins", type=_positive_int, default=30)
    e.add_argument("--workers", type=_positive_int, default=1)
    e.add_argument("--stats-out", help="stats CSV (default: stdout)")
    e.add_argument("--hist-out", help="histogram CSV")
    e.add_argument("--gnuplot-dir", help="directory for per-parameter gnuplot data files")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("evaluate-plans", help="rank plans by expected utility")
    common(v)
    v.add_argument("--plans", required=True, help="CSV with fee,quota,price,cycle_days")
    v.add_argument("--paths", type=_positive_int, default=10_000)
    v.add_argument("--params", help="fit-result JSON with the reward parameters")
    v.set_defaults(func=cmd_evaluate_plans)

    b = sub.add_parser("bound-eta", help="bound eta from an observed plan choice")
    common(b)
    b.add_argument("--chosen", required=True, help="chosen plan as fee,quota,price,cycle_days")
    b.add_argument("--alternatives", required=True, help="CSV of the plans not chosen")
    b.add_argument("--paths", type=_positive_int, default=10_000)
    b.add_argument("--params", help="fit-result JSON with the reward parameters")
    b.set_defaults(func=cmd_bound_eta)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (NonIntegrableError, QuadratureError, NumericalFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError, io.tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
