"""File formats: consumption CSV, plan lists, fit results and run configs.

Corpus CSV columns are ``user_id,cycle_id,day,a,q,d`` with ``day`` running
``0 .. T-1`` inside a cycle.  Floats are written with 17 significant digits
so a write/read round trip is exact.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .likelihood import FitConfig, FitResult
from .model import (
    PARAM_NAMES,
    ConsumptionPath,
    InvalidPathError,
    PlanSpec,
    PriorParams,
    RewardParams,
    check_path,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CSV_HEADER = ("user_id", "cycle_id", "day", "a", "q", "d")
PLAN_HEADER = ("fee", "quota", "price", "cycle_days")


class CorpusFormatError(ValueError):
    """Malformed or inconsistent consumption data."""


def fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_corpus_csv(paths: Sequence[ConsumptionPath], out: IO[str],
                     ids: Iterable[tuple[str, str]] | None = None) -> None:
    """Write paths as CSV rows; ``ids`` gives ``(user_id, cycle_id)`` per path."""
    ids = list(ids) if ids is not None else [("0", str(i)) for i in range(len(paths))]
    if len(ids) != len(paths):
        raise ValueError("need one (user_id, cycle_id) per path")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for (user, cycle), path in zip(ids, paths):
        for day, (a, q, d) in enumerate(zip(path.a, path.q, path.d)):
            w.writerow((user, cycle, day, fmt(a), fmt(q), int(d)))


def ingest_csv(path, price: float, fee: float = 0.0) -> list[ConsumptionPath]:
    """Read and validate a consumption CSV.

    Rows are grouped by ``(user_id, cycle_id)`` in order of first
    appearance and sorted by ``day`` within a group.  The plan of each
    cycle takes its quota from the first ``q`` and its length from the
    first ``d``; ``price`` and ``fee`` are not part of the file.

    Raises:
        CorpusFormatError: with the offending line number.
    """
    with open(path, newline="") as fh:
        text = fh.read()
    if not text.strip():
        return []
    reader = csv.reader(_io.StringIO(text))
    header = next(reader)
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise CorpusFormatError(f"line 1: expected header {','.join(CSV_HEADER)}")
    groups: dict[tuple[str, str], list] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise CorpusFormatError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        user, cycle = row[0].strip(), row[1].strip()
        try:
            day, a, q, d = int(row[2]), float(row[3]), float(row[4]), int(row[5])
        except ValueError as exc:
            raise CorpusFormatError(f"line {lineno}: {exc}") from None
        groups.setdefault((user, cycle), []).append((day, a, q, d, lineno))

    paths = []
    for (user, cycle), rows in groups.items():
        rows.sort(key=lambda r: r[0])
        days = [r[0] for r in rows]
        if days != list(range(len(rows))):
            bad = next(r for i, r in enumerate(rows) if r[0] != i)
            raise CorpusFormatError(
                f"line {bad[4]}: user {user} cycle {cycle} days must run 0..T-1 without gaps"
            )
        a = np.array([r[1] for r in rows])
        q = np.array([r[2] for r in rows])
        d = np.array([r[3] for r in rows])
        try:
            plan = PlanSpec(fee, float(q[0]), price, int(d[0]))
            check_path(a, q, d, plan)
        except InvalidPathError as exc:
            msg = str(exc)
            line = rows[0][4]
            if msg.startswith("step "):
                step = int(msg.split(":")[0].split()[1])
                line = rows[step][4]
            raise CorpusFormatError(f"line {line}: user {user} cycle {cycle}: {msg}") from None
        except ValueError as exc:
            raise CorpusFormatError(f"line {rows[0][4]}: {exc}") from None
        paths.append(ConsumptionPath(a, q, d, plan, validate=False))
    return paths


def parse_price(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("price must not be NaN")
    return value


def read_plans_csv(path) -> list[PlanSpec]:
    """Plans from a CSV with columns ``fee,quota,price,cycle_days``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != PLAN_HEADER:
            raise CorpusFormatError(f"plans file must have header {','.join(PLAN_HEADER)}")
        plans = []
        for lineno, row in enumerate(reader, start=2):
            try:
                plans.append(PlanSpec(float(row["fee"]), float(row["quota"]),
                                      parse_price(row["price"]), int(row["cycle_days"])))
            except (TypeError, ValueError) as exc:
                raise CorpusFormatError(f"line {lineno}: {exc}") from None
    return plans


def parse_plan(text: str) -> PlanSpec:
    """Plan from ``"fee,quota,price,cycle_days"``."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError("plan must be given as fee,quota,price,cycle_days")
    return PlanSpec(float(parts[0]), float(parts[1]), parse_price(parts[2]), int(parts[3]))


def fit_result_json(result: FitResult) -> str:
    return json.dumps(result.to_dict(), indent=2, allow_nan=False) + "\n"


def read_fit_params(path) -> RewardParams:
    """Reward parameters from a fit-result JSON; unidentified ones become 0."""
    with open(path) as fh:
        doc = json.load(fh)
    params = doc["parameters"]
    return RewardParams(*(float(params[n]) if params.get(n) is not None else 0.0
                          for n in PARAM_NAMES))


# --- run configuration -------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    plan: PlanSpec
    reward: RewardParams
    prior: PriorParams
    n_months: tuple[int, ...] = (10, 100, 1000)
    n_repeats: int = 100
    master_seed: int = 0
    fit: FitConfig = FitConfig()


def _table(doc, name):
    if name not in doc:
        raise ValueError(f"config is missing the [{name}] table")
    return doc[name]


def parse_config(doc: dict) -> RunConfig:
    plan = _table(doc, "plan")
    rew = _table(doc, "reward")
    pri = _table(doc, "prior")
    exp = doc.get("experiment", {})
    fit = doc.get("fit", {})
    return RunConfig(
        plan=PlanSpec(float(plan.get("fee", 0.0)), float(plan["quota"]), float(plan["price"]),
                      int(plan["cycle_days"])),
        reward=RewardParams(*(float(rew[n]) for n in PARAM_NAMES)),
        prior=PriorParams(float(pri["mu0"]), float(pri["beta0"]), float(pri["gamma0"]),
                          float(pri["eta0"]), float(pri["nu0_bar"])),
        n_months=tuple(int(n) for n in exp.get("n_months", (10, 100, 1000))),
        n_repeats=int(exp.get("n_repeats", 100)),
        master_seed=int(exp.get("master_seed", 0)),
        fit=FitConfig(
            lam=float(fit.get("lam", 0.0)),
            norm=fit.get("norm", "L2"),
            grad_tol=float(fit.get("grad_tol", 1e-8)),
            max_iter=int(fit.get("max_iter", 500)),
        ),
    )


def load_config(path=None) -> RunConfig:
    """Load a TOML run config; ``None`` loads the shipped baseline."""
    if path is None:
        data = resources.files("maxent_demand").joinpath("data/baseline.toml").read_bytes()
        return parse_config(tomllib.loads(data.decode()))
    with open(path, "rb") as fh:
        return parse_config(tomllib.load(fh))


def example_corpus_path() -> Path:
    """Location of the example corpus shipped with the package."""
    return Path(str(resources.files("maxent_demand").joinpath("data/example_corpus.csv")))
