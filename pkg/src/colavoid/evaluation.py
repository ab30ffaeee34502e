"""Batch policy evaluation and the fuel-cost trade study.

Costs are reported as positive delta-v magnitudes (m/s), the negation of the
MDP's maneuver rewards. Means use exactly rounded summation, so a report does
not depend on the order in which episodes finish.
"""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import seeding
from .mdp import RewardParams
from .planners import EpisodeOutcome, Policy, run_sequence
from .scenario import Encounter, EncounterClass


@dataclass(frozen=True)
class EvaluationReport:
    policy_id: str
    cost_per_safe: float | None
    cost_per_unsafe: float | None
    p_success: float | None
    n_safe: int
    n_unsafe: int
    se_cost_per_safe: float | None = None
    se_cost_per_unsafe: float | None = None
    se_p_success: float | None = None

    def __post_init__(self):
        if self.n_safe < 0 or self.n_unsafe < 0:
            raise ValueError("counts must be non-negative")
        if (self.cost_per_safe is None) != (self.n_safe == 0):
            raise ValueError("cost_per_safe must be present exactly when n_safe > 0")
        if (self.cost_per_unsafe is None) != (self.n_unsafe == 0):
            raise ValueError("cost_per_unsafe must be present exactly when n_unsafe > 0")
        if (self.p_success is None) != (self.n_unsafe == 0):
            raise ValueError("p_success must be present exactly when n_unsafe > 0")
        for c in (self.cost_per_safe, self.cost_per_unsafe):
            if c is not None and c < 0:
                raise ValueError("costs must be non-negative")
        if self.p_success is not None and not 0.0 <= self.p_success <= 1.0:
            raise ValueError("p_success must be in [0, 1]")


def _mean_se(values) -> tuple[float | None, float | None]:
    n = len(values)
    if n == 0:
        return None, None
    mean = math.fsum(values) / n
    if n < 2:
        return mean, None
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def policy_key(label: str) -> int:
    """Stable stream counter for a policy, independent of list position."""
    return zlib.crc32(label.encode())


def episode_stream(seed: int, label: str, e: Encounter) -> np.random.Generator:
    return seeding.stream(seed, seeding.EVALUATE, policy_key(label), *e.seed)


def _episode(args) -> EpisodeOutcome:
    policy, e, params, seed = args
    return run_sequence(e, policy, params, episode_stream(seed, policy.label, e))


def run_episodes(
    policy: Policy, encounters, params: RewardParams, seed: int, jobs: int = 1
) -> list[EpisodeOutcome]:
    """Outcomes in input order. Each episode draws from its own stream, so
    ``jobs`` changes wall time only."""
    work = [(policy, e, params, seed) for e in encounters]
    if jobs <= 1 or len(work) < 2:
        return [_episode(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_episode, work, chunksize=max(1, len(work) // (4 * jobs))))


def summarize(policy_id: str, classes, outcomes) -> EvaluationReport:
    safe = [o.delta_v_spent for c, o in zip(classes, outcomes) if c is EncounterClass.SAFE]
    unsafe = [o for c, o in zip(classes, outcomes) if c is EncounterClass.UNSAFE]
    cs, se_s = _mean_se(safe)
    cu, se_u = _mean_se([o.delta_v_spent for o in unsafe])
    if unsafe:
        p = sum(o.mitigated for o in unsafe) / len(unsafe)
        se_p = math.sqrt(p * (1.0 - p) / len(unsafe))
    else:
        p = se_p = None
    return EvaluationReport(policy_id, cs, cu, p, len(safe), len(unsafe), se_s, se_u, se_p)


def evaluate(
    policy: Policy, encounters, params: RewardParams, seed: int, jobs: int = 1
) -> EvaluationReport:
    """Run ``policy`` on every Safe and Unsafe encounter and aggregate.

    Trivial encounters are skipped. A class with no members reports its
    metrics as None.
    """
    kept = []
    for e in encounters:
        if e.encounter_class is None:
            raise ValueError(f"encounter {e.seed} is not classified")
        if e.encounter_class is not EncounterClass.TRIVIAL:
            kept.append(e)
    outcomes = run_episodes(policy, kept, params, seed, jobs)
    return summarize(policy.label, [e.encounter_class for e in kept], outcomes)


def estimated_cost(p_safe: float, report: EvaluationReport) -> float:
    """Expected delta-v per encounter when a fraction ``p_safe`` is safe."""
    if not 0.0 <= p_safe <= 1.0:
        raise ValueError("p_safe must be in [0, 1]")
    if report.cost_per_safe is None or report.cost_per_unsafe is None:
        raise ValueError(f"{report.policy_id}: both class costs are needed")
    return p_safe * report.cost_per_safe + (1.0 - p_safe) * report.cost_per_unsafe


def estimated_cost_se(p_safe: float, report: EvaluationReport) -> float:
    """Standard error of ``estimated_cost``; the two class means are independent."""
    if report.se_cost_per_safe is None or report.se_cost_per_unsafe is None:
        raise ValueError(f"{report.policy_id}: standard errors unavailable")
    return math.hypot(p_safe * report.se_cost_per_safe, (1.0 - p_safe) * report.se_cost_per_unsafe)


def p_safe_grid(step: float) -> np.ndarray:
    n = round(1.0 / step)
    if n < 1 or not math.isclose(n * step, 1.0, rel_tol=1e-9):
        raise ValueError("grid step must divide 1")
    return np.arange(n + 1) / n


@dataclass(frozen=True)
class MixtureCurve:
    policy_id: str
    p_safe: tuple[float, ...]
    cost: tuple[float, ...]


def mixture_curve(report: EvaluationReport, grid_step: float = 0.01) -> MixtureCurve:
    grid = p_safe_grid(grid_step)
    return MixtureCurve(
        report.policy_id,
        tuple(float(p) for p in grid),
        tuple(estimated_cost(float(p), report) for p in grid),
    )


@dataclass(frozen=True)
class CrossoverPoint:
    p_safe: float
    left: str  # best just below p_safe
    right: str  # best just above


@dataclass(frozen=True)
class CrossoverResult:
    grid: tuple[float, ...]
    best: tuple[str, ...]
    best_cost: tuple[float, ...]
    points: tuple[CrossoverPoint, ...]

    def triples(self):
        return list(zip(self.grid, self.best_cost, self.best))


def _lower_envelope(lines):
    """Breakpoints of min_i (b_i + m_i p) on [0, 1], in exact rationals.

    ``lines`` holds (label, b, m). Ties keep the earlier line, so identical
    reports never produce a breakpoint.
    """
    # best at 0+: lowest intercept, then lowest slope
    cur = min(lines, key=lambda ln: (ln[1], ln[2]))
    p = Fraction(0)
    points = []
    while True:
        nxt, nxt_p = None, None
        for ln in lines:
            if ln[2] >= cur[2]:
                continue
            # cur is minimal at p, so every crossing lies at or beyond p
            x = max(p, (ln[1] - cur[1]) / (cur[2] - ln[2]))
            if nxt is None or x < nxt_p or (x == nxt_p and ln[2] < nxt[2]):
                nxt, nxt_p = ln, x
        if nxt is None or nxt_p >= 1:
            break
        points.append((nxt_p, cur[0], nxt[0]))
        cur, p = nxt, nxt_p
    return points


def crossover(reports, grid_step: float = 0.01) -> CrossoverResult:
    """Cheapest policy over p_safe and the exact points where it changes."""
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("crossover needs at least two reports")
    ids = [r.policy_id for r in reports]
    if len(set(ids)) != len(ids):
        raise ValueError("policy ids must be unique")
    lines = []
    for r in reports:
        if r.cost_per_safe is None or r.cost_per_unsafe is None:
            raise ValueError(f"{r.policy_id}: both class costs are needed")
        b = Fraction(r.cost_per_unsafe)
        lines.append((r.policy_id, b, Fraction(r.cost_per_safe) - b))
    points = tuple(
        CrossoverPoint(float(x), left, right) for x, left, right in _lower_envelope(lines)
    )
    grid = p_safe_grid(grid_step)
    best, best_cost = [], []
    for p in grid:
        costs = [estimated_cost(float(p), r) for r in reports]
        k = int(np.argmin(costs))
        best.append(ids[k])
        best_cost.append(costs[k])
    return CrossoverResult(tuple(float(p) for p in grid), tuple(best), tuple(best_cost), points)


# -- output -------------------------------------------------------------------

REPORT_COLUMNS = (
    "policy_id", "cost_per_safe", "cost_per_unsafe", "p_success", "n_safe", "n_unsafe",
    "se_cost_per_safe", "se_cost_per_unsafe", "se_p_success",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        d = asdict(r)
        w.writerow([_cell(d[k]) for k in REPORT_COLUMNS])
    return buf.getvalue()


def reports_to_jsonl(reports) -> str:
    return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in reports)


def report_from_dict(d: dict) -> EvaluationReport:
    return EvaluationReport(**{k: d.get(k) for k in REPORT_COLUMNS})


def crossover_to_csv(result: CrossoverResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("p_safe", "cost", "best_policy"))
    for p, c, b in result.triples():
        w.writerow((repr(p), repr(c), b))
    return buf.getvalue()
