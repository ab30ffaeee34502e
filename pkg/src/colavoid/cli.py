"""Command-line entry point: generate, evaluate, plan, report.

Exit codes: 0 success, 1 usage error, 2 data error (bad config, unreadable
or malformed input, unknown policy spec).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import config as cfgmod
from . import evaluation, records, seeding
from .mdp import ACTIONS
from .planners import MctsPolicy, mcts_search
from .scenario import EncounterClass, generate, late_crossing

EXIT_USAGE = 1
EXIT_DATA = 2

# Pc at TCA bins, upper edges exclusive
PC_BINS = ((1e-1, 1.0), (1e-2, 1e-1), (1e-3, 1e-2), (1e-4, 1e-3), (1e-5, 1e-4), (0.0, 1e-5))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    return cfg


def _gen_one(job):
    cfg, index = job
    return generate(cfg.generator, cfg.master_seed, index, cfg.reward.pc_threshold)


def generate_set(cfg: cfgmod.RunConfig, jobs: int = 1):
    work = [(cfg, i) for i in range(cfg.encounter_count)]
    if jobs <= 1:
        return [_gen_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_gen_one, work, chunksize=max(1, len(work) // (8 * jobs))))


def class_summary(encounters, pc_threshold: float) -> str:
    n = len(encounters)
    counts = {c: 0 for c in EncounterClass}
    for e in encounters:
        counts[e.encounter_class] += 1
    lines = [f"encounters: {n}"]
    for c in EncounterClass:
        lines.append(f"  {c.value:<8} {counts[c]:>7}  {counts[c] / n:.4f}")
    nontrivial = counts[EncounterClass.SAFE] + counts[EncounterClass.UNSAFE]
    if nontrivial:
        lines.append(f"  safe fraction of non-trivial: {counts[EncounterClass.SAFE] / nontrivial:.4f}")
    unsafe = [e for e in encounters if e.encounter_class is EncounterClass.UNSAFE]
    if unsafe:
        late = sum(late_crossing(e, pc_threshold) for e in unsafe) / len(unsafe)
        lines.append(f"  unsafe with Pc(8h) < threshold < Pc(0): {late:.4f}")
    lines.append("Pc at TCA:")
    pcs = [e.epochs[-1].pc for e in encounters]
    for lo, hi in PC_BINS:
        k = sum(lo <= p < hi or (hi == 1.0 and p == 1.0) for p in pcs)
        label = f"< {hi:.0e}" if lo == 0.0 else f"[{lo:.0e}, {hi:.0e})"
        lines.append(f"  {label:<18} {k / n:.4f}")
    return "\n".join(lines)


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out or cfg.encounters_file)
    encounters = generate_set(cfg, args.jobs)
    records.write_encounters(out, encounters)
    print(class_summary(encounters, cfg.reward.pc_threshold))
    print(f"wrote {out}")
    return 0


def _format_table(reports) -> str:
    def f(v, digits=5):
        return "-" if v is None else f"{v:.{digits}f}"

    head = f"{'policy':<20} {'safe dv':>9} {'+-':>8} {'unsafe dv':>9} {'+-':>8} {'p_success':>9} {'n_safe':>7} {'n_unsafe':>8}"
    rows = [head]
    for r in reports:
        rows.append(
            f"{r.policy_id:<20} {f(r.cost_per_safe):>9} {f(r.se_cost_per_safe):>8} "
            f"{f(r.cost_per_unsafe):>9} {f(r.se_cost_per_unsafe):>8} {f(r.p_success, 4):>9} "
            f"{r.n_safe:>7} {r.n_unsafe:>8}"
        )
    return "\n".join(rows)


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    if args.policies is not None:
        cfg = replace(cfg, policies=tuple(args.policies))
    if not cfg.policies:
        raise cfgmod.ConfigError("no policies configured")
    path = Path(args.encounters or cfg.encounters_file)
    encounters = records.read_encounters(path)
    policies = [cfgmod.make_policy(spec, cfg) for spec in cfg.policies]
    reports = []
    for spec, policy in zip(cfg.policies, policies):
        r = evaluation.evaluate(policy, encounters, cfg.reward, cfg.master_seed, args.jobs)
        reports.append(replace(r, policy_id=spec))
    out = Path(args.out or cfg.reports_file)
    out.write_text(evaluation.reports_to_csv(reports), encoding="utf-8")
    out.with_suffix(".jsonl").write_text(evaluation.reports_to_jsonl(reports), encoding="utf-8")
    print(_format_table(reports))
    print(f"wrote {out} and {out.with_suffix('.jsonl')}")
    return 0


def format_table_dump(table) -> str:
    lines = []
    for t in table.times():
        cells = "  ".join(
            f"{a.value}: Q={table.q[(t, a)]:+.6f} N={table.n[(t, a)]}" for a in ACTIONS
        )
        lines.append(f"  t={t:>2}h  {cells}")
    return "\n".join(lines)


def cmd_plan(args) -> int:
    cfg = _load_config(args)
    text = sys.stdin.read() if args.state == "-" else Path(args.state).read_text(encoding="utf-8")
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise records.RecordError(f"state record: invalid JSON ({exc.msg})") from exc
    s = records.state_from_dict(record)
    policy = cfgmod.make_policy(args.policy, cfg)
    if not isinstance(policy, MctsPolicy):
        raise cfgmod.ConfigError(f"plan needs an MCTS policy spec, got {args.policy!r}")
    print(f"t = {s.t} h, Pc = {s.pc:.6e}")
    if s.t == 0:
        print("no decision (terminal)")
        return 0
    mc = policy.config
    if s.t <= mc.t_maxdepth:
        action = policy.decide(s, seeding.stream(cfg.master_seed, seeding.PLAN))
        print(f"action: {action.value} (last epoch of the limited horizon: threshold rule)")
        return 0
    rng = seeding.stream(cfg.master_seed, seeding.PLAN)
    action, table = mcts_search(s, mc, policy.tparams, policy.rparams, rng)
    print(f"action: {action.value}")
    print("time-action table:")
    print(format_table_dump(table))
    return 0


def _read_reports(path: Path):
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        return [evaluation.report_from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
    rows = list(csv.DictReader(text.splitlines()))
    out = []
    for row in rows:
        d = {}
        for k in evaluation.REPORT_COLUMNS:
            v = row.get(k, "")
            if k == "policy_id":
                d[k] = v
            elif k in ("n_safe", "n_unsafe"):
                d[k] = int(v)
            else:
                d[k] = float(v) if v != "" else None
        out.append(evaluation.report_from_dict(d))
    return out


def cmd_report(args) -> int:
    cfg = _load_config(args)
    path = Path(args.reports or cfg.reports_file)
    reports = _read_reports(path)
    complete = [r for r in reports if r.cost_per_safe is not None and r.cost_per_unsafe is not None]
    if len(complete) < 2:
        raise ValueError("report needs at least two policies with both class costs")
    result = evaluation.crossover(complete, args.grid_step)
    print(_format_table(reports))
    print(f"cheapest at p_safe=0: {result.best[0]}")
    print(f"cheapest at p_safe=1: {result.best[-1]}")
    for pt in result.points:
        print(f"crossover at p_safe={pt.p_safe:.6f}: {pt.left} -> {pt.right}")
    if args.out:
        Path(args.out).write_text(evaluation.crossover_to_csv(result), encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config file (dotted key = json value lines)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", help="output path")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = _Parser(prog="colavoid", description="Satellite collision-avoidance planning and evaluation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="generate an encounter set")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", parents=[common], help="evaluate policies on an encounter set")
    e.add_argument("encounters", nargs="?", help="encounter file (default: from config)")
    e.add_argument("--policies", nargs="*", help="policy specs, overriding the config")
    e.set_defaults(func=cmd_evaluate)

    pl = sub.add_parser("plan", parents=[common], help="one MCTS decision for a state record")
    pl.add_argument("state", help="JSON state record, or - for stdin")
    pl.add_argument("--policy", default="mcts-full-sd", help="MCTS policy spec")
    pl.set_defaults(func=cmd_plan)

    r = sub.add_parser("report", parents=[common], help="crossover analysis of evaluation reports")
    r.add_argument("reports", nargs="?", help="reports .csv or .jsonl (default: from config)")
    r.add_argument("--grid-step", type=float, default=0.01)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except OSError as exc:
        name = getattr(exc, "filename", None)
        where = f"{name}: " if name else ""
        print(f"error: {where}{exc.strerror or exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
