"""Decision policies and the episode driver.

The MCTS here keeps its statistics in a time-action table: values and visit
counts are keyed by (hours to TCA, action) instead of by full state, so every
sampled state at the same epoch shares one row. Rollouts use ``transition``
as the generative model; a maneuver that actually burns fuel ends the
rollout, since nothing after it can change the outcome.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .mdp import (
    ACTIONS,
    EPOCH_HOURS,
    Action,
    MdpState,
    RewardParams,
    TransitionParams,
    maneuver_cost,
    reward,
    transition,
)


class Heuristic(enum.Enum):
    UCB1 = "ucb1"
    STOCHASTIC_DEPTH = "sd"


@dataclass
class TimeActionTable:
    q: dict[tuple[int, Action], float] = field(default_factory=dict)
    n: dict[tuple[int, Action], int] = field(default_factory=dict)
    visited: set[tuple[int, Action]] = field(default_factory=set)

    def has_row(self, t: int) -> bool:
        return all((t, a) in self.visited for a in ACTIONS)

    def init_row(self, t: int) -> None:
        for a in ACTIONS:
            if (t, a) not in self.visited:
                self.q[(t, a)] = 0.0
                self.n[(t, a)] = 0
                self.visited.add((t, a))

    def update(self, t: int, a: Action, value: float) -> None:
        """Record one return for (t, a) as an incremental mean."""
        key = (t, a)
        self.n[key] += 1
        self.q[key] += (value - self.q[key]) / self.n[key]

    def visits(self, t: int) -> int:
        return sum(self.n[(t, a)] for a in ACTIONS)

    def best(self, t: int) -> Action:
        # strict comparison keeps the first action (Wait) on ties
        best = ACTIONS[0]
        for a in ACTIONS[1:]:
            if self.q[(t, a)] > self.q[(t, best)]:
                best = a
        return best

    def times(self) -> list[int]:
        return sorted({t for t, _ in self.visited}, reverse=True)

    def total_visits(self) -> int:
        return sum(self.n.values())


@dataclass(frozen=True)
class MctsConfig:
    n_sim_max: int = 200
    gamma: float = 0.95
    c: float = 0.8
    heuristic: Heuristic = Heuristic.STOCHASTIC_DEPTH
    t_maxdepth: int = 0  # 0: full horizon; 8: limited horizon

    def __post_init__(self):
        if int(self.n_sim_max) != self.n_sim_max or self.n_sim_max < 1:
            raise ValueError("n_sim_max must be a positive integer")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not (math.isfinite(self.c) and self.c >= 0):
            raise ValueError("exploration constant must be finite and non-negative")
        if self.t_maxdepth not in (0, EPOCH_HOURS):
            raise ValueError(f"t_maxdepth must be 0 or {EPOCH_HOURS}")
        object.__setattr__(self, "heuristic", Heuristic(self.heuristic))


def ucb1_explore(table: TimeActionTable, t: int, c: float) -> Action:
    total = table.visits(t)
    best, best_score = None, -math.inf
    for a in ACTIONS:
        n = table.n[(t, a)]
        if n == 0:
            score = math.inf
        else:
            score = table.q[(t, a)] + c * math.sqrt(math.log(total) / n)
        if best is None or score > best_score:
            best, best_score = a, score
    return best


def stochastic_depth_explore(
    table: TimeActionTable, t: int, c: float, rng: np.random.Generator
) -> Action:
    """Mostly go deeper (Wait); branch to Maneuver once Wait holds more than
    a fraction ``c`` of the row's visits."""
    total = table.visits(t)
    if total == 0:
        return ACTIONS[int(rng.integers(len(ACTIONS)))]
    if table.n[(t, Action.WAIT)] / total > c:
        return Action.MANEUVER
    return Action.WAIT


def terminal_value(s: MdpState, cfg: MctsConfig, rparams: RewardParams) -> float:
    if cfg.t_maxdepth == 0:
        return reward(s, Action.WAIT, rparams)
    # limited horizon: pay for the maneuver the last epoch would force
    return -maneuver_cost(s, rparams)


def _explore(table, t, cfg: MctsConfig, rng) -> Action:
    if cfg.heuristic is Heuristic.UCB1:
        return ucb1_explore(table, t, cfg.c)
    return stochastic_depth_explore(table, t, cfg.c, rng)


def simulate_recursion(
    s: MdpState,
    table: TimeActionTable,
    cfg: MctsConfig,
    tparams: TransitionParams,
    rparams: RewardParams,
    rng: np.random.Generator,
) -> float:
    t = s.t
    if not table.has_row(t):
        table.init_row(t)
        return 0.0
    if t <= cfg.t_maxdepth:
        return terminal_value(s, cfg, rparams)
    a = _explore(table, t, cfg, rng)
    r = reward(s, a, rparams)
    if a is Action.MANEUVER and r < 0:
        q = r
    else:
        child = transition(s, a, tparams, rng)
        q = r + cfg.gamma * simulate_recursion(child, table, cfg, tparams, rparams, rng)
    table.update(t, a, q)
    return q


def mcts_search(
    s: MdpState,
    cfg: MctsConfig,
    tparams: TransitionParams,
    rparams: RewardParams,
    rng: np.random.Generator,
) -> tuple[Action, TimeActionTable]:
    """Run ``n_sim_max`` simulations from ``s`` and return the greedy action
    together with the table, for inspection."""
    if not s.t > cfg.t_maxdepth:
        raise ValueError(f"search needs t > t_maxdepth={cfg.t_maxdepth}, got t={s.t}")
    table = TimeActionTable()
    for _ in range(cfg.n_sim_max):
        simulate_recursion(s, table, cfg, tparams, rparams, rng)
    return table.best(s.t), table


def mcts_plan(
    s: MdpState,
    cfg: MctsConfig,
    tparams: TransitionParams,
    rparams: RewardParams,
    rng: np.random.Generator,
) -> Action:
    return mcts_search(s, cfg, tparams, rparams, rng)[0]


def rule_based_action(s: MdpState, t_cutoff: int, pc_threshold: float) -> Action:
    if 0 < s.t <= t_cutoff and s.pc > pc_threshold:
        return Action.MANEUVER
    return Action.WAIT


class Policy(Protocol):
    label: str

    def decide(self, s: MdpState, rng: np.random.Generator) -> Action: ...


@dataclass(frozen=True)
class RuleBasedPolicy:
    t_cutoff: int
    pc_threshold: float = 1e-5

    def __post_init__(self):
        if self.t_cutoff < EPOCH_HOURS or self.t_cutoff % EPOCH_HOURS:
            raise ValueError(f"t_cutoff must be a positive multiple of {EPOCH_HOURS} h")

    @property
    def label(self) -> str:
        return f"rule-{self.t_cutoff}"

    def decide(self, s: MdpState, rng: np.random.Generator) -> Action:
        return rule_based_action(s, self.t_cutoff, self.pc_threshold)


@dataclass(frozen=True)
class MctsPolicy:
    config: MctsConfig = field(default_factory=MctsConfig)
    tparams: TransitionParams = field(default_factory=TransitionParams)
    rparams: RewardParams = field(default_factory=RewardParams)

    @property
    def label(self) -> str:
        horizon = "full" if self.config.t_maxdepth == 0 else "limited"
        return f"mcts-{horizon}-{self.config.heuristic.value}"

    def decide(self, s: MdpState, rng: np.random.Generator) -> Action:
        if s.t == 0:
            return Action.WAIT
        if s.t <= self.config.t_maxdepth:
            # the horizon's last epoch: maneuver exactly when still unsafe
            return rule_based_action(s, s.t, self.rparams.pc_threshold)
        return mcts_plan(s, self.config, self.tparams, self.rparams, rng)


@dataclass(frozen=True)
class ConstantPolicy:
    """Always returns one action (Wait at t = 0). Useful as a reference."""

    action: Action = Action.WAIT

    @property
    def label(self) -> str:
        return f"always-{self.action.value}"

    def decide(self, s: MdpState, rng: np.random.Generator) -> Action:
        return Action.WAIT if s.t == 0 else self.action


@dataclass(frozen=True)
class EpisodeOutcome:
    total_reward: float
    maneuvered: bool
    maneuver_time: int | None
    delta_v_spent: float  # m/s
    final_pc: float
    mitigated: bool

    def __post_init__(self):
        if not (self.maneuvered == (self.maneuver_time is not None) == (self.delta_v_spent > 0)):
            raise ValueError("maneuvered, maneuver_time and delta_v_spent disagree")


def run_sequence(encounter, policy: Policy, rparams: RewardParams, rng: np.random.Generator) -> EpisodeOutcome:
    """Feed the encounter's epochs to ``policy`` until it maneuvers or TCA.

    A Maneuver decided while Pc is already at or below threshold costs
    nothing and the episode continues as if the policy had waited.
    """
    for s in encounter.epochs:
        if s.t == 0:
            break
        if policy.decide(s, rng) is not Action.MANEUVER:
            continue
        dv = maneuver_cost(s, rparams)
        if dv > 0:
            return EpisodeOutcome(-dv, True, s.t, dv, s.pc, True)
    final = encounter.epochs[-1]
    r = reward(final, Action.WAIT, rparams)
    return EpisodeOutcome(r, False, None, 0.0, final.pc, r == 0.0)
