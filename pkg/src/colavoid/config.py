"""Run configuration and policy specs.

The config file is flat text, one ``dotted.key = <json value>`` per line;
``#`` starts a comment. Every key is optional and defaults to the values
below. Example::

    master_seed = 7
    encounter_count = 5000
    generator.measurement_noise_scale = 0.6
    mcts.n_sim_max = 200
    policies = ["mcts-full-sd", "rule-72", "rule-8"]

Policy specs: ``rule-<hours>`` (rule-based cutoff), ``mcts-<full|limited>-<sd|ucb1>``
and ``always-wait``.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field

from .mdp import EPOCH_HOURS, RewardParams, TransitionParams
from .orbital import GravityModel
from .planners import ConstantPolicy, Heuristic, MctsConfig, MctsPolicy, Policy, RuleBasedPolicy
from .scenario import GeneratorConfig

MCTS_POLICIES = ("mcts-full-sd", "mcts-full-ucb1", "mcts-limited-sd", "mcts-limited-ucb1")
RULE_POLICIES = tuple(f"rule-{t}" for t in range(72, 0, -EPOCH_HOURS))
DEFAULT_POLICIES = MCTS_POLICIES + RULE_POLICIES

_RULE = re.compile(r"rule-(\d+)")
_MCTS = re.compile(r"mcts-(full|limited)-(sd|ucb1)")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MctsSettings:
    """Search settings shared by every MCTS policy of a run."""

    n_sim_max: int = 200
    gamma: float = 0.95
    c: float = 0.8


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 0
    encounter_count: int = 1000
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    transition: TransitionParams = field(default_factory=TransitionParams)
    reward: RewardParams = field(default_factory=RewardParams)
    mcts: MctsSettings = field(default_factory=MctsSettings)
    policies: tuple[str, ...] = DEFAULT_POLICIES
    encounters_file: str = "encounters.jsonl"
    reports_file: str = "reports.csv"

    def __post_init__(self):
        if int(self.master_seed) != self.master_seed or self.master_seed < 0:
            raise ConfigError("master_seed must be a non-negative integer")
        if int(self.encounter_count) != self.encounter_count or self.encounter_count < 1:
            raise ConfigError("encounter_count must be a positive integer")
        object.__setattr__(self, "policies", tuple(self.policies))
        if len(set(self.policies)) != len(self.policies):
            raise ConfigError("policy labels must be unique")
        for spec in self.policies:
            make_policy(spec, self)


def make_policy(spec: str, cfg: RunConfig) -> Policy:
    if m := _RULE.fullmatch(spec):
        t = int(m.group(1))
        if t < EPOCH_HOURS or t % EPOCH_HOURS:
            raise ConfigError(f"unknown policy spec {spec!r}: cutoff must be a multiple of {EPOCH_HOURS} h")
        return RuleBasedPolicy(t, cfg.reward.pc_threshold)
    if m := _MCTS.fullmatch(spec):
        mc = MctsConfig(
            n_sim_max=cfg.mcts.n_sim_max,
            gamma=cfg.mcts.gamma,
            c=cfg.mcts.c,
            heuristic=Heuristic(m.group(2)),
            t_maxdepth=0 if m.group(1) == "full" else EPOCH_HOURS,
        )
        return MctsPolicy(mc, cfg.transition, cfg.reward)
    if spec == "always-wait":
        return ConstantPolicy()
    raise ConfigError(f"unknown policy spec {spec!r}")


# -- flat text format ---------------------------------------------------------

# nested dataclass fields and their types
_SECTIONS = {
    "generator": GeneratorConfig,
    "generator.gravity": GravityModel,
    "transition": TransitionParams,
    "reward": RewardParams,
    "mcts": MctsSettings,
}


def _flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    out = []
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        key = prefix + f.name
        if dataclasses.is_dataclass(v):
            out.extend(_flatten(v, key + "."))
        elif isinstance(v, tuple):
            out.append((key, list(v)))
        else:
            out.append((key, v))
    return out


def dumps(cfg: RunConfig) -> str:
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in _flatten(cfg))


def _build(cls, values: dict, prefix: str):
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = prefix + f.name
        if key in _SECTIONS:
            kwargs[f.name] = _build(_SECTIONS[key], values, key + ".")
        elif key in values:
            v = values.pop(key)
            kwargs[f.name] = tuple(v) if isinstance(v, list) else v
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: {exc}") from exc


def loads(text: str) -> RunConfig:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        try:
            values[key] = json.loads(val)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {lineno}: {key}: invalid value ({exc.msg})") from exc
    cfg = _build(RunConfig, values, "")
    if values:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(values))}")
    return cfg


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
