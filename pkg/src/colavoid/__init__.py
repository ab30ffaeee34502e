"""Satellite collision avoidance as a Markov decision process.

Modules: ``orbital`` (two-body dynamics), ``conjunction`` (collision
probability), ``mdp`` (states, transition, rewards), ``scenario`` (synthetic
encounters), ``planners`` (MCTS and rule-based policies), ``evaluation``
(batch metrics and crossover analysis), ``config``/``records`` (file
formats) and ``cli``.
"""

from .conjunction import collision_probability
from .mdp import Action, MdpState, RewardParams, TransitionParams, cost_to_maneuver, reward, transition
from .orbital import EciState, OrbitalElements, propagate
from .planners import MctsConfig, MctsPolicy, RuleBasedPolicy, mcts_plan, run_sequence
from .scenario import Encounter, EncounterClass, GeneratorConfig, generate

__version__ = "0.1.0"
