"""The collision-avoidance decision problem.

States mirror the content of a conjunction data message: time to closest
approach (hours), chief and deputy states at the TCA epoch, their 6x6
covariances and hardbody radii (m). Two actions, a stochastic transition
that models CDM updates, and the reward table with its maneuver-cost solver.

Sign convention: rewards are <= 0; ``cost_to_maneuver`` returns a positive
delta-v in m/s and the maneuver reward is its negative.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .conjunction import collision_probability, pc_batch, validate_covariance
from .orbital import EciState, propagate_arrays

EPOCH_HOURS = 8
MAX_MANEUVER_STEPS = 1_000_000


class Action(enum.Enum):
    WAIT = "wait"
    MANEUVER = "maneuver"


# argmax ties resolve to the first entry
ACTIONS = (Action.WAIT, Action.MANEUVER)


class Thrust(enum.Enum):
    ALONG = "along"
    ANTI_ALONG = "anti_along"

    @property
    def sign(self) -> float:
        return 1.0 if self is Thrust.ALONG else -1.0


@dataclass(frozen=True, eq=False)
class MdpState:
    t: int
    x_c: EciState
    x_d: EciState
    sigma_c: np.ndarray
    sigma_d: np.ndarray
    r_c: float
    r_d: float

    def __post_init__(self):
        if int(self.t) != self.t or self.t < 0 or self.t % EPOCH_HOURS:
            raise ValueError(f"t must be a non-negative multiple of {EPOCH_HOURS} h, got {self.t}")
        object.__setattr__(self, "t", int(self.t))
        for name in ("sigma_c", "sigma_d"):
            m = validate_covariance(getattr(self, name), name).copy()
            m.flags.writeable = False
            object.__setattr__(self, name, m)
        if not (self.r_c > 0 and self.r_d > 0):
            raise ValueError("hardbody radii must be positive")
        object.__setattr__(self, "r_c", float(self.r_c))
        object.__setattr__(self, "r_d", float(self.r_d))

    @classmethod
    def _unchecked(cls, t, x_c, x_d, sigma_c, sigma_d, r_c, r_d) -> MdpState:
        # hot-path constructor for states derived from an already valid one
        s = object.__new__(cls)
        for k, v in zip(
            ("t", "x_c", "x_d", "sigma_c", "sigma_d", "r_c", "r_d"),
            (t, x_c, x_d, sigma_c, sigma_d, r_c, r_d),
        ):
            object.__setattr__(s, k, v)
        return s

    def replace(self, **changes) -> MdpState:
        fields = dict(
            t=self.t, x_c=self.x_c, x_d=self.x_d, sigma_c=self.sigma_c,
            sigma_d=self.sigma_d, r_c=self.r_c, r_d=self.r_d,
        )
        fields.update(changes)
        return MdpState(**fields)

    @cached_property
    def pc(self) -> float:
        return collision_probability(self)

    @cached_property
    def _roots(self) -> tuple[np.ndarray, np.ndarray]:
        return gaussian_root(self.sigma_c), gaussian_root(self.sigma_d)

    def __eq__(self, other):
        if not isinstance(other, MdpState):
            return NotImplemented
        return (
            self.t == other.t
            and self.x_c == other.x_c
            and self.x_d == other.x_d
            and np.array_equal(self.sigma_c, other.sigma_c)
            and np.array_equal(self.sigma_d, other.sigma_d)
            and self.r_c == other.r_c
            and self.r_d == other.r_d
        )


@dataclass(frozen=True)
class TransitionParams:
    p_obs: float = 0.5
    k_c: float = 0.05
    k_d_lower: float = 0.05
    k_d_upper: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.p_obs <= 1.0:
            raise ValueError("p_obs must be in [0, 1]")
        if not 0.0 <= self.k_c < 1.0:
            raise ValueError("k_c must be in [0, 1)")
        if not 0.0 <= self.k_d_lower <= self.k_d_upper < 1.0:
            raise ValueError("need 0 <= k_d_lower <= k_d_upper < 1")


@dataclass(frozen=True)
class RewardParams:
    r_crash: float = -0.5
    pc_threshold: float = 1e-5
    delta_v_step: float = 0.001  # m/s

    def __post_init__(self):
        if not self.r_crash < 0:
            raise ValueError("r_crash must be negative")
        if not 0.0 < self.pc_threshold < 1.0:
            raise ValueError("pc_threshold must be in (0, 1)")
        if not self.delta_v_step > 0:
            raise ValueError("delta_v_step must be positive")


def legal_actions(s: MdpState) -> tuple[Action, ...]:
    return (Action.WAIT,) if s.t == 0 else ACTIONS


def gaussian_root(cov) -> np.ndarray:
    """Matrix L with L L^T = cov; eigen fallback for singular PSD input."""
    cov = np.asarray(cov, dtype=float)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        lam, V = np.linalg.eigh(0.5 * (cov + cov.T))
        return V * np.sqrt(np.clip(lam, 0.0, None))


def sample_state(x: EciState, cov, rng: np.random.Generator, root=None) -> EciState:
    """Draw from N(x, cov) over the 6-vector (position, velocity)."""
    if root is None:
        root = gaussian_root(cov)
    draw = x.as_array() + root @ rng.standard_normal(6)
    if not root.any():
        return x
    return EciState(draw[:3], draw[3:])


def transition(
    s: MdpState, a: Action, params: TransitionParams, rng: np.random.Generator
) -> MdpState:
    """Sample the next CDM update. The action does not enter the dynamics."""
    if s.t <= 0:
        raise ValueError("no transition from the terminal epoch t = 0")
    root_c, root_d = s._roots
    x_c = sample_state(s.x_c, s.sigma_c, rng, root_c)
    x_d = sample_state(s.x_d, s.sigma_d, rng, root_d)
    k_d = rng.uniform(params.k_d_lower, params.k_d_upper)
    observed = rng.random() < params.p_obs
    sigma_c = s.sigma_c * (1.0 - params.k_c)
    sigma_c.flags.writeable = False
    root_c = root_c * np.sqrt(1.0 - params.k_c)
    if observed:
        sigma_d = s.sigma_d * (1.0 - k_d)
        sigma_d.flags.writeable = False
        root_d = root_d * np.sqrt(1.0 - k_d)
    else:
        sigma_d = s.sigma_d
    nxt = MdpState._unchecked(s.t - EPOCH_HOURS, x_c, x_d, sigma_c, sigma_d, s.r_c, s.r_d)
    nxt.__dict__["_roots"] = (root_c, root_d)
    return nxt


def apply_thrust(x_c: EciState, t: float, direction: Thrust, dv: float) -> EciState:
    """Burn ``dv`` m/s along (or against) the velocity ``t`` hours before TCA.

    ``x_c`` is the chief at TCA; the result is the perturbed TCA state.
    """
    if t <= 0:
        raise ValueError("thrust epoch must precede TCA (t > 0)")
    dt = t * 3600.0
    r_b, v_b = propagate_arrays(x_c.position, x_c.velocity, -dt)
    u = v_b[0] / np.linalg.norm(v_b[0])
    v_new = v_b[0] + direction.sign * (dv / 1000.0) * u
    r_f, v_f = propagate_arrays(r_b[0], v_new, dt)
    return EciState(r_f[0], v_f[0])


def _thrust_pcs(s: MdpState, r_b, v_b, steps, sign, dv_step):
    u = v_b / np.linalg.norm(v_b)
    dv = (dv_step / 1000.0) * np.asarray(steps, dtype=float) * np.asarray(sign, dtype=float)
    v = v_b + dv[:, None] * u
    r = np.broadcast_to(r_b, v.shape)
    r_f, v_f = propagate_arrays(r, v, s.t * 3600.0)
    pos_cov = s.sigma_c[:3, :3] + s.sigma_d[:3, :3]
    return pc_batch(r_f, v_f, s.x_d.position, s.x_d.velocity, pos_cov, (s.r_c + s.r_d) / 1000.0)


def maneuver_plan(s: MdpState, params: RewardParams) -> tuple[Thrust, int]:
    """Direction and number of delta-v steps that bring Pc under threshold.

    One step is tried in each direction; the direction with the lower Pc
    (along-track on ties) is then stepped until Pc < threshold. Cumulative
    single steps equal one burn of the summed size, so candidate step counts
    are evaluated in vectorised blocks and the first success is taken; the
    result is the same as stepping one at a time.
    """
    if s.t <= 0:
        raise ValueError("cannot maneuver at t = 0")
    if not s.pc > params.pc_threshold:
        raise ValueError(
            f"cost to maneuver requires Pc > {params.pc_threshold:g}, got {s.pc:.3e}"
        )
    r_b, v_b = propagate_arrays(s.x_c.position, s.x_c.velocity, -s.t * 3600.0)
    r_b, v_b = r_b[0], v_b[0]
    thr = params.pc_threshold
    # first block: steps 1..16 in both directions in one batch
    first = np.arange(1, 17)
    both = _thrust_pcs(
        s, r_b, v_b, np.concatenate([first, first]),
        np.repeat([1.0, -1.0], first.size), params.delta_v_step,
    )
    along, anti = both[: first.size], both[first.size :]
    direction = Thrust.ANTI_ALONG if along[0] > anti[0] else Thrust.ALONG
    pcs = anti if direction is Thrust.ANTI_ALONG else along
    hit = np.flatnonzero(pcs < thr)
    if hit.size:
        return direction, int(first[hit[0]])
    start, block = first[-1] + 1, 32
    while start <= MAX_MANEUVER_STEPS:
        stop = min(start + block, MAX_MANEUVER_STEPS + 1)
        steps = np.arange(start, stop)
        pcs = _thrust_pcs(s, r_b, v_b, steps, direction.sign, params.delta_v_step)
        hit = np.flatnonzero(pcs < thr)
        if hit.size:
            return direction, int(steps[hit[0]])
        start = stop
        block = min(block * 2, 4096)
    raise RuntimeError(f"no maneuver within {MAX_MANEUVER_STEPS} steps brings Pc under threshold")


def cost_to_maneuver(s: MdpState, params: RewardParams) -> float:
    """Minimum along-track delta-v (m/s, on the step grid) to reach Pc < threshold."""
    _, steps = maneuver_plan(s, params)
    return steps * params.delta_v_step


def maneuver_cost(s: MdpState, params: RewardParams) -> float:
    """Delta-v a maneuver at ``s`` needs; zero when Pc is already acceptable."""
    if s.pc <= params.pc_threshold:
        return 0.0
    return cost_to_maneuver(s, params)


def reward(s: MdpState, a: Action, params: RewardParams) -> float:
    if s.t == 0:
        if a is not Action.WAIT:
            raise ValueError("only wait is legal at t = 0")
        return params.r_crash if s.pc > params.pc_threshold else 0.0
    if a is Action.MANEUVER:
        return -maneuver_cost(s, params)
    return 0.0
