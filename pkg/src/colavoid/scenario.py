"""Synthetic LEO conjunctions.

A chief is drawn from a box of orbital elements, a deputy is placed near it
with a velocity that crosses the chief-deputy line, TCA covariances are drawn
from priors, and the covariances are grown stochastically backwards in time.
Each epoch gets an independent noisy "measurement" of both objects, which is
what a planner sees as the CDM for that epoch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .conjunction import pc_batch
from .mdp import EPOCH_HOURS, MdpState, sample_state
from .orbital import EARTH, EciState, GravityModel, OrbitalElements, elements_to_eci, rtn_basis


class EncounterClass(enum.Enum):
    SAFE = "safe"
    UNSAFE = "unsafe"
    TRIVIAL = "trivial"


def _pair(x) -> tuple[float, float]:
    lo, hi = (float(v) for v in x)
    if not lo <= hi:
        raise ValueError(f"empty range {x}")
    return lo, hi


@dataclass(frozen=True)
class GeneratorConfig:
    # altitude of the semi-major axis above the Earth radius, km
    a_altitude_km: tuple[float, float] = (400.0, 600.0)
    e: tuple[float, float] = (0.01, 0.11)
    i_deg: tuple[float, float] = (75.0, 90.0)
    raan_deg: tuple[float, float] = (45.0, 90.0)
    argp_deg: tuple[float, float] = (30.0, 60.0)
    mean_anomaly_deg: tuple[float, float] = (0.0, 360.0)
    # deputy position offset from the chief at TCA, per ECI axis
    deputy_offset_sigma_km: float = 2.0
    # TCA position sigma priors in (radial, along-track, cross-track), m
    sigma_c_prior_m: tuple[float, float, float] = (50.0, 200.0, 50.0)
    sigma_d_prior_m: tuple[float, float, float] = (100.0, 1000.0, 100.0)
    # relative standard deviation of each prior sigma
    prior_spread: float = 0.1
    hardbody_range_m: tuple[float, float] = (5.0, 10.0)
    p_obs: float = 0.5
    k_c_backprop: float = 0.05
    k_d_lower_backprop: float = 0.05
    k_d_upper_backprop: float = 0.3
    # measurement noise std as a fraction of the epoch covariance's sigma
    measurement_noise_scale: float = 0.6
    # False: the t = 0 epoch carries the ground-truth TCA states
    noisy_tca_epoch: bool = False
    epoch_step_h: int = EPOCH_HOURS
    horizon_h: int = 72
    gravity: GravityModel = field(default=EARTH)

    def __post_init__(self):
        for name in (
            "a_altitude_km", "e", "i_deg", "raan_deg", "argp_deg",
            "mean_anomaly_deg", "hardbody_range_m",
        ):
            object.__setattr__(self, name, _pair(getattr(self, name)))
        for name in ("sigma_c_prior_m", "sigma_d_prior_m"):
            prior = tuple(float(v) for v in getattr(self, name))
            if len(prior) != 3 or min(prior) <= 0:
                raise ValueError(f"{name} must be three positive sigmas")
            object.__setattr__(self, name, prior)
        if not 0 <= self.e[0] and self.e[1] < 1:
            raise ValueError("eccentricity range must lie in [0, 1)")
        if self.a_altitude_km[0] <= 0:
            raise ValueError("semi-major axis must exceed the Earth radius")
        if self.deputy_offset_sigma_km <= 0 or self.prior_spread < 0:
            raise ValueError("offset sigma must be positive and spread non-negative")
        if not 0 <= self.measurement_noise_scale:
            raise ValueError("measurement noise scale must be non-negative")
        if self.hardbody_range_m[0] <= 0:
            raise ValueError("hardbody radii must be positive")
        if not 0 <= self.p_obs <= 1 or self.k_c_backprop < 0:
            raise ValueError("invalid back-propagation parameters")
        if not 0 <= self.k_d_lower_backprop <= self.k_d_upper_backprop:
            raise ValueError("invalid deputy growth bounds")
        if self.epoch_step_h != EPOCH_HOURS:
            raise ValueError(f"epoch step is fixed at {EPOCH_HOURS} h by the MDP")
        if self.horizon_h <= 0 or self.horizon_h % self.epoch_step_h:
            raise ValueError("horizon must be a positive multiple of the epoch step")

    @property
    def epoch_times(self) -> tuple[int, ...]:
        return tuple(range(self.horizon_h, -1, -self.epoch_step_h))


@dataclass(frozen=True, eq=False)
class Encounter:
    truth_c: EciState
    truth_d: EciState
    epochs: tuple[MdpState, ...]  # t = horizon, ..., 0
    seed: tuple[int, int] = (0, 0)  # (master seed, encounter index)
    encounter_class: EncounterClass | None = None

    def __post_init__(self):
        ts = [s.t for s in self.epochs]
        if not ts or ts[-1] != 0 or any(a - b != EPOCH_HOURS for a, b in zip(ts, ts[1:])):
            raise ValueError(f"epochs must step down by {EPOCH_HOURS} h to 0, got {ts}")

    def at(self, t: int) -> MdpState:
        return self.epochs[self.epochs[0].t // EPOCH_HOURS - t // EPOCH_HOURS]

    @property
    def pcs(self) -> list[float]:
        return [s.pc for s in self.epochs]


def sample_chief(cfg: GeneratorConfig, rng: np.random.Generator) -> EciState:
    r_e = cfg.gravity.r_earth
    el = OrbitalElements(
        a=r_e + rng.uniform(*cfg.a_altitude_km),
        e=rng.uniform(*cfg.e),
        i=rng.uniform(*cfg.i_deg),
        raan=rng.uniform(*cfg.raan_deg),
        argp=rng.uniform(*cfg.argp_deg),
        mean_anomaly=rng.uniform(*cfg.mean_anomaly_deg),
    )
    return elements_to_eci(el, cfg.gravity)


def generate_deputy(x_c0: EciState, cfg: GeneratorConfig, rng: np.random.Generator) -> EciState:
    """Deputy at TCA: nearby position, chief's speed, velocity normal to
    both its own radius vector and the chief-deputy line."""
    u_c, v_c = x_c0.position, x_c0.velocity
    speed = float(np.linalg.norm(v_c))
    for _ in range(100):
        u_d = u_c + cfg.deputy_offset_sigma_km * rng.standard_normal(3)
        r_cd = u_d - u_c
        z = rng.uniform(-1.0, 1.0)
        A = np.vstack([u_d, r_cd, [0.0, 0.0, 1.0]])
        # reject near-singular systems (z-row in the span of the others)
        if np.linalg.cond(A) > 1e10 or z == 0.0:
            continue
        d = np.linalg.solve(A, np.array([0.0, 0.0, z]))
        n = np.linalg.norm(d)
        if n == 0:
            continue
        return EciState(u_d, d / n * speed)
    raise RuntimeError("could not construct a non-degenerate deputy velocity")


def _tca_covariance(x: EciState, sigma_prior_m, spread: float, rng) -> np.ndarray:
    mean = np.asarray(sigma_prior_m)
    sig = mean * (1.0 + spread * rng.standard_normal(3))
    sig = np.maximum(sig, 0.1 * mean)  # keep the draw positive
    R = rtn_basis(x)
    pos = R @ np.diag((sig / 1000.0) ** 2) @ R.T
    cov = np.zeros((6, 6))
    cov[:3, :3] = 0.5 * (pos + pos.T)
    return cov


def generate_encounter(
    x_c0: EciState,
    x_d0: EciState,
    cfg: GeneratorConfig,
    rng: np.random.Generator,
    seed: tuple[int, int] = (0, 0),
) -> Encounter:
    r_c = rng.uniform(*cfg.hardbody_range_m)
    r_d = rng.uniform(*cfg.hardbody_range_m)
    sigma_c = _tca_covariance(x_c0, cfg.sigma_c_prior_m, cfg.prior_spread, rng)
    sigma_d = _tca_covariance(x_d0, cfg.sigma_d_prior_m, cfg.prior_spread, rng)

    states = []
    for t in range(0, cfg.horizon_h + 1, cfg.epoch_step_h):
        if t > 0:
            sigma_c = sigma_c * (1.0 + cfg.k_c_backprop)
            observed = rng.uniform() < cfg.p_obs
            k_d = rng.uniform(cfg.k_d_lower_backprop, cfg.k_d_upper_backprop) if observed else 0.0
            sigma_d = sigma_d * (1.0 + k_d)
        if t == 0 and not cfg.noisy_tca_epoch:
            x_c, x_d = x_c0, x_d0
        else:
            noise = cfg.measurement_noise_scale**2
            x_c = sample_state(x_c0, noise * sigma_c, rng)
            x_d = sample_state(x_d0, noise * sigma_d, rng)
        states.append(MdpState(t, x_c, x_d, sigma_c, sigma_d, r_c, r_d))
    return Encounter(x_c0, x_d0, tuple(reversed(states)), seed)


def prime_pcs(states) -> None:
    """Evaluate Pc for many states in one batch and cache it on each."""
    states = [s for s in states if "pc" not in s.__dict__]
    if not states:
        return
    pcs = pc_batch(
        np.array([s.x_c.position for s in states]),
        np.array([s.x_c.velocity for s in states]),
        np.array([s.x_d.position for s in states]),
        np.array([s.x_d.velocity for s in states]),
        np.array([s.sigma_c[:3, :3] + s.sigma_d[:3, :3] for s in states]),
        np.array([(s.r_c + s.r_d) / 1000.0 for s in states]),
    )
    for s, pc in zip(states, pcs):
        s.__dict__["pc"] = float(pc)


def classify(e: Encounter, pc_threshold: float) -> EncounterClass:
    if not any(s.pc > pc_threshold for s in e.epochs if s.t > 0):
        return EncounterClass.TRIVIAL
    if e.at(0).pc >= pc_threshold:
        return EncounterClass.UNSAFE
    return EncounterClass.SAFE


def generate(
    cfg: GeneratorConfig, master_seed: int, index: int, pc_threshold: float = 1e-5
) -> Encounter:
    """Encounter number ``index`` of the set defined by ``(cfg, master_seed)``."""
    rng = seeding.stream(master_seed, seeding.GENERATE, index)
    x_c0 = sample_chief(cfg, rng)
    x_d0 = generate_deputy(x_c0, cfg, rng)
    e = generate_encounter(x_c0, x_d0, cfg, rng, seed=(master_seed, index))
    prime_pcs(e.epochs)
    return Encounter(e.truth_c, e.truth_d, e.epochs, e.seed, classify(e, pc_threshold))


def late_crossing(e: Encounter, pc_threshold: float) -> bool:
    """Pc below threshold at the last decision epoch but above it at TCA."""
    return e.at(EPOCH_HOURS).pc < pc_threshold < e.at(0).pc


def expected_growth(cfg: GeneratorConfig, steps: int) -> tuple[float, float]:
    """Closed-form mean covariance scale after ``steps`` epochs (chief, deputy)."""
    mean_kd = 0.5 * (cfg.k_d_lower_backprop + cfg.k_d_upper_backprop)
    return (
        (1.0 + cfg.k_c_backprop) ** steps,
        (1.0 + cfg.p_obs * mean_kd) ** steps,
    )

