"""Two-body Keplerian dynamics.

Element/state conversions, Kepler's equation, forward and backward
propagation, and the along-track unit vector used for thrusting.
Units are km, km/s and seconds throughout; angles in elements are degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MU_EARTH = 398600.4418  # km^3/s^2
R_EARTH = 6378.137  # km

_KEPLER_TOL = 1e-12
_KEPLER_MAX_NEWTON = 50


@dataclass(frozen=True)
class GravityModel:
    mu: float = MU_EARTH
    r_earth: float = R_EARTH

    def __post_init__(self):
        if not (self.mu > 0 and self.r_earth > 0):
            raise ValueError("mu and r_earth must be positive")


EARTH = GravityModel()


@dataclass(frozen=True, eq=False)
class EciState:
    """Inertial position (km) and velocity (km/s) of one object."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        r = np.array(self.position, dtype=float).reshape(3)
        v = np.array(self.velocity, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("state components must be finite")
        if not np.any(r):
            raise ValueError("position must be nonzero")
        r.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "position", r)
        object.__setattr__(self, "velocity", v)

    @classmethod
    def from_array(cls, x) -> EciState:
        x = np.asarray(x, dtype=float)
        return cls(x[:3], x[3:6])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    def __eq__(self, other):
        if not isinstance(other, EciState):
            return NotImplemented
        return bool(
            np.array_equal(self.position, other.position)
            and np.array_equal(self.velocity, other.velocity)
        )

    def __repr__(self):
        return f"EciState(position={self.position.tolist()}, velocity={self.velocity.tolist()})"


@dataclass(frozen=True)
class OrbitalElements:
    """Classical elements. ``a`` in km, angles in degrees."""

    a: float
    e: float
    i: float
    raan: float
    argp: float
    mean_anomaly: float = field(default=0.0)


def solve_kepler(mean_anomaly, e):
    """Solve ``E - e sin E = M`` for the eccentric anomaly (radians).

    Newton iteration from ``E0 = M``; anything not converged after the
    iteration cap is finished by bisection. Accepts scalars or arrays.
    """
    M = np.asarray(mean_anomaly, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(e < 0) or np.any(e >= 1):
        raise ValueError("eccentricity must be in [0, 1)")
    scalar = M.ndim == 0 and e.ndim == 0
    M, e = np.broadcast_arrays(np.atleast_1d(M), np.atleast_1d(e))
    # reduce to [-pi, pi] so the bisection bracket is known
    turns = np.round(M / (2 * np.pi))
    Mr = M - 2 * np.pi * turns

    E = Mr.copy()
    done = np.zeros(E.shape, dtype=bool)
    for _ in range(_KEPLER_MAX_NEWTON):
        f = E - e * np.sin(E) - Mr
        done = np.abs(f) <= _KEPLER_TOL
        if done.all():
            break
        step = f / (1.0 - e * np.cos(E))
        E = np.where(done, E, E - step)
    else:
        f = E - e * np.sin(E) - Mr
        done = np.abs(f) <= _KEPLER_TOL

    if not done.all():
        # f(E) is monotone in E; the root lies in [-pi, pi]
        lo = np.full(E.shape, -np.pi)
        hi = np.full(E.shape, np.pi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = mid - e * np.sin(mid) - Mr
            lo = np.where(fm < 0, mid, lo)
            hi = np.where(fm < 0, hi, mid)
        E = np.where(done, E, 0.5 * (lo + hi))

    # one more Newton step takes a 1e-12 residual to machine precision; long
    # back-propagations amplify the remaining phase error otherwise
    E = E - (E - e * np.sin(E) - Mr) / (1.0 - e * np.cos(E))
    E = E + 2 * np.pi * turns
    return float(E[0]) if scalar else E


def _rotation_pqw_to_eci(raan, inc, argp):
    cO, sO = math.cos(raan), math.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    cw, sw = math.cos(argp), math.sin(argp)
    return np.array(
        [
            [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
            [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
            [sw * si, cw * si, ci],
        ]
    )


def elements_to_eci(el: OrbitalElements, g: GravityModel = EARTH) -> EciState:
    if not (0.0 <= el.e < 1.0):
        raise ValueError(f"eccentricity must be in [0, 1), got {el.e}")
    if el.a <= 0:
        raise ValueError(f"semi-major axis must be positive, got {el.a}")
    E = solve_kepler(math.radians(el.mean_anomaly), el.e)
    cE, sE = math.cos(E), math.sin(E)
    b = el.a * math.sqrt(1.0 - el.e**2)
    r_mag = el.a * (1.0 - el.e * cE)
    r_pqw = np.array([el.a * (cE - el.e), b * sE, 0.0])
    v_pqw = math.sqrt(g.mu * el.a) / r_mag * np.array([-sE, math.sqrt(1.0 - el.e**2) * cE, 0.0])
    R = _rotation_pqw_to_eci(math.radians(el.raan), math.radians(el.i), math.radians(el.argp))
    return EciState(R @ r_pqw, R @ v_pqw)


def eci_to_elements(x: EciState, g: GravityModel = EARTH) -> OrbitalElements:
    """Classical elements of a bound orbit.

    Undefined angles are resolved conventionally: for equatorial orbits the
    node is placed on the x axis, for circular orbits the argument of
    perigee is zero and the anomaly is measured from the node.
    """
    r, v = x.position, x.velocity
    rn = float(np.linalg.norm(r))
    h = np.cross(r, v)
    hn = float(np.linalg.norm(h))
    if hn <= 1e-12 * rn * max(float(np.linalg.norm(v)), 1e-300):
        raise ValueError("rectilinear state: zero angular momentum")
    energy = 0.5 * float(v @ v) - g.mu / rn
    if energy >= 0:
        raise ValueError("state is not on a bound orbit")
    a = -g.mu / (2.0 * energy)
    e_vec = np.cross(v, h) / g.mu - r / rn
    e = float(np.linalg.norm(e_vec))
    inc = math.acos(max(-1.0, min(1.0, h[2] / hn)))

    node = np.array([-h[1], h[0], 0.0])
    nn = float(np.linalg.norm(node))
    eps = 1e-11
    if nn > eps * hn:
        raan = math.atan2(node[1], node[0])
        n_hat = node / nn
    else:
        raan = 0.0
        n_hat = np.array([1.0, 0.0, 0.0])
    h_hat = h / hn
    m_hat = np.cross(h_hat, n_hat)

    # angles measured in the orbit plane from the node line
    u = math.atan2(float(r @ m_hat), float(r @ n_hat))
    if e > eps:
        argp = math.atan2(float(e_vec @ m_hat), float(e_vec @ n_hat))
        nu = u - argp
        cnu, snu = math.cos(nu), math.sin(nu)
        E = math.atan2(math.sqrt(1.0 - e * e) * snu, e + cnu)
        M = E - e * math.sin(E)
    else:
        e = 0.0
        argp = 0.0
        M = u
    return OrbitalElements(
        a=a,
        e=e,
        i=math.degrees(inc),
        raan=math.degrees(raan) % 360.0,
        argp=math.degrees(argp) % 360.0,
        mean_anomaly=math.degrees(M) % 360.0,
    )


def propagate_arrays(r, v, dt, mu: float = MU_EARTH):
    """Vectorised two-body propagation of ``(N, 3)`` positions/velocities.

    Uses Lagrange f and g coefficients with the eccentric-anomaly change
    obtained from Kepler's equation, which stays well defined for circular
    and equatorial orbits.
    """
    r = np.atleast_2d(np.asarray(r, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    dt = np.broadcast_to(np.asarray(dt, dtype=float), (r.shape[0],))

    r0 = np.linalg.norm(r, axis=1)
    v2 = np.einsum("ij,ij->i", v, v)
    h = np.cross(r, v)
    if np.any(np.linalg.norm(h, axis=1) <= 1e-12 * r0 * np.sqrt(v2)):
        raise ValueError("rectilinear state: zero angular momentum")
    inv_a = 2.0 / r0 - v2 / mu
    if np.any(inv_a <= 0):
        raise ValueError("state is not on a bound orbit")
    a = 1.0 / inv_a
    rdotv = np.einsum("ij,ij->i", r, v)
    sqrt_mu_a = np.sqrt(mu * a)
    e_cos = 1.0 - r0 / a
    e_sin = rdotv / sqrt_mu_a
    e = np.hypot(e_cos, e_sin)
    E0 = np.arctan2(e_sin, e_cos)
    M0 = E0 - e_sin
    n = np.sqrt(mu / a**3)
    E1 = solve_kepler(M0 + n * dt, e)
    dE = np.atleast_1d(E1) - E0

    cdE, sdE = np.cos(dE), np.sin(dE)
    f = 1.0 - a / r0 * (1.0 - cdE)
    g = dt + (sdE - dE) / n
    r_new = f[:, None] * r + g[:, None] * v
    r1 = np.linalg.norm(r_new, axis=1)
    fdot = -sqrt_mu_a / (r1 * r0) * sdE
    gdot = 1.0 - a / r1 * (1.0 - cdE)
    v_new = fdot[:, None] * r + gdot[:, None] * v
    return r_new, v_new


def propagate(x: EciState, dt: float, g: GravityModel = EARTH) -> EciState:
    """Propagate ``x`` by ``dt`` seconds (negative for back-propagation)."""
    if dt == 0:
        return x
    r, v = propagate_arrays(x.position, x.velocity, dt, g.mu)
    return EciState(r[0], v[0])


def orbital_period(a: float, g: GravityModel = EARTH) -> float:
    return 2.0 * math.pi * math.sqrt(a**3 / g.mu)


def along_track_unit(x: EciState) -> np.ndarray:
    speed = float(np.linalg.norm(x.velocity))
    if speed == 0:
        raise ValueError("along-track direction undefined for zero velocity")
    return x.velocity / speed


def rtn_basis(x: EciState) -> np.ndarray:
    """Columns are the radial, transverse and normal unit vectors."""
    r_hat = x.position / np.linalg.norm(x.position)
    h = np.cross(x.position, x.velocity)
    n_hat = h / np.linalg.norm(h)
    t_hat = np.cross(n_hat, r_hat)
    return np.column_stack([r_hat, t_hat, n_hat])
