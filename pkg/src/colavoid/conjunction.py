"""Probability of collision at closest approach.

Foster's short-encounter method: the combined position covariance is
projected onto the plane normal to the relative velocity and the resulting
2D Gaussian is integrated over the disk of the combined hardbody radius.

The radial part of the disk integral has a closed form (error functions),
so only the angular integral is done numerically. Polar coordinates are
centred on the disk, or on the Gaussian mean when the mean lies inside it. The angular integrand is
smooth and periodic, so the trapezoid rule converges geometrically; nodes
are doubled until successive estimates agree to the requested tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfcx

from .orbital import EciState

EIGEN_FLOOR_KM2 = 1e-12
PC_ATOL = 1e-12
PC_RTOL = 1e-10
_MIN_NODES = 32
_MAX_NODES = 1 << 15


@dataclass(frozen=True, eq=False)
class EncounterGeometry:
    miss_vector: np.ndarray
    relative_velocity: np.ndarray
    plane_basis: np.ndarray  # (3, 2), orthonormal columns


@dataclass(frozen=True)
class HardbodyRadii:
    r_c: float  # m
    r_d: float  # m

    def __post_init__(self):
        if not (self.r_c > 0 and self.r_d > 0):
            raise ValueError("hardbody radii must be positive")

    @property
    def combined_km(self) -> float:
        return (self.r_c + self.r_d) / 1000.0


def validate_covariance(sigma, name: str = "covariance") -> np.ndarray:
    """Return ``sigma`` as a 6x6 float array after checking symmetry and PSD."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (6, 6):
        raise ValueError(f"{name} must be 6x6, got {sigma.shape}")
    if not np.all(np.isfinite(sigma)):
        raise ValueError(f"{name} must be finite")
    scale = max(float(np.abs(sigma).max()), 1.0)
    if np.abs(sigma - sigma.T).max() > 1e-12 * scale:
        raise ValueError(f"{name} must be symmetric")
    lam = np.linalg.eigvalsh(sigma[:3, :3])
    if lam[0] < -1e-12 * max(float(lam[-1]), 1.0):
        raise ValueError(f"{name} position block is not positive semi-definite")
    return sigma


def _plane_bases(rel_vel, miss):
    """Batch of (3, 2) orthonormal bases normal to each relative velocity.

    The first axis follows the in-plane part of the miss vector when it is
    nonzero, which keeps the basis a continuous function of the geometry.
    """
    rel_vel = np.atleast_2d(rel_vel)
    miss = np.atleast_2d(miss)
    speed = np.linalg.norm(rel_vel, axis=1)
    if np.any(speed == 0):
        raise ValueError("zero relative velocity: encounter plane undefined")
    y = rel_vel / speed[:, None]
    inplane = miss - np.einsum("ij,ij->i", miss, y)[:, None] * y
    norm = np.linalg.norm(inplane, axis=1)
    # fallback axis: the coordinate axis least aligned with y
    idx = np.argmin(np.abs(y), axis=1)
    fallback = np.zeros_like(y)
    fallback[np.arange(len(y)), idx] = 1.0
    fallback = fallback - np.einsum("ij,ij->i", fallback, y)[:, None] * y
    fallback /= np.linalg.norm(fallback, axis=1)[:, None]
    use_miss = norm > 1e-12 * np.maximum(np.linalg.norm(miss, axis=1), 1e-300)
    safe_norm = np.where(use_miss, norm, 1.0)
    e1 = np.where(use_miss[:, None], inplane / safe_norm[:, None], fallback)
    e2 = np.cross(y, e1)
    return np.stack([e1, e2], axis=2)


def encounter_geometry(chief: EciState, deputy: EciState) -> EncounterGeometry:
    miss = deputy.position - chief.position
    rel_vel = deputy.velocity - chief.velocity
    basis = _plane_bases(rel_vel, miss)[0]
    return EncounterGeometry(miss, rel_vel, basis)


def combined_plane_covariance(sigma_c, sigma_d, geom: EncounterGeometry) -> np.ndarray:
    B = geom.plane_basis
    P = np.asarray(sigma_c, dtype=float)[:3, :3] + np.asarray(sigma_d, dtype=float)[:3, :3]
    C = B.T @ P @ B
    return 0.5 * (C + C.T)


def _disk_integral(lam, m, radius, n_nodes):
    """Trapezoid estimate of the disk integral for each batch member.

    ``lam`` (K, 2) eigenvalues, ``m`` (K, 2) miss in the eigenframe.
    """
    theta = (np.arange(n_nodes) + 0.5) * (2 * np.pi / n_nodes)
    c, s = np.cos(theta), np.sin(theta)
    l1, l2 = lam[:, :1], lam[:, 1:]
    m1, m2 = m[:, :1], m[:, 1:]
    A = c * c / l1 + s * s / l2
    B = m1 * c / l1 + m2 * s / l2
    C0 = (m1 * m1 / l1 + m2 * m2 / l2)
    R = radius[:, None]
    # exponential terms: (e^{-C0/2} - e^{-(C0 + A R^2 - 2 B R)/2}) / A
    d = -0.5 * (A * R * R - 2.0 * B * R)
    e0 = np.exp(-0.5 * C0)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        ea = np.exp(-0.5 * C0 + d)
        t1 = np.where(
            d <= 0,
            e0 * -np.expm1(np.minimum(d, 0.0)),
            ea * np.expm1(-np.maximum(d, 0.0)),
        ) / A
    # error-function terms: mu sqrt(pi/(2A)) e^{-kappa/2} [erf(a) - erf(b)]
    mu = B / A
    sA = np.sqrt(0.5 * A)
    a = sA * (R - mu)
    b = -sA * mu
    kappa = np.maximum(C0 - B * B / A, 0.0)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        # when both limits sit in one tail, erfc forms avoid cancellation;
        # with |a|, |b| the two tails differ only in sign
        tail = e0 * erfcx(np.abs(b)) - ea * erfcx(np.abs(a))
        mid = np.exp(-0.5 * kappa) * (erf(a) - erf(b))
    diff = np.where(b >= 0, tail, np.where(a <= 0, -tail, mid))
    t2 = mu * np.sqrt(np.pi / (2.0 * A)) * diff
    integrand = t1 + t2
    inside = (m1 * m1 + m2 * m2 < R * R)[:, 0]
    if inside.any():
        # mean inside the disk: polar coordinates about the mean keep the
        # integrand smooth even when the covariance is tiny next to the disk
        k = inside
        mu_dot = m1[k] * c + m2[k] * s
        rho = -mu_dot + np.sqrt(mu_dot * mu_dot + R[k] ** 2 - (m1[k] ** 2 + m2[k] ** 2))
        integrand[k] = -np.expm1(-0.5 * A[k] * rho * rho) / A[k]
    return integrand.mean(axis=1) / (np.sqrt(l1[:, 0]) * np.sqrt(l2[:, 0]))


def pc_plane(miss2, cov2, radius_km, atol: float = PC_ATOL, rtol: float = PC_RTOL):
    """Probability that a 2D Gaussian lands within ``radius_km`` of the origin.

    ``miss2`` (K, 2) mean positions and ``cov2`` (K, 2, 2) or (2, 2)
    covariances, both in the encounter plane (km, km^2). Returns (K,).
    """
    miss2 = np.atleast_2d(np.asarray(miss2, dtype=float))
    k = miss2.shape[0]
    cov2 = np.broadcast_to(np.asarray(cov2, dtype=float), (k, 2, 2))
    radius_km = np.broadcast_to(np.asarray(radius_km, dtype=float), (k,))
    lam, V = np.linalg.eigh(cov2)
    lam = np.maximum(lam, EIGEN_FLOOR_KM2)
    m = np.einsum("kji,kj->ki", V, miss2)
    # each member stops at its own converged node count, so a value never
    # depends on what else shares the batch
    n = _MIN_NODES
    prev = _disk_integral(lam, m, radius_km, n)
    out = np.empty_like(prev)
    todo = np.arange(len(prev))
    while todo.size:
        n *= 2
        cur = _disk_integral(lam[todo], m[todo], radius_km[todo], n)
        ok = np.abs(cur - prev) <= np.maximum(atol, rtol * np.abs(cur))
        if n >= _MAX_NODES:
            ok[:] = True
        out[todo[ok]] = cur[ok]
        todo, prev = todo[~ok], cur[~ok]
    return np.clip(out, 0.0, 1.0)


def pc_batch(r_c, v_c, r_d, v_d, pos_cov, radius_km):
    """Foster Pc for K chief states against one deputy (or K deputies).

    ``pos_cov`` is the combined position covariance in km^2, either one 3x3
    matrix or a (K, 3, 3) stack; ``radius_km`` is a scalar or (K,).
    """
    r_c = np.atleast_2d(r_c)
    v_c = np.atleast_2d(v_c)
    miss = np.atleast_2d(r_d) - r_c
    rel = np.atleast_2d(v_d) - v_c
    miss, rel = np.broadcast_arrays(miss, rel)
    B = _plane_bases(rel, miss)
    miss2 = np.einsum("kij,ki->kj", B, miss)
    pos_cov = np.broadcast_to(np.asarray(pos_cov, dtype=float), (len(B), 3, 3))
    cov2 = np.einsum("kia,kij,kjb->kab", B, pos_cov, B)
    cov2 = 0.5 * (cov2 + np.swapaxes(cov2, 1, 2))
    return pc_plane(miss2, cov2, radius_km)


def collision_probability(s) -> float:
    """Foster Pc of an MDP state (any object with the CDM fields)."""
    pos_cov = np.asarray(s.sigma_c)[:3, :3] + np.asarray(s.sigma_d)[:3, :3]
    radius = (s.r_c + s.r_d) / 1000.0
    pc = pc_batch(
        s.x_c.position, s.x_c.velocity, s.x_d.position, s.x_d.velocity, pos_cov, radius
    )
    return float(pc[0])


def pc_sampling_oracle(s, n: int, seed) -> tuple[float, float]:
    """Monte Carlo estimate of Pc and its standard error.

    Samples the relative position from the combined 3D Gaussian, projects
    each sample onto the encounter plane and counts hits inside the
    combined hardbody disk.
    """
    if n < 1000:
        raise ValueError("sampling oracle needs n >= 1000")
    rng = np.random.default_rng(seed)
    pos_cov = np.asarray(s.sigma_c)[:3, :3] + np.asarray(s.sigma_d)[:3, :3]
    geom = encounter_geometry(s.x_c, s.x_d)
    radius = (s.r_c + s.r_d) / 1000.0
    lam, V = np.linalg.eigh(0.5 * (pos_cov + pos_cov.T))
    root = V * np.sqrt(np.maximum(lam, 0.0))
    hits = 0
    chunk = 250_000
    done = 0
    while done < n:
        k = min(chunk, n - done)
        z = rng.standard_normal((k, 3))
        rel = geom.miss_vector + z @ root.T
        proj = rel @ geom.plane_basis
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", proj, proj) < radius * radius))
        done += k
    p = hits / n
    se = float(np.sqrt(max(p * (1 - p), 0.0) / n))
    return p, se
