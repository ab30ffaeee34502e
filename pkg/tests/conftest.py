import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from colavoid.mdp import MdpState
from colavoid.orbital import EciState, OrbitalElements, elements_to_eci
from colavoid.scenario import Encounter

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("stress", parent=settings.get_profile("repo"), max_examples=2000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))

# acceptance verdicts: criterion number -> list of (passed, detail)
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(number, []).append((bool(passed), detail))
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {number}: {verdict} - {detail}")

ZERO6 = np.zeros((6, 6))


def circular_chief(alt_km=500.0, i=80.0, raan=60.0, m=0.0) -> EciState:
    return elements_to_eci(OrbitalElements(6378.137 + alt_km, 0.0, i, raan, 0.0, m))


def crossing_deputy(chief: EciState, offset_km=(0.0, 0.0, 0.0)) -> EciState:
    """Deputy at the chief's position plus ``offset_km``, moving along the orbit normal."""
    h = np.cross(chief.position, chief.velocity)
    v = h / np.linalg.norm(h) * np.linalg.norm(chief.velocity)
    return EciState(chief.position + np.asarray(offset_km, dtype=float), v)


def iso_cov(sigma_km: float) -> np.ndarray:
    cov = np.zeros((6, 6))
    cov[:3, :3] = sigma_km**2 * np.eye(3)
    return cov


def state_with_pc(pc: float, t: int = 0, r_c=5.0, r_d=5.0) -> MdpState:
    """Centred isotropic conjunction, so Pc = 1 - exp(-R^2 / (2 sigma^2)) exactly."""
    radius = (r_c + r_d) / 1000.0
    combined_var = radius**2 / (-2.0 * math.log1p(-pc))
    ch = circular_chief()
    return MdpState(t, ch, crossing_deputy(ch), iso_cov(math.sqrt(combined_var / 2)),
                    iso_cov(math.sqrt(combined_var / 2)), r_c, r_d)


def encounter_from_pcs(pcs, cls=None) -> Encounter:
    """Synthetic encounter with prescribed Pc at t = 8 * (len(pcs) - 1), ..., 0."""
    n = len(pcs)
    epochs = tuple(state_with_pc(p, 8 * (n - 1 - k)) for k, p in enumerate(pcs))
    return Encounter(epochs[-1].x_c, epochs[-1].x_d, epochs, (0, 0), cls)


def frozen_collision(t: int = 72, radius_m: float = 7.5) -> MdpState:
    """Zero covariance and zero miss: Pc = 1 along every transition."""
    ch = circular_chief()
    return MdpState(t, ch, crossing_deputy(ch), ZERO6, ZERO6, radius_m, radius_m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
