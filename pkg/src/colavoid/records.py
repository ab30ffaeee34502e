"""Line-delimited JSON records for encounters and single MDP states.

An encounter file starts with a header line
``{"format": "colavoid-encounters", "version": 1}`` followed by one
encounter per line::

    {"seed": [master, index], "class": "safe" | "unsafe" | "trivial",
     "truth": {"chief": [6 floats], "deputy": [6 floats]},
     "r_c": m, "r_d": m,
     "epochs": [{"t": 72, "x_c": [...], "x_d": [...],
                 "sigma_c": [[6x6]], "sigma_d": [[6x6]], "pc": float}, ...]}

States are ``[x, y, z, vx, vy, vz]`` in km and km/s, covariances in km^2
(and km^2/s, km^2/s^2). ``pc`` is informational; it is recomputed on load.
Floats are written with shortest round-trip formatting, so a load/dump
cycle is lossless.
"""

from __future__ import annotations

import json

import numpy as np

from .mdp import MdpState
from .orbital import EciState
from .scenario import Encounter, EncounterClass, prime_pcs

FORMAT = "colavoid-encounters"
VERSION = 1


class RecordError(ValueError):
    pass


def state_to_dict(s: MdpState) -> dict:
    return {
        "t": s.t,
        "x_c": s.x_c.as_array().tolist(),
        "x_d": s.x_d.as_array().tolist(),
        "sigma_c": s.sigma_c.tolist(),
        "sigma_d": s.sigma_d.tolist(),
        "r_c": s.r_c,
        "r_d": s.r_d,
    }


def _vector(d: dict, name: str, n: int = 6) -> np.ndarray:
    if name not in d:
        raise RecordError(f"missing field {name!r}")
    try:
        v = np.asarray(d[name], dtype=float)
    except (TypeError, ValueError) as exc:
        raise RecordError(f"field {name!r}: not numeric") from exc
    if v.shape != (n,):
        raise RecordError(f"field {name!r}: expected {n} numbers, got shape {v.shape}")
    return v


def _matrix(d: dict, name: str) -> np.ndarray:
    if name not in d:
        raise RecordError(f"missing field {name!r}")
    try:
        m = np.asarray(d[name], dtype=float)
    except (TypeError, ValueError) as exc:
        raise RecordError(f"field {name!r}: not numeric") from exc
    if m.shape != (6, 6):
        raise RecordError(f"field {name!r}: expected a 6x6 matrix, got shape {m.shape}")
    return m


def _number(d: dict, name: str) -> float:
    if name not in d:
        raise RecordError(f"missing field {name!r}")
    v = d[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise RecordError(f"field {name!r}: expected a number")
    return v


def _eci(d: dict, name: str) -> EciState:
    try:
        return EciState.from_array(_vector(d, name))
    except RecordError:
        raise
    except ValueError as exc:
        raise RecordError(f"field {name!r}: {exc}") from exc


def state_from_dict(d: dict, radii: tuple[float, float] | None = None) -> MdpState:
    if not isinstance(d, dict):
        raise RecordError("state record must be an object")
    r_c, r_d = radii if radii is not None else (_number(d, "r_c"), _number(d, "r_d"))
    t = _number(d, "t")
    x_c, x_d = _eci(d, "x_c"), _eci(d, "x_d")
    sigma_c, sigma_d = _matrix(d, "sigma_c"), _matrix(d, "sigma_d")
    try:
        return MdpState(t, x_c, x_d, sigma_c, sigma_d, r_c, r_d)
    except ValueError as exc:
        raise RecordError(str(exc)) from exc


def encounter_to_dict(e: Encounter) -> dict:
    first = e.epochs[0]
    epochs = []
    for s in e.epochs:
        d = state_to_dict(s)
        del d["r_c"], d["r_d"]
        d["pc"] = s.pc
        epochs.append(d)
    return {
        "seed": list(e.seed),
        "class": None if e.encounter_class is None else e.encounter_class.value,
        "truth": {"chief": e.truth_c.as_array().tolist(), "deputy": e.truth_d.as_array().tolist()},
        "r_c": first.r_c,
        "r_d": first.r_d,
        "epochs": epochs,
    }


def encounter_from_dict(d: dict) -> Encounter:
    if not isinstance(d, dict):
        raise RecordError("encounter record must be an object")
    for key in ("seed", "truth", "epochs"):
        if key not in d:
            raise RecordError(f"missing field {key!r}")
    radii = (_number(d, "r_c"), _number(d, "r_d"))
    cls = d.get("class")
    try:
        cls = None if cls is None else EncounterClass(cls)
    except ValueError as exc:
        raise RecordError(f"field 'class': unknown value {cls!r}") from exc
    seed = d["seed"]
    if not (isinstance(seed, list) and len(seed) == 2 and all(isinstance(v, int) for v in seed)):
        raise RecordError("field 'seed': expected [master_seed, index]")
    epochs = tuple(state_from_dict(s, radii) for s in d["epochs"])
    try:
        e = Encounter(_eci(d["truth"], "chief"), _eci(d["truth"], "deputy"), epochs, tuple(seed), cls)
    except ValueError as exc:
        raise RecordError(str(exc)) from exc
    return e


def header() -> str:
    return json.dumps({"format": FORMAT, "version": VERSION}) + "\n"


def dumps_encounters(encounters) -> str:
    return header() + "".join(json.dumps(encounter_to_dict(e)) + "\n" for e in encounters)


def write_encounters(path, encounters) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header())
        for e in encounters:
            fh.write(json.dumps(encounter_to_dict(e)) + "\n")


def _check_header(line: str) -> None:
    try:
        h = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError("missing encounter-file header") from exc
    if not isinstance(h, dict) or h.get("format") != FORMAT:
        raise RecordError(f"not an encounter file (expected format {FORMAT!r})")
    if h.get("version") != VERSION:
        raise RecordError(f"unsupported encounter-file version {h.get('version')!r}, expected {VERSION}")


def loads_encounters(text: str) -> list[Encounter]:
    lines = text.splitlines()
    if not lines:
        raise RecordError("empty encounter file")
    _check_header(lines[0])
    out = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        try:
            out.append(encounter_from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise RecordError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        except RecordError as exc:
            raise RecordError(f"line {lineno}: {exc}") from exc
    prime_pcs([s for e in out for s in e.epochs])
    return out


def read_encounters(path) -> list[Encounter]:
    with open(path, encoding="utf-8") as fh:
        return loads_encounters(fh.read())
