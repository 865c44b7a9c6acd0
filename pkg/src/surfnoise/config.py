"""Run configuration: TOML schema, validation, normalization and hashing.

A configuration file looks like::

    seed = 7

    [layout]
    rows = 3
    cols = 3

    [noise]
    channel = "amplitude_damping"
    params = { gamma = 0.15 }            # scalar, or one value per qubit
    domain = { gamma = [0.0, 0.5] }      # prior box of the free parameters

    [data]
    cycles = 1000

    [mcmc]
    total = 1000
    burn_in = 500

Every section except ``layout`` and ``noise`` is optional and falls back to
the defaults in ``DEFAULTS``.  Unknown keys are errors, and validation lists
every violation with its key path instead of stopping at the first one.
"""

from __future__ import annotations

import copy
import hashlib
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .noise_models import (
    CHANNEL_PARAMS,
    NoiseFamily,
    NoiseModel,
    NoiseSchedule,
    TimeVaryingNoise,
    canonical_kind,
)
from .surface_code import SurfaceCodeLayout, build_rotated_layout

__all__ = [
    "ConfigError",
    "RunConfig",
    "DEFAULTS",
    "EXECUTION_KEYS",
    "scientific_part",
    "DECODER_VARIANTS",
    "parse_config",
    "load_config",
    "normalize",
    "dumps",
    "config_hash",
]

DECODER_VARIANTS = ("ml_true", "ml_assumed", "ml_estimated", "ml_pauli", "mwpm")

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "workers": 1,
    "chi": 0,  # 0 = exact contraction
    "out": "out",
    "data": {"cycles": 1000, "initial_state": "mixed_L", "first_cycle": 0},
    "mcmc": {"total": 1000, "burn_in": 500, "step": 0.02, "thin": 1, "chains": 1},
    "smc": {"particles": 256, "resample_interval": 10, "smoothing": 40, "step": 0.003},
    "heatmap": {"points": [21, 21]},
    "decode": {"variants": ["ml_true", "mwpm"], "samples": 0, "cycle": 0, "batches": 10,
               "restarts": 64},
}

_SCHEDULE_KEYS = {"kind", "a", "b", "omega", "per_qubit"}
_TOP_KEYS = {"seed", "workers", "chi", "out", "layout", "noise", "schedule", "data", "mcmc",
             "smc", "heatmap", "decode"}
_SECTION_KEYS = {
    "layout": {"rows", "cols"},
    "noise": {"channel", "uniform", "params", "fixed", "domain"},
    "data": {"cycles", "initial_state", "first_cycle"},
    "mcmc": {"total", "burn_in", "step", "thin", "chains"},
    "smc": {"particles", "resample_interval", "smoothing", "step"},
    "heatmap": {"points", "x_range", "y_range"},
    "decode": {"variants", "samples", "cycle", "batches", "restarts", "assumed", "estimated"},
}


def _physical(kind: str, name: str) -> tuple[float, float]:
    """Range in which a channel parameter defines a valid channel."""
    if kind == "systematic_rotation":
        return (-math.inf, math.inf)
    return (0.0, 1.0)


class ConfigError(ValueError):
    """All violations found in one configuration, each prefixed with its key path."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_unknown(raw: dict, problems: list[str]) -> None:
    for k in raw:
        if k not in _TOP_KEYS:
            problems.append(f"{k}: unknown key")
    for sec, allowed in _SECTION_KEYS.items():
        body = raw.get(sec)
        if body is None:
            continue
        if not isinstance(body, dict):
            problems.append(f"{sec}: expected a table")
            continue
        for k in body:
            if k not in allowed:
                problems.append(f"{sec}.{k}: unknown key")
    sched = raw.get("schedule")
    if sched is not None:
        if not isinstance(sched, dict):
            problems.append("schedule: expected a table")
        else:
            for name, body in sched.items():
                if not isinstance(body, dict):
                    problems.append(f"schedule.{name}: expected a table")
                    continue
                for k in body:
                    if k not in _SCHEDULE_KEYS:
                        problems.append(f"schedule.{name}.{k}: unknown key")


def _positive_int(cfg: dict, path: str, problems: list[str], minimum: int = 1) -> None:
    sec, _, key = path.rpartition(".")
    v = cfg[sec][key] if sec else cfg[key]
    if not _is_int(v) or v < minimum:
        problems.append(f"{path}: expected an integer >= {minimum}, got {v!r}")


def _step(v, dim_names, path, problems):
    if _is_num(v):
        if v < 0:
            problems.append(f"{path}: step width must be >= 0")
        return
    if isinstance(v, dict):
        for k, w in v.items():
            if k not in dim_names:
                problems.append(f"{path}.{k}: not a free parameter")
            elif not _is_num(w) or w < 0:
                problems.append(f"{path}.{k}: step width must be a number >= 0")
        return
    problems.append(f"{path}: expected a number or a table of per-parameter widths")


def _validate(cfg: dict, raw: dict, problems: list[str]) -> None:
    for key in ("layout", "noise"):
        if key not in raw:
            problems.append(f"{key}: required section is missing")
    if problems and any(p.endswith("required section is missing") for p in problems):
        return
    lay = cfg["layout"]
    for k in ("rows", "cols"):
        if k not in lay:
            if k == "cols" and "rows" in lay:
                lay["cols"] = lay["rows"]
                continue
            problems.append(f"layout.{k}: required")
        elif not _is_int(lay[k]) or lay[k] < 2:
            problems.append(f"layout.{k}: expected an integer >= 2, got {lay[k]!r}")
    n_qubits = lay.get("rows", 0) * lay.get("cols", 0) if all(
        _is_int(lay.get(k)) for k in ("rows", "cols")) else None

    noise = cfg["noise"]
    kind = noise.get("channel")
    try:
        kind = canonical_kind(kind) if isinstance(kind, str) else None
    except ValueError:
        kind = None
    if kind is None:
        problems.append(f"noise.channel: unknown channel {noise.get('channel')!r}; "
                        f"choose from {sorted(CHANNEL_PARAMS)}")
        return
    noise["channel"] = kind
    noise.setdefault("uniform", True)
    noise.setdefault("params", {})
    noise.setdefault("fixed", {})
    noise.setdefault("domain", {})
    if not isinstance(noise["uniform"], bool):
        problems.append("noise.uniform: expected true or false")
    names = CHANNEL_PARAMS[kind]
    for k in ("params", "fixed", "domain"):
        if not isinstance(noise[k], dict):
            problems.append(f"noise.{k}: expected a table")
            noise[k] = {}
    for k in noise["fixed"]:
        if k not in names:
            problems.append(f"noise.fixed.{k}: {kind} has parameters {list(names)}")
        elif not _is_num(noise["fixed"][k]):
            problems.append(f"noise.fixed.{k}: expected a number")
    free = [n for n in names if n not in noise["fixed"]]
    for k, v in noise["domain"].items():
        if k not in free:
            problems.append(f"noise.domain.{k}: not a free parameter of {kind}")
        elif (not isinstance(v, list) or len(v) != 2 or not all(_is_num(x) for x in v)
              or not v[0] < v[1]):
            problems.append(f"noise.domain.{k}: expected [lo, hi] with lo < hi")
        elif v[0] < _physical(kind, k)[0] or v[1] > _physical(kind, k)[1]:
            problems.append(f"noise.domain.{k}: [{v[0]}, {v[1]}] leaves the physical range "
                            f"[{_physical(kind, k)[0]:g}, {_physical(kind, k)[1]:g}]")
    sched = cfg.get("schedule", {}) or {}
    for k, v in noise["params"].items():
        path = f"noise.params.{k}"
        if k not in names:
            problems.append(f"{path}: {kind} has parameters {list(names)}")
            continue
        vals = v if isinstance(v, list) else [v]
        if not all(_is_num(x) for x in vals):
            problems.append(f"{path}: expected a number or a list of numbers")
            continue
        if isinstance(v, list) and n_qubits is not None and len(v) != n_qubits:
            problems.append(f"{path}: expected {n_qubits} per-qubit values, got {len(v)}")
        lo, hi = _physical(kind, k)
        for x in vals:
            if not lo <= x <= hi:
                problems.append(f"{path}: value {x} outside the domain [{lo:g}, {hi:g}]")
                break
    for k in free:
        if k not in noise["params"] and k not in sched:
            problems.append(f"noise.params.{k}: no true value and no schedule given")
    for name, body in sched.items():
        path = f"schedule.{name}"
        if name not in free:
            problems.append(f"{path}: not a free parameter of {kind}")
            continue
        if body.get("kind") not in ("constant", "line", "sine"):
            problems.append(f"{path}.kind: expected constant, line or sine")
        for k in ("a", "b", "omega"):
            body.setdefault(k, 0.0)
            if not _is_num(body[k]):
                problems.append(f"{path}.{k}: expected a number")
        body.setdefault("per_qubit", False)
        if not isinstance(body["per_qubit"], bool):
            problems.append(f"{path}.per_qubit: expected true or false")
        if name in noise["params"]:
            problems.append(f"{path}: parameter also has a constant value in noise.params")

    for key in ("seed",):
        if not _is_int(cfg[key]) or cfg[key] < 0:
            problems.append(f"{key}: expected a non-negative integer")
    _positive_int(cfg, "workers", problems)
    _positive_int(cfg, "chi", problems, minimum=0)
    if not isinstance(cfg["out"], str):
        problems.append("out: expected a path string")

    data = cfg["data"]
    _positive_int(cfg, "data.cycles", problems, minimum=0)
    _positive_int(cfg, "data.first_cycle", problems, minimum=0)
    if data["initial_state"] not in ("mixed_L", "zero_L", "plus_L"):
        problems.append("data.initial_state: expected one of mixed_L, zero_L, plus_L")

    m = cfg["mcmc"]
    for k in ("total", "chains", "thin"):
        _positive_int(cfg, f"mcmc.{k}", problems)
    _positive_int(cfg, "mcmc.burn_in", problems, minimum=0)
    if _is_int(m["total"]) and _is_int(m["burn_in"]) and not m["total"] > m["burn_in"]:
        problems.append("mcmc.burn_in: must be smaller than mcmc.total")
    _step(m["step"], set(free), "mcmc.step", problems)
    s = cfg["smc"]
    _positive_int(cfg, "smc.particles", problems, minimum=2)
    _positive_int(cfg, "smc.resample_interval", problems)
    _positive_int(cfg, "smc.smoothing", problems)
    _step(s["step"], set(free), "smc.step", problems)

    h = cfg["heatmap"]
    pts = h["points"]
    if not (isinstance(pts, list) and len(pts) == 2 and all(_is_int(p) and p >= 1 for p in pts)):
        problems.append("heatmap.points: expected [nx, ny] with positive integers")
    for k in ("x_range", "y_range"):
        v = h.get(k)
        if v is not None and not (isinstance(v, list) and len(v) == 2
                                  and all(_is_num(x) for x in v) and v[0] <= v[1]):
            problems.append(f"heatmap.{k}: expected [lo, hi] with lo <= hi")

    d = cfg["decode"]
    if not isinstance(d["variants"], list) or not d["variants"]:
        problems.append("decode.variants: expected a non-empty list")
    else:
        for v in d["variants"]:
            if v not in DECODER_VARIANTS:
                problems.append(f"decode.variants: unknown variant {v!r}; choose from "
                                f"{list(DECODER_VARIANTS)}")
        for v, key in (("ml_assumed", "assumed"), ("ml_estimated", "estimated")):
            if v in d["variants"] and key not in d:
                problems.append(f"decode.{key}: required by variant {v}")
    for key in ("assumed", "estimated"):
        if key in d:
            if not isinstance(d[key], dict):
                problems.append(f"decode.{key}: expected a table of parameter values")
                continue
            for k, v in d[key].items():
                if k not in free:
                    problems.append(f"decode.{key}.{k}: not a free parameter of {kind}")
                elif not _is_num(v) or not _physical(kind, k)[0] <= v <= _physical(kind, k)[1]:
                    lo, hi = _physical(kind, k)
                    problems.append(f"decode.{key}.{k}: value {v!r} outside the domain [{lo:g}, {hi:g}]")
            for k in free:
                if k not in d[key]:
                    problems.append(f"decode.{key}.{k}: missing")
    for k, mn in (("samples", 0), ("cycle", 0), ("batches", 1), ("restarts", 1)):
        _positive_int(cfg, f"decode.{k}", problems, minimum=mn)


def _sort(obj):
    if isinstance(obj, dict):
        return {k: _sort(obj[k]) for k in sorted(obj)}
    if isinstance(obj, list):
        return [_sort(v) for v in obj]
    return obj


def normalize(raw: dict) -> dict:
    """Validated configuration with defaults filled in and keys sorted; raises :class:`ConfigError`."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a table"])
    _check_unknown(raw, problems)
    known = {k: v for k, v in raw.items() if k in _TOP_KEYS}
    for sec, allowed in _SECTION_KEYS.items():
        if isinstance(known.get(sec), dict):
            known[sec] = {k: v for k, v in known[sec].items() if k in allowed}
        elif sec in known:
            known.pop(sec)
    cfg = _merge(DEFAULTS, known)
    if not isinstance(cfg.get("schedule", {}), dict):
        cfg.pop("schedule")
    if "schedule" in cfg:
        cfg["schedule"] = {k: {kk: vv for kk, vv in v.items() if kk in _SCHEDULE_KEYS}
                           for k, v in cfg["schedule"].items() if isinstance(v, dict)}
    _validate(cfg, known, problems)
    if problems:
        raise ConfigError(problems)
    return _sort(cfg)


def dumps(cfg: dict) -> str:
    return tomli_w.dumps(cfg)


EXECUTION_KEYS = ("out", "workers")


def scientific_part(cfg: dict) -> dict:
    """``cfg`` without the keys that only say where and how wide to run."""
    return {k: v for k, v in cfg.items() if k not in EXECUTION_KEYS}


def config_hash(cfg: dict) -> str:
    """Digest of everything that can change results (output path and worker count excluded)."""
    return hashlib.sha256(dumps(scientific_part(cfg)).encode()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """Normalized configuration plus the objects it describes."""

    raw: dict

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def workers(self) -> int:
        return self.raw["workers"]

    @property
    def chi(self) -> int | None:
        return self.raw["chi"] or None

    @property
    def out(self) -> str:
        return self.raw["out"]

    @property
    def initial_state(self) -> str:
        return self.raw["data"]["initial_state"]

    def with_overrides(self, **kw) -> RunConfig:
        raw = copy.deepcopy(self.raw)
        for k, v in kw.items():
            if v is not None:
                raw[k] = v
        return RunConfig(normalize(raw))

    def layout(self) -> SurfaceCodeLayout:
        return build_rotated_layout(self.raw["layout"]["rows"], self.raw["layout"]["cols"])

    def family(self) -> NoiseFamily:
        n = self.raw["noise"]
        return NoiseFamily(n["channel"], self.layout().qubit_count, n["uniform"], n["fixed"])

    def domain(self):
        n = self.raw["noise"]
        return self.family().domain({k: tuple(v) for k, v in n["domain"].items()})

    def _packed(self, values: dict) -> np.ndarray:
        fam = self.family()
        nq = fam.n_qubits
        full = np.empty((nq, len(fam.channel_params)))
        for name, v in fam.fixed.items():
            full[:, fam.channel_params.index(name)] = v
        for name in fam.free_params:
            full[:, fam.channel_params.index(name)] = np.broadcast_to(np.asarray(values[name], float), (nq,))
        if fam.uniform:
            for name in fam.free_params:
                col = full[:, fam.channel_params.index(name)]
                if np.ptp(col) > 0:
                    raise ConfigError([f"noise.params.{name}: per-qubit values need noise.uniform = false"])
        return fam.pack(full)

    def true_model(self, cycle: int | None = None) -> NoiseModel | TimeVaryingNoise:
        """Constant truth, or the schedule (evaluated at ``cycle`` when given)."""
        tv = self.time_varying()
        if tv is None:
            return self.family().model(self._packed(self.raw["noise"]["params"]))
        if cycle is None:
            return tv
        return self.family().model(tv.alpha(cycle))

    def time_varying(self) -> TimeVaryingNoise | None:
        sched = self.raw.get("schedule")
        if not sched:
            return None
        fam = self.family()
        scheds = {}
        for name in fam.free_params:
            if name in sched:
                s = sched[name]
                dom = _physical(fam.kind, name)
                offsets = tuple(float(q + 1) for q in range(fam.n_qubits)) if s["per_qubit"] else None
                scheds[name] = NoiseSchedule(s["kind"], s["a"], s["b"], s["omega"], offsets, dom)
            else:
                v = float(self.raw["noise"]["params"][name])
                scheds[name] = NoiseSchedule("constant", v, domain=_physical(fam.kind, name))
        return TimeVaryingNoise(fam, scheds)

    def model_from(self, values: dict) -> NoiseModel:
        return self.family().model(self._packed(values))

    def step_widths(self, section: str) -> np.ndarray:
        fam = self.family()
        step = self.raw[section]["step"]
        per = {n: float(step.get(n, DEFAULTS[section]["step"])) if isinstance(step, dict) else float(step)
               for n in fam.free_params}
        reps = 1 if fam.uniform else fam.n_qubits
        return np.tile([per[n] for n in fam.free_params], reps)


def parse_config(text_or_dict: str | dict) -> RunConfig:
    """Parse TOML text (or an already-loaded table) into a validated :class:`RunConfig`."""
    if isinstance(text_or_dict, str):
        try:
            raw = tomllib.loads(text_or_dict)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"<toml>: {exc}"]) from exc
    else:
        raw = text_or_dict
    return RunConfig(normalize(raw))


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"<file>: {p} does not exist"])
    return parse_config(p.read_text(encoding="utf-8"))
