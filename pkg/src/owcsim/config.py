"""Run configuration: YAML text <-> validated RunConfig, plus figure presets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
import yaml

from .geometry import GeometryError, LambertianParams, Scenario, grid_positions
from .protocol import IRSA16_RAW, DegreeDistribution, DistributionError, normalize_distribution

SEED_ENV = "OWCSIM_SEED"


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    slots: int
    degree_weights: dict
    pa: tuple[float, ...]
    fov_grid: tuple[float, ...]
    frames: int
    seed: int
    trajectory: tuple[tuple[float, int], ...] = ()
    estimator: str = "oracle"
    noise_std: float = 0.0
    preamble_fov: str = "current"
    lookup: str | None = None
    out_path: str | None = None
    out_format: str = "csv"

    @property
    def omega(self) -> DegreeDistribution:
        return normalize_distribution(self.degree_weights, warn_tol=math.inf)


_LAMBERTIAN_KEYS = {"detector_area", "half_power_semiangle", "filter_gain",
                    "refractive_index", "tx_power"}
_SCHEMA = {
    "scenario": {"room_width", "room_depth", "height", "tx_per_side", "tx_pitch",
                 "rx_per_side", "fov", "lambertian"},
    "protocol": {"slots", "degree_distribution", "pa", "trajectory"},
    "sweep": {"fov", "frames", "seed"},
    "adapt": {"estimator", "noise_std", "preamble_fov", "lookup"},
    "output": {"path", "format"},
}
_REQUIRED = {"scenario": set(), "protocol": {"slots", "degree_distribution", "pa"},
             "sweep": {"fov", "frames", "seed"}}


def expand_grid(spec) -> list[float]:
    """A list, a scalar, or an inclusive {start, stop, step} range."""
    if isinstance(spec, dict):
        if set(spec) != {"start", "stop", "step"}:
            raise ValueError("range needs exactly start, stop, step")
        start, stop, step = (float(spec[k]) for k in ("start", "stop", "step"))
        if step <= 0 or stop < start:
            raise ValueError("range needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    return [float(spec)]


def parse_config(text: str, seed_env: str | None = None) -> RunConfig:
    """Parse and validate; every problem is reported at once with its key path."""
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError([f"malformed YAML: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a mapping"])
    errors: list[str] = []
    for key in doc:
        if key not in _SCHEMA:
            errors.append(f"{key}: unknown section")
    sections = {}
    for name, allowed in _SCHEMA.items():
        sec = doc.get(name, {}) or {}
        if not isinstance(sec, dict):
            errors.append(f"{name}: must be a mapping")
            sec = {}
        for key in sec:
            if key not in allowed:
                errors.append(f"{name}.{key}: unknown key")
        for key in _REQUIRED.get(name, ()):
            if key not in sec:
                errors.append(f"{name}.{key}: missing required key")
        sections[name] = sec

    def get(path, conv, default=None):
        sec, key = path.split(".", 1)
        node = sections[sec]
        for part in key.split(".")[:-1]:
            node = node.get(part, {}) or {}
        key = key.split(".")[-1]
        if key not in node:
            return default
        try:
            return conv(node[key])
        except (TypeError, ValueError) as exc:
            errors.append(f"{path}: {exc}")
            return default

    lam = sections["scenario"].get("lambertian", {}) or {}
    if not isinstance(lam, dict):
        errors.append("scenario.lambertian: must be a mapping")
        lam = {}
    for key in lam:
        if key not in _LAMBERTIAN_KEYS:
            errors.append(f"scenario.lambertian.{key}: unknown key")
    lam_kwargs = {k: float(lam[k]) for k in _LAMBERTIAN_KEYS if k in lam
                  if isinstance(lam[k], (int, float))}
    for k in _LAMBERTIAN_KEYS & set(lam):
        if not isinstance(lam[k], (int, float)):
            errors.append(f"scenario.lambertian.{k}: must be a number")
    try:
        lambertian = LambertianParams(**lam_kwargs)
    except GeometryError as exc:
        errors.append(f"scenario.lambertian: {exc}")
        lambertian = LambertianParams()

    fov_grid = get("sweep.fov", expand_grid, [])
    if "fov" in sections["sweep"] and not fov_grid:
        errors.append("sweep.fov: FOV grid is empty")
    for f in fov_grid:
        if not 0.0 < f < 90.0:
            errors.append(f"sweep.fov: {f} outside the FOV range (0, 90) degrees")
    default_fov = fov_grid[-1] if fov_grid and 0 < fov_grid[-1] < 90 else 60.0
    scen_kwargs = dict(
        room_width=get("scenario.room_width", float, 50.0),
        room_depth=get("scenario.room_depth", float, 50.0),
        height=get("scenario.height", float, 3.0),
        tx_per_side=get("scenario.tx_per_side", int, 26),
        tx_pitch=get("scenario.tx_pitch", float, 2.0),
        rx_per_side=get("scenario.rx_per_side", int, 1),
        fov=get("scenario.fov", float, default_fov),
    )
    scenario = None
    try:
        scenario = Scenario(lambertian=lambertian, **scen_kwargs)
        grid_positions(scenario)
    except GeometryError as exc:
        errors.append(f"scenario: {exc}")

    slots = get("protocol.slots", int, 1)
    if slots is not None and slots < 1:
        errors.append("protocol.slots: must be >= 1")
    weights = sections["protocol"].get("degree_distribution", {1: 1.0})
    try:
        if not isinstance(weights, dict):
            raise DistributionError("must be a mapping degree -> weight")
        weights = {int(k): float(v) for k, v in weights.items()}
        omega = normalize_distribution(weights)
        if omega.max_degree > slots:
            errors.append(f"protocol.degree_distribution: max degree {omega.max_degree} "
                          f"exceeds protocol.slots = {slots}")
    except (DistributionError, TypeError, ValueError) as exc:
        errors.append(f"protocol.degree_distribution: {exc}")

    pa = get("protocol.pa", expand_grid, [])
    if "pa" in sections["protocol"] and not pa:
        errors.append("protocol.pa: grid is empty")
    for p in pa:
        if not 0.0 <= p <= 1.0:
            errors.append(f"protocol.pa: {p} outside [0, 1]")
    pa = sorted(set(pa))

    def conv_traj(v):
        out = []
        for seg in v:
            p, k = seg
            if not 0.0 <= float(p) <= 1.0 or int(k) < 1:
                raise ValueError(f"segment {seg} needs p_a in [0, 1] and frames >= 1")
            out.append((float(p), int(k)))
        return tuple(out)
    trajectory = get("protocol.trajectory", conv_traj, ())

    frames = get("sweep.frames", int, 1)
    if frames is not None and frames < 1:
        errors.append("sweep.frames: must be >= 1")
    seed = get("sweep.seed", int, 0)
    env = seed_env
    if env:
        try:
            seed = int(env)
        except ValueError:
            errors.append(f"{SEED_ENV}: not an integer: {env!r}")

    estimator = get("adapt.estimator", str, "oracle")
    if estimator not in ("oracle", "power"):
        errors.append("adapt.estimator: must be 'oracle' or 'power'")
    noise_std = get("adapt.noise_std", float, 0.0)
    if noise_std is not None and not noise_std >= 0:
        errors.append("adapt.noise_std: must be >= 0")
    preamble_fov = get("adapt.preamble_fov", str, "current")
    if preamble_fov not in ("current", "wide"):
        errors.append("adapt.preamble_fov: must be 'current' or 'wide'")
    lookup = get("adapt.lookup", lambda v: None if v is None else str(v), None)
    out_path = get("output.path", lambda v: None if v is None else str(v), None)
    out_format = get("output.format", str, "csv")
    if out_format not in ("csv", "json"):
        errors.append("output.format: must be 'csv' or 'json'")

    if errors:
        raise ConfigError(errors)
    return RunConfig(scenario=scenario, slots=slots, degree_weights=weights,
                     pa=tuple(pa), fov_grid=tuple(fov_grid), frames=frames, seed=seed,
                     trajectory=trajectory, estimator=estimator, noise_std=noise_std,
                     preamble_fov=preamble_fov, lookup=lookup, out_path=out_path,
                     out_format=out_format)


def emit_config(cfg: RunConfig) -> str:
    s, lam = cfg.scenario, cfg.scenario.lambertian
    doc = {
        "scenario": {
            "room_width": s.room_width, "room_depth": s.room_depth, "height": s.height,
            "tx_per_side": s.tx_per_side, "tx_pitch": s.tx_pitch,
            "rx_per_side": s.rx_per_side, "fov": s.fov,
            "lambertian": {"detector_area": lam.detector_area,
                           "half_power_semiangle": lam.half_power_semiangle,
                           "filter_gain": lam.filter_gain,
                           "refractive_index": lam.refractive_index,
                           "tx_power": lam.tx_power},
        },
        "protocol": {"slots": cfg.slots,
                     "degree_distribution": dict(cfg.degree_weights),
                     "pa": list(cfg.pa),
                     "trajectory": [list(t) for t in cfg.trajectory]},
        "sweep": {"fov": list(cfg.fov_grid), "frames": cfg.frames, "seed": cfg.seed},
        "adapt": {"estimator": cfg.estimator, "noise_std": cfg.noise_std,
                  "preamble_fov": cfg.preamble_fov, "lookup": cfg.lookup},
        "output": {"path": cfg.out_path, "format": cfg.out_format},
    }
    return yaml.safe_dump(doc, sort_keys=False)


def load_config(path: str, seed_env: str | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), seed_env)


def bundled_config_text(name: str = "paper") -> str:
    return resources.files("owcsim.configs").joinpath(f"{name}.yaml").read_text()


def load_bundled(name: str = "paper") -> RunConfig:
    return parse_config(bundled_config_text(name))


# (variant, rx_per_side, slots, degree weights)
PRESETS = {
    "fig4": [("ap1", 1, 1, {1: 1.0}), ("ap3", 3, 1, {1: 1.0}), ("ap5", 5, 1, {1: 1.0})],
    "fig5": [("ap1", 1, 100, IRSA16_RAW), ("ap3", 3, 100, IRSA16_RAW),
             ("ap5", 5, 100, IRSA16_RAW)],
    "fig6": [("L5", 3, 5, {2: 1.0}), ("L10", 3, 10, {2: 1.0}), ("L100", 3, 100, {2: 1.0})],
}


def apply_preset(cfg: RunConfig, name: str) -> list[tuple[str, RunConfig]]:
    if name not in PRESETS:
        raise ConfigError([f"--preset: unknown preset {name!r}; choose from {sorted(PRESETS)}"])
    return [(variant, replace(cfg, scenario=replace(cfg.scenario, rx_per_side=rx),
                              slots=slots, degree_weights=dict(w)))
            for variant, rx, slots, w in PRESETS[name]]
