"""Run configuration: site, systems, date ranges, seeds and stage settings."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InputError
from .geometry import ArrayOrientation, GeoLocation
from .losses import WiringSpec
from .plant import SystemConfig
from .pvcore import ArrayConfig, InverterParams, ModuleParams

STAGES = ("simulate", "losses", "synth", "inject", "train", "detect", "report")
STAGE_SEED_KEYS = {name: i for i, name in enumerate(STAGES)}


@dataclass
class RunConfig:
    site: GeoLocation
    systems: list
    history: dict
    synth: dict
    faults: dict
    network: dict
    detection: dict
    seed: int
    raw: dict = field(default_factory=dict, repr=False)

    def system(self, name) -> SystemConfig:
        for s in self.systems:
            if s.name == name:
                return s
        raise ConfigurationError(f"unknown system {name!r}")

    def stage_seed(self, stage, *extra):
        """Integer seed for a stage, derived from the master seed."""
        if stage not in STAGE_SEED_KEYS:
            raise ConfigurationError(f"unknown stage {stage!r}")
        ss = np.random.SeedSequence(self.seed, spawn_key=(STAGE_SEED_KEYS[stage], *extra))
        return int(ss.generate_state(1, dtype=np.uint32)[0])

    def with_seed(self, seed):
        raw = dict(self.raw, seed=int(seed))
        return parse_config(raw)

    def to_dict(self):
        return self.raw


def _require(d, key, where):
    if key not in d:
        raise ConfigurationError(f"missing '{key}' in {where}")
    return d[key]


def _system(d) -> SystemConfig:
    try:
        module = ModuleParams.load(_require(d, "module", "system"))
        inverter = InverterParams.load(_require(d, "inverter", "system"))
    except FileNotFoundError as exc:
        raise ConfigurationError(f"parameter set not found: {exc}") from exc
    return SystemConfig(
        name=str(_require(d, "name", "system")),
        array=ArrayConfig(int(d["modules_per_string"]), int(d["strings"])),
        module=module,
        inverter=inverter,
        orientation=ArrayOrientation(float(d["tilt"]), float(d["azimuth"])),
        dc_wiring=WiringSpec(**d["dc_wiring"]),
        ac_wiring=WiringSpec(**d["ac_wiring"]),
        V_AC_nominal=float(d.get("V_AC_nominal", 480.0)),
    )


def parse_config(raw: dict) -> RunConfig:
    try:
        site = GeoLocation(**_require(raw, "site", "config"))
        systems = [_system(s) for s in _require(raw, "systems", "config")]
    except (TypeError, InputError) as exc:
        raise ConfigurationError(str(exc)) from exc
    if not systems:
        raise ConfigurationError("config lists no systems")
    names = [s.name for s in systems]
    if len(set(names)) != len(names):
        raise ConfigurationError("system names must be unique")
    seed = _require(raw, "seed", "config")
    if not isinstance(seed, int) or seed < 0:
        raise ConfigurationError("seed must be a non-negative integer")
    return RunConfig(
        site=site, systems=systems,
        history=dict(_require(raw, "history", "config")),
        synth=dict(_require(raw, "synth", "config")),
        faults=dict(raw.get("faults", {})),
        network=dict(raw.get("network", {})),
        detection=dict(raw.get("detection", {})),
        seed=seed, raw=raw,
    )


def load_config(path=None) -> RunConfig:
    """Load a JSON run configuration; ``None`` gives the bundled reference config."""
    if path is None:
        text = resources.files("pvtwin.data").joinpath("reference_config.json").read_text()
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigurationError(f"config file not found: {p}")
        text = p.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)
