"""Toolkit configuration: one JSON document whose keys mirror the parameter table."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import fis
from .cycle import DriveCycle, VehicleParams, load_drive_cycle, synthesize_test_cycle
from .moo import MooSettings, VariationSettings
from .powertrain import BatteryParams, DegradationParams, ScParams
from .sim import PlantConfig, SimLimits


class ConfigError(ValueError):
    pass


# JSON key -> dataclass field, per section
_BATTERY_KEYS = {"E0": "E0", "K": "K", "Q_max": "Q_max", "R": "R", "A": "A_exp", "B": "B_exp",
                 "m_cell": "m_cell", "eta_AD": "eta_AD"}
_DEGRADATION_KEYS = {k: k for k in ("a", "b", "c", "d", "e", "z", "T")}
_SC_KEYS = {k: k for k in ("C_bank", "R_s", "V_bank_max", "m_bank", "eta_dc")}
_VEHICLE_KEYS = {"m_v": "m_v", "rho_CdA": "rho_cd_a", "f_roll": "f_roll", "g": "g"}


def _build(cls, section: dict, keys: dict, name: str, **extra):
    unknown = set(section) - set(keys)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    kwargs = {keys[k]: v for k, v in section.items()}
    try:
        return cls(**kwargs, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"section '{name}' must be an object")
    return dict(value)


@dataclass(frozen=True)
class CycleSource:
    file: str | None = None
    duration: float = 300.0
    v_peak: float = 50.0
    seed: int = 0
    dt: float = 1.0

    def load(self, vehicle: VehicleParams, base_dir: Path | None = None) -> DriveCycle:
        if self.file is not None:
            path = Path(self.file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return load_drive_cycle(path, vehicle)
        return synthesize_test_cycle(self.duration, self.v_peak, self.seed, vehicle, self.dt)


@dataclass(frozen=True)
class ToolkitConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    limits: SimLimits = field(default_factory=SimLimits)
    moo: MooSettings = field(default_factory=MooSettings)
    cycle: CycleSource = field(default_factory=CycleSource)
    base_dir: Path | None = None

    @property
    def seed(self) -> int:
        return self.moo.seed

    def load_cycle(self) -> DriveCycle:
        return self.cycle.load(self.vehicle, self.base_dir)


_TOP_LEVEL = {"battery", "degradation", "supercapacitor", "hess", "vehicle", "limits", "fis", "moo", "cycle", "seed"}


def config_from_dict(data: dict, base_dir: Path | None = None) -> ToolkitConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")

    battery = _build(BatteryParams, _section(data, "battery"), _BATTERY_KEYS, "battery")
    degradation = _build(DegradationParams, _section(data, "degradation"), _DEGRADATION_KEYS, "degradation")
    supercap = _build(ScParams, _section(data, "supercapacitor"), _SC_KEYS, "supercapacitor")

    veh = _section(data, "vehicle")
    if "rho_CdA_kmh" in veh:
        if "rho_CdA" in veh:
            raise ConfigError("vehicle: give rho_CdA or rho_CdA_kmh, not both")
        veh["rho_CdA"] = VehicleParams.from_kmh_drag(veh.pop("rho_CdA_kmh")).rho_cd_a
    vehicle = _build(VehicleParams, veh, _VEHICLE_KEYS, "vehicle")

    lim = _section(data, "limits")
    limits = _build(SimLimits, {k: tuple(v) for k, v in lim.items()},
                    {k: k for k in ("soc_range", "soe_range", "sc_current_range")}, "limits")

    fis_sec = _section(data, "fis")
    try:
        if "template" in fis_sec:
            template = fis.FisSpec.from_dict(fis_sec["template"])
        else:
            template = fis.default_template(int(fis_sec.get("n_dis", fis.DEFAULT_N_DIS)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"fis: {exc}") from None

    hess = _section(data, "hess")
    hess_keys = {"m_HESS": "m_hess", "soc_init": "soc_init", "soe_init": "soe_init",
                 "eol_loss_percent": "eol_loss_percent", "max_laps": "max_laps", "power_scale": "power_scale"}
    plant = _build(PlantConfig, hess, hess_keys, "hess", battery=battery, supercap=supercap,
                   degradation=degradation, template=template)

    moo_sec = _section(data, "moo")
    var_keys = {"crossover_rate", "eta_c", "gene_swap_prob", "mutation_rate", "eta_m", "n_sc_bounds", "n_sc_step"}
    var = {k: moo_sec.pop(k) for k in list(moo_sec) if k in var_keys}
    if "n_sc_bounds" in var:
        var["n_sc_bounds"] = tuple(var["n_sc_bounds"])
    variation = _build(VariationSettings, var, {k: k for k in var_keys}, "moo")
    if "seed" in data:
        moo_sec.setdefault("seed", data["seed"])
    moo = _build(MooSettings, moo_sec, {k: k for k in ("population", "generations", "elite_fraction", "seed", "init_sigma")},
                 "moo", variation=variation)
    if moo.variation.n_sc_bounds[1] > 0:
        try:
            plant.n_bat(moo.variation.n_sc_bounds[1])
        except ValueError as exc:
            raise ConfigError(f"moo: n_sc upper bound leaves no battery mass ({exc})") from None

    cyc = _section(data, "cycle")
    synth = cyc.pop("synthetic", {})
    if "file" in cyc and synth:
        raise ConfigError("cycle: give a file or synthetic parameters, not both")
    if not isinstance(synth, dict):
        raise ConfigError("cycle.synthetic must be an object")
    cycle = _build(CycleSource, {**cyc, **synth}, {k: k for k in ("file", "duration", "v_peak", "seed", "dt")}, "cycle")

    return ToolkitConfig(plant, vehicle, limits, moo, cycle, base_dir)


def load_config(path) -> ToolkitConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data, base_dir=path.parent)


def default_config_dict() -> dict[str, Any]:
    """A complete config with every default spelled out."""
    b, d, s, v, lim, p, m = (BatteryParams(), DegradationParams(), ScParams(), VehicleParams(),
                             SimLimits(), PlantConfig(), MooSettings())
    return {
        "battery": {k: getattr(b, f) for k, f in _BATTERY_KEYS.items()},
        "degradation": {k: getattr(d, f) for k, f in _DEGRADATION_KEYS.items()},
        "supercapacitor": {k: getattr(s, f) for k, f in _SC_KEYS.items()},
        "hess": {"m_HESS": p.m_hess, "soc_init": p.soc_init, "soe_init": p.soe_init,
                 "eol_loss_percent": p.eol_loss_percent, "max_laps": p.max_laps, "power_scale": p.power_scale},
        "vehicle": {"m_v": v.m_v, "rho_CdA_kmh": 0.075, "f_roll": v.f_roll, "g": v.g},
        "limits": {"soc_range": list(lim.soc_range), "soe_range": list(lim.soe_range),
                   "sc_current_range": list(lim.sc_current_range)},
        "fis": {"n_dis": fis.DEFAULT_N_DIS},
        "moo": {"population": m.population, "generations": m.generations, "elite_fraction": m.elite_fraction,
                "init_sigma": m.init_sigma, "n_sc_bounds": list(m.variation.n_sc_bounds),
                "crossover_rate": m.variation.crossover_rate, "eta_c": m.variation.eta_c,
                "eta_m": m.variation.eta_m, "n_sc_step": m.variation.n_sc_step},
        "cycle": {"synthetic": {"duration": 300.0, "v_peak": 50.0, "seed": 0, "dt": 1.0}},
        "seed": m.seed,
    }
