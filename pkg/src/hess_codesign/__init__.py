"""Co-design of battery/supercapacitor sizing and fuzzy energy management."""

from .cycle import DriveCycle, VehicleParams, load_drive_cycle, synthesize_test_cycle
from .fis import FisSpec, PagedFis, decode_genome, default_template, evaluate_batch, evaluate_scalar
from .sim import HessDesign, PlantConfig, SimLimits, SimResult, evaluate_objectives, simulate, simulate_batch

__version__ = "0.1.0"

__all__ = [
    "DriveCycle",
    "VehicleParams",
    "load_drive_cycle",
    "synthesize_test_cycle",
    "FisSpec",
    "PagedFis",
    "decode_genome",
    "default_template",
    "evaluate_batch",
    "evaluate_scalar",
    "HessDesign",
    "PlantConfig",
    "SimLimits",
    "SimResult",
    "evaluate_objectives",
    "simulate",
    "simulate_batch",
]
