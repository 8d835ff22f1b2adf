"""Closed-loop lap simulation of fuzzy-managed battery/supercapacitor packs.

Many designs are simulated side by side: the fuzzy controllers of all
designs are evaluated as one batch per time step and every plant quantity
is a per-design array.  Designs never interact, so a design's result does
not depend on which other designs share the batch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fis
from .cycle import DriveCycle
from .powertrain import (
    SECONDS_PER_HOUR,
    BatteryParams,
    DegradationParams,
    ScParams,
    SizingError,
    battery_count,
    battery_current_from_power,
    cycle_life_objective,
    sc_current,
    sc_power_limits,
    shepherd_voltage,
)

# Commands are snapped to this power grid (watts) so that the battery share
# p_dem - p_reqsc is computed without rounding.
POWER_QUANTUM = 1.0 / 1024.0

TRACE_COLUMNS = ("t", "soc", "soe", "p_dem", "p_reqbat", "p_reqsc", "p_sc")


def _sqrt_bounds(v_max, lo: float, hi: float):
    """Voltages whose squared ratio to ``v_max`` lands inside [lo, hi] after rounding."""
    v_lo = math.sqrt(lo) * v_max
    v_hi = math.sqrt(hi) * v_max
    for _ in range(8):
        v_lo = np.where((v_lo / v_max) ** 2 < lo, np.nextafter(v_lo, np.inf), v_lo)
        v_hi = np.where((v_hi / v_max) ** 2 > hi, np.nextafter(v_hi, 0.0), v_hi)
    return v_lo, v_hi


def _q_floor(x):
    return np.floor(x / POWER_QUANTUM) * POWER_QUANTUM


def _q_ceil(x):
    return np.ceil(x / POWER_QUANTUM) * POWER_QUANTUM


def _q_trunc(x):
    return np.trunc(x / POWER_QUANTUM) * POWER_QUANTUM


def _q_round(x):
    return np.round(x / POWER_QUANTUM) * POWER_QUANTUM


@dataclass(frozen=True)
class SimLimits:
    soc_range: tuple[float, float] = (0.2, 0.9)
    soe_range: tuple[float, float] = (0.1, 0.99)
    sc_current_range: tuple[float, float] = (-2000.0, 2000.0)

    def __post_init__(self):
        for name in ("soc_range", "soe_range", "sc_current_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name}: min must be below max")
        lo, hi = self.sc_current_range
        if not lo <= 0 <= hi:
            raise ValueError("sc_current_range must contain zero")
        if not 0 <= self.soc_range[0] and self.soc_range[1] <= 1:
            raise ValueError("soc_range must lie in [0, 1]")
        if not 0 <= self.soe_range[0] and self.soe_range[1] <= 1:
            raise ValueError("soe_range must lie in [0, 1]")


@dataclass(frozen=True)
class PlantConfig:
    """Everything about the vehicle's storage that is not a design variable."""

    battery: BatteryParams = field(default_factory=BatteryParams)
    supercap: ScParams = field(default_factory=ScParams)
    degradation: DegradationParams = field(default_factory=DegradationParams)
    m_hess: float = 320.0
    soc_init: float = 0.9
    soe_init: float = 0.99
    eol_loss_percent: float = 20.0
    max_laps: int = 1000
    power_scale: float | None = None
    template: fis.FisSpec = field(default_factory=fis.default_template)

    def __post_init__(self):
        if not self.m_hess > 0:
            raise ValueError("m_hess must be positive")
        if self.max_laps < 1:
            raise ValueError("max_laps must be at least 1")
        if self.power_scale is not None and not self.power_scale > 0:
            raise ValueError("power_scale must be positive")
        if not 0 < self.eol_loss_percent < 100:
            raise ValueError("eol_loss_percent must lie in (0, 100)")

    def n_bat(self, n_sc: int) -> int:
        return battery_count(self.m_hess, n_sc, self.supercap.m_bank, self.battery.m_cell)


@dataclass(frozen=True, eq=False)
class HessDesign:
    """Bank count plus membership-function genome.

    ``genome=None`` is the battery-only strategy: the supercapacitor is
    never asked for power.
    """

    n_sc: int
    genome: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n_sc) != self.n_sc or self.n_sc < 0:
            raise ValueError(f"n_sc must be a non-negative integer, got {self.n_sc}")
        object.__setattr__(self, "n_sc", int(self.n_sc))
        if self.genome is not None:
            g = np.array(self.genome, dtype=float)
            g.setflags(write=False)
            object.__setattr__(self, "genome", g)


@dataclass
class SimResult:
    j_laps: float
    j_lifebat: float
    avg_cell_current: float
    n_bat: int = 0
    ah_discharged: float = 0.0
    feasible: bool = True
    traces: dict[str, np.ndarray] | None = None

    @classmethod
    def infeasible(cls) -> SimResult:
        return cls(0.0, 0.0, math.nan, feasible=False)


def evaluate_objectives(result: SimResult) -> tuple[float, float]:
    """Objective pair to maximize: (laps travelled, laps until battery end of life)."""
    if not result.feasible:
        return (0.0, 0.0)
    return (result.j_laps, result.j_lifebat)


def simulate(
    design: HessDesign,
    cycle: DriveCycle,
    limits: SimLimits = SimLimits(),
    plant: PlantConfig | None = None,
    record_traces: bool = True,
) -> SimResult:
    return simulate_batch([design], cycle, limits, plant, record_traces)[0]


def simulate_batch(
    designs: Sequence[HessDesign],
    cycle: DriveCycle,
    limits: SimLimits = SimLimits(),
    plant: PlantConfig | None = None,
    record_traces: bool = False,
) -> list[SimResult]:
    """Run every design over repeated laps until its battery hits the SOC floor.

    Per step, each controller maps (SOC, SOE, normalized demand) to a
    normalized supercapacitor request.  The request is clamped to what the
    pack can deliver or absorb without breaking the current and SOE limits;
    the battery supplies the rest.  Regeneration that neither store can
    take is left to the friction brakes, so the logged ``p_dem`` is the
    electrical demand actually served.
    """
    plant = plant or PlantConfig()
    if cycle.n_samples == 0:
        raise ValueError("empty drive cycle")
    soc_lo, soc_hi = limits.soc_range
    if not soc_lo < plant.soc_init <= soc_hi:
        raise ValueError("soc_init outside the SOC limits")
    if not limits.soe_range[0] <= plant.soe_init <= limits.soe_range[1]:
        raise ValueError("soe_init outside the SOE limits")

    results: list[SimResult | None] = [None] * len(designs)
    pages, n_bats = [], []
    for idx, d in enumerate(designs):
        try:
            n_bat = plant.n_bat(d.n_sc)
        except SizingError:
            n_bat = 0
        if n_bat < 1:
            results[idx] = SimResult.infeasible()
        else:
            pages.append(idx)
            n_bats.append(n_bat)
    if pages:
        batch = [designs[i] for i in pages]
        for idx, res in zip(pages, _run(batch, np.array(n_bats, dtype=float), cycle, limits, plant, record_traces)):
            results[idx] = res
    return results


def _run(designs, n_bat, cycle, limits, plant, record_traces):
    bp, sp, dp = plant.battery, plant.supercap, plant.degradation
    n_pages = len(designs)
    dt = cycle.dt
    n_samples = cycle.n_samples
    lap_len = cycle.lap_length_t
    p_scale = plant.power_scale or cycle.p_peak or 1.0

    n_sc = np.array([d.n_sc for d in designs], dtype=float)
    has_sc = n_sc > 0
    uses_fis = has_sc & np.array([d.genome is not None for d in designs])
    banks = np.where(has_sc, n_sc, 1.0)
    cap = sp.C_bank / banks
    res = banks * sp.R_s
    v_max = banks * sp.V_bank_max
    eta_sc = bp.eta_AD * sp.eta_dc
    v_lo, v_hi = _sqrt_bounds(v_max, *limits.soe_range)

    template = plant.template
    genomes = np.array(
        [d.genome if d.genome is not None else fis.uniform_genome(template) for d in designs]
    )
    controllers = fis.PagedFis.from_genomes(genomes, template)

    it_ceiling = bp.Q_max * (1.0 - limits.soc_range[1])
    while 1.0 - it_ceiling / bp.Q_max > limits.soc_range[1]:
        it_ceiling = math.nextafter(it_ceiling, math.inf)
    it_floor = bp.Q_max * (1.0 - limits.soc_range[0])
    while 1.0 - it_floor / bp.Q_max < limits.soc_range[0]:
        it_floor = math.nextafter(it_floor, 0.0)
    it = np.full(n_pages, bp.Q_max * (1.0 - plant.soc_init))
    i_prev = np.zeros(n_pages)
    v_ct = np.where(has_sc, np.clip(math.sqrt(plant.soe_init) * v_max, v_lo, v_hi), 0.0)
    soe_frozen = plant.soe_init

    ah_dis = np.zeros(n_pages)
    t_end = np.full(n_pages, np.nan)
    active = np.ones(n_pages, dtype=bool)
    lap_start_state = np.stack([it, i_prev, v_ct])
    lap_start_ah = ah_dis.copy()
    steady_lap_ah = np.zeros(n_pages)

    rows = [] if record_traces else None
    max_steps = plant.max_laps * n_samples

    for k in range(max_steps):
        if not active.any():
            break
        p_raw = float(cycle.p_dem[k % n_samples])

        v_bat = shepherd_voltage(it, i_prev, bp)
        v_bat_safe = np.maximum(v_bat, 1e-9)
        chg_room = np.maximum(it - it_ceiling, 0.0) * SECONDS_PER_HOUR / dt
        chg_cap = _q_floor(chg_room * n_bat * v_bat_safe / bp.eta_AD)

        p_min, p_max, i_lo, i_hi = sc_power_limits(
            np.where(has_sc, v_ct, 1.0), cap, res, v_max, eta_sc, dt,
            limits.soe_range, limits.sc_current_range,
        )
        p_min = np.where(has_sc, _q_ceil(p_min), 0.0)
        p_max = np.where(has_sc, _q_floor(p_max), 0.0)

        p_dem = np.maximum(_q_trunc(p_raw), -(chg_cap - p_min))

        soc = 1.0 - it / bp.Q_max
        soe = np.where(has_sc, (v_ct / v_max) ** 2, soe_frozen)
        x = np.column_stack([soc, soe, np.full(n_pages, np.clip(p_raw / p_scale, -1.0, 1.0))])
        u = fis.evaluate_batch(x, controllers) * p_scale
        u = np.where(uses_fis, _q_round(u), 0.0)
        u = np.clip(u, p_min, np.minimum(p_max, p_dem + chg_cap))
        p_bat = p_dem - u

        i_new = battery_current_from_power(p_bat, n_bat, v_bat_safe, bp)
        it_new = it + i_new * dt / SECONDS_PER_HOUR
        it_new = np.where(i_new < 0.0, np.maximum(it_new, np.minimum(it, it_ceiling)), it_new)

        i_sc = np.where(has_sc, sc_current(np.where(has_sc, v_ct, 1.0), u, res, eta_sc), 0.0)
        i_sc = np.clip(i_sc, np.where(has_sc, i_lo, 0.0), np.where(has_sc, i_hi, 0.0))
        p_sc = v_ct * i_sc
        v_new = np.where(has_sc, np.clip(v_ct - i_sc * dt / cap, v_lo, v_hi), 0.0)

        depleted = active & ((it_new > it_floor) | (v_bat <= 0.0))
        step_ah = np.maximum(i_new, 0.0) * dt / SECONDS_PER_HOUR
        frac = np.ones(n_pages)
        crossing = depleted & (it_new > it)
        frac[crossing] = np.clip((it_floor - it[crossing]) / (it_new[crossing] - it[crossing]), 0.0, 1.0)

        upd = active
        it = np.where(upd, it_new, it)
        i_prev = np.where(upd, i_new, i_prev)
        v_ct = np.where(upd, v_new, v_ct)
        ah_dis = np.where(upd, ah_dis + frac * step_ah, ah_dis)
        t_end = np.where(depleted, (k + frac) * dt, t_end)

        if record_traces:
            rows.append(
                (
                    np.full(n_pages, (k + 1) * dt),
                    1.0 - it / bp.Q_max,
                    np.where(has_sc, (v_ct / v_max) ** 2, soe_frozen),
                    p_dem, p_bat, u, p_sc, i_sc, upd.copy(),
                )
            )
        active = active & ~depleted

        if k % n_samples == n_samples - 1:
            state = np.stack([it, i_prev, v_ct])
            steady = active & np.all(state == lap_start_state, axis=0)
            if steady.any():
                steady_lap_ah[steady] = ah_dis[steady] - lap_start_ah[steady]
                laps_done = (k + 1) // n_samples
                ah_dis[steady] += (plant.max_laps - laps_done) * steady_lap_ah[steady]
                t_end[steady] = plant.max_laps * lap_len
                active &= ~steady
            lap_start_state = state
            lap_start_ah = ah_dis.copy()

    t_end = np.where(np.isnan(t_end), plant.max_laps * lap_len, t_end)

    out = []
    for j in range(n_pages):
        j_laps = float(t_end[j] / lap_len)
        elapsed = float(t_end[j])
        avg_i = float(ah_dis[j] * SECONDS_PER_HOUR / elapsed) if elapsed > 0 else 0.0
        if ah_dis[j] > 0 and j_laps > 0:
            life = cycle_life_objective(avg_i, float(ah_dis[j]) / j_laps, dp, bp, plant.eol_loss_percent)
        else:
            life = math.inf
        traces = None
        if record_traces:
            traces = _page_trace(rows, j)
        out.append(SimResult(j_laps, life, avg_i, int(n_bat[j]), float(ah_dis[j]), True, traces))
    return out


def _page_trace(rows, j) -> dict[str, np.ndarray]:
    names = (*TRACE_COLUMNS, "i_sc")
    keep = [r for r in rows if r[-1][j]]
    return {name: np.array([r[c][j] for r in keep]) for c, name in enumerate(names)}


def write_trace(path, traces: dict[str, np.ndarray]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        cols = [traces[c].tolist() for c in TRACE_COLUMNS]
        for row in zip(*cols):
            w.writerow([repr(float(x) + 0.0) for x in row])
