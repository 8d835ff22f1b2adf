"""Battery, degradation and supercapacitor plant models.

All array-valued helpers accept numpy arrays so the simulator can advance
many plants at once; the state-object functions wrap them for single runs.
Battery quantities are per cell, supercapacitor quantities per pack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

R_GAS = 8.314
SECONDS_PER_HOUR = 3600.0


class BatteryDepleted(RuntimeError):
    """The battery reached its depletion limit during a step."""

    def __init__(self, message: str, state: "BatteryState | None" = None):
        super().__init__(message)
        self.state = state


class SizingError(ValueError):
    """The mass budget cannot hold the requested pack."""


# ---------------------------------------------------------------------------
# Parameters and states


@dataclass(frozen=True)
class BatteryParams:
    """Modified Shepherd cell parameters (defaults: 53 Ah high-energy cell)."""

    E0: float = 3.43
    K: float = 8.85e-5
    Q_max: float = 55.0
    R: float = 1.33e-3
    A_exp: float = 0.761
    B_exp: float = 0.040
    m_cell: float = 1.15
    eta_AD: float = 0.96

    def __post_init__(self):
        for name in ("E0", "K", "Q_max", "R", "A_exp", "B_exp", "m_cell"):
            if not getattr(self, name) > 0:
                raise ValueError(f"battery parameter {name} must be positive")
        if not 0.0 < self.eta_AD <= 1.0:
            raise ValueError("eta_AD must lie in (0, 1]")


@dataclass(frozen=True)
class BatteryState:
    soc: float = 100.0
    it: float = 0.0
    i: float = 0.0

    @classmethod
    def from_soc(cls, soc_percent: float, p: BatteryParams) -> BatteryState:
        it = p.Q_max * (1.0 - soc_percent / 100.0)
        return cls(soc=100.0 * (1.0 - it / p.Q_max), it=it, i=0.0)


@dataclass(frozen=True)
class DegradationParams:
    a: float = 1.345
    b: float = 0.2563
    c: float = 9.179
    d: float = 46868.0
    e: float = -470.3
    z: float = 0.55
    R_gas: float = R_GAS
    T: float = 296.15

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("temperature must be positive")
        if not 0.0 < self.z <= 1.0:
            raise ValueError("z must lie in (0, 1]")


@dataclass(frozen=True)
class ScParams:
    """One supercapacitor bank type and the number of banks in series."""

    C_bank: float = 3400.0
    R_s: float = 2.2e-4
    V_bank_max: float = 2.85
    m_bank: float = 0.52
    eta_dc: float = 0.95
    n_sc: int = 1

    def __post_init__(self):
        for name in ("C_bank", "R_s", "V_bank_max", "m_bank"):
            if not getattr(self, name) > 0:
                raise ValueError(f"supercapacitor parameter {name} must be positive")
        if not 0.0 < self.eta_dc <= 1.0:
            raise ValueError("eta_dc must lie in (0, 1]")
        if int(self.n_sc) != self.n_sc or self.n_sc < 1:
            raise ValueError("n_sc must be a positive integer")

    @property
    def C_sct(self) -> float:
        return self.C_bank / self.n_sc

    @property
    def R_sct(self) -> float:
        return self.n_sc * self.R_s

    @property
    def V_ctmax(self) -> float:
        return self.n_sc * self.V_bank_max


@dataclass(frozen=True)
class ScState:
    v_ct: float
    soe: float

    @classmethod
    def from_voltage(cls, v_ct: float, sp: ScParams) -> ScState:
        return cls(v_ct=v_ct, soe=v_ct**2 / sp.V_ctmax**2)

    @classmethod
    def from_soe(cls, soe: float, sp: ScParams) -> ScState:
        return cls.from_voltage(math.sqrt(soe) * sp.V_ctmax, sp)


# ---------------------------------------------------------------------------
# Battery


def charge_singularity_guard(p: BatteryParams) -> float:
    return 1e-6 * p.Q_max


def shepherd_voltage(it, i, p: BatteryParams):
    """Cell terminal voltage; discharge branch for i >= 0, charge branch otherwise."""
    it = np.asarray(it, dtype=float)
    i = np.asarray(i, dtype=float)
    q = p.Q_max
    polar = p.K * q / (q - it)
    gap = it - 0.1 * q
    eps = charge_singularity_guard(p)
    gap = np.where(np.abs(gap) < eps, np.where(gap < 0.0, -eps, eps), gap)
    discharge_term = polar * i
    charge_term = p.K * q / gap * i
    v = (
        p.E0
        - polar * it
        - np.where(i >= 0.0, discharge_term, charge_term)
        - p.R * i
        + p.A_exp * np.exp(-p.B_exp * it)
    )
    return v if v.ndim else float(v)


def battery_terminal_voltage(state: BatteryState, i: float, p: BatteryParams) -> float:
    if state.it >= p.Q_max:
        raise BatteryDepleted(f"cell fully discharged (it={state.it:.4f} Ah)", state)
    return shepherd_voltage(state.it, i, p)


def battery_current_from_power(P_reqbat, N_bat, V_bat, p: BatteryParams):
    """Per-cell current drawn for a pack-level power request.

    The DC/AC efficiency divides on discharge and multiplies on charge.
    """
    P = np.asarray(P_reqbat, dtype=float)
    denom = np.asarray(N_bat, dtype=float) * np.asarray(V_bat, dtype=float)
    i = np.where(P >= 0.0, P / (denom * p.eta_AD), P * p.eta_AD / denom)
    return i if i.ndim else float(i)


def step_battery(
    state: BatteryState,
    P_reqbat: float,
    dt: float,
    N_bat: int,
    p: BatteryParams,
    soc_floor: float | None = None,
) -> BatteryState:
    """Advance one cell (standing in for the pack) by one explicit Euler step.

    The terminal voltage is evaluated at the previous step's current and the
    new current is then solved from it at constant power.  Raises
    ``BatteryDepleted`` (carrying the new state) when the SOC drops below
    ``soc_floor`` percent or the cell is exhausted.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    v = battery_terminal_voltage(state, state.i, p)
    if v <= 0.0:
        raise BatteryDepleted(f"non-positive terminal voltage {v:.4f} V", state)
    i = battery_current_from_power(P_reqbat, N_bat, v, p)
    it = max(state.it + i * dt / SECONDS_PER_HOUR, 0.0)
    new = BatteryState(soc=100.0 * (1.0 - it / p.Q_max), it=it, i=i)
    if it >= p.Q_max:
        raise BatteryDepleted("cell fully discharged", new)
    if soc_floor is not None and new.soc < soc_floor:
        raise BatteryDepleted(f"SOC {new.soc:.3f}% below floor {soc_floor}%", new)
    return new


def battery_count(m_hess: float, N_sc: int, m_bank: float, m_cell: float) -> int:
    """Number of cells that fit in the mass budget left after the SC banks."""
    remaining = m_hess - N_sc * m_bank
    if remaining <= 0:
        raise SizingError(f"no mass left for cells: {m_hess} kg - {N_sc} x {m_bank} kg")
    n = math.floor(remaining / m_cell)
    # Guard against the quotient rounding up across an integer.
    while n > 0 and n * m_cell + N_sc * m_bank > m_hess:
        n -= 1
    return n


# ---------------------------------------------------------------------------
# Capacity loss


def log_pre_exponential(C_rate, dp: DegradationParams):
    return dp.a * np.exp(-dp.b * np.asarray(C_rate, dtype=float)) + dp.c


def activation_energy(C_rate, dp: DegradationParams):
    return dp.d + dp.e * np.asarray(C_rate, dtype=float)


def loss_coefficient(C_rate, dp: DegradationParams):
    """A * exp(-Ea / RT): capacity loss per unit Ah^z."""
    return np.exp(log_pre_exponential(C_rate, dp) - activation_energy(C_rate, dp) / (dp.R_gas * dp.T))


def capacity_loss(Ah, C_rate, dp: DegradationParams):
    """Capacity loss in percent after ``Ah`` ampere-hours at constant ``C_rate``."""
    Ah = np.asarray(Ah, dtype=float)
    if np.any(Ah < 0):
        raise ValueError("Ah-throughput must be non-negative")
    q = loss_coefficient(C_rate, dp) * Ah**dp.z
    return q if np.ndim(q) else float(q)


def eol_throughput(C_rate: float, dp: DegradationParams, eol_loss_percent: float = 20.0) -> float:
    """Ah-throughput at which the capacity loss reaches ``eol_loss_percent``."""
    return float((eol_loss_percent / loss_coefficient(C_rate, dp)) ** (1.0 / dp.z))


def cycle_life_objective(
    avg_current: float,
    Ah_per_lap: float,
    dp: DegradationParams,
    p: BatteryParams,
    eol_loss_percent: float = 20.0,
) -> float:
    """Laps until end of life at the given average per-cell current.

    Returns ``inf`` when the average current is zero (no wear).
    """
    if avg_current <= 0.0:
        return math.inf
    if not Ah_per_lap > 0.0:
        raise ValueError("Ah_per_lap must be positive")
    return eol_throughput(avg_current / p.Q_max, dp, eol_loss_percent) / Ah_per_lap


# ---------------------------------------------------------------------------
# Supercapacitor


def sc_current(v_ct, P_reqsc, R, eta):
    """Pack current (discharge positive) delivering ``P_reqsc`` at the DC link.

    ``eta`` is the product of the converter efficiencies.  Uses the
    cancellation-free form of (V - sqrt(V^2 - 4 R P')) / (2 R).
    """
    v = np.asarray(v_ct, dtype=float)
    P = np.asarray(P_reqsc, dtype=float)
    P_int = np.where(P >= 0.0, P / eta, P * eta)
    disc = np.maximum(v * v - 4.0 * R * P_int, 0.0)
    root = np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        i = np.where(v + root > 0.0, 2.0 * P_int / (v + root), 0.0)
    return i


def sc_max_discharge_power(v_ct, R, eta):
    """Largest DC-link power the pack can deliver (zero discriminant)."""
    return np.asarray(v_ct, dtype=float) ** 2 * eta / (4.0 * R)


def sc_power_limits(v_ct, C, R, v_ctmax, eta, dt, soe_range=(0.1, 0.99), i_range=(-2000.0, 2000.0)):
    """DC-link power window ``(p_min, p_max)`` for one step.

    The window keeps the pack current within ``i_range``, the post-step SOE
    inside ``soe_range`` and the request below the deliverable maximum.
    Returns the window together with the matching current limits.
    """
    v = np.asarray(v_ct, dtype=float)
    v_lo = math.sqrt(soe_range[0]) * np.asarray(v_ctmax, dtype=float)
    v_hi = math.sqrt(soe_range[1]) * np.asarray(v_ctmax, dtype=float)
    i_dis = np.minimum(np.minimum(i_range[1], C * (v - v_lo) / dt), v / (2.0 * R))
    i_dis = np.maximum(i_dis, 0.0)
    i_chg = np.maximum(np.minimum(-i_range[0], C * (v_hi - v) / dt), 0.0)
    p_max = eta * i_dis * (v - R * i_dis)
    p_min = -i_chg * (v + R * i_chg) / eta
    return p_min, p_max, -i_chg, i_dis


def step_supercapacitor(
    state: ScState,
    P_reqsc: float,
    dt: float,
    sp: ScParams,
    eta_AD: float,
    soe_range: tuple[float, float] = (0.1, 0.99),
) -> tuple[ScState, float]:
    """Advance the pack by one Euler step; returns the new state and the actual power.

    Requests beyond the deliverable maximum are clamped to it, and requests
    pushing the SOE further outside ``soe_range`` are dropped to zero.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not state.v_ct > 0:
        raise ValueError("supercapacitor voltage must be positive")
    eta = eta_AD * sp.eta_dc
    P = float(P_reqsc)
    if (P > 0 and state.soe <= soe_range[0]) or (P < 0 and state.soe >= soe_range[1]):
        P = 0.0
    P = min(P, float(sc_max_discharge_power(state.v_ct, sp.R_sct, eta)))
    i = float(sc_current(state.v_ct, P, sp.R_sct, eta))
    p_sc = state.v_ct * i
    v_new = min(max(state.v_ct - i * dt / sp.C_sct, 0.0), sp.V_ctmax)
    return ScState.from_voltage(v_new, sp), p_sc


def with_banks(sp: ScParams, n_sc: int) -> ScParams:
    return replace(sp, n_sc=n_sc)
