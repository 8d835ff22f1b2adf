"""Drive cycles: loading, demand power and a synthetic race lap."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

KMH = 1.0 / 3.6


class DriveCycleError(ValueError):
    pass


@dataclass(frozen=True)
class VehicleParams:
    m_v: float = 570.0
    rho_cd_a: float = 0.075 / KMH**2  # 0.075 h^2 N / km^2 in N s^2 / m^2
    f_roll: float = 0.016
    g: float = 9.81

    def __post_init__(self):
        for name in ("m_v", "rho_cd_a", "f_roll", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"vehicle parameter {name} must be positive")

    @classmethod
    def from_kmh_drag(cls, rho_cd_a_kmh: float, **kwargs) -> VehicleParams:
        """Build from a drag coefficient quoted per (km/h)^2."""
        return cls(rho_cd_a=rho_cd_a_kmh / KMH**2, **kwargs)


def demand_power(v, a, vp: VehicleParams):
    """Traction power at the wheels, negative while braking hard enough."""
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    p = (0.5 * vp.rho_cd_a * v**2 + vp.f_roll * vp.m_v * vp.g + vp.m_v * a) * v
    return p if p.ndim else float(p)


@dataclass(frozen=True, eq=False)
class DriveCycle:
    t: np.ndarray
    v: np.ndarray
    a: np.ndarray
    p_dem: np.ndarray
    vehicle: VehicleParams

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 1.0

    @property
    def n_samples(self) -> int:
        return len(self.t)

    @property
    def lap_length_t(self) -> float:
        """Lap duration; each sample stands for one step of ``dt``."""
        return self.n_samples * self.dt

    @property
    def p_peak(self) -> float:
        return float(np.max(np.abs(self.p_dem))) if self.n_samples else 0.0

    def __eq__(self, other):
        if not isinstance(other, DriveCycle):
            return NotImplemented
        return self.vehicle == other.vehicle and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("t", "v", "a", "p_dem")
        )


def make_cycle(t, v, vp: VehicleParams) -> DriveCycle:
    """Derive acceleration (forward difference, last sample zero) and demand power."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
        raise DriveCycleError("cycle needs at least two (t, v) samples of equal length")
    dt = t[1] - t[0]
    a = np.zeros_like(v)
    a[:-1] = np.diff(v) / dt
    arrays = [t, v, a, demand_power(v, a, vp)]
    for arr in arrays:
        arr.setflags(write=False)
    return DriveCycle(*arrays, vehicle=vp)


def _check_uniform(t: np.ndarray) -> None:
    dt = t[1] - t[0]
    if not dt > 0:
        raise DriveCycleError("row 2: time is not strictly increasing")
    tol = 1e-9 * max(1.0, abs(dt))
    steps = np.diff(t)
    for k, step in enumerate(steps):
        if not step > 0:
            raise DriveCycleError(f"row {k + 2}: time is not strictly increasing")
        if abs(step - dt) > tol:
            raise DriveCycleError(f"row {k + 2}: non-uniform time step {step} (expected {dt})")


def load_drive_cycle(path, vp: VehicleParams) -> DriveCycle:
    """Read a ``t,v`` CSV (seconds, m/s).  Row numbers in errors count data rows from 1."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"drive cycle file not found: {path}")
    ts, vs = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "v"]:
            raise DriveCycleError(f"{path}: expected header 't,v', got {header}")
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DriveCycleError(f"{path}: row {row_no}: expected 2 columns, got {len(row)}")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                raise DriveCycleError(f"{path}: row {row_no}: not a number: {row}") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise DriveCycleError(f"{path}: row {row_no}: non-finite value")
            if v < 0:
                raise DriveCycleError(f"{path}: row {row_no}: negative velocity {v}")
            if ts and t <= ts[-1]:
                raise DriveCycleError(f"{path}: row {row_no}: time {t} does not increase")
            ts.append(t)
            vs.append(v)
    if len(ts) < 2:
        raise DriveCycleError(f"{path}: need at least two samples")
    t = np.array(ts)
    try:
        _check_uniform(t)
    except DriveCycleError as exc:
        raise DriveCycleError(f"{path}: {exc}") from None
    return make_cycle(t, np.array(vs), vp)


def write_drive_cycle(path, cycle: DriveCycle) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "v"])
        for t, v in zip(cycle.t.tolist(), cycle.v.tolist()):
            w.writerow([repr(t), repr(v)])


def synthesize_test_cycle(
    duration: float = 300.0,
    v_peak: float = 50.0,
    seed: int = 0,
    vp: VehicleParams | None = None,
    dt: float = 1.0,
    accel_max: float = 4.5,
    brake_max: float = 9.0,
) -> DriveCycle:
    """A standing-start lap: launch to ``v_peak``, then corners and straights, then a stop.

    The first straight always reaches ``v_peak`` exactly (given enough time);
    later straights peak between 70% and 100% of it, corners at 35-60%.
    """
    if duration < 10:
        raise ValueError("duration must be at least 10 s")
    vp = vp or VehicleParams()
    n = int(round(duration / dt))
    t = np.arange(n) * dt
    v = np.zeros(n)
    if v_peak <= 0:
        return make_cycle(t, v, vp)

    rng = np.random.default_rng(seed)
    phase, target, hold = "accel", v_peak, 0
    brake = brake_max
    stopping = False
    for k in range(n - 1):
        remaining = n - 1 - k
        vk = v[k]
        if not stopping and remaining <= math.ceil(vk / (brake_max * dt)) + 1:
            stopping = True
        if stopping:
            v[k + 1] = vk * (remaining - 1) / remaining
            continue
        if phase == "accel":
            a = accel_max * (1.0 - 0.6 * vk / v_peak)
            v[k + 1] = min(vk + a * dt, target)
            if v[k + 1] >= target:
                phase, hold = "cruise", int(rng.integers(3, 12))
        elif phase == "cruise":
            v[k + 1] = vk
            hold -= 1
            if hold <= 0:
                phase = "brake"
                target = float(rng.uniform(0.35, 0.6)) * v_peak
                brake = float(rng.uniform(0.7, 1.0)) * brake_max
        elif phase == "brake":
            v[k + 1] = max(vk - brake * dt, target)
            if v[k + 1] <= target:
                phase, hold = "corner", int(rng.integers(2, 6))
        else:
            v[k + 1] = vk
            hold -= 1
            if hold <= 0:
                phase = "accel"
                target = float(rng.uniform(0.7, 1.0)) * v_peak
    v[-1] = 0.0
    return make_cycle(t, v, vp)
