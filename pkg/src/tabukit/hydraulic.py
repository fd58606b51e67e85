"""Closed-loop hydrostatic transmission model and tuning objective.

Topology: fixed-displacement pump -> proportional valve -> fixed
displacement motor, with a relief valve on the supply node and an
integral speed controller driving the valve opening through a first-order
lag.  Two capacitive pressure nodes (supply and motor side), rigid load
with viscous friction.  The design vector is (pump displacement cc/rev,
motor displacement cc/rev, integral gain).

The demand profile ramps to 300 rpm over the first second and holds; a
300 Nm load torque steps in at t = 2 s.  The tuning objective sums the
squared speed error (rpm) over a fixed 1 ms recording grid, each term
weighted by (1 + Qrv/Qp) to penalize pumping flow over the relief valve;
the integrator takes `substeps` internal RK4 steps per recorded sample.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from . import kernels
from ._fmt import format_float, write_csv
from .space import SearchSpace

RPM_PER_RAD_S = 60.0 / (2.0 * math.pi)
CC_PER_M3 = 1e6

PUMP_BOUNDS = (10.0, 500.0)    # cc/rev
MOTOR_BOUNDS = (50.0, 800.0)   # cc/rev
GAIN_BOUNDS = (0.01, 50.0)

PENALTY_DIVERGED = 1e12

TRAJECTORY_CSV_HEADER = [
    "t", "omega_desired_rpm", "omega_actual_rpm",
    "Qp_lpm", "Qrv_lpm", "Ps_bar", "Pm_bar", "u",
]


@dataclass(frozen=True)
class TransmissionDesign:
    """Pump/motor displacement in cc/rev plus the integral gain."""

    pump_cc: float
    motor_cc: float
    gain: float

    @classmethod
    def from_array(cls, v) -> "TransmissionDesign":
        v = np.asarray(v, dtype=float)
        if v.shape != (3,):
            raise ValueError("expected (pump_cc, motor_cc, gain)")
        return cls(*(float(x) for x in v))

    def as_array(self) -> np.ndarray:
        return np.array([self.pump_cc, self.motor_cc, self.gain])

    def bound_violations(self) -> list[str]:
        out = []
        for name, value, (lo, hi) in (
            ("Dp_cc", self.pump_cc, PUMP_BOUNDS),
            ("Dm_cc", self.motor_cc, MOTOR_BOUNDS),
            ("Ki", self.gain, GAIN_BOUNDS),
        ):
            if not lo <= value <= hi:
                out.append(f"{name} = {format_float(value)} outside [{lo}, {hi}]")
        return out

    @classmethod
    def from_json(cls, path) -> "TransmissionDesign":
        with open(path) as fh:
            doc = json.load(fh)
        vals = {}
        for field_name, *aliases in (
            ("pump_cc", "Dp_cc", "Dp"),
            ("motor_cc", "Dm_cc", "Dm"),
            ("gain", "Ki"),
        ):
            for key in (field_name, *aliases):
                if key in doc:
                    vals[field_name] = float(doc[key])
                    break
            else:
                raise ValueError(f"design JSON missing {field_name} (or {aliases[0]})")
        return cls(**vals)

    def to_json(self, path) -> None:
        doc = {
            "Dp_cc": json.loads(format_float(self.pump_cc)),
            "Dm_cc": json.loads(format_float(self.motor_cc)),
            "Ki": json.loads(format_float(self.gain)),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class PlantParams:
    """Physical constants of the rig; all SI.

    The valve passes 1.2x the largest pump flow at 10 bar drop when fully
    open; the relief valve passes that largest flow at 20 bar above its
    cracking pressure; motor leakage is ~2% of rated flow at 150 bar.
    `error_scale` normalizes the integrated speed error so the gain range
    drives the unit valve command with a stable loop.
    """

    bulk_modulus: float = 1.4e9        # Pa
    supply_volume: float = 2e-3        # m3
    motor_volume: float = 1e-3         # m3
    relief_pressure: float = 150e5     # Pa, cracking
    relief_gain: float = 6.25e-9       # m3/s per Pa above cracking
    valve_gain: float = 1.5e-5         # m3/s per regularized sqrt(Pa), u = 1
    valve_lag: float = 0.02            # s
    inertia: float = 2.0               # kg m2
    damping: float = 4.0               # N m s/rad
    leak_coeff: float = 1.6667e-11     # m3/s per Pa, motor node to tank
    smoothing: float = 1e5             # Pa; orifice/relief regularization
    pump_speed: float = 25.0           # rev/s
    error_scale: float = 900.0         # rad; integrator normalization
    demand_final_rpm: float = 300.0
    ramp_duration: float = 1.0         # s
    load_torque_step: float = 300.0    # N m
    load_step_time: float = 2.0        # s
    supply_leak_coeff: float = 0.0     # m3/s per Pa, supply node to tank
    makeup_gain: float = 6.25e-9       # m3/s per Pa of vacuum, anti-cavitation

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError(f"{f.name} must be a finite number")
        for name in ("bulk_modulus", "supply_volume", "motor_volume",
                     "relief_pressure", "relief_gain", "valve_gain",
                     "valve_lag", "inertia", "smoothing", "pump_speed",
                     "error_scale", "ramp_duration"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("damping", "leak_coeff", "supply_leak_coeff", "makeup_gain"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def from_json(cls, path) -> "PlantParams":
        with open(path) as fh:
            doc = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown plant parameters: {', '.join(sorted(unknown))}")
        return replace(cls(), **{k: float(v) for k, v in doc.items()})

    def as_array(self) -> np.ndarray:
        """Packed constants in the order the kernels expect."""
        return np.array([
            self.bulk_modulus,
            self.supply_volume,
            self.motor_volume,
            self.relief_pressure,
            self.relief_gain,
            self.valve_gain,
            self.valve_lag,
            self.inertia,
            self.damping,
            self.leak_coeff,
            self.smoothing,
            self.pump_speed,
            self.error_scale,
            self.demand_final_rpm / RPM_PER_RAD_S,
            self.ramp_duration,
            self.load_torque_step,
            self.load_step_time,
            self.supply_leak_coeff,
            self.makeup_gain,
        ])


def demand_speed(t: float, plant: PlantParams | None = None) -> float:
    """Demanded motor speed in rpm at time t (ramp then hold)."""
    p = plant if plant is not None else _DEFAULT_PLANT
    if t < p.ramp_duration:
        return p.demand_final_rpm * (t / p.ramp_duration)
    return p.demand_final_rpm


def load_torque(t: float, plant: PlantParams | None = None) -> float:
    """Applied load torque in N m at time t (step at load_step_time)."""
    p = plant if plant is not None else _DEFAULT_PLANT
    return p.load_torque_step if t >= p.load_step_time else 0.0


_DEFAULT_PLANT = PlantParams()


def _softplus(z: float) -> float:
    # branch thresholds mirror the simulation kernels exactly
    if z > 30.0:
        return z
    if z < -40.0:
        return 0.0
    return math.log1p(math.exp(z))


def derivatives(state, t: float, design: TransmissionDesign,
                plant: PlantParams | None = None) -> tuple:
    """State rates at (state, t); state = (Ps, Pm, omega, u, int_e).

    Pure-Python reference of the integrator's right-hand side, exposed for
    fixed-point and unit analysis; the kernels inline the same formulas.
    """
    p = plant if plant is not None else _DEFAULT_PLANT
    ps, pm, w, u, ie = (float(x) for x in state)
    if not all(map(math.isfinite, (ps, pm, w, u, ie))):
        raise ValueError("state must be finite")
    dp = design.pump_cc / CC_PER_M3
    dm = design.motor_cc / CC_PER_M3
    qp = p.pump_speed * dp
    wdes = demand_speed(t, p) / RPM_PER_RAD_S
    tload = load_torque(t, p)
    dpv = ps - pm
    qv = p.valve_gain * u * dpv / math.sqrt(math.sqrt(dpv * dpv + p.smoothing ** 2))
    qrv = p.relief_gain * p.smoothing * _softplus((ps - p.relief_pressure) / p.smoothing)
    qm = dm * w / (2.0 * math.pi)
    dps = (p.bulk_modulus / p.supply_volume) * (
        qp - qv - qrv - p.supply_leak_coeff * ps
        + p.makeup_gain * p.smoothing * _softplus(-ps / p.smoothing)
    )
    dpm = (p.bulk_modulus / p.motor_volume) * (
        qv - qm - p.leak_coeff * pm
        + p.makeup_gain * p.smoothing * _softplus(-pm / p.smoothing)
    )
    dw = (dm * pm / (2.0 * math.pi) - tload - p.damping * w) / p.inertia
    ucmd = min(max(design.gain * ie, 0.0), 1.0)
    du = (ucmd - u) / p.valve_lag
    die = (wdes - w) / p.error_scale
    return dps, dpm, dw, du, die


@dataclass
class SimTrajectory:
    """Recorded series on the uniform grid t_i = i*dt, SI units.

    `valve_flow` and `supply_rate` are extra series used by the
    self-consistency checks; the CSV export carries the plotted columns.
    On integrator blow-up `failed` is set and the series stop at the last
    finite sample.
    """

    t: np.ndarray
    demand: np.ndarray          # rad/s
    speed: np.ndarray           # rad/s
    pump_flow: np.ndarray       # m3/s
    relief_flow: np.ndarray     # m3/s
    supply_pressure: np.ndarray # Pa
    motor_pressure: np.ndarray  # Pa
    valve_opening: np.ndarray
    valve_flow: np.ndarray      # m3/s
    supply_rate: np.ndarray     # Pa/s
    failed: bool = False

    @property
    def n_samples(self) -> int:
        return len(self.t)

    def demand_rpm(self) -> np.ndarray:
        return self.demand * RPM_PER_RAD_S

    def speed_rpm(self) -> np.ndarray:
        return self.speed * RPM_PER_RAD_S

    def to_csv(self, path) -> None:
        cols = (
            self.t,
            self.demand * RPM_PER_RAD_S,
            self.speed * RPM_PER_RAD_S,
            self.pump_flow * 60000.0,
            self.relief_flow * 60000.0,
            self.supply_pressure / 1e5,
            self.motor_pressure / 1e5,
            self.valve_opening,
        )
        rows = [
            tuple(format_float(c[i]) for c in cols)
            for i in range(self.n_samples)
        ]
        write_csv(path, TRAJECTORY_CSV_HEADER, rows)


def simulate(design, plant: PlantParams | None = None, dt: float = 1e-3,
             duration: float = 4.0, substeps: int = 40) -> SimTrajectory:
    """Integrate from rest (all states zero, valve closed) and record.

    `design` is a TransmissionDesign or a (Dp_cc, Dm_cc, Ki) vector.
    Recording happens every `dt`; the RK4 integrator takes `substeps`
    internal steps per recorded sample.
    """
    if not isinstance(design, TransmissionDesign):
        design = TransmissionDesign.from_array(np.asarray(design, dtype=float))
    p = plant if plant is not None else _DEFAULT_PLANT
    if not dt > 0 or not duration > 0:
        raise ValueError("dt and duration must be positive")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    if design.gain <= 0:
        raise ValueError("gain must be positive")
    n_steps = int(round(duration / dt))
    out = np.empty((n_steps + 1, 10))
    bad = kernels.hydraulic_trajectory(
        design.pump_cc / CC_PER_M3, design.motor_cc / CC_PER_M3, design.gain,
        p.as_array(), dt, n_steps, substeps, out,
    )
    failed = bad >= 0
    if failed:
        out = out[:bad]
    return SimTrajectory(
        t=out[:, 0].copy(),
        demand=out[:, 1].copy(),
        speed=out[:, 2].copy(),
        pump_flow=out[:, 3].copy(),
        relief_flow=out[:, 4].copy(),
        supply_pressure=out[:, 5].copy(),
        motor_pressure=out[:, 6].copy(),
        valve_opening=out[:, 7].copy(),
        valve_flow=out[:, 8].copy(),
        supply_rate=out[:, 9].copy(),
        failed=failed,
    )


def tracking_objective(traj: SimTrajectory) -> float:
    """Squared rpm error weighted by (1 + Qrv/Qp), summed over all samples."""
    err = (traj.demand - traj.speed) * RPM_PER_RAD_S
    weight = 1.0 + traj.relief_flow / traj.pump_flow
    return float(np.sum(err * err * weight))


def transmission_space() -> SearchSpace:
    """Pump and motor displacement on a 5 cc grid, gain on a 0.01 grid."""
    return SearchSpace(
        lower=(PUMP_BOUNDS[0], MOTOR_BOUNDS[0], GAIN_BOUNDS[0]),
        upper=(PUMP_BOUNDS[1], MOTOR_BOUNDS[1], GAIN_BOUNDS[1]),
        step=(5.0, 5.0, 0.01),
    )


def transmission_objective(plant: PlantParams | None = None, dt: float = 1e-3,
                           duration: float = 4.0, substeps: int = 40):
    """Objective over (Dp_cc, Dm_cc, Ki) vectors; diverged runs get 1e12."""
    p = plant if plant is not None else _DEFAULT_PLANT

    def objective(v):
        traj = simulate(v, p, dt=dt, duration=duration, substeps=substeps)
        if traj.failed:
            return PENALTY_DIVERGED, False
        return tracking_objective(traj), True

    return objective
