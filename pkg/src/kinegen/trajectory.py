"""Path timing and simulated end-effector execution of velocity profiles.

A profile is rescaled to a straight Cartesian path (duration preserved) and
turned into timed waypoints under one of two discretization regimes: fixed
spatial step with computed arrival times, or fixed time step with computed
distances. Execution is simulated by a parametric actuator (speed cap,
acceleration cap, first-order tracking lag) standing in for the physical
robots, and scored against the plan.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateProfileError, ParseError
from .metrics import pearson
from .profiles import VelocityProfile
from .rng import rng_for

# Internal refinement of the piecewise-linear speed curve used when inverting
# the distance integral; 1000 sub-steps per sample keeps the inversion within
# 1e-4 s / 1e-4 m of a brute-force fine-grid integration.
TIME_REFINEMENT = 1000


class Plane(str, Enum):
    FRONTAL = "frontal"
    SAGITTAL = "sagittal"
    OBLIQUE = "oblique"


_PLANE_DIRECTIONS = {
    Plane.FRONTAL: np.array([1.0, 0.0, 0.0]),              # lateral axis
    Plane.SAGITTAL: np.array([0.0, 1.0, 0.0]),             # forward axis
    Plane.OBLIQUE: np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0),
}


@dataclass(eq=False)
class CartesianPath:
    """Straight segment from start to end, tagged with its movement plane."""
    start: np.ndarray
    end: np.ndarray
    plane: Plane

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64)
        self.end = np.asarray(self.end, dtype=np.float64)
        self.plane = Plane(self.plane)
        if self.start.shape != (3,) or self.end.shape != (3,):
            raise ValueError("path endpoints must be 3D points")
        if not self.length > 0.0:
            raise ValueError("path start and end must differ")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def direction(self) -> np.ndarray:
        return (self.end - self.start) / self.length


def make_path(plane, length: float, origin=(0.0, 0.0, 0.0)) -> CartesianPath:
    """Straight path of the given length along the plane's unit direction."""
    if not length > 0.0:
        raise ValueError(f"path length must be > 0, got {length}")
    plane = Plane(plane)
    origin = np.asarray(origin, dtype=np.float64)
    return CartesianPath(origin, origin + length * _PLANE_DIRECTIONS[plane], plane)


@dataclass(eq=False)
class TimedWaypointList:
    """Positions with target arrival timestamps along a straight path."""
    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.times.ndim != 1 or self.positions.shape != (self.times.size, 3):
            raise ValueError("waypoints need times (M,) and positions (M, 3)")
        if self.times.size < 2:
            raise ValueError("need at least two waypoints")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0.0):
            raise ValueError("timestamps must strictly increase from 0")
        # fixed-time-step lists may repeat a position over zero-speed
        # stretches of the profile, so progress is monotone, not strict
        arcs = self.arc_lengths
        if np.any(np.diff(arcs) < -1e-12):
            raise ValueError("waypoints must progress monotonically along the path")
        chord = self.positions[-1] - self.positions[0]
        offsets = self.positions - self.positions[0]
        cross = np.cross(offsets, chord)
        if np.any(np.linalg.norm(cross, axis=1) > 1e-9 * np.linalg.norm(chord)):
            raise ValueError("waypoints must be collinear")

    def __len__(self) -> int:
        return self.times.size

    @property
    def arc_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.positions - self.positions[0], axis=1)

    @property
    def duration(self) -> float:
        return float(self.times[-1])


# ---------------------------------------------------------------------------
# rescaling and distance integrals
# ---------------------------------------------------------------------------

def rescale_profile(profile: VelocityProfile, path_length: float) -> VelocityProfile:
    """Scale speeds so the covered distance equals path_length.

    Duration, sample count, and dt are untouched; only the magnitude changes.
    """
    if not path_length > 0.0:
        raise ValueError(f"path_length must be > 0, got {path_length}")
    integral = profile.integral()
    if integral <= 0.0:
        raise DegenerateProfileError("cannot rescale a zero-distance profile")
    return VelocityProfile(profile.samples * (path_length / integral),
                           profile.dt, profile.label)


def cumulative_distance(profile: VelocityProfile) -> np.ndarray:
    """Trapezoidal cumulative integral s(t) at the profile's own sampling."""
    v = profile.samples
    steps = profile.dt * 0.5 * (v[:-1] + v[1:])
    return np.concatenate([[0.0], np.cumsum(steps)])


def _refined_distance_curve(profile: VelocityProfile, refinement: int = TIME_REFINEMENT):
    """(t_fine, s_fine) on a grid refinement x finer than the profile's dt.

    The profile is treated as piecewise linear in time, so refining before
    the trapezoidal integral recovers the exact quadratic arc growth between
    samples to within the sub-step resolution.
    """
    n_fine = (profile.samples.size - 1) * refinement + 1
    t_fine = np.linspace(0.0, profile.duration, n_fine)
    v_fine = np.interp(t_fine, profile.times, profile.samples)
    dt_fine = profile.duration / (n_fine - 1)
    steps = dt_fine * 0.5 * (v_fine[:-1] + v_fine[1:])
    s_fine = np.concatenate([[0.0], np.cumsum(steps)])
    return t_fine, s_fine


def spatial_waypoints(profile: VelocityProfile, path: CartesianPath,
                      ds: float = 0.01) -> TimedWaypointList:
    """Fixed-spatial-step regime: waypoints every ds meters, times computed.

    The profile must already be rescaled to the path length. Arrival times
    solve s(t) = k*ds by monotone linear interpolation of the (refined)
    cumulative-distance curve; the exact endpoint is appended when the path
    length is not a multiple of ds.
    """
    length = path.length
    if not 0.0 < ds <= length:
        raise ValueError(f"ds must be in (0, path length], got {ds}")
    _check_rescaled(profile, length)

    k_max = int(math.floor(length / ds + 1e-9))
    arcs = np.arange(k_max + 1) * ds
    if length - arcs[-1] > 1e-9:
        arcs = np.append(arcs, length)
    else:
        arcs[-1] = length

    t_fine, s_fine = _refined_distance_curve(profile)
    times = np.interp(np.minimum(arcs, s_fine[-1]), s_fine, t_fine)
    times[0] = 0.0
    times[-1] = profile.duration
    positions = path.start[None, :] + arcs[:, None] * path.direction[None, :]
    return TimedWaypointList(times, positions)


def temporal_waypoints(profile: VelocityProfile, path: CartesianPath,
                       dt_step: float) -> TimedWaypointList:
    """Fixed-time-step regime: waypoints every dt_step seconds, distances computed.

    The profile must already be rescaled to the path length; the terminal
    point is appended when the duration is not a multiple of dt_step.
    """
    duration = profile.duration
    if not dt_step > 0.0:
        raise ValueError(f"dt_step must be > 0, got {dt_step}")
    if dt_step >= duration:
        raise ValueError(f"dt_step {dt_step} must be smaller than the "
                         f"profile duration {duration}")
    _check_rescaled(profile, path.length)

    k_max = int(math.floor(duration / dt_step + 1e-9))
    times = np.arange(k_max + 1) * dt_step
    if duration - times[-1] > 1e-9:
        times = np.append(times, duration)
    else:
        times[-1] = duration

    t_fine, s_fine = _refined_distance_curve(profile)
    arcs = np.interp(times, t_fine, s_fine)
    positions = path.start[None, :] + arcs[:, None] * path.direction[None, :]
    return TimedWaypointList(times, positions)


def _check_rescaled(profile: VelocityProfile, length: float) -> None:
    integral = profile.integral()
    if integral <= 0.0:
        raise DegenerateProfileError("profile covers zero distance")
    if abs(integral - length) > 5e-3 * length:
        raise ValueError(
            f"profile covers {integral:.4f} m but the path is {length:.4f} m; "
            f"rescale_profile first")


# ---------------------------------------------------------------------------
# actuator simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActuatorModel:
    """Parametric stand-in for a robot's velocity-tracking behavior."""
    v_max: float          # speed cap (m/s)
    a_max: float          # acceleration cap (m/s^2)
    tau: float            # first-order tracking time constant (s)
    control_dt: float = 0.005

    def __post_init__(self):
        for name in ("v_max", "a_max", "tau", "control_dt"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"actuator {name} must be > 0")
        if self.control_dt > 0.02:
            raise ConfigError(f"control_dt must be <= 0.02 s, got {self.control_dt}")


@dataclass(eq=False)
class ExecutionTrace:
    """Simulated end-effector positions and speeds sampled at control_dt.

    The speed column is the tangential speed implied by the logged positions
    (central differences, one-sided at the ends) — the same quantity
    executed_speed() recomputes — not the simulator's internal state.
    """
    times: np.ndarray
    positions: np.ndarray
    speeds: np.ndarray
    metadata: dict

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def lag_step(v: float, v_cmd: float, tau: float, dt: float) -> float:
    """Exact one-step response of dv/dt = (v_cmd - v)/tau under constant v_cmd."""
    return v_cmd + (v - v_cmd) * math.exp(-dt / tau)


def _speeds_from_positions(positions: np.ndarray, dt: float) -> np.ndarray:
    deltas = np.empty_like(positions)
    deltas[1:-1] = (positions[2:] - positions[:-2]) / (2.0 * dt)
    deltas[0] = (positions[1] - positions[0]) / dt
    deltas[-1] = (positions[-1] - positions[-2]) / dt
    return np.linalg.norm(deltas, axis=1)


def simulate_execution(waypoints: TimedWaypointList, actuator: ActuatorModel,
                       noise_seed: int | None = None, noise_sd: float = 0.0,
                       metadata: dict | None = None) -> ExecutionTrace:
    """Track the waypoint schedule with a lag/acceleration/speed-limited actuator.

    The commanded speed is piecewise constant between waypoints (arc step over
    time step). At each control step the speed follows the first-order lag,
    clamped to |dv| <= a_max*control_dt and v in [0, v_max]; position advances
    along the path direction by the trapezoid of the speed state. Optional
    zero-mean Gaussian noise on the commanded speed models repetition
    variability.
    """
    dt = actuator.control_dt
    seg_times = waypoints.times
    arcs = waypoints.arc_lengths
    v_cmds = np.diff(arcs) / np.diff(seg_times)
    duration = waypoints.duration
    direction = (waypoints.positions[-1] - waypoints.positions[0])
    direction = direction / np.linalg.norm(direction)

    rng = None
    if noise_sd > 0.0:
        rng = rng_for(0 if noise_seed is None else noise_seed, "exec-noise")

    n_steps = max(1, int(round(duration / dt)))
    times = np.arange(n_steps + 1) * dt
    positions = np.empty((n_steps + 1, 3))
    positions[0] = waypoints.positions[0]
    alpha = math.exp(-dt / actuator.tau)
    dv_max = actuator.a_max * dt

    v = 0.0
    arc = 0.0
    for k in range(1, n_steps + 1):
        t_prev = times[k - 1]
        seg = min(np.searchsorted(seg_times, t_prev, side="right") - 1,
                  v_cmds.size - 1)
        cmd = v_cmds[seg]
        if rng is not None:
            cmd += rng.normal(0.0, noise_sd)
        v_new = cmd + (v - cmd) * alpha
        dv = min(max(v_new - v, -dv_max), dv_max)
        v_new = min(max(v + dv, 0.0), actuator.v_max)
        arc += 0.5 * (v + v_new) * dt
        positions[k] = waypoints.positions[0] + arc * direction
        v = v_new

    speeds = _speeds_from_positions(positions, dt)
    return ExecutionTrace(times, positions, speeds, metadata or {})


def executed_speed(trace: ExecutionTrace) -> VelocityProfile:
    """Tangential speed of the trace: central differences of position."""
    if trace.times.size < 2:
        raise ValueError("trace needs at least 2 samples")
    speeds = _speeds_from_positions(trace.positions, trace.dt)
    return VelocityProfile(speeds, trace.dt)


# ---------------------------------------------------------------------------
# comparison metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExecutionMetrics:
    peak_planned: float
    peak_executed: float
    pearson_r: float
    peak_delay: float     # argmax-time difference, executed - planned (s)

    def __post_init__(self):
        if not -1.0 <= self.pearson_r <= 1.0:
            raise ValueError(f"pearson_r out of range: {self.pearson_r}")


def compare(planned: VelocityProfile, executed: VelocityProfile) -> ExecutionMetrics:
    """Score an executed speed profile against the plan.

    Correlation is computed on the executed profile's time base (the planned
    curve is linearly interpolated onto it).
    """
    planned_on_base = np.interp(executed.times, planned.times, planned.samples)
    r = pearson(planned_on_base, executed.samples)
    delay = (float(np.argmax(executed.samples)) * executed.dt
             - float(np.argmax(planned.samples)) * planned.dt)
    return ExecutionMetrics(
        peak_planned=planned.peak,
        peak_executed=executed.peak,
        pearson_r=r,
        peak_delay=delay,
    )


def summarize_metrics(metrics_list) -> dict:
    """Median and quartiles of each metric over repetitions."""
    out = {}
    for name in ("peak_planned", "peak_executed", "pearson_r", "peak_delay"):
        values = np.array([getattr(m, name) for m in metrics_list])
        out[name] = {
            "median": float(np.median(values)),
            "q1": float(np.quantile(values, 0.25)),
            "q3": float(np.quantile(values, 0.75)),
        }
    return out


def repeat_runs(profile: VelocityProfile, path: CartesianPath,
                actuator: ActuatorModel, n: int = 10, seed: int = 0,
                regime: str = "spatial", ds: float = 0.01,
                dt_step: float = 0.05, noise_sd: float = 0.005):
    """Simulate the same movement n times with per-repetition noise streams.

    Returns (metrics_list, summary). The profile is rescaled to the path
    in here; waypoints follow the requested regime.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    planned = rescale_profile(profile, path.length)
    if regime == "spatial":
        waypoints = spatial_waypoints(planned, path, ds)
    elif regime == "temporal":
        waypoints = temporal_waypoints(planned, path, dt_step)
    else:
        raise ValueError(f"unknown regime {regime!r} (use 'spatial' or 'temporal')")

    metrics = []
    for rep in range(n):
        rep_seed = int(rng_for(seed, "repetition", rep).integers(0, 2**63 - 1))
        trace = simulate_execution(waypoints, actuator, noise_seed=rep_seed,
                                   noise_sd=noise_sd,
                                   metadata={"repetition": rep})
        metrics.append(compare(planned, executed_speed(trace)))
    return metrics, summarize_metrics(metrics)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExecutionPreset:
    """Named actuator + discretization regime + per-plane path lengths.

    The baxter-like preset uses the fixed-spatial-step regime on 0.60 m paths
    (all planes alike); the icub-like preset uses the fixed-time-step regime
    on plane-dependent ~0.30 m paths. Only v_max comes from a published
    figure; the remaining dynamics values are calibration choices.
    """
    name: str
    actuator: ActuatorModel
    regime: str
    ds: float = 0.01
    dt_step: float = 0.05
    path_lengths: dict | None = None
    noise_sd: float = 0.005

    def path_length_for(self, plane: Plane) -> float:
        return self.path_lengths[Plane(plane).value]


def builtin_presets() -> dict[str, ExecutionPreset]:
    baxter = ExecutionPreset(
        name="baxter-like",
        actuator=ActuatorModel(v_max=1.0, a_max=1.5, tau=0.05),
        regime="spatial",
        path_lengths={"frontal": 0.60, "sagittal": 0.60, "oblique": 0.60},
    )
    icub = ExecutionPreset(
        name="icub-like",
        actuator=ActuatorModel(v_max=0.6, a_max=3.0, tau=0.04),
        regime="temporal",
        path_lengths={"frontal": 0.32, "sagittal": 0.26, "oblique": 0.34},
    )
    # the ideal preset exists to show the simulator's faithful limit; the
    # 0.02 s command grid keeps discretization out of the way
    ideal = ExecutionPreset(
        name="ideal",
        actuator=ActuatorModel(v_max=1e9, a_max=1e9, tau=1e-4),
        regime="temporal",
        dt_step=0.02,
        path_lengths={"frontal": 0.60, "sagittal": 0.60, "oblique": 0.60},
        noise_sd=0.0,
    )
    return {p.name: p for p in (baxter, icub, ideal)}


def save_presets(presets: dict[str, ExecutionPreset], path) -> None:
    """Preset JSON with all four actuator parameters spelled out."""
    payload = {}
    for name, preset in presets.items():
        payload[name] = {
            "actuator": asdict(preset.actuator),
            "regime": preset.regime,
            "ds": preset.ds,
            "dt_step": preset.dt_step,
            "path_lengths": preset.path_lengths,
            "noise_sd": preset.noise_sd,
        }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_presets(path) -> dict[str, ExecutionPreset]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    presets = {}
    try:
        for name, entry in payload.items():
            act = entry["actuator"]
            presets[name] = ExecutionPreset(
                name=name,
                actuator=ActuatorModel(v_max=float(act["v_max"]),
                                       a_max=float(act["a_max"]),
                                       tau=float(act["tau"]),
                                       control_dt=float(act["control_dt"])),
                regime=entry["regime"],
                ds=float(entry.get("ds", 0.01)),
                dt_step=float(entry.get("dt_step", 0.05)),
                path_lengths=entry["path_lengths"],
                noise_sd=float(entry.get("noise_sd", 0.005)),
            )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed preset file ({exc})") from exc
    return presets
