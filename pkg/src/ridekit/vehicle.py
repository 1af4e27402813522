"""Lumped vehicle simulator: four quarter-car corners on a road grid.

One :func:`simulate` call produces every channel of a
:class:`~ridekit.signals.VehicleResponse`: longitudinal speed tracking through
a rate-limited first-order controller, lateral acceleration from reference-line
curvature under a friction cap, and vertical dynamics from four independently
excited quarter-car corners combined into heave, roll rate and pitch rate by
rigid-body kinematics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInput, NumericFailure
from .integrators import half_grid_input, rk4_lti
from .road import RoadGrid, SmoothingParams, wheel_track_profile
from .signals import TimeSeries, VehicleResponse

__all__ = [
    "GRAVITY",
    "QuarterCarParams",
    "VehicleGeometry",
    "SpeedProfile",
    "Scenario",
    "CornerResponse",
    "default_car",
    "default_geometry",
    "corner_system",
    "corner_response",
    "simulate",
]

GRAVITY = 9.80665  # m/s^2

#: Speed controller time constant [s] and acceleration authority [m/s^2 per unit friction].
_CONTROLLER_TAU = 0.5
_ACCEL_AUTHORITY = 4.0

#: Contiguous seconds of lateral-friction saturation that flag a run.
_OFF_ROAD_SECONDS = 1.0


@dataclass(frozen=True)
class QuarterCarParams:
    """Dimensional parameters of one vehicle corner.

    ``m_s`` is the sprung mass carried by the corner, ``m_u`` the unsprung
    mass; ``k_s``/``c_s`` the suspension spring and damper, ``k_t``/``d_t``
    the tire radial spring and damper, ``mu_tire`` the tire friction scale.
    Dampers may be zero; masses and springs must be positive.
    """

    m_s: float
    m_u: float
    k_s: float
    c_s: float
    k_t: float
    d_t: float
    mu_tire: float = 1.0

    def __post_init__(self):
        for name in ("m_s", "m_u", "k_s", "k_t"):
            if not (getattr(self, name) > 0):
                raise InvalidInput(f"{name} must be > 0")
        if self.c_s < 0 or self.d_t < 0:
            raise InvalidInput("damping rates must be >= 0")
        if not (0 < self.mu_tire <= 2):
            raise InvalidInput("mu_tire must be in (0, 2]")


def default_car() -> QuarterCarParams:
    """Per-corner parameters of the default passenger car.

    Calibratable quantities sit at the midpoints of their optimization bounds.
    """
    return QuarterCarParams(
        m_s=350.0, m_u=40.0, k_s=27500.0, c_s=3000.0, k_t=325000.0, d_t=5500.0, mu_tire=1.05
    )


@dataclass(frozen=True)
class VehicleGeometry:
    """Planar geometry used to turn corner responses into body rates.

    Only wheelbase and track enter the kinematic mapping; center-of-gravity
    height and the inertias are carried for reporting and parameter studies.
    """

    wheelbase: float = 2.7
    track_width: float = 1.6
    cg_height: float = 0.55
    roll_inertia: float = 600.0
    pitch_inertia: float = 2200.0

    def __post_init__(self):
        for name in ("wheelbase", "track_width", "cg_height", "roll_inertia", "pitch_inertia"):
            if not (getattr(self, name) > 0):
                raise InvalidInput(f"{name} must be > 0")


def default_geometry() -> VehicleGeometry:
    return VehicleGeometry()


@dataclass(frozen=True)
class SpeedProfile:
    """Piecewise-linear target speed [m/s] over arc-length position [m]."""

    breakpoints: np.ndarray
    speeds: np.ndarray

    def __post_init__(self):
        bp = np.atleast_1d(np.asarray(self.breakpoints, dtype=float))
        v = np.atleast_1d(np.asarray(self.speeds, dtype=float))
        if bp.shape != v.shape or bp.size == 0:
            raise InvalidInput("breakpoints and speeds must be equal-length 1-D arrays")
        if bp.size > 1 and np.any(np.diff(bp) <= 0):
            raise InvalidInput("breakpoints must be strictly increasing")
        if np.any(v <= 0):
            raise InvalidInput("target speed must be > 0 everywhere")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "speeds", v)

    @classmethod
    def constant(cls, v: float) -> "SpeedProfile":
        return cls(breakpoints=np.array([0.0]), speeds=np.array([float(v)]))

    def at(self, s) -> np.ndarray:
        return np.interp(s, self.breakpoints, self.speeds)


@dataclass(frozen=True)
class Scenario:
    """One simulation setup: road, target speed, and the stochastic inputs.

    ``v_dev`` shifts the whole speed profile, ``l_p`` offsets the vehicle from
    the lane center, ``mu_rs`` scales the available road friction (weather
    proxy).  ``smoothing`` is applied when extracting wheel-track profiles.
    """

    road: RoadGrid
    target_speed: SpeedProfile
    v_dev: float = 0.0
    l_p: float = 0.0
    mu_rs: float = 1.0
    lane_half_width: float = 1.5
    smoothing: SmoothingParams = field(default_factory=SmoothingParams)

    def __post_init__(self):
        if isinstance(self.target_speed, (int, float)):
            object.__setattr__(self, "target_speed", SpeedProfile.constant(self.target_speed))
        if abs(self.l_p) > self.lane_half_width:
            raise InvalidInput(f"|l_p| must be <= lane half width {self.lane_half_width}")
        if not (0 < self.mu_rs <= 1.5):
            raise InvalidInput("mu_rs must be in (0, 1.5]")

    def with_inputs(self, v_dev: float, l_p: float, mu_rs: float) -> "Scenario":
        return replace(self, v_dev=float(v_dev), l_p=float(l_p), mu_rs=float(mu_rs))


def corner_system(params: QuarterCarParams) -> tuple[np.ndarray, np.ndarray]:
    """State-space of one corner for state [z_s, z_s', z_u, z_u'].

    The input vector is [h, h'] (road elevation and its time derivative under
    the wheel); the tire damper couples the elevation rate into the unsprung
    mass.
    """
    a = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [-params.k_s / params.m_s, -params.c_s / params.m_s, params.k_s / params.m_s, params.c_s / params.m_s],
            [0.0, 0.0, 0.0, 1.0],
            [
                params.k_s / params.m_u,
                params.c_s / params.m_u,
                -(params.k_s + params.k_t) / params.m_u,
                -(params.c_s + params.d_t) / params.m_u,
            ],
        ]
    )
    b = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [params.k_t / params.m_u, params.d_t / params.m_u]])
    return a, b


@dataclass(frozen=True)
class CornerResponse:
    """Sprung-mass displacement, velocity, and acceleration of one corner."""

    displacement: TimeSeries
    velocity: TimeSeries
    acceleration: TimeSeries


def _integrate_corner(a, b, h_half: np.ndarray, dt: float) -> np.ndarray:
    """Integrate one corner for elevation input on the half grid."""
    hdot = np.gradient(h_half, dt / 2.0)
    u = np.column_stack([h_half, hdot])
    slope0 = hdot[0]
    x0 = np.array([h_half[0], slope0, h_half[0], slope0])
    return rk4_lti(a, b, u, dt, x0)


def corner_response(
    profile: np.ndarray,
    step: float,
    speed: float,
    params: QuarterCarParams,
    dt: float = 1e-3,
) -> CornerResponse:
    """Drive one corner over an elevation profile at constant speed.

    The corner starts in static equilibrium on the initial elevation, rolling
    along the initial slope, so a profile that begins smoothly produces no
    startup transient.
    """
    if dt > 0.005 or dt <= 0:
        raise InvalidInput("dt must be in (0, 0.005] s")
    if speed <= 0:
        raise InvalidInput("speed must be > 0")
    profile = np.asarray(profile, dtype=float)
    if profile.ndim != 1 or len(profile) < 2:
        raise InvalidInput("profile must hold at least two samples")
    if not np.all(np.isfinite(profile)):
        raise InvalidInput("profile contains non-finite samples")
    length = (len(profile) - 1) * step
    n_steps = int(np.floor(length / (speed * dt)))
    if n_steps < 1:
        raise InvalidInput("profile too short for one integration step")
    s_half = speed * (dt / 2.0) * np.arange(2 * n_steps + 1)
    grid_s = step * np.arange(len(profile))
    h_half = np.interp(s_half, grid_s, profile)
    a, b = corner_system(params)
    states = _integrate_corner(a, b, h_half, dt)
    accel = states @ a[1]
    return CornerResponse(
        displacement=TimeSeries(0.0, dt, states[:, 0], "m"),
        velocity=TimeSeries(0.0, dt, states[:, 1], "m/s"),
        acceleration=TimeSeries(0.0, dt, accel, "m/s^2"),
    )


def _track_speed(
    scenario: Scenario, a_lim: float, dt: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate the longitudinal controller; returns (v, a_x, s) on the step grid.

    The controller commands ``(target(s) + v_dev - v) / tau`` clipped to the
    acceleration authority; position advances by trapezoidal integration, so s
    is strictly increasing while v stays positive.
    """
    profile = scenario.target_speed
    bp = profile.breakpoints
    vs = profile.speeds
    n_bp = len(bp)
    s_start = float(scenario.road.stations[0])
    s_end = float(scenario.road.stations[-1])
    tau = _CONTROLLER_TAU
    v_dev = scenario.v_dev

    j = 0

    def target(s: float) -> float:
        nonlocal j
        if n_bp == 1:
            return vs[0]
        while j < n_bp - 2 and s > bp[j + 1]:
            j += 1
        if s <= bp[0]:
            return vs[0]
        if s >= bp[-1]:
            return vs[-1]
        w = (s - bp[j]) / (bp[j + 1] - bp[j])
        return vs[j] + w * (vs[j + 1] - vs[j])

    v = target(s_start) + v_dev
    if v <= 0.1:
        raise NumericFailure("commanded speed is non-positive at the start of the run")
    s = s_start
    max_steps = int(np.ceil((s_end - s_start) / (0.05 * dt))) + 2
    vv = [v]
    aa = []
    ss = [s]
    for _ in range(max_steps):
        v_cmd = target(s) + v_dev
        if v_cmd <= 0.1:
            raise NumericFailure("commanded speed dropped to non-positive values")
        acc = (v_cmd - v) / tau
        if acc > a_lim:
            acc = a_lim
        elif acc < -a_lim:
            acc = -a_lim
        v_next = v + dt * acc
        s = s + dt * 0.5 * (v + v_next)
        v = v_next
        vv.append(v)
        aa.append(acc)
        ss.append(s)
        if s >= s_end:
            break
    else:
        raise NumericFailure("speed integration stalled before reaching the track end")
    aa.append(aa[-1])
    return np.asarray(vv), np.asarray(aa), np.asarray(ss)


def simulate(
    scenario: Scenario,
    params: QuarterCarParams,
    geometry: VehicleGeometry,
    dt: float = 1e-3,
    rear_params: QuarterCarParams | None = None,
) -> VehicleResponse:
    """Run the lumped vehicle over the scenario's road.

    ``params`` parameterizes the front corners; ``rear_params`` (default: same
    as front) the rear corners, assuming left/right symmetry.  The available
    friction is ``mu_rs * mu_tire``; it caps both the controller's acceleration
    authority and the lateral acceleration, and sustained lateral saturation
    longer than one second flags the run with ``"off-road risk"``.
    """
    if not (0 < dt <= 0.005):
        raise InvalidInput("dt must be in (0, 0.005] s (tire spring stability)")
    rear = rear_params if rear_params is not None else params
    grid = scenario.road

    mu_eff = scenario.mu_rs * params.mu_tire
    a_lim = _ACCEL_AUTHORITY * mu_eff
    s_end = float(grid.stations[-1])
    s_start = float(grid.stations[0])

    v_arr, ax_arr, s_arr = _track_speed(scenario, a_lim, dt)

    # --- lateral / yaw ----------------------------------------------------------
    kappa = grid.ref_line.curvature_at(s_arr)
    ay_demand = v_arr * v_arr * kappa
    ay_cap = mu_eff * GRAVITY
    a_y = np.clip(ay_demand, -ay_cap, ay_cap)
    warnings: tuple[str, ...] = ()
    saturated = np.abs(ay_demand) > ay_cap
    if saturated.any():
        edges = np.diff(saturated.astype(int))
        starts = np.flatnonzero(edges == 1) + 1
        ends = np.flatnonzero(edges == -1) + 1
        if saturated[0]:
            starts = np.concatenate([[0], starts])
        if saturated[-1]:
            ends = np.concatenate([ends, [len(saturated)]])
        if np.max(ends - starts) * dt > _OFF_ROAD_SECONDS:
            warnings = ("off-road risk",)
    psi_rate = np.degrees(v_arr * kappa)

    # --- vertical: four corners --------------------------------------------------
    offsets = (scenario.l_p + geometry.track_width / 2.0, scenario.l_p - geometry.track_width / 2.0)
    prof_step = grid.grid_step
    prof_s = grid.stations[0] + prof_step * np.arange(
        int(np.floor((s_end - s_start) / prof_step + 1e-9)) + 1
    )
    left = wheel_track_profile(grid, offsets[0], scenario.smoothing, prof_step)
    right = wheel_track_profile(grid, offsets[1], scenario.smoothing, prof_step)
    same_sides = np.array_equal(left, right)

    s_half = half_grid_input(s_arr)
    s_rear_half = s_half - geometry.wheelbase

    front_sys = corner_system(params)
    rear_sys = corner_system(rear)

    def corner(profile_values: np.ndarray, s_points: np.ndarray, system) -> np.ndarray:
        h_half = np.interp(s_points, prof_s, profile_values)
        return _integrate_corner(system[0], system[1], h_half, dt)

    fl = corner(left, s_half, front_sys)
    rl = corner(left, s_rear_half, rear_sys)
    if same_sides:
        fr, rr = fl, rl
    else:
        fr = corner(right, s_half, front_sys)
        rr = corner(right, s_rear_half, rear_sys)

    a_front, _ = front_sys
    a_rear, _ = rear_sys
    az_corners = (fl @ a_front[1], fr @ a_front[1], rl @ a_rear[1], rr @ a_rear[1])
    a_z = sum(az_corners) / 4.0

    zdot_front = 0.5 * (fl[:, 1] + fr[:, 1])
    zdot_rear = 0.5 * (rl[:, 1] + rr[:, 1])
    zdot_left = 0.5 * (fl[:, 1] + rl[:, 1])
    zdot_right = 0.5 * (fr[:, 1] + rr[:, 1])
    theta_rate = np.degrees((zdot_front - zdot_rear) / geometry.wheelbase)
    phi_rate = np.degrees((zdot_left - zdot_right) / geometry.track_width)

    def series(values: np.ndarray, unit: str) -> TimeSeries:
        return TimeSeries(0.0, dt, values, unit)

    return VehicleResponse(
        v_x=series(v_arr, "m/s"),
        a_x=series(ax_arr, "m/s^2"),
        a_y=series(a_y, "m/s^2"),
        a_z=series(a_z, "m/s^2"),
        phi_rate=series(phi_rate, "deg/s"),
        theta_rate=series(theta_rate, "deg/s"),
        psi_rate=series(psi_rate, "deg/s"),
        s=series(s_arr, "m"),
        warnings=warnings,
    )
