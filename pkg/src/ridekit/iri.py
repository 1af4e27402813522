"""International Roughness Index: reference quarter car and ride-quality bands.

The index accumulates the absolute suspension rate ``|z_s' - z_u'|`` of a
fixed, mass-normalized quarter car driven over an elevation profile at a
reference speed, divided by the traversed length, reported in m/km.  Speed
dependent ride-quality thresholds map index values onto the classes VG (very
good) through P (poor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .integrators import half_grid_input, rk4_lti
from .signals import SpaceSeries

__all__ = [
    "GoldenCarParams",
    "IriResult",
    "RIDE_QUALITY_LABELS",
    "IRI_THRESHOLD_SPEEDS_KMH",
    "IRI_THRESHOLDS",
    "STANDARD_SPEED_MS",
    "compute_iri",
    "classify_iri",
    "iri_severity",
    "interpolate_iri",
]

#: Standard measurement speed: 80 km/h.
STANDARD_SPEED_MS = 80.0 / 3.6

#: Length over which the initial state is matched to the mean profile slope [m].
DEFAULT_INIT_RAMP_M = 11.0

#: Ride quality labels in decreasing quality (increasing severity).
RIDE_QUALITY_LABELS = ("VG", "G", "F", "M", "P")

#: Threshold table columns: speed [km/h] -> upper bounds of VG, G, F, M [m/km]
#: (P is everything above).  Magnitudes grow as speed drops.
IRI_THRESHOLD_SPEEDS_KMH = (120, 100, 80, 70, 60, 50, 40, 30, 20, 10)
IRI_THRESHOLDS = {
    120: (0.95, 1.49, 1.89, 2.70),
    100: (1.14, 1.79, 2.27, 3.24),
    80: (1.43, 2.24, 2.84, 4.05),
    70: (1.63, 2.57, 3.25, 4.63),
    60: (1.90, 2.99, 3.79, 5.40),
    50: (2.28, 3.59, 4.54, 6.25),
    40: (2.86, 4.49, 5.69, 8.08),
    30: (3.80, 5.99, 7.59, 10.80),
    20: (5.72, 8.99, 11.39, 16.16),
    10: (11.44, 17.99, 22.79, 32.32),
}


@dataclass(frozen=True)
class GoldenCarParams:
    """Mass-normalized reference quarter car.

    ``c`` = suspension damping / sprung mass [1/s], ``k1`` = tire spring /
    sprung mass [1/s^2], ``k2`` = suspension spring / sprung mass [1/s^2],
    ``mu`` = unsprung / sprung mass ratio.  Defaults are the fixed reference
    constants; override only for sensitivity studies.
    """

    c: float = 6.00
    k1: float = 653.00
    k2: float = 63.30
    mu: float = 0.15

    def __post_init__(self):
        if min(self.c, self.k1, self.k2, self.mu) <= 0:
            raise InvalidInput("golden-car parameters must be > 0")
        if np.any(np.linalg.eigvals(self.matrix_a()).real >= 0):
            raise InvalidInput("golden-car system is not asymptotically stable")

    def matrix_a(self) -> np.ndarray:
        """System matrix for state [z_s, z_s', z_u, z_u']."""
        return np.array(
            [
                [0.0, 1.0, 0.0, 0.0],
                [-self.k2, -self.c, self.k2, self.c],
                [0.0, 0.0, 0.0, 1.0],
                [self.k2 / self.mu, self.c / self.mu, -(self.k1 + self.k2) / self.mu, -self.c / self.mu],
            ]
        )

    def vector_b(self) -> np.ndarray:
        """Input column driving z_u'' with the road elevation."""
        return np.array([[0.0], [0.0], [0.0], [self.k1 / self.mu]])


@dataclass(frozen=True)
class IriResult:
    """Roughness of one segment.

    ``suspension_rate`` holds the |z_s' - z_u'| samples inside the segment so
    position-resolved plots can be produced without re-integrating.
    """

    iri: float
    segment_length: float
    speed: float
    s_start: float
    suspension_rate: np.ndarray

    def __post_init__(self):
        if self.iri < 0 or self.segment_length <= 0:
            raise InvalidInput("iri must be >= 0 and segment_length > 0")


def compute_iri(
    profile: np.ndarray,
    step: float,
    speed: float = STANDARD_SPEED_MS,
    segment_length: float = 100.0,
    params: GoldenCarParams | None = None,
    init_ramp: float = DEFAULT_INIT_RAMP_M,
) -> list[IriResult]:
    """Per-segment roughness index of an elevation profile.

    The state equation is integrated once over the whole profile with RK4 at
    time step ``step / speed``; the absolute suspension rate is accumulated per
    contiguous segment of ``segment_length`` meters (a trailing partial
    segment is dropped).  The initial state sits on the initial elevation and
    moves with the mean slope of the first ``init_ramp`` meters, which keeps
    the index exactly invariant under a constant profile offset.

    ``speed`` is in m/s; the standard index is defined at 80 km/h.
    """
    params = params or GoldenCarParams()
    profile = np.asarray(profile, dtype=float)
    if profile.ndim != 1 or len(profile) < 2:
        raise InvalidInput("profile must hold at least two samples")
    if not np.all(np.isfinite(profile)):
        raise InvalidInput("profile contains non-finite samples")
    if step <= 0 or step > 0.25:
        raise InvalidInput("profile step must be in (0, 0.25] m")
    if speed <= 0:
        raise InvalidInput("speed must be > 0")
    length = (len(profile) - 1) * step
    if length < segment_length:
        raise InvalidInput(
            f"profile covers {length:.1f} m, shorter than one {segment_length:.1f} m segment"
        )

    dt = step / speed
    i_ramp = min(int(round(init_ramp / step)), len(profile) - 1)
    if i_ramp < 1:
        i_ramp = 1
    slope = (profile[i_ramp] - profile[0]) / (i_ramp * step)
    x0 = np.array([profile[0], slope * speed, profile[0], slope * speed])
    states = rk4_lti(params.matrix_a(), params.vector_b(), half_grid_input(profile), dt, x0)
    rate = np.abs(states[:, 1] - states[:, 3])

    per_segment = int(round(segment_length / step))
    if per_segment < 1:
        raise InvalidInput("segment_length must cover at least one profile step")
    n_segments = int(np.floor((len(profile) - 1) / per_segment + 1e-9))
    results = []
    for k in range(n_segments):
        i0 = k * per_segment
        i1 = i0 + per_segment
        seg_rate = rate[i0 : i1 + 1]
        accumulated = float(np.trapezoid(seg_rate, dx=dt))
        seg_len = per_segment * step
        results.append(
            IriResult(
                iri=1000.0 * accumulated / seg_len,
                segment_length=seg_len,
                speed=speed,
                s_start=i0 * step,
                suspension_rate=seg_rate,
            )
        )
    return results


def classify_iri(iri: float, speed_kmh: float) -> str:
    """Ride-quality label for an index value at a given travel speed [km/h].

    Thresholds come from the column whose tabulated speed is nearest to the
    query (ties resolve to the lower speed); a value sitting exactly on a band
    boundary belongs to the less severe band.
    """
    if iri < 0:
        raise InvalidInput("iri must be >= 0")
    if not (0 < speed_kmh <= 130):
        raise InvalidInput("speed must be in (0, 130] km/h")
    best = min(IRI_THRESHOLD_SPEEDS_KMH, key=lambda col: (abs(col - speed_kmh), col))
    bounds = IRI_THRESHOLDS[best]
    for label, upper in zip(RIDE_QUALITY_LABELS, bounds):
        if iri <= upper:
            return label
    return "P"


def iri_severity(label: str) -> int:
    """Index of a ride-quality label in severity order (VG lowest)."""
    return RIDE_QUALITY_LABELS.index(label)


def interpolate_iri(stations: np.ndarray, values: np.ndarray, ds: float = 0.1) -> SpaceSeries:
    """Linearly interpolate sparse index samples onto a uniform grid.

    Endpoint samples are reproduced exactly; at least two samples are needed.
    """
    stations = np.asarray(stations, dtype=float)
    values = np.asarray(values, dtype=float)
    if stations.ndim != 1 or stations.shape != values.shape:
        raise InvalidInput("stations and values must be equal-length 1-D arrays")
    if len(stations) < 2:
        raise InvalidInput("need at least two index samples to interpolate")
    if np.any(np.diff(stations) <= 0):
        raise InvalidInput("stations must be strictly increasing")
    n = int(np.floor((stations[-1] - stations[0]) / ds + 1e-9)) + 1
    grid = stations[0] + ds * np.arange(n)
    return SpaceSeries(s0=float(stations[0]), ds=ds, values=np.interp(grid, stations, values))
