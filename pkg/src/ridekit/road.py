"""Road surface model: reference line, regular elevation grid, smoothing-spline
queries, and a synthetic roughness generator.

The grid format is a deliberately small text format (see :func:`load_grid`)
carrying the same semantics as curved-regular-grid road files: a reference line
sampled at uniform stations plus elevation columns at fixed lateral offsets.
"""

from __future__ import annotations

from dataclasses import dataclass
import io

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline, make_smoothing_spline
from scipy.ndimage import median_filter, uniform_filter

from .errors import DomainBoundsError, GridParseError, InvalidInput

__all__ = [
    "ReferenceLine",
    "RoadGrid",
    "SmoothingParams",
    "SurfaceInterpolator",
    "ROUGHNESS_PSD_SCALE",
    "REFERENCE_WAVENUMBER",
    "load_grid",
    "save_grid",
    "elevation_at",
    "synth_profile",
    "wheel_track_profile",
    "straight_grid",
]

#: One-sided displacement PSD magnitude at the reference wavenumber, per
#: roughness class [m^3].  Each class doubles the profile amplitude of the
#: previous one.
ROUGHNESS_PSD_SCALE = {"A": 1e-6, "B": 4e-6, "C": 16e-6, "D": 64e-6, "E": 256e-6}

#: Reference spatial frequency n0 [cycles/m] of the PSD ladder.
REFERENCE_WAVENUMBER = 0.1

#: Hard bound on plausible elevations relative to the reference line [m].
_ELEVATION_BOUND = 10.0


@dataclass(frozen=True)
class ReferenceLine:
    """Track reference line sampled at strictly increasing stations.

    ``headings`` are in radians, ``slope`` in percent, ``curvature`` in 1/m.
    ``xy`` holds planar coordinates integrated from the headings.
    """

    stations: np.ndarray
    headings: np.ndarray
    xy: np.ndarray
    elevation: np.ndarray
    slope: np.ndarray
    curvature: np.ndarray

    def __post_init__(self):
        stations = np.asarray(self.stations, dtype=float)
        if stations.ndim != 1 or len(stations) < 2:
            raise InvalidInput("need at least two stations")
        if np.any(np.diff(stations) <= 0):
            raise InvalidInput("stations must be strictly increasing")
        object.__setattr__(self, "stations", stations)
        for name in ("headings", "elevation", "slope", "curvature"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != stations.shape:
                raise InvalidInput(f"{name} must match stations in length")
            object.__setattr__(self, name, arr)
        xy = np.asarray(self.xy, dtype=float)
        if xy.shape != (len(stations), 2):
            raise InvalidInput("xy must have shape (n_stations, 2)")
        object.__setattr__(self, "xy", xy)

    @classmethod
    def from_geometry(cls, stations, headings, elevation) -> "ReferenceLine":
        """Build a reference line from stations, headings and elevations.

        Planar coordinates come from trapezoidal integration of the heading
        field; slope and curvature are central-difference derivatives.
        """
        stations = np.asarray(stations, dtype=float)
        headings = np.asarray(headings, dtype=float)
        elevation = np.asarray(elevation, dtype=float)
        ds = np.diff(stations)
        x = np.concatenate([[0.0], np.cumsum(ds * 0.5 * (np.cos(headings[:-1]) + np.cos(headings[1:])))])
        y = np.concatenate([[0.0], np.cumsum(ds * 0.5 * (np.sin(headings[:-1]) + np.sin(headings[1:])))])
        slope = np.gradient(elevation, stations) * 100.0
        curvature = np.gradient(headings, stations)
        return cls(
            stations=stations,
            headings=headings,
            xy=np.column_stack([x, y]),
            elevation=elevation,
            slope=slope,
            curvature=curvature,
        )

    def curvature_at(self, s) -> np.ndarray:
        return np.interp(s, self.stations, self.curvature)


@dataclass(frozen=True)
class SmoothingParams:
    """Smoothing penalties on second-derivative energy; 0 = pure interpolation.

    ``lambda_x`` smooths along stations, ``lambda_y`` across lateral offsets,
    ``lambda_z`` is applied to extracted elevation profiles (the 1-D signal fed
    to the roughness and vehicle models).
    """

    lambda_x: float = 0.0
    lambda_y: float = 0.0
    lambda_z: float = 0.0

    def __post_init__(self):
        if self.lambda_x < 0 or self.lambda_y < 0 or self.lambda_z < 0:
            raise InvalidInput("smoothing penalties must be >= 0")


@dataclass(frozen=True)
class RoadGrid:
    """Dense elevation grid attached to a reference line.

    ``elevations`` has one row per station and one column per lateral offset.
    ``outliers_replaced`` reports how many cells the load-time cleaning step
    replaced with the local median.
    """

    ref_line: ReferenceLine
    lateral_offsets: np.ndarray
    elevations: np.ndarray
    grid_step: float
    outliers_replaced: int = 0

    def __post_init__(self):
        if not (self.grid_step > 0):
            raise InvalidInput("grid_step must be > 0")
        offsets = np.asarray(self.lateral_offsets, dtype=float)
        if offsets.ndim != 1 or offsets.size == 0:
            raise InvalidInput("lateral_offsets must be a non-empty 1-D array")
        if offsets.size > 1 and np.any(np.diff(offsets) <= 0):
            raise InvalidInput("lateral_offsets must be strictly increasing")
        elev = np.asarray(self.elevations, dtype=float)
        if elev.shape != (len(self.ref_line.stations), len(offsets)):
            raise InvalidInput("elevations must have shape (n_stations, n_offsets)")
        if not np.all(np.isfinite(elev)):
            raise InvalidInput("elevation grid has missing or non-finite cells")
        if np.any(np.abs(elev - self.ref_line.elevation[:, None]) > _ELEVATION_BOUND):
            raise InvalidInput(f"elevations deviate more than {_ELEVATION_BOUND} m from the reference line")
        object.__setattr__(self, "lateral_offsets", offsets)
        object.__setattr__(self, "elevations", elev)

    @property
    def stations(self) -> np.ndarray:
        return self.ref_line.stations

    @property
    def length(self) -> float:
        return float(self.stations[-1] - self.stations[0])


# ---------------------------------------------------------------------------
# Grid file format
# ---------------------------------------------------------------------------

_HEADER_KEYS = ("station_step", "offset_start", "offset_step", "n_offsets")


def save_grid(path, grid: RoadGrid) -> None:
    """Write a grid in the plain-text format understood by :func:`load_grid`.

    Floats are written with ``repr`` so a save/load round trip is exact.
    """
    step = float(grid.stations[1] - grid.stations[0])
    offsets = grid.lateral_offsets
    offset_step = float(offsets[1] - offsets[0]) if len(offsets) > 1 else 1.0
    buf = io.StringIO()
    buf.write(f"station_step={step!r}\n")
    buf.write(f"offset_start={float(offsets[0])!r}\n")
    buf.write(f"offset_step={float(offset_step)!r}\n")
    buf.write(f"n_offsets={len(offsets)}\n")
    for i, s in enumerate(grid.stations):
        row = [repr(float(s)), repr(float(grid.ref_line.headings[i])), repr(float(grid.ref_line.elevation[i]))]
        row += [repr(float(z)) for z in grid.elevations[i]]
        buf.write(" ".join(row) + "\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def load_grid(path, clean: bool = True) -> RoadGrid:
    """Parse a grid file; optionally replace outlier cells by the local median.

    A cell is an outlier when its deviation from the 3x3 neighborhood median
    exceeds five robust standard deviations (and one micrometer absolutely),
    or when it violates the +-10 m plausibility bound around the reference
    elevation.  The replacement count is reported on the returned grid.
    """
    header: dict[str, float] = {}
    rows: list[list[float]] = []
    row_lines: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    lineno = 0
    n_offsets = None
    for raw in lines:
        lineno += 1
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if n_offsets is None:
            if "=" not in line:
                raise GridParseError("data before complete header", line=lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _HEADER_KEYS:
                raise GridParseError(f"unknown header {key!r}", line=lineno)
            try:
                header[key] = float(value)
            except ValueError:
                raise GridParseError(f"non-numeric header value for {key!r}", line=lineno) from None
            if len(header) == len(_HEADER_KEYS):
                n_offsets = int(header["n_offsets"])
                if n_offsets < 1:
                    raise GridParseError("n_offsets must be >= 1", line=lineno)
            continue
        tokens = line.split()
        if len(tokens) != 3 + n_offsets:
            raise GridParseError(f"expected {3 + n_offsets} fields, got {len(tokens)}", line=lineno)
        try:
            rows.append([float(tok) for tok in tokens])
        except ValueError:
            raise GridParseError("non-numeric cell", line=lineno) from None
        row_lines.append(lineno)
    if n_offsets is None:
        raise GridParseError("missing header", line=lineno or 1)
    if len(rows) < 2:
        raise GridParseError("need at least two stations", line=lineno)
    data = np.asarray(rows, dtype=float)
    stations = data[:, 0]
    if np.any(np.diff(stations) <= 0):
        bad = int(np.flatnonzero(np.diff(stations) <= 0)[0])
        raise GridParseError("stations not strictly increasing", line=row_lines[bad + 1])
    step = header["station_step"]
    if np.max(np.abs(np.diff(stations) - step)) > 1e-6 * step:
        raise GridParseError(f"station spacing disagrees with station_step={step}")
    offsets = header["offset_start"] + header["offset_step"] * np.arange(n_offsets)
    elevations = data[:, 3:]
    replaced = 0
    if clean:
        elevations, replaced = _clean_grid(elevations, data[:, 2])
    ref = ReferenceLine.from_geometry(stations, data[:, 1], data[:, 2])
    return RoadGrid(
        ref_line=ref,
        lateral_offsets=offsets,
        elevations=elevations,
        grid_step=float(step),
        outliers_replaced=replaced,
    )


def _clean_grid(elevations: np.ndarray, ref_elevation: np.ndarray) -> tuple[np.ndarray, int]:
    med = median_filter(elevations, size=3, mode="nearest")
    resid = elevations - med
    # Scale estimated from the local-mean deviation field, which is not
    # zero-censored the way median residuals are (on laterally uniform grids
    # more than half of them vanish exactly, deflating a naive std and turning
    # ordinary roughness extrema into false outliers).
    sigma = float(np.std(elevations - uniform_filter(elevations, size=3, mode="nearest")))
    mask = (np.abs(resid) > 5.0 * sigma) & (np.abs(resid) > 1e-6)
    mask |= np.abs(elevations - ref_elevation[:, None]) > _ELEVATION_BOUND
    if not mask.any():
        return elevations, 0
    cleaned = elevations.copy()
    cleaned[mask] = med[mask]
    return cleaned, int(mask.sum())


# ---------------------------------------------------------------------------
# Surface queries
# ---------------------------------------------------------------------------


class SurfaceInterpolator:
    """Cubic (smoothing) spline surface over one grid.

    Build once and query many times; the smoothed grid and the bicubic
    interpolant are computed at construction.  With all penalties zero the
    surface reproduces grid values at the nodes exactly.
    """

    def __init__(self, grid: RoadGrid, params: SmoothingParams | None = None):
        self.grid = grid
        self.params = params or SmoothingParams()
        z = grid.elevations
        stations = grid.stations
        offsets = grid.lateral_offsets
        if self.params.lambda_x > 0 and len(stations) >= 4:
            z = np.column_stack(
                [make_smoothing_spline(stations, z[:, j], lam=self.params.lambda_x)(stations) for j in range(z.shape[1])]
            )
        if self.params.lambda_y > 0 and len(offsets) >= 4:
            z = np.vstack(
                [make_smoothing_spline(offsets, z[i, :], lam=self.params.lambda_y)(offsets) for i in range(z.shape[0])]
            )
        if len(offsets) == 1:
            self._line = CubicSpline(stations, z[:, 0]) if len(stations) >= 4 else None
            self._z = z
            self._surface = None
        else:
            kx = min(3, len(stations) - 1)
            ky = min(3, len(offsets) - 1)
            self._surface = RectBivariateSpline(stations, offsets, z, kx=kx, ky=ky, s=0)
            self._line = None
            self._z = z

    def _check_hull(self, s, v) -> None:
        g = self.grid
        s = np.asarray(s, dtype=float)
        v = np.asarray(v, dtype=float)
        if np.any(s < g.stations[0] - 1e-9) or np.any(s > g.stations[-1] + 1e-9):
            raise DomainBoundsError(
                f"station query outside [{g.stations[0]}, {g.stations[-1]}]"
            )
        lo, hi = g.lateral_offsets[0], g.lateral_offsets[-1]
        tol = 1e-9 if len(g.lateral_offsets) > 1 else 1e-6
        if np.any(v < lo - tol) or np.any(v > hi + tol):
            raise DomainBoundsError(f"lateral offset query outside [{lo}, {hi}]")

    def at(self, s, v):
        """Surface elevation at station(s) ``s`` and lateral offset(s) ``v``."""
        self._check_hull(s, v)
        s = np.asarray(s, dtype=float)
        if self._surface is not None:
            out = self._surface(s, np.asarray(v, dtype=float), grid=False)
        elif self._line is not None:
            out = self._line(s)
        else:
            out = np.interp(s, self.grid.stations, self._z[:, 0])
        return float(out) if out.ndim == 0 else out


def elevation_at(grid: RoadGrid, s: float, v: float, params: SmoothingParams | None = None) -> float:
    """Single-point surface query; see :class:`SurfaceInterpolator` for batches."""
    return float(SurfaceInterpolator(grid, params).at(s, v))


def wheel_track_profile(
    grid: RoadGrid,
    lateral_offset: float,
    params: SmoothingParams | None = None,
    step: float = 0.1,
) -> np.ndarray:
    """Elevation profile along the reference line at a fixed lateral offset.

    Sampled at uniform ``step`` starting from the first station; this is the
    smoothed elevation input consumed by the roughness index and the vehicle
    corners.  ``lambda_z`` applies a final 1-D smoothing pass to the extracted
    profile.
    """
    params = params or SmoothingParams()
    interp = SurfaceInterpolator(grid, params)
    stations = grid.stations
    n = int(np.floor((stations[-1] - stations[0]) / step + 1e-9)) + 1
    s = stations[0] + step * np.arange(n)
    profile = np.asarray(interp.at(s, lateral_offset), dtype=float)
    if params.lambda_z > 0 and len(profile) >= 4:
        profile = make_smoothing_spline(s, profile, lam=params.lambda_z)(s)
    return profile


# ---------------------------------------------------------------------------
# Synthetic roughness
# ---------------------------------------------------------------------------


def synth_profile(length: float, step: float, roughness_class: str, seed: int) -> np.ndarray:
    """Zero-mean synthetic elevation profile of a given roughness class.

    The profile realizes the one-sided displacement PSD
    ``Phi(n) = Phi0 * (n / n0)**-2`` by random-phase spectral shaping: spectral
    amplitudes are fixed by the target PSD, phases drawn uniformly from a
    seeded generator, the DC bin zeroed.  Identical seeds give identical
    phases, so profiles of different classes scale into each other exactly.
    """
    klass = roughness_class.upper()
    if klass not in ROUGHNESS_PSD_SCALE:
        raise InvalidInput(f"unknown roughness class {roughness_class!r}; expected A..E")
    if step <= 0:
        raise InvalidInput("step must be > 0")
    if length < 10 * step:
        raise InvalidInput("length must be at least 10 * step")
    n = int(round(length / step))
    phi0 = ROUGHNESS_PSD_SCALE[klass]
    freqs = np.fft.rfftfreq(n, d=step)
    amplitude = np.zeros_like(freqs)
    amplitude[1:] = np.sqrt(phi0 * (freqs[1:] / REFERENCE_WAVENUMBER) ** -2 * n / (2.0 * step))
    if n % 2 == 0:
        amplitude[-1] = 0.0
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, len(freqs))
    spectrum = amplitude * np.exp(1j * phases)
    spectrum[0] = 0.0
    return np.fft.irfft(spectrum, n=n)


def straight_grid(
    profile: np.ndarray,
    step: float,
    lateral_span: float = 2.0,
    offset_step: float = 0.5,
    per_offset_profiles: dict[float, np.ndarray] | None = None,
) -> RoadGrid:
    """Wrap elevation profile(s) into a straight, flat-reference grid.

    By default every lateral column carries the same profile; pass
    ``per_offset_profiles`` to vary roughness across the width (keys are
    offsets that must exist in the grid).
    """
    profile = np.asarray(profile, dtype=float)
    stations = step * np.arange(len(profile))
    n_offsets = int(round(2 * lateral_span / offset_step)) + 1
    offsets = -lateral_span + offset_step * np.arange(n_offsets)
    elevations = np.tile(profile[:, None], (1, n_offsets))
    if per_offset_profiles:
        for off, prof in per_offset_profiles.items():
            j = int(np.argmin(np.abs(offsets - off)))
            if abs(offsets[j] - off) > 1e-9:
                raise InvalidInput(f"offset {off} not on the grid")
            elevations[:, j] = np.asarray(prof, dtype=float)
    ref = ReferenceLine.from_geometry(stations, np.zeros_like(stations), np.zeros_like(stations))
    return RoadGrid(ref_line=ref, lateral_offsets=offsets, elevations=elevations, grid_step=step)
