"""Critical-section derivation: fixed-length window partition and reports.

The track is split into contiguous, non-overlapping windows of the critical
length (one car length by default).  A window is critical under the band
method when every sample inside exceeds the band; under the comfort and
roughness methods windows carry categorical labels and are counted per
category.  Counts C/N and ratios R_c/R_n per category mirror the tabular
report layout used for test-site comparisons.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import iri as iri_mod
from . import iso2631
from .errors import InvalidInput
from .signals import SpaceSeries, VehicleResponse
from .thresholds import ExceedanceSignal
from .vehicle import SpeedProfile

__all__ = [
    "SectionRow",
    "SectionReport",
    "IsoWindows",
    "IriWindows",
    "window_edges",
    "find_critical",
    "classify_windows_iso",
    "classify_windows_iri",
]

DEFAULT_WINDOW_M = 5.0


def window_edges(s0: float, extent: float, l_cr: float) -> np.ndarray:
    """Window boundary positions: floor(extent / l_cr) complete windows."""
    if l_cr <= 0:
        raise InvalidInput("l_cr must be > 0")
    n_windows = int(np.floor(extent / l_cr + 1e-9))
    if n_windows < 1:
        raise InvalidInput(f"track extent {extent:.3g} m shorter than one {l_cr:.3g} m window")
    return s0 + l_cr * np.arange(n_windows + 1)


def _window_index_spans(series: SpaceSeries, l_cr: float) -> list[tuple[int, int]]:
    """Half-open sample index spans of the complete windows of a space series."""
    edges = window_edges(series.s0, series.extent, l_cr)
    positions = series.positions
    idx = np.searchsorted(positions, edges - 1e-9 * series.ds, side="left")
    spans = [(int(idx[k]), int(idx[k + 1])) for k in range(len(edges) - 1)]
    if any(j1 <= j0 for j0, j1 in spans):
        raise InvalidInput("window contains no samples; l_cr too small for the grid")
    return spans


@dataclass(frozen=True)
class SectionRow:
    """Counts of one report category: C critical and N non-critical windows."""

    category: str
    c: int
    n: int
    critical_windows: np.ndarray = field(repr=False, default=None)

    @property
    def total(self) -> int:
        return self.c + self.n

    @property
    def r_c(self) -> float:
        return 100.0 * self.c / self.total if self.total else 0.0

    @property
    def r_n(self) -> float:
        return 100.0 * self.n / self.total if self.total else 0.0


@dataclass(frozen=True)
class SectionReport:
    """Window accounting of one method over one track."""

    method: str
    window_length: float
    total_windows: int
    rows: list[SectionRow]

    def row(self, category: str) -> SectionRow:
        for row in self.rows:
            if row.category == category:
                return row
        raise KeyError(f"no category {category!r} in {self.method} report")

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("category,C,R_c,N,R_n\n")
        for row in self.rows:
            buf.write(f"{row.category},{row.c},{row.r_c:.2f},{row.n},{row.r_n:.2f}\n")
        return buf.getvalue()

    def format_table(self) -> str:
        header = f"{self.method} method, window {self.window_length:g} m, {self.total_windows} windows"
        lines = [header, f"{'category':<12}{'C':>6}{'R_c [%]':>9}{'N':>7}{'R_n [%]':>9}"]
        for row in self.rows:
            lines.append(f"{row.category:<12}{row.c:>6}{row.r_c:>9.2f}{row.n:>7}{row.r_n:>9.2f}")
        return "\n".join(lines)


def find_critical(flag: ExceedanceSignal, l_cr: float = DEFAULT_WINDOW_M, mode: str = "all") -> SectionReport:
    """Count windows whose samples violate a band.

    ``mode="all"`` (the default, and the definition of a critical section)
    requires every sample of a window to exceed; ``mode="any"`` is a
    sensitivity variant that fires on a single exceeding sample.
    """
    if mode not in ("all", "any"):
        raise InvalidInput("mode must be 'all' or 'any'")
    spans = _window_index_spans(flag.series, l_cr)
    values = np.asarray(flag.series.values, dtype=bool)
    reduce = np.all if mode == "all" else np.any
    critical = np.array([bool(reduce(values[j0:j1])) for j0, j1 in spans])
    c = int(critical.sum())
    row = SectionRow(category=flag.label, c=c, n=len(spans) - c, critical_windows=critical)
    return SectionReport(
        method="threshold", window_length=l_cr, total_windows=len(spans), rows=[row]
    )


@dataclass(frozen=True)
class IsoWindows:
    """Per-window comfort labels with the backing total vibration values."""

    edges: np.ndarray
    a_v: np.ndarray
    labels: list[str]
    report: SectionReport


def classify_windows_iso(
    runs: list[VehicleResponse],
    l_cr: float = DEFAULT_WINDOW_M,
    weightings: dict[str, iso2631.FilterSpec] | None = None,
    k_factors: tuple[float, float, float] = (1.0, 1.0, 1.0),
    reduction: str = "mean",
) -> IsoWindows:
    """Window-resolved comfort classification across a batch of runs.

    Each run's axis accelerations are frequency weighted over the full trace;
    the RMS of the weighted signal restricted to a window's time span gives the
    per-axis value, combined into the total vibration per run and reduced
    across runs (mean by default, max for worst case).  A window counts under
    exactly one label.
    """
    if not runs:
        raise InvalidInput("no runs to classify")
    if reduction not in ("mean", "max"):
        raise InvalidInput("reduction must be 'mean' or 'max'")
    if weightings is None:
        weightings = {
            "x": iso2631.load_weighting("d"),
            "y": iso2631.load_weighting("d"),
            "z": iso2631.load_weighting("k"),
        }
    start = max(float(r.s.values[0]) for r in runs)
    end = min(float(r.s.values[-1]) for r in runs)
    edges = window_edges(start, end - start, l_cr)
    n_windows = len(edges) - 1
    k_x, k_y, k_z = k_factors
    factors = {"x": k_x, "y": k_y, "z": k_z}
    channel_of = {"x": "ax", "y": "ay", "z": "az"}

    per_run_av = np.empty((len(runs), n_windows))
    for i, run in enumerate(runs):
        s = run.s.values
        idx = np.searchsorted(s, edges, side="left")
        counts = np.diff(idx)
        if np.any(counts < 1):
            raise InvalidInput("a window holds no samples of a run; shrink the step or grow l_cr")
        total = np.zeros(n_windows)
        for axis, spec in weightings.items():
            weighted = iso2631.weight_signal(run.channel(channel_of[axis]), spec).a_w.values
            cs = np.concatenate([[0.0], np.cumsum(weighted * weighted)])
            mean_sq = (cs[idx[1:]] - cs[idx[:-1]]) / counts
            total += (factors[axis] ** 2) * mean_sq
        per_run_av[i] = np.sqrt(total)
    a_v = per_run_av.mean(axis=0) if reduction == "mean" else per_run_av.max(axis=0)

    labels = [iso2631.classify_iso(value).label for value in a_v]
    rows = []
    for category in iso2631.COMFORT_LABELS[1:]:  # NU windows are the non-critical rest
        critical = np.array([lab == category for lab in labels])
        c = int(critical.sum())
        rows.append(SectionRow(category=category, c=c, n=n_windows - c, critical_windows=critical))
    report = SectionReport(method="iso2631", window_length=l_cr, total_windows=n_windows, rows=rows)
    return IsoWindows(edges=edges, a_v=a_v, labels=labels, report=report)


@dataclass(frozen=True)
class IriWindows:
    """Per-window ride-quality labels with the backing index and speed values."""

    edges: np.ndarray
    iri: np.ndarray
    speed_kmh: np.ndarray
    labels: list[str]
    report: SectionReport


def classify_windows_iri(
    iri_series: SpaceSeries,
    speed,
    l_cr: float = DEFAULT_WINDOW_M,
) -> IriWindows:
    """Window-resolved ride-quality classification of a roughness-index signal.

    ``speed`` supplies the travel speed [m/s] used for the speed-dependent
    thresholds: a :class:`SpaceSeries`, a :class:`SpeedProfile`, or a scalar.
    Every window uses its mean index and mean speed.  The VG category is not
    reported (windows below the G band are the non-critical remainder) but
    still appears in the returned labels.
    """
    spans = _window_index_spans(iri_series, l_cr)
    edges = window_edges(iri_series.s0, iri_series.extent, l_cr)
    centers_values = np.asarray(iri_series.values, dtype=float)
    positions = iri_series.positions

    if isinstance(speed, SpaceSeries):
        speed_at = lambda s: np.interp(s, speed.positions, speed.values)  # noqa: E731
    elif isinstance(speed, SpeedProfile):
        speed_at = speed.at
    else:
        v = float(speed)
        speed_at = lambda s: np.full_like(np.asarray(s, dtype=float), v)  # noqa: E731

    iri_win = np.empty(len(spans))
    speed_win = np.empty(len(spans))
    for k, (j0, j1) in enumerate(spans):
        iri_win[k] = centers_values[j0:j1].mean()
        speed_win[k] = np.mean(speed_at(positions[j0:j1]))
    speed_kmh = 3.6 * speed_win
    labels = [iri_mod.classify_iri(value, kmh) for value, kmh in zip(iri_win, speed_kmh)]

    rows = []
    for category in iri_mod.RIDE_QUALITY_LABELS[1:]:  # VG is the unreported remainder
        critical = np.array([lab == category for lab in labels])
        c = int(critical.sum())
        rows.append(SectionRow(category=category, c=c, n=len(spans) - c, critical_windows=critical))
    report = SectionReport(method="iri", window_length=l_cr, total_windows=len(spans), rows=rows)
    return IriWindows(edges=edges, iri=iri_win, speed_kmh=speed_kmh, labels=labels, report=report)
