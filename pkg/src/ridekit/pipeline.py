"""End-to-end flows behind the CLI: road generation, batch analysis, calibration.

Every command writes its outputs plus a ``manifest.json`` carrying the config
hash, the seed, the package version, and the SHA-256 of every written file.
Nothing in the bundle depends on wall-clock time or filesystem ordering, so a
repeated invocation with the same config and seed reproduces the bundle byte
for byte.
"""

from __future__ import annotations

import hashlib
import io
import json
from pathlib import Path

import numpy as np

from . import __version__
from . import calibration as calib_mod
from . import iri as iri_mod
from . import iso2631, road, sampling, sections, signals, thresholds
from .config import PipelineConfig, config_hash
from .errors import ConfigError
from .vehicle import Scenario

__all__ = ["build_road", "generate_road", "analyze", "calibrate"]


def build_road(cfg: PipelineConfig) -> road.RoadGrid:
    """Load the configured grid file or synthesize the configured road."""
    if cfg.road_file is not None:
        return road.load_grid(cfg.road_file)
    spec = cfg.road_synthetic
    profile = road.synth_profile(spec["length"], spec["step"], spec["roughness_class"], cfg.seed)
    patch = spec.get("patch")
    if patch is not None:
        start = float(patch["start"])
        length = float(patch["length"])
        rough = road.synth_profile(spec["length"], spec["step"], patch["roughness_class"], cfg.seed)
        i0 = int(round(start / spec["step"]))
        i1 = int(round((start + length) / spec["step"]))
        if not (0 <= i0 < i1 <= len(profile)):
            raise ConfigError("road.synthetic.patch lies outside the road")
        profile = profile.copy()
        profile[i0:i1] = rough[i0:i1]
    # close the track with the periodic wrap sample so the stations span the
    # nominal length exactly and every method sees the same window count
    profile = np.concatenate([profile, profile[:1]])
    return road.straight_grid(
        profile, spec["step"], lateral_span=spec["lateral_span"], offset_step=spec["offset_step"]
    )


def _write(out_dir: Path, name: str, text: str, outputs: dict[str, str]) -> None:
    data = text.encode("utf-8")
    (out_dir / name).write_bytes(data)
    outputs[name] = hashlib.sha256(data).hexdigest()


def _write_manifest(out_dir: Path, cfg: PipelineConfig, outputs: dict[str, str]) -> None:
    manifest = {
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "outputs": dict(sorted(outputs.items())),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def generate_road(cfg: PipelineConfig, out_path) -> Path:
    """Synthesize the configured road and write it as a grid file."""
    if cfg.road_synthetic is None:
        raise ConfigError("generate-road needs road.synthetic in the config")
    grid = build_road(cfg)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    road.save_grid(out_path, grid)
    return out_path


def _space_signal(runs, channel: str, ds: float, aggregator: str) -> signals.SpaceSeries:
    per_run = [signals.to_space(run, channel, ds) for run in runs]
    return signals.aggregate(per_run, aggregator)


def analyze(cfg: PipelineConfig, out_dir) -> dict:
    """Run the full batch analysis and write the report bundle.

    Returns a summary dict with the reports and the failure list, mainly for
    tests and interactive use; files are the authoritative output.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, str] = {}

    grid = build_road(cfg)
    scenario = Scenario(
        road=grid,
        target_speed=cfg.target_speed,
        lane_half_width=cfg.lane_half_width,
        smoothing=cfg.smoothing,
    )
    plan = sampling.lhs(cfg.distributions, cfg.n, cfg.seed)
    _write(out_dir, "sample_plan.csv", plan.to_csv_text(), outputs)

    batch = sampling.run_batch(
        plan, scenario, cfg.front, cfg.geometry, dt=cfg.dt, rear_params=cfg.rear, jobs=cfg.jobs
    )
    runs = batch.successful()
    fail_text = "row,reason\n" + "".join(f"{i},{reason}\n" for i, reason in batch.failures)
    _write(out_dir, "failures.csv", fail_text, outputs)
    if not runs:
        _write_manifest(out_dir, cfg, outputs)
        raise ConfigError("every run in the batch failed; see failures.csv")

    summary: dict = {"failures": batch.failures, "reports": {}}
    tables: list[str] = []

    space = {ch: _space_signal(runs, ch, cfg.ds, cfg.aggregator) for ch in ("ax", "ay", "az")}
    buf = io.StringIO()
    buf.write("s,ax,ay,az\n")
    base = space["ax"]
    for k in range(len(base)):
        buf.write(
            f"{base.positions[k]:.3f},{space['ax'].values[k]:.6e},"
            f"{space['ay'].values[k]:.6e},{space['az'].values[k]:.6e}\n"
        )
    _write(out_dir, "space_signals.csv", buf.getvalue(), outputs)

    if "threshold" in cfg.methods:
        bands = thresholds.load_bands(cfg.bands_file)
        rows = []
        reports = {}
        for axis in thresholds.AXES:
            for style in thresholds.STYLES:
                flag = thresholds.exceedance(space[f"a{axis}"], bands[(axis, style)])
                report = sections.find_critical(flag, cfg.window_m)
                row = report.rows[0]
                reports[(axis, style)] = report
                rows.append(f"{axis},{style},{row.c},{row.r_c:.2f},{row.n},{row.r_n:.2f}")
        text = "axis,style,C,R_c,N,R_n\n" + "\n".join(rows) + "\n"
        _write(out_dir, "threshold_report.csv", text, outputs)
        tables.append(_threshold_table(reports))
        summary["reports"]["threshold"] = reports

    if "iso" in cfg.methods:
        weightings = {axis: iso2631.load_weighting(w) for axis, w in cfg.weightings.items()}
        iso_windows = sections.classify_windows_iso(
            runs, cfg.window_m, weightings, cfg.k_factors, cfg.iso_reduction
        )
        _write(out_dir, "iso_report.csv", iso_windows.report.to_csv_text(), outputs)
        buf = io.StringIO()
        buf.write("s_center,a_v,label\n")
        centers = 0.5 * (iso_windows.edges[:-1] + iso_windows.edges[1:])
        for s, a_v, label in zip(centers, iso_windows.a_v, iso_windows.labels):
            buf.write(f"{s:.3f},{a_v:.6e},{label}\n")
        _write(out_dir, "iso_windows.csv", buf.getvalue(), outputs)
        tables.append(iso_windows.report.format_table())
        summary["reports"]["iso"] = iso_windows

    if "iri" in cfg.methods:
        profile = road.wheel_track_profile(grid, 0.0, cfg.smoothing, grid.grid_step)
        results = iri_mod.compute_iri(
            profile,
            grid.grid_step,
            speed=cfg.iri_speed_kmh / 3.6,
            segment_length=cfg.iri_segment_m,
        )
        iri_series = _iri_space_series(results, grid, cfg)
        speed_series = _space_signal(runs, "vx", cfg.ds, "mean")
        iri_windows = sections.classify_windows_iri(iri_series, speed_series, cfg.window_m)
        _write(out_dir, "iri_report.csv", iri_windows.report.to_csv_text(), outputs)
        buf = io.StringIO()
        buf.write("s_center,iri,speed_kmh,label\n")
        centers = 0.5 * (iri_windows.edges[:-1] + iri_windows.edges[1:])
        for s, value, kmh, label in zip(centers, iri_windows.iri, iri_windows.speed_kmh, iri_windows.labels):
            buf.write(f"{s:.3f},{value:.6e},{kmh:.3f},{label}\n")
        _write(out_dir, "iri_windows.csv", buf.getvalue(), outputs)
        tables.append(iri_windows.report.format_table())
        summary["reports"]["iri"] = iri_windows

    _write(out_dir, "comparison.txt", "\n\n".join(tables) + "\n", outputs)
    _write_manifest(out_dir, cfg, outputs)
    return summary


def _threshold_table(reports: dict) -> str:
    lines = ["threshold method"]
    lines.append(f"{'axis':<6}{'style':<7}{'C':>6}{'R_c [%]':>9}{'N':>7}{'R_n [%]':>9}")
    for (axis, style), report in reports.items():
        row = report.rows[0]
        lines.append(f"{axis:<6}{style:<7}{row.c:>6}{row.r_c:>9.2f}{row.n:>7}{row.r_n:>9.2f}")
    return "\n".join(lines)


def _iri_space_series(results, grid, cfg: PipelineConfig) -> signals.SpaceSeries:
    """Index values on the analysis grid.

    Segments at or below the window length map piecewise-constant (each window
    averages its own segments); coarser segments are interpolated linearly
    between segment midpoints, mirroring how sparse measured index samples are
    densified.
    """
    values = np.array([r.iri for r in results])
    s0 = float(grid.stations[0])
    if cfg.iri_segment_m <= cfg.window_m + 1e-9:
        per = max(int(round(cfg.iri_segment_m / cfg.ds)), 1)
        dense = np.repeat(values, per)
        return signals.SpaceSeries(s0=s0, ds=cfg.ds, values=dense)
    midpoints = np.array([s0 + r.s_start + 0.5 * r.segment_length for r in results])
    if len(midpoints) < 2:
        raise ConfigError("iri.segment_m leaves fewer than two segments; shrink it")
    return iri_mod.interpolate_iri(midpoints, values, cfg.ds)


def calibrate(cfg: PipelineConfig, reference_path, out_dir) -> calib_mod.ChainResult:
    """Run the staged calibration against a reference trace and write the report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, str] = {}

    reference = signals.read_reference_csv(reference_path)
    grid = build_road(cfg)
    scenario = Scenario(
        road=grid,
        target_speed=cfg.target_speed,
        lane_half_width=cfg.lane_half_width,
        smoothing=cfg.smoothing,
    )
    constraints = calib_mod.BoxConstraints.vehicle_defaults()
    chain = cfg.calibration_chain
    names = chain.parameters
    if cfg.calibration_p0:
        p0 = dict(cfg.calibration_p0)
    else:
        p0 = dict(zip(names, constraints.midpoint(names)))
    base_front, base_rear = calib_mod.apply_parameters(cfg.front, cfg.rear, p0)

    residual_fn = calib_mod.simulation_residual(
        scenario, cfg.geometry, reference, base_front, base_rear, dt=cfg.dt
    )
    before = calib_mod.evaluate_residual(
        base_front, scenario, cfg.geometry, reference, dt=cfg.dt, rear_params=base_rear
    )
    result = calib_mod.run_chain(
        chain, p0, residual_fn,
        constraints=constraints, tol=cfg.calibration_tol, max_iter=cfg.calibration_max_iter,
    )
    front, rear = calib_mod.apply_parameters(cfg.front, cfg.rear, result.params)
    after = calib_mod.evaluate_residual(
        front, scenario, cfg.geometry, reference, dt=cfg.dt, rear_params=rear
    )

    report = {
        "completed": result.completed,
        "failure": result.failure,
        "initial_params": p0,
        "final_params": result.params,
        "objective": result.objective if result.stage_reports else None,
        "stages": [
            {
                "parameters": list(sr.stage),
                "objective_before": sr.objective_before,
                "objective_after": sr.objective_after,
                "objective_trace": sr.objective_trace,
                "reason": sr.reason,
            }
            for sr in result.stage_reports
        ],
        "channel_nrmse": _ref_opt_rows(before, after),
        "skipped_channels": [list(item) for item in after.skipped],
    }
    _write(out_dir, "calibration_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n", outputs)
    _write(out_dir, "calibration_table.csv", _ref_opt_csv(before, after), outputs)
    _write_manifest(out_dir, cfg, outputs)
    return result


def _ref_opt_rows(before: calib_mod.Residual, after: calib_mod.Residual) -> dict:
    rows = {}
    for name in sorted(before.channel_nrmse):
        ref = before.channel_nrmse[name]
        opt = after.channel_nrmse.get(name)
        change = None if opt is None or ref == 0 else 100.0 * (ref - opt) / ref
        rows[name] = {"ref": ref, "opt": opt, "improvement_percent": change}
    return rows


def _ref_opt_csv(before: calib_mod.Residual, after: calib_mod.Residual) -> str:
    buf = io.StringIO()
    buf.write("channel,nrmse_ref,nrmse_opt,improvement_percent\n")
    for name, row in _ref_opt_rows(before, after).items():
        opt = "" if row["opt"] is None else f"{row['opt']:.6e}"
        change = "" if row["improvement_percent"] is None else f"{row['improvement_percent']:.4f}"
        buf.write(f"{name},{row['ref']:.6e},{opt},{change}\n")
    return buf.getvalue()
