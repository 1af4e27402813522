"""Pipeline configuration: YAML parsing, validation, and hashing.

A single config file drives every subcommand; unknown keys are rejected so
typos surface instead of silently using defaults.  The SHA-256 of the
canonicalized document goes into the run manifest, which together with the
seed makes report bundles reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .calibration import CALIBRATION_PARAMETERS, OptimizationChain
from .errors import ConfigError
from .road import ROUGHNESS_PSD_SCALE, SmoothingParams
from .sampling import InputDistribution, default_input_distributions
from .vehicle import QuarterCarParams, SpeedProfile, VehicleGeometry, default_car, default_geometry

__all__ = ["PipelineConfig", "load_config", "config_hash"]

_TOP_KEYS = {"seed", "out_dir", "road", "scenario", "batch", "analysis", "iri", "vehicle", "calibration"}
_METHODS = ("threshold", "iso", "iri")


@dataclass(frozen=True)
class PipelineConfig:
    """Validated pipeline inputs; see the shipped example config for the schema."""

    raw: dict = field(repr=False)
    seed: int = 0
    out_dir: str = "out"
    road_file: str | None = None
    road_synthetic: dict | None = None
    smoothing: SmoothingParams = field(default_factory=SmoothingParams)
    target_speed: SpeedProfile = field(default_factory=lambda: SpeedProfile.constant(80.0 / 3.6))
    lane_half_width: float = 1.5
    distributions: list[InputDistribution] = field(default_factory=default_input_distributions)
    n: int = 50
    dt: float = 1e-3
    jobs: int = 1
    window_m: float = 5.0
    ds: float = 0.1
    methods: tuple[str, ...] = _METHODS
    aggregator: str = "mean"
    weightings: dict[str, str] = field(default_factory=lambda: {"x": "d", "y": "d", "z": "k"})
    k_factors: tuple[float, float, float] = (1.0, 1.0, 1.0)
    bands_file: str | None = None
    iso_reduction: str = "mean"
    iri_segment_m: float = 5.0
    iri_speed_kmh: float = 80.0
    front: QuarterCarParams = field(default_factory=default_car)
    rear: QuarterCarParams = field(default_factory=default_car)
    geometry: VehicleGeometry = field(default_factory=default_geometry)
    calibration_chain: OptimizationChain = field(default_factory=OptimizationChain.default)
    calibration_p0: dict[str, float] | None = None
    calibration_tol: float = 1e-12
    calibration_max_iter: int = 60


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing field {key!r} in {context}")
    return mapping[key]


def _check_keys(mapping: dict, allowed: set[str], context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)} in {context}")


def _parse_speed(scenario: dict) -> SpeedProfile:
    if "profile" in scenario:
        pairs = scenario["profile"]
        try:
            s = np.array([float(p[0]) for p in pairs])
            v = np.array([float(p[1]) / 3.6 for p in pairs])
        except (TypeError, IndexError):
            raise ConfigError("scenario.profile must be a list of [s_m, v_kmh] pairs") from None
        return SpeedProfile(breakpoints=s, speeds=v)
    kmh = scenario.get("target_speed_kmh", 80.0)
    if not (kmh > 0):
        raise ConfigError("scenario.target_speed_kmh must be > 0")
    return SpeedProfile.constant(kmh / 3.6)


def _parse_distributions(spec: dict) -> list[InputDistribution]:
    dists = {d.name: d for d in default_input_distributions()}
    for name, entry in spec.items():
        if name not in dists:
            raise ConfigError(f"unknown scenario variable {name!r} in scenario.distributions")
        kind = _require(entry, "kind", f"distribution {name!r}")
        if kind == "gaussian":
            params = (float(_require(entry, "mu", name)), float(_require(entry, "sigma", name)))
        elif kind == "uniform":
            params = (float(_require(entry, "a", name)), float(_require(entry, "b", name)))
        else:
            raise ConfigError(f"distribution {name!r}: unknown kind {kind!r}")
        dists[name] = InputDistribution(name, kind, params)
    return [dists[name] for name in ("v_dev", "l_p", "mu_rs")]


def _parse_quarter_car(entry: dict | None, context: str) -> QuarterCarParams:
    base = default_car()
    if not entry:
        return base
    allowed = {"m_s", "m_u", "k_s", "c_s", "k_t", "d_t", "mu_tire"}
    _check_keys(entry, allowed, context)
    kwargs = {k: float(v) for k, v in entry.items()}
    return QuarterCarParams(**{**base.__dict__, **kwargs})


def load_config(
    path,
    seed: int | None = None,
    out_dir: str | None = None,
    jobs: int | None = None,
    methods: tuple[str, ...] | None = None,
) -> PipelineConfig:
    """Parse and validate a YAML config file; CLI overrides win over the file."""
    try:
        return _load_config(path, seed=seed, out_dir=out_dir, jobs=jobs, methods=methods)
    except ConfigError:
        raise
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"invalid value in config {path}: {exc}") from exc


def _load_config(
    path, seed: int | None, out_dir: str | None, jobs: int | None, methods: tuple[str, ...] | None
) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys(raw, _TOP_KEYS, "config")

    road = raw.get("road", {})
    _check_keys(road, {"file", "synthetic", "smoothing"}, "road")
    road_file = road.get("file")
    if road_file is not None and not Path(road_file).exists():
        raise ConfigError(f"road.file {road_file!r} does not exist")
    road_synthetic = None
    if "synthetic" in road:
        synth = road["synthetic"]
        _check_keys(synth, {"length", "step", "roughness_class", "lateral_span", "offset_step", "patch"}, "road.synthetic")
        length = float(_require(synth, "length", "road.synthetic"))
        step = float(synth.get("step", 0.1))
        klass = str(_require(synth, "roughness_class", "road.synthetic")).upper()
        if klass not in ROUGHNESS_PSD_SCALE:
            raise ConfigError(f"road.synthetic.roughness_class must be one of {sorted(ROUGHNESS_PSD_SCALE)}")
        patch = synth.get("patch")
        if patch is not None:
            _check_keys(patch, {"start", "length", "roughness_class"}, "road.synthetic.patch")
            pklass = str(_require(patch, "roughness_class", "road.synthetic.patch")).upper()
            if pklass not in ROUGHNESS_PSD_SCALE:
                raise ConfigError("road.synthetic.patch.roughness_class must be a class A..E")
        road_synthetic = {
            "length": length,
            "step": step,
            "roughness_class": klass,
            "lateral_span": float(synth.get("lateral_span", 2.0)),
            "offset_step": float(synth.get("offset_step", 0.5)),
            "patch": patch,
        }
    if road_file is None and road_synthetic is None:
        raise ConfigError("road needs either 'file' or 'synthetic'")
    if road_file is not None and road_synthetic is not None:
        raise ConfigError("road takes either 'file' or 'synthetic', not both")
    smoothing_entry = road.get("smoothing", {})
    _check_keys(smoothing_entry, {"lambda_x", "lambda_y", "lambda_z"}, "road.smoothing")
    smoothing = SmoothingParams(
        lambda_x=float(smoothing_entry.get("lambda_x", 0.0)),
        lambda_y=float(smoothing_entry.get("lambda_y", 0.0)),
        lambda_z=float(smoothing_entry.get("lambda_z", 0.0)),
    )

    scenario = raw.get("scenario", {})
    _check_keys(scenario, {"target_speed_kmh", "profile", "lane_half_width", "distributions"}, "scenario")
    target_speed = _parse_speed(scenario)
    lane_half_width = float(scenario.get("lane_half_width", 1.5))
    distributions = _parse_distributions(scenario.get("distributions", {}))
    speed_given = "profile" in scenario or "target_speed_kmh" in scenario

    batch = raw.get("batch", {})
    _check_keys(batch, {"n", "dt", "jobs"}, "batch")
    n = int(batch.get("n", 50))
    if n < 1:
        raise ConfigError("batch.n must be >= 1")
    dt = float(batch.get("dt", 1e-3))

    analysis = raw.get("analysis", {})
    _check_keys(
        analysis,
        {"window_m", "ds", "methods", "aggregator", "weightings", "k_factors", "bands_file", "iso_reduction"},
        "analysis",
    )
    if methods is None:
        methods = tuple(analysis.get("methods", list(_METHODS)))
    for m in methods:
        if m not in _METHODS:
            raise ConfigError(f"analysis.methods entry {m!r} not in {_METHODS}")
    bands_file = analysis.get("bands_file")
    if bands_file is not None and not Path(bands_file).exists():
        raise ConfigError(f"analysis.bands_file {bands_file!r} does not exist")
    window_m = float(analysis.get("window_m", 5.0))
    if window_m <= 0:
        raise ConfigError("analysis.window_m must be > 0")
    if "iri" in methods and not speed_given:
        raise ConfigError(
            "the iri method applies speed-dependent thresholds: set "
            "scenario.target_speed_kmh or scenario.profile explicitly"
        )
    weightings = {str(k): str(v) for k, v in analysis.get("weightings", {"x": "d", "y": "d", "z": "k"}).items()}
    _check_keys(weightings, {"x", "y", "z"}, "analysis.weightings")
    k_raw = analysis.get("k_factors", [1.0, 1.0, 1.0])
    if len(k_raw) != 3:
        raise ConfigError("analysis.k_factors must hold three values")

    iri_entry = raw.get("iri", {})
    _check_keys(iri_entry, {"segment_m", "speed_kmh"}, "iri")

    vehicle_entry = raw.get("vehicle", {})
    _check_keys(vehicle_entry, {"front", "rear", "geometry"}, "vehicle")
    front = _parse_quarter_car(vehicle_entry.get("front"), "vehicle.front")
    rear = _parse_quarter_car(vehicle_entry.get("rear", vehicle_entry.get("front")), "vehicle.rear")
    geo_entry = vehicle_entry.get("geometry", {})
    _check_keys(geo_entry, {"wheelbase", "track_width", "cg_height", "roll_inertia", "pitch_inertia"}, "vehicle.geometry")
    geometry = VehicleGeometry(**{**default_geometry().__dict__, **{k: float(v) for k, v in geo_entry.items()}})

    calib = raw.get("calibration", {})
    _check_keys(calib, {"stages", "p0", "tol", "max_iter"}, "calibration")
    if "stages" in calib:
        stages = tuple(tuple(str(name) for name in stage) for stage in calib["stages"])
        for stage in stages:
            for name in stage:
                if name not in CALIBRATION_PARAMETERS:
                    raise ConfigError(f"calibration stage parameter {name!r} unknown")
        chain = OptimizationChain(stages=stages)
    else:
        chain = OptimizationChain.default()
    p0 = {str(k): float(v) for k, v in calib.get("p0", {}).items()} or None

    return PipelineConfig(
        raw=raw,
        seed=int(seed if seed is not None else raw.get("seed", 0)),
        out_dir=str(out_dir if out_dir is not None else raw.get("out_dir", "out")),
        road_file=road_file,
        road_synthetic=road_synthetic,
        smoothing=smoothing,
        target_speed=target_speed,
        lane_half_width=lane_half_width,
        distributions=distributions,
        n=n,
        dt=dt,
        jobs=int(jobs if jobs is not None else batch.get("jobs", 1)),
        window_m=window_m,
        ds=float(analysis.get("ds", 0.1)),
        methods=methods,
        aggregator=str(analysis.get("aggregator", "mean")),
        weightings=weightings,
        k_factors=tuple(float(x) for x in k_raw),
        bands_file=bands_file,
        iso_reduction=str(analysis.get("iso_reduction", "mean")),
        iri_segment_m=float(iri_entry.get("segment_m", 5.0)),
        iri_speed_kmh=float(iri_entry.get("speed_kmh", 80.0)),
        front=front,
        rear=rear,
        geometry=geometry,
        calibration_chain=chain,
        calibration_p0=p0,
        calibration_tol=float(calib.get("tol", 1e-12)),
        calibration_max_iter=int(calib.get("max_iter", 60)),
    )


def config_hash(cfg: PipelineConfig) -> str:
    """SHA-256 over the canonicalized config document plus the effective seed."""
    canonical = json.dumps({"config": cfg.raw, "seed": cfg.seed}, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
