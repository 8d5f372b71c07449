"""Closed-loop runs, reference calibration, frame-corpus detection and benchmarks."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import trajectory
from .guidance import (ControllerConfig, GateController, PidGains, ReferenceMarker,
                       SlalomConfig, SlalomController)
from .pipeline import (DIRECT, STAGES, PipelineConfig, TrackerState, decode_slalom,
                       detect_disks)
from .guidance import DegenerateQuadrangle
from .pnm import read_pgm
from .sim.course import Course, collision, course_from_dict, gate_passed
from .sim.render import render
from .sim.vehicle import VehicleState, step_vehicle
from .trajectory import TrajectoryRecord

log = logging.getLogger("ppanav")

TIMING_STAGES = STAGES + ("control",)
FRAME_BUDGET_MS = 5.0  # 200 fps


class ConfigError(ValueError):
    pass


class CalibrationFailed(RuntimeError):
    pass


def data_path(name: str) -> Path:
    return Path(str(resources.files("ppanav") / "data" / name))


def resolve(path, base: Path | None = None) -> Path:
    """A file path, else relative to ``base``, else a bundled data file."""
    p = Path(path)
    if p.is_file():
        return p
    if base is not None and (base / p).is_file():
        return base / p
    for cand in (p.name, p.name + ".yaml"):
        if data_path(cand).is_file():
            return data_path(cand)
    raise ConfigError(f"cannot find {path}")


# ------------------------------------------------------------------ config --

@dataclass(frozen=True)
class ReferenceSpec:
    """Where the reference marker comes from: a calibration file or a pose."""

    file: str | None = None
    gate: int = 0
    distance: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    course: Course
    controller: ControllerConfig = ControllerConfig()
    pipeline: PipelineConfig = PipelineConfig()
    slalom: SlalomConfig = SlalomConfig()
    reference: ReferenceSpec = ReferenceSpec()
    control_hz: float = 200.0
    physics_hz: float = 1000.0
    max_time: float = 60.0
    seed: int = 0
    course_file: str | None = None

    def __post_init__(self):
        if self.control_hz <= 0 or self.physics_hz <= 0:
            raise ConfigError("rates must be positive")
        if self.max_time <= 0:
            raise ConfigError("max_time must be positive")

    @property
    def substeps(self):
        return max(1, round(self.physics_hz / self.control_hz))


def _build(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"{name}: unknown keys {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _controller(data):
    data = dict(data or {})
    for key in ("lateral", "skew"):
        if key in data:
            data[key] = _build(PidGains, data[key], f"controller.{key}")
    return _build(ControllerConfig, data, "controller")


def config_from_dict(data: dict, base: Path | None = None) -> RunConfig:
    if not isinstance(data, dict) or "course" not in data:
        raise ConfigError("run config needs a 'course' entry")
    course_path = resolve(data["course"], base)
    try:
        with open(course_path) as f:
            course = course_from_dict(yaml.safe_load(f))
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"{course_path}: {exc}") from exc
    pipe = dict(data.get("pipeline") or {})
    pipe.setdefault("focal_px", course.camera.f_px)
    slalom = dict(data.get("slalom") or {})
    slalom.setdefault("v_cmd", course.vehicle.v_cmd)
    slalom.setdefault("wheelbase", course.vehicle.wheelbase)
    slalom.setdefault("max_steer", course.vehicle.max_steer)
    slalom.setdefault("steer_rate", course.vehicle.steer_rate)
    slalom.setdefault("image_centre", course.camera.principal)
    ref = dict(data.get("reference") or {})
    if ref.get("file"):
        ref["file"] = str(resolve(ref["file"], base))
    known = {f.name for f in fields(RunConfig)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}")
    try:
        return RunConfig(
            course=course,
            controller=_controller(data.get("controller")),
            pipeline=_build(PipelineConfig, pipe, "pipeline"),
            slalom=_build(SlalomConfig, slalom, "slalom"),
            reference=_build(ReferenceSpec, ref, "reference"),
            control_hz=float(data.get("control_hz", 200.0)),
            physics_hz=float(data.get("physics_hz", 1000.0)),
            max_time=float(data.get("max_time", 60.0)),
            seed=int(data.get("seed", 0)),
            course_file=str(course_path),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    p = resolve(path)
    try:
        with open(p) as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return config_from_dict(data, p.parent)


# ------------------------------------------------------------- calibration --

def pose_in_front(gate, distance: float, camera) -> VehicleState:
    """Vehicle pose with the camera ``distance`` m straight in front of a gate."""
    nx, ny = gate.normal
    cx, cy = gate.x - distance * nx, gate.y - distance * ny
    return VehicleState(cx - camera.mount_offset * nx, cy - camera.mount_offset * ny, gate.facing)


def calibrate(course: Course, pose: VehicleState, cfg: PipelineConfig = PipelineConfig(),
              rng=None) -> ReferenceMarker:
    """Detect the marker seen from ``pose``; it must be a clean Direct detection."""
    frame = render(course, pose, rng=rng)
    try:
        obs = detect_disks(frame, cfg, TrackerState())
    except DegenerateQuadrangle as exc:
        raise CalibrationFailed(f"disks do not form a quadrangle: {exc}") from exc
    if obs is None or obs.mode != DIRECT:
        raise CalibrationFailed(f"all {cfg.disc_num} disks must be visible from the pose")
    return ReferenceMarker(obs.points)


def write_reference(path, ref: ReferenceMarker, pose: VehicleState | None = None) -> None:
    data = {"points": [list(p) for p in ref.points], "centroid": list(ref.centroid)}
    if pose is not None:
        data["pose"] = [pose.x, pose.y, math.degrees(pose.theta)]
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def read_reference(path) -> ReferenceMarker:
    try:
        data = json.loads(Path(path).read_text())
        return ReferenceMarker(tuple(tuple(int(v) for v in p) for p in data["points"]))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad reference file {path}: {exc}") from exc


def reference_for(config: RunConfig) -> ReferenceMarker:
    spec = config.reference
    if spec.file:
        return read_reference(spec.file)
    course = config.course
    if not course.gates:
        raise ConfigError("course has no gates to calibrate against")
    gate = course.gates[spec.gate]
    # calibrate against the lone gate on a clean frame
    clean = replace(course, gates=(gate,), clutter=(),
                    render=replace(course.render, spot_count=0, noise_sigma=0.0))
    return calibrate(clean, pose_in_front(gate, spec.distance, course.camera), config.pipeline)


# --------------------------------------------------------------------- run --

@dataclass
class MetricsReport:
    gates_passed: int
    gates_total: int
    collisions: int
    out_of_bounds: bool
    completed: bool
    termination: str
    sim_time: float
    steps: int
    path_length: float
    avg_speed: float
    max_speed: float
    detection_rate: float
    fallback_rate: float
    crossing_times: list
    timings_us: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @property
    def failed(self) -> bool:
        return not self.completed


def timing_summary(samples: dict) -> dict:
    out = {}
    for stage, values in samples.items():
        a = np.asarray(values, dtype=float) / 1e3
        if a.size:
            out[stage] = {"mean": float(a.mean()), "p99": float(np.percentile(a, 99))}
    return out


@dataclass
class RunResult:
    metrics: MetricsReport
    records: list


def run(config: RunConfig, reference: ReferenceMarker | None = None) -> RunResult:
    """Render, detect, steer and integrate until the course ends or fails."""
    wall0 = time.perf_counter()
    course = config.course
    params = course.vehicle
    slalom = course.is_slalom
    if not slalom and reference is None:
        reference = reference_for(config)
    tracker = TrackerState()
    gate_ctl = None if slalom else GateController(reference, config.controller)
    slalom_ctl = SlalomController(config.slalom) if slalom else None

    dt = 1.0 / config.control_hz
    sub = config.substeps
    h = dt / sub
    ref_offset = course.camera.mount_offset
    state = course.start
    t = 0.0
    step = 0
    next_gate = 0
    path = 0.0
    max_speed = 0.0
    detected = fallback = 0
    collisions = 0
    out_of_bounds = False
    crossings = []
    records = []
    samples = {s: [] for s in TIMING_STAGES + ("total",)}
    max_steps = int(math.ceil(config.max_time * config.control_hz))
    termination = "timeout"

    while step < max_steps:
        rng = np.random.default_rng((config.seed, step))
        frame = render(course, state, rng=rng)
        timings = {}
        t0 = time.perf_counter_ns()
        err = None
        points = None
        out1 = out2 = 0.0
        if slalom:
            cmd = decode_slalom(frame, config.pipeline, tracker, timings)
            mode = "lost" if cmd is None else DIRECT
            tc = time.perf_counter_ns()
            steer = slalom_ctl.update(cmd, dt)
        else:
            try:
                obs = detect_disks(frame, config.pipeline, tracker, timings)
            except DegenerateQuadrangle:
                obs = None
            mode = "lost" if obs is None else obs.mode
            tc = time.perf_counter_ns()
            steer = gate_ctl.update(obs)
            err = gate_ctl.last_error
            if obs is not None:
                points = tuple(tuple(p) for p in obs.points)
                out1, out2 = steer.out1, steer.out2
        t1 = time.perf_counter_ns()
        timings["control"] = t1 - tc
        for s in TIMING_STAGES:
            samples[s].append(timings.get(s, 0))
        samples["total"].append(t1 - t0)
        if mode != "lost":
            detected += 1
            fallback += mode == "fallback"

        records.append(TrajectoryRecord(
            t=t, x=state.x, y=state.y, theta=state.theta, v=state.v, steer=steer.angle,
            d=None if err is None else float(err.d), delta=None if err is None else float(err.delta),
            mode=mode, gate_index=next_gate, out1=float(out1), out2=float(out2), points=points))

        for _ in range(sub):
            prev = state
            state = step_vehicle(state, steer.angle, h, params)
            path += math.hypot(state.x - prev.x, state.y - prev.y)
            max_speed = max(max_speed, state.v)
            if next_gate < len(course.gates) and gate_passed(prev, state, course.gates[next_gate], ref_offset):
                next_gate += 1
                crossings.append(t + h * (_ + 1))
                log.info("gate %d passed at t=%.3f", next_gate, crossings[-1])
            if collision(state, course, params):
                collisions += 1
                termination = "collision"
                break
            if not course.in_bounds(state.x, state.y):
                out_of_bounds = True
                termination = "out_of_bounds"
                break
        step += 1
        t = step * dt
        if termination in ("collision", "out_of_bounds"):
            break
        if next_gate == len(course.gates):
            termination = "completed"
            break

    # close the log with the state the run ended in
    if records:
        records.append(TrajectoryRecord(
            t=t, x=state.x, y=state.y, theta=state.theta, v=state.v, steer=records[-1].steer,
            d=None, delta=None, mode="lost", gate_index=next_gate))
    completed = termination == "completed"
    metrics = MetricsReport(
        gates_passed=next_gate, gates_total=len(course.gates), collisions=collisions,
        out_of_bounds=out_of_bounds, completed=completed, termination=termination,
        sim_time=t, steps=step, path_length=path,
        avg_speed=path / t if t > 0 else 0.0, max_speed=max_speed,
        detection_rate=detected / step if step else 0.0,
        fallback_rate=fallback / step if step else 0.0,
        crossing_times=crossings, timings_us=timing_summary(samples),
        wall_time=time.perf_counter() - wall0)
    return RunResult(metrics, records)


def save_run(result: RunResult, out_dir, config: RunConfig | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trajectory.write(out / "trajectory.csv", result.records)
    (out / "metrics.json").write_text(result.metrics.to_json())
    if config is not None and config.course_file:
        (out / "course.yaml").write_text(Path(config.course_file).read_text())


# ------------------------------------------------------------------ detect --

def detect_frames(frames_dir, cfg: PipelineConfig):
    """Yield one JSON-ready record per PGM frame in ``frames_dir`` (sorted by name)."""
    tracker = TrackerState()
    files = sorted(p for p in Path(frames_dir).iterdir() if p.suffix.lower() == ".pgm")
    for i, path in enumerate(files):
        frame = read_pgm(path)
        timings = {}
        try:
            obs = detect_disks(frame, cfg, tracker, timings)
        except DegenerateQuadrangle:
            obs = None
        yield {
            "frame_id": i,
            "file": path.name,
            "mode": "none" if obs is None else obs.mode,
            "points": None if obs is None else [list(p) for p in obs.points],
            "centroid": None if obs is None else list(obs.centroid),
            "elapsed_per_stage_ns": {s: int(timings.get(s, 0)) for s in STAGES},
        }


# ------------------------------------------------------------------- bench --

def bench_frames():
    """Representative frames: head-on, oblique, close and broken, with clutter."""
    from .sim.course import Clutter, GatePose
    from .sim.patterns import BlobDecoy, Break, GateMarker, OutlineDecoy
    from .sim.course import RenderOptions

    gate = GatePose(3.0, 0.0, 0.0)
    broken = GatePose(3.0, 0.0, 0.0, pattern=GateMarker().with_breaks(Break("right", 0.0, 0.1)))
    clutter = (Clutter(3.2, 0.8, 0.0, OutlineDecoy()), Clutter(3.4, -0.9, 0.0, BlobDecoy(seed=3)))
    noisy = RenderOptions(spot_count=6, noise_sigma=4.0, seed=1)
    course = Course((gate,), clutter, render=noisy)
    broken_course = Course((broken,), clutter, render=noisy)
    cam = course.camera
    frames = []
    for dist, lat, yaw in ((2.5, 0.0, 0.0), (1.5, 0.2, 0.15), (1.0, -0.1, -0.1), (0.6, 0.0, 0.05)):
        st = pose_in_front(gate, dist, cam)
        st = VehicleState(st.x, st.y + lat, yaw)
        frames.append((render(course, st), None))
        f_prev = render(Course((gate,)), st)
        prev = detect_disks(f_prev, PipelineConfig(), TrackerState())
        frames.append((render(broken_course, st), None if prev is None else list(prev.points)))
    return frames


def bench(iterations: int = 200, cfg: PipelineConfig = PipelineConfig()) -> dict:
    """Per-stage timing of detection plus control over representative frames."""
    frames = bench_frames()
    ctl = GateController(ReferenceMarker(((110, 110), (110, 145), (145, 110), (145, 145))))
    samples = {s: [] for s in TIMING_STAGES + ("total",)}
    # warm the JIT before measuring
    detect_disks(frames[0][0], cfg, TrackerState())
    for i in range(iterations):
        frame, prev = frames[i % len(frames)]
        tracker = TrackerState(previous_points=prev)
        timings = {}
        t0 = time.perf_counter_ns()
        obs = detect_disks(frame, cfg, tracker, timings)
        tc = time.perf_counter_ns()
        ctl.update(obs)
        t1 = time.perf_counter_ns()
        timings["control"] = t1 - tc
        for s in TIMING_STAGES:
            samples[s].append(timings.get(s, 0))
        samples["total"].append(t1 - t0)
    summary = timing_summary(samples)
    mean_ms = summary["total"]["mean"] / 1e3
    return {"iterations": iterations, "stages_us": summary, "total_mean_ms": mean_ms,
            "budget_ms": FRAME_BUDGET_MS, "within_budget": mean_ms <= FRAME_BUDGET_MS}


def format_bench(report: dict) -> str:
    lines = [f"{'stage':<12}{'mean (us)':>12}{'p99 (us)':>12}"]
    for stage in TIMING_STAGES + ("total",):
        s = report["stages_us"][stage]
        lines.append(f"{stage:<12}{s['mean']:>12.1f}{s['p99']:>12.1f}")
    verdict = "within" if report["within_budget"] else "OVER"
    lines.append(f"mean frame {report['total_mean_ms']:.3f} ms: {verdict} the "
                 f"{report['budget_ms']:.0f} ms budget (200 fps)")
    return "\n".join(lines)


def configure_logging():
    level = os.environ.get("PPANAV_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
