"""``ppanav`` command line: run, calibrate, detect, bench, plot."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import yaml

from . import harness, plots, trajectory
from .pnm import PnmError
from .sim.course import load_course
from .sim.vehicle import VehicleState

EXIT_OK, EXIT_CONFIG, EXIT_RUN_FAILED, EXIT_CALIBRATION = 0, 2, 3, 4

log = logging.getLogger("ppanav")


def _pose(text: str) -> VehicleState:
    try:
        x, y, deg = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,theta_deg, got {text!r}") from None
    return VehicleState(x, y, math.radians(deg))


def _course(path):
    try:
        return load_course(path)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise harness.ConfigError(f"{path}: {exc}") from exc


def cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    result = harness.run(cfg)
    harness.save_run(result, args.out, cfg)
    m = result.metrics
    print(f"{m.termination}: {m.gates_passed}/{m.gates_total} gates, {m.collisions} collisions, "
          f"avg speed {m.avg_speed:.3f} m/s, {m.sim_time:.2f} s simulated")
    return EXIT_RUN_FAILED if m.failed else EXIT_OK


def cmd_calibrate(args) -> int:
    course = _course(args.course)
    ref = harness.calibrate(course, args.pose)
    harness.write_reference(args.out, ref, args.pose)
    print(" ".join(f"({r},{c})" for r, c in ref.points))
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = harness.load_config(args.config).pipeline if args.config else harness.PipelineConfig()
    frames = Path(args.frames)
    if not frames.is_dir():
        raise harness.ConfigError(f"{frames}: not a directory")
    for rec in harness.detect_frames(frames, cfg):
        print(json.dumps(rec))
    return EXIT_OK


def cmd_bench(args) -> int:
    report = harness.bench(args.iters)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(harness.format_bench(report))
    return EXIT_OK


def cmd_plot(args) -> int:
    records = trajectory.read(args.traj)
    course_file = args.course
    if course_file is None:
        beside = Path(args.traj).with_name("course.yaml")
        course_file = beside if beside.exists() else None
    course = _course(course_file) if course_file else None
    for p in plots.write_plots(records, args.out, course):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ppanav", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="closed-loop scenario run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("calibrate", help="capture a reference marker from a pose")
    p.add_argument("--course", required=True)
    p.add_argument("--pose", required=True, type=_pose, help="x,y,theta (metres, degrees)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="detect disks in a directory of PGM frames")
    p.add_argument("--frames", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="per-stage timing of the detection pipeline")
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="SVG plots from a trajectory CSV")
    p.add_argument("--traj", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--course")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    harness.configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except harness.CalibrationFailed as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (trajectory.ParseError, PnmError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
