"""Arena description: gates, slalom markers, clutter, and course files."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import yaml

from .patterns import BlobDecoy, GateMarker, OutlineDecoy, SlalomMarker
from .vehicle import VehicleParams, VehicleState, rect_hits_circle


class CourseError(ValueError):
    pass


@dataclass(frozen=True)
class CameraModel:
    f_px: float = 220.0
    mount_offset: float = 0.26  # ahead of the rear axle, on the centreline
    height: float = 0.25
    size: int = 256

    def __post_init__(self):
        if self.f_px <= 0:
            raise ValueError("focal length must be positive")

    @property
    def principal(self):
        return (self.size - 1) / 2.0


@dataclass(frozen=True)
class RenderOptions:
    background: int = 200
    white: int = 235
    black: int = 25
    spot_count: int = 0
    spot_radius: tuple = (1.0, 3.0)
    spot_level: int = 255
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("background", "white", "black", "spot_level"):
            if not 0 <= getattr(self, name) <= 255:
                raise ValueError(f"{name} must lie in [0, 255]")


@dataclass(frozen=True)
class GatePose:
    """A gate (two posts) or slalom marker (one stand) carrying a pattern.

    ``facing`` is the direction of travel through it; the pattern faces the
    approaching rover and is mounted at ``height`` (pattern centre).
    """

    x: float
    y: float
    facing: float
    pattern: object = field(default_factory=GateMarker)
    width: float = 0.36
    height: float = 0.25
    post_radius: float = 0.02
    stand_radius: float = 0.04

    @property
    def kind(self):
        return self.pattern.kind

    @property
    def normal(self):
        return (math.cos(self.facing), math.sin(self.facing))

    @property
    def right(self):
        # viewer's right when looking along the travel direction
        return (math.sin(self.facing), -math.cos(self.facing))

    def obstacles(self):
        """Ground footprints as (x, y, radius)."""
        if self.kind == "slalom":
            return [(self.x, self.y, self.stand_radius)]
        rx, ry = self.right
        off = self.width / 2 + self.post_radius
        return [(self.x + rx * off, self.y + ry * off, self.post_radius),
                (self.x - rx * off, self.y - ry * off, self.post_radius)]

    def local(self, px, py):
        """(along-normal, along-right) coordinates of a ground point."""
        dx, dy = px - self.x, py - self.y
        nx, ny = self.normal
        rx, ry = self.right
        return dx * nx + dy * ny, dx * rx + dy * ry


@dataclass(frozen=True)
class Clutter:
    x: float
    y: float
    facing: float
    pattern: object = field(default_factory=OutlineDecoy)
    height: float = 0.25
    stand_radius: float = 0.03

    def obstacles(self):
        return [(self.x, self.y, self.stand_radius)]


@dataclass(frozen=True)
class Course:
    gates: tuple
    clutter: tuple = ()
    bounds: tuple = (-10.0, 10.0, -10.0, 10.0)  # xmin, xmax, ymin, ymax
    start: VehicleState = VehicleState(0.0, 0.0, 0.0)
    vehicle: VehicleParams = VehicleParams()
    camera: CameraModel = CameraModel()
    render: RenderOptions = RenderOptions()

    def __post_init__(self):
        xmin, xmax, ymin, ymax = self.bounds
        for g in self.gates:
            if not (xmin <= g.x <= xmax and ymin <= g.y <= ymax):
                raise CourseError(f"gate at ({g.x}, {g.y}) outside the arena")
        for i, a in enumerate(self.gates):
            for b in self.gates[i + 1:]:
                if math.hypot(a.x - b.x, a.y - b.y) < a.width + b.width:
                    raise CourseError(f"gates at ({a.x}, {a.y}) and ({b.x}, {b.y}) overlap")

    @property
    def is_slalom(self):
        return bool(self.gates) and all(g.kind == "slalom" for g in self.gates)

    def in_bounds(self, x, y):
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def patterns(self):
        """Every (pose, pattern) the renderer draws."""
        return [(g, g.pattern) for g in self.gates] + [(c, c.pattern) for c in self.clutter]


# How far to the side of a slalom marker a pass still counts.
SLALOM_PASS_WINDOW = 2.0


def gate_passed(prev: VehicleState, cur: VehicleState, gate: GatePose,
                ref_offset: float = 0.0) -> bool:
    """Did the reference point cross the gate segment, moving with ``facing``?

    The reference point sits ``ref_offset`` metres ahead of the rear axle.
    For a slalom marker the segment is the stretch beside the stand on the
    side its arrow points to.
    """
    p0 = prev.point_ahead(ref_offset)
    p1 = cur.point_ahead(ref_offset)
    s0, u0 = gate.local(*p0)
    s1, u1 = gate.local(*p1)
    if not (s0 < 0.0 <= s1):
        return False
    f = -s0 / (s1 - s0)
    u = u0 + f * (u1 - u0)
    if gate.kind == "slalom":
        sign = 1.0 if gate.pattern.direction == "right" else -1.0
        return 0.0 < sign * u <= SLALOM_PASS_WINDOW
    return abs(u) <= gate.width / 2


def collision(cur: VehicleState, course: Course, params: VehicleParams) -> bool:
    """Body rectangle touches a gate post or marker stand."""
    for item in tuple(course.gates) + tuple(course.clutter):
        for cx, cy, r in item.obstacles():
            if rect_hits_circle(cur, params, cx, cy, r):
                return True
    return False


def _pattern_from(spec: dict, default_seed: int):
    kind = spec.get("kind", "gate")
    if kind == "gate":
        return GateMarker(**spec.get("pattern", {}))
    if kind == "slalom":
        return SlalomMarker(direction=spec.get("direction", "left"), k=int(spec.get("k", 2)),
                            **spec.get("pattern", {}))
    if kind == "outline":
        return OutlineDecoy(**spec.get("pattern", {}))
    if kind == "random":
        return BlobDecoy(seed=int(spec.get("seed", default_seed)), **spec.get("pattern", {}))
    raise CourseError(f"unknown pattern kind {kind!r}")


def _pose_fields(spec, allowed):
    return {k: float(spec[k]) for k in allowed if k in spec}


def course_from_dict(data: dict) -> Course:
    try:
        gates = []
        for i, g in enumerate(data.get("gates", [])):
            gates.append(GatePose(float(g["x"]), float(g["y"]), math.radians(float(g["facing_deg"])),
                                  pattern=_pattern_from(g, i),
                                  **_pose_fields(g, ("width", "height", "post_radius", "stand_radius"))))
        clutter = []
        for i, c in enumerate(data.get("clutter", [])):
            spec = dict(c)
            spec.setdefault("kind", "outline")
            clutter.append(Clutter(float(c["x"]), float(c["y"]), math.radians(float(c["facing_deg"])),
                                   pattern=_pattern_from(spec, 1000 + i),
                                   **_pose_fields(c, ("height", "stand_radius"))))
        arena = data.get("arena", {})
        bounds = tuple(float(arena.get(k, d)) for k, d in
                       (("xmin", -10), ("xmax", 10), ("ymin", -10), ("ymax", 10)))
        veh = dict(data.get("vehicle", {}))
        sx, sy, sdeg = veh.pop("start", (0.0, 0.0, 0.0))
        params = VehicleParams(**{k: float(v) for k, v in veh.items()})
        camera = CameraModel(**{k: (int(v) if k == "size" else float(v))
                                for k, v in data.get("camera", {}).items()})
        noise = dict(data.get("noise", {}))
        if "spot_radius" in noise:
            noise["spot_radius"] = tuple(float(v) for v in noise["spot_radius"])
        render = RenderOptions(**noise)
        return Course(tuple(gates), tuple(clutter), bounds,
                      VehicleState(float(sx), float(sy), math.radians(float(sdeg)), 0.0, params.v_cmd),
                      params, camera, render)
    except (KeyError, TypeError) as exc:
        raise CourseError(f"malformed course description: {exc}") from exc


def load_course(path: str | os.PathLike) -> Course:
    with open(path) as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise CourseError(f"{path}: expected a mapping at top level")
    return course_from_dict(data)
