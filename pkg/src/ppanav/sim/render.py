"""Pinhole rendering of the arena into 256x256 grey frames.

Patterns are vertical planes. Because the optical axis stays horizontal, the
ray parameter at which a pixel's ray meets a vertical plane depends only on
the pixel column, so each pattern costs one column sweep plus an outer
product for the vertical coordinate. Pixels are point-sampled at their
centres; there is no anti-aliasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ppa import GreyImage
from .course import CameraModel, Course, RenderOptions
from .vehicle import VehicleState


@dataclass(frozen=True)
class CameraPose:
    origin: np.ndarray  # (3,)
    forward: np.ndarray
    left: np.ndarray
    up: np.ndarray


def camera_pose(state: VehicleState, camera: CameraModel) -> CameraPose:
    c, s = math.cos(state.theta), math.sin(state.theta)
    origin = np.array([state.x + camera.mount_offset * c,
                       state.y + camera.mount_offset * s, camera.height])
    return CameraPose(origin, np.array([c, s, 0.0]), np.array([-s, c, 0.0]),
                      np.array([0.0, 0.0, 1.0]))


def project(point, state: VehicleState, camera: CameraModel):
    """(row, col) of a world point, or None when it is not in front."""
    pose = camera_pose(state, camera)
    rel = np.asarray(point, dtype=float) - pose.origin
    depth = rel @ pose.forward
    if depth <= 1e-9:
        return None
    cx = camera.principal
    col = cx - camera.f_px * (rel @ pose.left) / depth
    row = cx - camera.f_px * (rel @ pose.up) / depth
    return (float(row), float(col))


def _plane_axes(item):
    n = np.array([math.cos(item.facing), math.sin(item.facing), 0.0])
    u = np.array([math.sin(item.facing), -math.cos(item.facing), 0.0])
    return n, u


def pattern_point(item, u, v):
    """World position of pattern coordinate (u, v) on a gate or clutter item."""
    _, uax = _plane_axes(item)
    return np.array([item.x + u * uax[0], item.y + u * uax[1], item.height + v])


def faces_camera(item, pose: CameraPose) -> bool:
    n, _ = _plane_axes(item)
    centre = np.array([item.x, item.y, item.height])
    return float((pose.origin - centre) @ n) < 0.0


@dataclass
class VisiblePattern:
    """Ground truth for one drawn pattern (test interface)."""

    index: int  # position in course.gates, or -1 - i for clutter item i
    kind: str
    depth: float  # forward distance from camera to the pattern centre
    disk_centres: list  # projected (row, col) of each disk centre, TL TR BL BR


def _paint(canvas, depth_buf, item, pattern, pose, camera, opts):
    n, uax = _plane_axes(item)
    centre = np.array([item.x, item.y, item.height])
    f = camera.f_px
    cx = camera.principal
    cols = np.arange(camera.size, dtype=float)
    lateral = (cx - cols) / f
    # ray(c) = forward + lateral[c] * left + vertical[r] * up
    dn = pose.forward @ n + lateral * (pose.left @ n)
    du = pose.forward @ uax + lateral * (pose.left @ uax)
    offset = centre - pose.origin
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (offset @ n) / dn
    o_u = -(offset @ uax)
    o_v = -(offset[2])
    u = o_u + t * du
    hw, hh = pattern.half_extent
    col_ok = (t > 1e-6) & (np.abs(u) <= hw)
    if not col_ok.any():
        return
    ci = np.nonzero(col_ok)[0]
    rows = np.arange(camera.size, dtype=float)
    vertical = (cx - rows) / f
    v = o_v + np.outer(vertical, t[ci])
    on_board = np.abs(v) <= hh
    closer = t[ci][None, :] < depth_buf[:, ci]
    draw = on_board & closer
    if not draw.any():
        return
    black = pattern.ink(np.broadcast_to(u[ci][None, :], v.shape), v)
    sub = canvas[:, ci]
    sub[draw] = np.where(black[draw], opts.black, opts.white)
    canvas[:, ci] = sub
    dsub = depth_buf[:, ci]
    dsub[draw] = np.broadcast_to(t[ci][None, :], v.shape)[draw]
    depth_buf[:, ci] = dsub


def _noise(canvas, opts: RenderOptions, rng: np.random.Generator):
    size = canvas.shape[0]
    lo, hi = opts.spot_radius
    for _ in range(opts.spot_count):
        r0, c0 = rng.uniform(0, size, 2)
        a, b = rng.uniform(lo, hi, 2)
        r_lo, r_hi = max(0, int(r0 - a)), min(size, int(r0 + a) + 2)
        c_lo, c_hi = max(0, int(c0 - b)), min(size, int(c0 + b) + 2)
        rr, cc = np.mgrid[r_lo:r_hi, c_lo:c_hi]
        window = canvas[r_lo:r_hi, c_lo:c_hi]
        window[((rr - r0) / a) ** 2 + ((cc - c0) / b) ** 2 <= 1.0] = opts.spot_level
    if opts.noise_sigma > 0:
        canvas += rng.normal(0.0, opts.noise_sigma, canvas.shape)


def render_with_truth(course: Course, state: VehicleState, camera: CameraModel | None = None,
                      opts: RenderOptions | None = None, rng: np.random.Generator | None = None):
    """Render a frame and report projected disk centres of drawn patterns."""
    camera = camera or course.camera
    opts = opts or course.render
    if rng is None:
        rng = np.random.default_rng(opts.seed)
    pose = camera_pose(state, camera)
    canvas = np.full((camera.size, camera.size), float(opts.background))
    depth_buf = np.full((camera.size, camera.size), np.inf)
    truth = []
    items = [(i, g) for i, g in enumerate(course.gates)]
    items += [(-1 - i, c) for i, c in enumerate(course.clutter)]
    for index, item in items:
        if not faces_camera(item, pose):
            continue
        centre = np.array([item.x, item.y, item.height])
        depth = float((centre - pose.origin) @ pose.forward)
        if depth <= 0:
            continue
        _paint(canvas, depth_buf, item, item.pattern, pose, camera, opts)
        centres = []
        if item.pattern.kind == "gate":
            for u, v in item.pattern.disk_centres():
                centres.append(project(pattern_point(item, u, v), state, camera))
        truth.append(VisiblePattern(index, item.pattern.kind, depth, centres))
    _noise(canvas, opts, rng)
    frame = GreyImage(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))
    return frame, truth


def render(course: Course, state: VehicleState, camera: CameraModel | None = None,
           opts: RenderOptions | None = None, rng: np.random.Generator | None = None) -> GreyImage:
    return render_with_truth(course, state, camera, opts, rng)[0]
