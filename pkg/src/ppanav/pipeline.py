"""Per-frame gate-marker detection on the emulated array.

A gate pattern is four black disks inside two concentric black square
outlines on white. After thresholding (white = 1), each flooding round
strips one nesting level (background, outer outline, gap, inner outline),
so four rounds leave the disks white on black. When the outlines are
broken, disks are recovered by flooding outward from where they were in
the previous frame.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import NamedTuple

from . import ppa
from .guidance import DegenerateQuadrangle, floor_centroid, order_by_quadrant
from .ppa import BORDER, BitImage, GreyImage, PixelCoord, Points

DIRECT = "direct"
FALLBACK = "fallback"

STAGES = ("threshold", "flooding", "denoise", "centroid")


class Underflow(RuntimeError):
    """Fewer blobs than expected were found while extracting centres."""


@dataclass(frozen=True)
class PipelineConfig:
    threshold_level: int = 128
    flood_steps: int = 4
    disc_num: int = 4
    p_step: int = 2
    min_disk_area: int = 4
    loss_patience: int = 10
    # a direct detection this far (px) from the tracked centroid is another pattern
    max_track_jump: float = 24.0
    # slalom range estimate: focal length (px) and height inside the outer outline (m)
    focal_px: float = 220.0
    marker_height: float = 0.44
    anchor_ratio: float = 2.0

    def __post_init__(self):
        if self.flood_steps < 1 or self.disc_num < 1 or self.p_step < 1:
            raise ValueError("flood_steps, disc_num and p_step must be at least 1")
        if not 0 <= self.threshold_level <= 255:
            raise ValueError("threshold_level must lie in [0, 255]")


@dataclass
class TrackerState:
    previous_points: list | None = None
    frames_since_lock: int = 0
    frames_seen: int = 0


class MarkerObservation(NamedTuple):
    points: tuple  # TL, TR, BL, BR
    centroid: PixelCoord
    mode: str
    frame_id: int


class SlalomCommand(NamedTuple):
    direction: str  # "left" or "right"
    angle: float  # degrees
    range_estimate: float  # metres
    centre: PixelCoord


class _Clock:
    def __init__(self, timings):
        self.timings = timings
        self.t = time.perf_counter_ns()

    def lap(self, stage):
        now = time.perf_counter_ns()
        if self.timings is not None:
            self.timings[stage] = self.timings.get(stage, 0) + now - self.t
        self.t = now


def eliminate_background(bin: BitImage, flood_steps: int, trace: list | None = None) -> BitImage:
    """Peel nesting levels off a thresholded frame by repeated border floods.

    Round k: F = flood(B, border); B = B and not F; then B is inverted on
    every round but the last, so the innermost level comes out white.
    ``trace``, when given, collects B after each round's removal step.
    """
    b = bin
    for k in range(1, flood_steps + 1):
        f = ppa.flood(b, BORDER)
        b = ppa.bit_and(b, ppa.bit_not(f))
        del f
        if trace is not None:
            trace.append(b)
        if k < flood_steps:
            b = ppa.bit_not(b)
    return b


def denoise(bin: BitImage, p_step: int) -> BitImage:
    """AND of the plane shifted p_step pixels in each of the four directions."""
    if p_step < 1:
        raise ValueError("p_step must be at least 1")
    out = ppa.shift(bin, ppa.NORTH, p_step)
    for direction in (ppa.SOUTH, ppa.EAST, ppa.WEST):
        out = ppa.bit_and(out, ppa.shift(bin, direction, p_step))
    return out


def extract_centroids(bin: BitImage, expected: int) -> list[PixelCoord]:
    """Bounding-box centres of ``expected`` blobs, in scan order of discovery."""
    centres = []
    for _ in range(expected):
        p = ppa.scan_event(bin)
        if p is None:
            raise Underflow(f"found {len(centres)} blobs, expected {expected}")
        blob = ppa.flood(bin, Points([p]))
        centres.append(ppa.scan_boundingbox(blob).centre)
        bin = ppa.bit_and(bin, ppa.bit_not(blob))
    return centres


def drop_specks(bin: BitImage, min_area: int):
    """Remove components smaller than ``min_area``; returns (plane, kept count)."""
    kept = 0
    for first, area in ppa.component_stats(bin):
        if area >= min_area:
            kept += 1
        else:
            bin = ppa.bit_xor(bin, ppa.flood(bin, Points([first])))
    return bin, kept


def _observation(centres, mode, frame_id) -> MarkerObservation:
    ordered, _ = order_by_quadrant(centres)
    pts = tuple(PixelCoord(*p) for p in ordered)
    return MarkerObservation(pts, floor_centroid(pts), mode, frame_id)


def _fallback(mask: BitImage, previous) -> list[PixelCoord] | None:
    centres = []
    for q in previous:
        if not mask[q]:
            return None
        blob = ppa.flood(mask, Points([q]))
        box = ppa.scan_boundingbox(blob)
        if box is None:
            return None
        centres.append(box.centre)
        mask = ppa.bit_xor(mask, blob)
    return centres


def _jumped(centres, previous, limit) -> bool:
    a = floor_centroid(centres)
    b = floor_centroid(previous)
    return math.hypot(a.row - b.row, a.col - b.col) > limit


def detect_disks(frame: GreyImage, cfg: PipelineConfig, tracker: TrackerState,
                 timings: dict | None = None) -> MarkerObservation | None:
    """Find the gate's four disks; None when there is no target this frame.

    Updates ``tracker`` in place. ``timings``, if given, accumulates wall
    time in nanoseconds per stage (see :data:`STAGES`).
    """
    clock = _Clock(timings)
    frame_id = tracker.frames_seen
    tracker.frames_seen += 1

    bin = ppa.threshold(frame, cfg.threshold_level)
    clock.lap("threshold")
    disks = eliminate_background(bin, cfg.flood_steps)
    clock.lap("flooding")
    disks = denoise(disks, cfg.p_step)
    clock.lap("denoise")
    disks, n = drop_specks(disks, cfg.min_disk_area)
    centres = None
    mode = DIRECT
    if n == cfg.disc_num:
        centres = extract_centroids(disks, n)
        if tracker.previous_points and _jumped(centres, tracker.previous_points, cfg.max_track_jump):
            centres = None
    del disks
    clock.lap("centroid")

    if centres is None and tracker.previous_points:
        mode = FALLBACK
        # erode the inverted frame: disks shrink about their centres instead
        # of growing into the inner outline
        mask = denoise(ppa.bit_not(bin), cfg.p_step)
        clock.lap("denoise")
        centres = _fallback(mask, tracker.previous_points)
        del mask
        clock.lap("flooding")

    if centres is not None:
        try:
            obs = _observation(centres, mode, frame_id)
        except DegenerateQuadrangle:
            if mode == FALLBACK:
                centres = None
            else:
                raise
        else:
            tracker.previous_points = list(obs.points)
            tracker.frames_since_lock = 0
            clock.lap("centroid")
            return obs

    tracker.frames_since_lock += 1
    if tracker.frames_since_lock > cfg.loss_patience:
        tracker.previous_points = None
    clock.lap("centroid")
    return None


def decode_slalom(frame: GreyImage, cfg: PipelineConfig, tracker: TrackerState,
                  timings: dict | None = None) -> SlalomCommand | None:
    """Read a slalom marker: anchor side gives the direction, small disks the angle.

    The range comes from the pixel height of the region enclosed by the
    outer outline: ``range = focal_px * marker_height / height_px``.
    """
    from .sim.patterns import SLALOM_STEP_DEG

    clock = _Clock(timings)
    tracker.frames_seen += 1
    bin = ppa.threshold(frame, cfg.threshold_level)
    clock.lap("threshold")
    trace = []
    blobs = eliminate_background(bin, cfg.flood_steps, trace)
    enclosed = trace[0]
    del trace, bin
    clock.lap("flooding")
    blobs = denoise(blobs, cfg.p_step)
    clock.lap("denoise")
    result = _read_slalom(blobs, enclosed, cfg, SLALOM_STEP_DEG)
    clock.lap("centroid")
    if result is None:
        tracker.frames_since_lock += 1
    else:
        tracker.frames_since_lock = 0
    return result


def _blob_boxes(img: BitImage, min_area: int):
    out = []
    for first, area in ppa.component_stats(img):
        if area < min_area:
            continue
        box = ppa.scan_boundingbox(ppa.flood(img, Points([first])))
        out.append((area, box))
    return out


def _read_slalom(blobs, enclosed, cfg, step_deg):
    found = _blob_boxes(blobs, cfg.min_disk_area)
    if len(found) < 2:
        return None
    found.sort(key=lambda ab: -ab[0])
    anchor_area, anchor = found[0]
    ac = anchor.centre
    # the gap ring is the widest enclosed region around the anchor
    ring = None
    for area, box in _blob_boxes(enclosed, 1):
        if box.min.row < ac.row < box.max.row and box.min.col < ac.col < box.max.col:
            if ring is None or box.height * box.width > ring.height * ring.width:
                ring = box
    if ring is None:
        return None
    small = [(a, b) for a, b in found[1:]
             if ring.min.row <= b.centre.row <= ring.max.row
             and ring.min.col <= b.centre.col <= ring.max.col]
    if not 1 <= len(small) <= 5:
        return None
    if anchor_area < cfg.anchor_ratio * max(a for a, _ in small):
        return None
    small_col = sum(b.centre.col for _, b in small) / len(small)
    direction = "left" if ac.col < small_col else "right"
    rng = cfg.focal_px * cfg.marker_height / ring.height
    return SlalomCommand(direction, len(small) * step_deg, rng, ring.centre)
