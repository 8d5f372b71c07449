"""Steering from marker observations: quadrant correspondence and dual PID.

Both error channels act on the horizontal image axis (columns):

* ``d`` is the column offset of the observed quadrangle's centroid from the
  reference centroid. Positive means the pattern sits right of where it
  should be.
* ``delta`` is ``(col3 + col4) - (col1 + col2)``, twice the horizontal skew
  of the bottom-edge midpoint against the top-edge midpoint, less the same
  quantity for the reference.

Quadrants are numbered 1 = top-left, 2 = top-right, 3 = bottom-left,
4 = bottom-right. Steering angles are positive to the left, so a pattern to
the right (positive error) produces a negative, rightward command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .ppa import PixelCoord


class DegenerateQuadrangle(ValueError):
    """Four points that cannot be split one per quadrant."""


def order_by_quadrant(points: Sequence[Sequence[float]]):
    """Sort four points into TL, TR, BL, BR about their mean.

    Returns ``(ordered, centroid)`` with ``centroid`` the exact per-axis mean.
    The result does not depend on the input order.
    """
    pts = [tuple(p) for p in points]
    if len(pts) != 4:
        raise DegenerateQuadrangle(f"need 4 points, got {len(pts)}")
    if len(set(pts)) != 4:
        raise DegenerateQuadrangle("points are not distinct")
    cr = sum(p[0] for p in pts) / 4.0
    cc = sum(p[1] for p in pts) / 4.0
    slots = [None] * 4
    for p in pts:
        dr, dc = p[0] - cr, p[1] - cc
        if dr == 0 or dc == 0:
            raise DegenerateQuadrangle(f"point {p} lies on a centroid axis")
        idx = (0 if dr < 0 else 2) + (0 if dc < 0 else 1)
        if slots[idx] is not None:
            raise DegenerateQuadrangle(f"two points in quadrant {idx + 1}")
        slots[idx] = p
    return tuple(slots), (cr, cc)


def floor_centroid(points) -> PixelCoord:
    n = len(points)
    return PixelCoord(math.floor(sum(p[0] for p in points) / n),
                      math.floor(sum(p[1] for p in points) / n))


@dataclass(frozen=True)
class ReferenceMarker:
    """Disk centres seen head-on at a known distance; the control fixed point."""

    points: tuple

    def __post_init__(self):
        ordered, _ = order_by_quadrant(self.points)
        if tuple(ordered) != tuple(tuple(p) for p in self.points):
            raise ValueError("reference points must be in TL, TR, BL, BR order")
        pts = tuple(PixelCoord(*p) for p in self.points)
        object.__setattr__(self, "points", pts)

    @property
    def centroid(self) -> PixelCoord:
        return floor_centroid(self.points)


class ControlError(NamedTuple):
    d: float
    delta: float


def skew(points) -> float:
    """(col3 + col4) - (col1 + col2) of a quadrant-ordered quadrangle."""
    return (points[2][1] + points[3][1]) - (points[0][1] + points[1][1])


def compute_errors(obs, ref: ReferenceMarker) -> ControlError:
    """Centroid offset and top/bottom skew, both in pixel columns.

    The skew is taken relative to the reference's own skew, which is zero
    for a rectangular reference.
    """
    d = obs.centroid.col - ref.centroid.col
    return ControlError(d, skew(obs.points) - skew(ref.points))


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0


@dataclass
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    integral_clamp: float = math.inf

    def reset(self):
        self.integral = 0.0
        self.prev_error = 0.0


def pid_step(state: PidState, gains: PidGains, e: float) -> float:
    """One unit-step discrete PID update; no dt factor, gains absorb the rate."""
    lim = state.integral_clamp
    state.integral = max(-lim, min(lim, state.integral + e))
    out = gains.kp * e + gains.ki * state.integral + gains.kd * (e - state.prev_error)
    state.prev_error = e
    return out


@dataclass(frozen=True)
class ControllerConfig:
    lateral: PidGains = PidGains(0.006, 0.0, 0.002)
    skew: PidGains = PidGains(0.003, 0.0, 0.001)
    pixels_to_radians: float = 1.0
    max_steer: float = 0.45
    hold_frames: int = 5
    decay: float = 0.9

    def integral_clamp(self, gains: PidGains) -> float:
        # the integral term alone can at most saturate the wheels
        return self.max_steer / gains.ki if gains.ki > 0 else math.inf


@dataclass(frozen=True)
class SteeringCommand:
    angle: float
    clamped: bool = False
    out1: float = 0.0
    out2: float = 0.0


def fresh_states(cfg: ControllerConfig):
    return (PidState(integral_clamp=cfg.integral_clamp(cfg.lateral)),
            PidState(integral_clamp=cfg.integral_clamp(cfg.skew)))


def steering_output(err: ControlError, states, gains1: PidGains, gains2: PidGains,
                    cfg: ControllerConfig) -> SteeringCommand:
    out1 = pid_step(states[0], gains1, err.d)
    out2 = pid_step(states[1], gains2, err.delta)
    angle = -cfg.pixels_to_radians * (out1 + out2)
    clamped = abs(angle) > cfg.max_steer
    if clamped:
        angle = math.copysign(cfg.max_steer, angle)
    return SteeringCommand(angle, clamped, out1, out2)


def loss_policy(last: SteeringCommand, frames_lost: int, cfg: ControllerConfig) -> SteeringCommand:
    """Hold the last command for a few frames, then let it decay to straight."""
    if frames_lost < 1:
        raise ValueError("frames_lost must be at least 1")
    if frames_lost <= cfg.hold_frames:
        return last
    factor = cfg.decay ** (frames_lost - cfg.hold_frames)
    return SteeringCommand(last.angle * factor, False, 0.0, 0.0)


@dataclass
class GateController:
    """Per-vehicle steering state machine for gate following."""

    reference: ReferenceMarker
    cfg: ControllerConfig = field(default_factory=ControllerConfig)

    def __post_init__(self):
        self.states = fresh_states(self.cfg)
        self.last = SteeringCommand(0.0)
        self.frames_lost = 0
        self.last_error = None

    def update(self, obs) -> SteeringCommand:
        if obs is None:
            self.frames_lost += 1
            self.last_error = None
            return loss_policy(self.last, self.frames_lost, self.cfg)
        if self.frames_lost:
            # a fresh lock must not differentiate against a stale error
            for s in self.states:
                s.reset()
        self.frames_lost = 0
        self.last_error = compute_errors(obs, self.reference)
        self.last = steering_output(self.last_error, self.states,
                                    self.cfg.lateral, self.cfg.skew, self.cfg)
        return self.last


# ---------------------------------------------------------------- slalom --

@dataclass(frozen=True)
class SlalomConfig:
    turn_range: float = 0.80
    turn_steer: float = 0.30
    centre_gain: float = 0.004  # rad per pixel of marker offset
    image_centre: float = 127.5
    wheelbase: float = 0.26
    v_cmd: float = 3.88
    max_steer: float = 0.45
    steer_rate: float = 6.0  # servo slew limit, rad/s, used to predict the heading change
    rearm_range: float = 1.3  # markers closer than this after a turn are the one just passed


@dataclass(frozen=True)
class SteeringProgram:
    phase: str  # "centre" or "turn"
    angle: float
    duration: float = 0.0  # seconds, for the turn phase


def slalom_schedule(cmd, cfg: SlalomConfig) -> SteeringProgram:
    """Centre on the marker until it is within turn range, then turn."""
    if cmd.range_estimate <= 0:
        raise ValueError("range estimate must be positive")
    if cmd.range_estimate > cfg.turn_range:
        offset = cmd.centre.col - cfg.image_centre
        angle = max(-cfg.max_steer, min(cfg.max_steer, -cfg.centre_gain * offset))
        return SteeringProgram("centre", angle)
    sign = 1.0 if cmd.direction == "left" else -1.0
    yaw_rate = cfg.v_cmd * math.tan(cfg.turn_steer) / cfg.wheelbase
    return SteeringProgram("turn", sign * cfg.turn_steer,
                           math.radians(cmd.angle) / yaw_rate)


@dataclass
class SlalomController:
    """Runs turn programs open loop, then goes back to looking for markers.

    A turn is a weave: the commanded angle in the marker's direction, then
    the same angle back, so the rover passes the marker on that side and
    ends up facing down the line of markers again. Phases end on the
    heading change predicted from the controller's own commands (bicycle
    model with the servo slew), since the wheels take a while to swing.
    """

    cfg: SlalomConfig = field(default_factory=SlalomConfig)
    substep: float = 0.001

    def __post_init__(self):
        self.phase = "acquire"
        self.armed = True
        self.phi = 0.0  # predicted wheel angle
        self.yaw = 0.0  # predicted heading change since the turn began
        self.sign = 0.0
        self.target = 0.0

    def _yaw_rate(self, phi):
        return self.cfg.v_cmd * math.tan(phi) / self.cfg.wheelbase

    def _advance(self, angle, dt):
        n = max(1, round(dt / self.substep))
        h = dt / n
        for _ in range(n):
            step = self.cfg.steer_rate * h
            self.phi += max(-step, min(step, angle - self.phi))
            self.yaw += self._yaw_rate(self.phi) * h

    def _unwind(self, phi):
        # heading still gained while the wheels slew from phi back to zero
        t = abs(phi) / self.cfg.steer_rate
        n = max(1, round(t / self.substep))
        return sum(self._yaw_rate(phi * (1 - (i + 0.5) / n)) for i in range(n)) * t / n

    def _program_step(self, dt):
        s, steer = self.sign, self.cfg.turn_steer
        # the heading keeps turning until the wheels swing back through zero
        if self.phase == "turn" and s * (self.yaw + self._unwind(self.phi)) >= self.target:
            self.phase = "return"
        if self.phase == "return" and s * (self.yaw + self._unwind(self.phi)) <= 0.0:
            self.phase = "settle"
        if self.phase == "settle":
            angle = 0.0
            if abs(self.phi) < 1e-9:
                self.phase = "acquire"
                return None
        else:
            angle = s * steer if self.phase == "turn" else -s * steer
        self._advance(angle, dt)
        return SteeringCommand(angle)

    def update(self, cmd, dt: float) -> SteeringCommand:
        if self.phase in ("turn", "return", "settle"):
            out = self._program_step(dt)
            if out is not None:
                return out
        if cmd is not None and not self.armed and cmd.range_estimate < self.cfg.rearm_range:
            cmd = None
        if cmd is None:
            self.phase = "acquire"
            self._advance(0.0, dt)
            return SteeringCommand(0.0)
        self.armed = True
        program = slalom_schedule(cmd, self.cfg)
        if program.phase != "turn":
            self.phase = program.phase
            self._advance(program.angle, dt)
            return SteeringCommand(program.angle)
        self.phase = "turn"
        self.armed = False
        self.sign = math.copysign(1.0, program.angle)
        self.target = math.radians(cmd.angle)
        self.yaw = 0.0
        return self._program_step(dt)
