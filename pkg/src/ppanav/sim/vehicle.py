"""Kinematic bicycle model of the car-like rover."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 0.26
    width: float = 0.18
    length: float = 0.40
    rear_overhang: float = 0.07  # rear bumper to rear axle
    max_steer: float = 0.45
    steer_rate: float = 6.0  # rad/s servo slew limit
    v_cmd: float = 2.2

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")
        if self.v_cmd < 0:
            raise ValueError("commanded speed must be non-negative")


@dataclass(frozen=True)
class VehicleState:
    """Rear-axle position (m), heading (rad), front-wheel angle (rad), speed (m/s)."""

    x: float
    y: float
    theta: float
    phi: float = 0.0
    v: float = 0.0

    def point_ahead(self, offset: float):
        return (self.x + offset * math.cos(self.theta),
                self.y + offset * math.sin(self.theta))


def step_vehicle(state: VehicleState, steer: float, dt: float,
                 params: VehicleParams) -> VehicleState:
    """Advance one explicit-Euler step.

    The wheel angle slews toward ``steer`` at no more than ``steer_rate``,
    then the pose integrates at the constant commanded speed.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    target = max(-params.max_steer, min(params.max_steer, steer))
    max_delta = params.steer_rate * dt
    phi = state.phi + max(-max_delta, min(max_delta, target - state.phi))
    v = params.v_cmd
    return VehicleState(
        x=state.x + v * math.cos(state.theta) * dt,
        y=state.y + v * math.sin(state.theta) * dt,
        theta=state.theta + v / params.wheelbase * math.tan(phi) * dt,
        phi=phi,
        v=v,
    )


def body_corners(state: VehicleState, params: VehicleParams):
    """Footprint corners in world coordinates, counter-clockwise from rear right."""
    c, s = math.cos(state.theta), math.sin(state.theta)
    back, front = -params.rear_overhang, params.length - params.rear_overhang
    hw = params.width / 2
    out = []
    for bx, by in ((back, -hw), (front, -hw), (front, hw), (back, hw)):
        out.append((state.x + c * bx - s * by, state.y + s * bx + c * by))
    return out


def rect_hits_circle(state: VehicleState, params: VehicleParams,
                     cx: float, cy: float, radius: float) -> bool:
    """Whether the body rectangle intersects a disk on the ground."""
    c, s = math.cos(state.theta), math.sin(state.theta)
    dx, dy = cx - state.x, cy - state.y
    bx = c * dx + s * dy
    by = -s * dx + c * dy
    back, front = -params.rear_overhang, params.length - params.rear_overhang
    hw = params.width / 2
    nx = min(max(bx, back), front)
    ny = min(max(by, -hw), hw)
    return (bx - nx) ** 2 + (by - ny) ** 2 <= radius * radius

