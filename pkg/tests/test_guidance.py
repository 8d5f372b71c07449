import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppanav.guidance import (ControlError, ControllerConfig, DegenerateQuadrangle, GateController,
                             PidGains, PidState, ReferenceMarker, SlalomConfig, SlalomController,
                             SteeringCommand, compute_errors, floor_centroid, fresh_states,
                             loss_policy, order_by_quadrant, pid_step, slalom_schedule,
                             steering_output)
from ppanav.pipeline import MarkerObservation, SlalomCommand
from ppanav.ppa import PixelCoord

SQUARE = ((100, 100), (100, 150), (150, 100), (150, 150))
REF = ReferenceMarker(SQUARE)


def obs_of(points, mode="direct"):
    pts = tuple(PixelCoord(*p) for p in points)
    return MarkerObservation(pts, floor_centroid(pts), mode, 0)


# --------------------------------------------------------------- quadrants --

class TestOrderByQuadrant:
    def test_shuffled_square(self):
        shuffled = [SQUARE[3], SQUARE[0], SQUARE[2], SQUARE[1]]
        ordered, centre = order_by_quadrant(shuffled)
        assert ordered == SQUARE
        assert centre == (125.0, 125.0)

    def test_already_ordered_unchanged(self):
        assert order_by_quadrant(SQUARE)[0] == SQUARE

    def test_permutation_invariance_random_quadrangles(self):
        g = np.random.default_rng(11)
        trials = 0
        while trials < 1000:
            c = g.uniform(40, 210, 2)
            # a perturbed rectangle stays convex and one-per-quadrant
            hw, hh = g.uniform(8, 40, 2)
            jit = g.uniform(-0.3, 0.3, (4, 2)) * min(hw, hh)
            base = np.array([[-hh, -hw], [-hh, hw], [hh, -hw], [hh, hw]])
            pts = [tuple(np.round(c + b + j).astype(int).tolist()) for b, j in zip(base, jit)]
            try:
                want = order_by_quadrant(pts)
            except DegenerateQuadrangle:
                continue
            trials += 1
            for perm in itertools.permutations(pts):
                assert order_by_quadrant(perm) == want

    def test_point_on_axis(self):
        with pytest.raises(DegenerateQuadrangle):
            order_by_quadrant([(0, 10), (10, 0), (10, 20), (20, 10)])

    def test_shared_quadrant(self):
        with pytest.raises(DegenerateQuadrangle):
            order_by_quadrant([(0, 0), (1, 1), (10, 20), (30, 2)])

    def test_duplicates(self):
        with pytest.raises(DegenerateQuadrangle):
            order_by_quadrant([(0, 0), (0, 0), (10, 10), (10, 0)])

    def test_wrong_count(self):
        with pytest.raises(DegenerateQuadrangle):
            order_by_quadrant(SQUARE[:3])


def test_reference_requires_canonical_order():
    with pytest.raises(ValueError):
        ReferenceMarker((SQUARE[1], SQUARE[0], SQUARE[2], SQUARE[3]))
    assert REF.centroid == PixelCoord(125, 125)


# ------------------------------------------------------------------ errors --

class TestErrors:
    def test_identity(self):
        assert compute_errors(obs_of(SQUARE), REF) == ControlError(0, 0)

    def test_translation(self):
        moved = [(r, c + 10) for r, c in SQUARE]
        assert compute_errors(obs_of(moved), REF) == ControlError(10, 0)

    def test_bottom_pair_shift(self):
        pts = [SQUARE[0], SQUARE[1], (150, 104), (150, 154)]
        assert compute_errors(obs_of(pts), REF) == ControlError(2, 8)

    @settings(max_examples=200)
    @given(st.lists(st.integers(-30, 30), min_size=8, max_size=8), st.integers(-60, 60))
    def test_self_reference_and_covariance(self, jitter, dc):
        pts = [(r + jitter[2 * i] // 4, c + jitter[2 * i + 1] // 4) for i, (r, c) in enumerate(SQUARE)]
        ordered, _ = order_by_quadrant(pts)
        ref = ReferenceMarker(ordered)
        base = compute_errors(obs_of(ordered), ref)
        assert base == ControlError(0, 0)
        moved = compute_errors(obs_of([(r, c + dc) for r, c in ordered]), ref)
        assert moved == ControlError(dc, 0)


# --------------------------------------------------------------------- PID --

class TestPid:
    def test_zero_error(self):
        assert pid_step(PidState(), PidGains(3, 2, 1), 0.0) == 0.0

    def test_proportional(self):
        assert pid_step(PidState(), PidGains(2, 0, 0), 3.0) == 6.0

    def test_hand_sequence(self):
        s, g = PidState(), PidGains(1, 0.5, 0.1)
        out = [pid_step(s, g, 1.0) for _ in range(3)]
        assert out == pytest.approx([1.6, 2.0, 2.5], rel=1e-12)

    def test_memoryless_p_only(self):
        s, g = PidState(), PidGains(0.7, 0, 0)
        for e in (3.0, -1.0, 8.0):
            assert pid_step(s, g, e) == 0.7 * e
            assert s.prev_error == e

    def test_integral_clamped(self):
        s = PidState(integral_clamp=2.0)
        for _ in range(10):
            pid_step(s, PidGains(0, 1, 0), 1.0)
        assert s.integral == 2.0

    def test_reset(self):
        s = PidState(integral=5, prev_error=2)
        s.reset()
        assert (s.integral, s.prev_error) == (0.0, 0.0)


class TestSteering:
    cfg = ControllerConfig()

    def test_zero_error(self):
        cmd = steering_output(ControlError(0, 0), fresh_states(self.cfg), self.cfg.lateral,
                              self.cfg.skew, self.cfg)
        assert cmd.angle == 0 and not cmd.clamped

    def test_clamp(self):
        cmd = steering_output(ControlError(1e4, 0), fresh_states(self.cfg), self.cfg.lateral,
                              self.cfg.skew, self.cfg)
        assert cmd.clamped and cmd.angle == -self.cfg.max_steer

    def test_pattern_right_steers_right(self):
        cmd = steering_output(ControlError(10, 0), fresh_states(self.cfg), self.cfg.lateral,
                              self.cfg.skew, self.cfg)
        assert cmd.angle < 0

    def test_constant_error_p_only(self):
        g1, g2 = PidGains(0.01, 0, 0), PidGains(0.002, 0, 0)
        states = fresh_states(self.cfg)
        for _ in range(5):
            cmd = steering_output(ControlError(7, -3), states, g1, g2, self.cfg)
            assert cmd.angle == pytest.approx(-(0.01 * 7 + 0.002 * -3), rel=1e-12)

    def test_clamp_random(self):
        g = np.random.default_rng(0)
        cfg = ControllerConfig(lateral=PidGains(0.05, 0.01, 0.02), skew=PidGains(0.02, 0.005, 0.01))
        states = fresh_states(cfg)
        errs = g.normal(0, 200, (1_000_000, 2))
        worst = 0.0
        for d, delta in errs:
            worst = max(worst, abs(steering_output(ControlError(d, delta), states,
                                                   cfg.lateral, cfg.skew, cfg).angle))
        assert worst <= cfg.max_steer


class TestLossPolicy:
    def test_hold(self):
        last = SteeringCommand(0.3)
        assert loss_policy(last, 1, ControllerConfig(hold_frames=5)) == last

    def test_decay_value(self):
        cfg = ControllerConfig(hold_frames=5, decay=0.5)
        assert loss_policy(SteeringCommand(0.4), 8, cfg).angle == pytest.approx(0.05)

    def test_decays_to_zero(self):
        assert abs(loss_policy(SteeringCommand(0.4), 10_000, ControllerConfig()).angle) < 1e-12

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            loss_policy(SteeringCommand(0.1), 0, ControllerConfig())


def test_gate_controller_holds_then_resets():
    ctl = GateController(REF)
    moved = obs_of([(r, c + 20) for r, c in SQUARE])
    a = ctl.update(moved)
    assert a.angle < 0
    assert ctl.update(None) == a
    assert ctl.last_error is None
    ctl.update(moved)
    # a fresh lock restarts the derivative from zero
    assert ctl.states[0].prev_error == 20


# ------------------------------------------------------------------ slalom --

def slalom_cmd(rng, direction="right", angle=30.0, col=127):
    return SlalomCommand(direction, angle, rng, PixelCoord(128, col))


class TestSlalomSchedule:
    def test_far_is_centring(self):
        prog = slalom_schedule(slalom_cmd(3.0), SlalomConfig())
        assert prog.phase == "centre"

    def test_centring_steers_toward_marker(self):
        prog = slalom_schedule(slalom_cmd(3.0, col=180), SlalomConfig())
        assert prog.angle < 0

    def test_threshold_crossing(self):
        prog = slalom_schedule(slalom_cmd(0.79, "right", 30.0), SlalomConfig())
        assert prog.phase == "turn" and prog.angle < 0
        cfg = SlalomConfig()
        rate = cfg.v_cmd * math.tan(cfg.turn_steer) / cfg.wheelbase
        assert prog.duration == pytest.approx(math.radians(30) / rate)

    def test_rejects_nonpositive_range(self):
        with pytest.raises(ValueError):
            slalom_schedule(slalom_cmd(0.0), SlalomConfig())

    def test_controller_weaves_then_ignores_passed_marker(self):
        from ppanav.sim.vehicle import VehicleParams, VehicleState, step_vehicle

        cfg = SlalomConfig()
        params = VehicleParams(v_cmd=cfg.v_cmd, steer_rate=cfg.steer_rate)
        ctl = SlalomController(cfg)
        dt = 0.005
        state = VehicleState(0.0, 0.0, 0.0)
        first = ctl.update(slalom_cmd(0.7, "left"), dt)
        assert first.angle > 0 and ctl.phase == "turn"
        cmd, phases, peak = first, [], 0.0
        while True:
            for _ in range(5):
                state = step_vehicle(state, cmd.angle, dt / 5, params)
            peak = max(peak, state.theta)
            phases.append(ctl.phase)
            if ctl.phase == "acquire":
                break
            cmd = ctl.update(None, dt)
        # turn out by the commanded angle, come back to the original heading
        assert math.degrees(peak) == pytest.approx(30.0, abs=1.0)
        assert math.degrees(state.theta) == pytest.approx(0.0, abs=1.0)
        assert phases.index("return") < phases.index("acquire")
        # the marker just turned at is still close and must not retrigger
        assert ctl.update(slalom_cmd(0.6, "left"), dt).angle == 0.0
        assert abs(ctl.update(slalom_cmd(2.3, "right"), dt).angle) < 0.01
        assert ctl.phase == "centre"
