import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppanav import ppa
from ppanav.pipeline import (DIRECT, FALLBACK, PipelineConfig, TrackerState, Underflow,
                             decode_slalom, denoise, detect_disks, eliminate_background,
                             extract_centroids, _fallback)
from ppanav.ppa import BitImage, GreyImage, PixelCoord
from ppanav.sim.course import CameraModel, Course, GatePose
from ppanav.sim.patterns import Break, GateMarker, SlalomMarker
from ppanav.sim.render import render

from oracles import bbox_centres, erosion_oracle, uf_labels
from scenes import close_to, disk_support, gate_scene, viewer

CFG = PipelineConfig()


def bits(a):
    return BitImage.from_array(a)


# ------------------------------------------------------------ elimination --

class TestEliminateBackground:
    def test_all_white_is_empty(self):
        for steps in (1, 2, 4):
            assert eliminate_background(BitImage.ones(), steps).count() == 0

    @pytest.mark.parametrize("distance", [0.8, 1.2, 2.0])
    def test_ideal_pattern_leaves_disk_supports(self, distance):
        state = viewer(distance)
        frame, _ = gate_scene(state)
        out = eliminate_background(ppa.threshold(frame, 128), 4)
        assert ppa.count_components(out) == 4
        assert np.array_equal(out.to_array(), disk_support(state))

    def test_broken_right_side_leaves_nothing(self):
        marker = GateMarker().with_breaks(Break("right", 0.0, 0.12))
        frame, _ = gate_scene(viewer(1.0), marker)
        out = eliminate_background(ppa.threshold(frame, 128), 4)
        assert ppa.count_components(out) == 0

    def test_removed_pixels_never_overlap_flood(self):
        frame, _ = gate_scene(viewer(1.0))
        trace = []
        eliminate_background(ppa.threshold(frame, 128), 4, trace)
        assert len(trace) == 4
        # each traced B is what is left after removing the border flood
        for b in trace:
            f = ppa.flood(b, ppa.BORDER)
            assert f.count() == 0

    def test_nested_squares_by_rounds(self):
        # white ground, black ring, white ring, black ring, white ring, black core
        a = np.ones((256, 256), dtype=bool)
        r = np.arange(256)
        cheb = np.maximum(np.abs(r[:, None] - 128), np.abs(r[None, :] - 128))
        a[(cheb <= 60) & (cheb > 50)] = False
        a[(cheb <= 40) & (cheb > 30)] = False
        a[(cheb <= 10)] = False
        b = bits(a)
        assert np.array_equal(eliminate_background(b, 1).to_array(), (cheb <= 50) & (cheb > 40) | (cheb <= 30) & (cheb > 10))
        assert np.array_equal(eliminate_background(b, 2).to_array(), (cheb <= 40) & (cheb > 30) | (cheb <= 10))
        assert np.array_equal(eliminate_background(b, 3).to_array(), (cheb <= 30) & (cheb > 10))
        assert np.array_equal(eliminate_background(b, 4).to_array(), cheb <= 10)
        assert eliminate_background(b, 5).count() == 0


# ---------------------------------------------------------------- denoise --

class TestDenoise:
    def test_single_pixel_removed(self):
        a = np.zeros((256, 256), dtype=bool)
        a[100, 100] = True
        assert denoise(bits(a), 2).count() == 0

    def test_all_ones_loses_border_frame(self):
        out = denoise(BitImage.ones(), 2).to_array()
        expect = np.zeros((256, 256), dtype=bool)
        expect[2:-2, 2:-2] = True
        assert np.array_equal(out, expect)

    def test_disk_survives_inside(self):
        r = np.arange(256)
        disk = (r[:, None] - 90) ** 2 + (r[None, :] - 140) ** 2 <= 64
        out = denoise(bits(disk), 2).to_array()
        assert out.any()
        assert not (out & ~disk).any()

    def test_matches_erosion_oracle(self):
        g = np.random.default_rng(3)
        a = np.zeros((256, 256), dtype=bool)
        a[60:100, 30:90] = g.random((40, 60)) < 0.8
        for p in (1, 2, 3):
            assert np.array_equal(denoise(bits(a), p).to_array(), erosion_oracle(a, p))

    def test_rejects_zero_step(self):
        with pytest.raises(ValueError):
            denoise(BitImage.ones(), 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_subset_of_each_shift(self, seed, p):
        a = bits(np.random.default_rng(seed).random((256, 256)) < 0.7)
        out = denoise(a, p)
        for d in (ppa.NORTH, ppa.SOUTH, ppa.EAST, ppa.WEST):
            assert (out & ~ppa.shift(a, d, p)).count() == 0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_small_components_vanish(self, seed):
        g = np.random.default_rng(seed)
        a = np.zeros((256, 256), dtype=bool)
        for _ in range(30):
            r, c = g.integers(3, 250, 2)
            h, w = g.integers(1, 5, 2)
            a[r:r + h, c:c + w] |= g.random((h, w)) < 0.8
        for pixels in uf_labels(a).values():
            rs = [p[0] for p in pixels]
            cs = [p[1] for p in pixels]
            small = max(rs) - min(rs) < 5 and max(cs) - min(cs) < 5
            if small:
                out = denoise(bits(a), 2).to_array()
                assert not any(out[p] for p in pixels)


# -------------------------------------------------------------- centroids --

class TestExtractCentroids:
    def test_four_squares(self):
        a = np.zeros((256, 256), dtype=bool)
        corners = [(20, 20), (20, 200), (200, 20), (200, 200)]
        for r, c in corners:
            a[r - 1:r + 2, c - 1:c + 2] = True
        assert sorted(extract_centroids(bits(a), 4)) == corners

    def test_one_disk(self):
        r = np.arange(256)
        disk = (r[:, None] - 77) ** 2 + (r[None, :] - 33) ** 2 <= 25
        assert extract_centroids(bits(disk), 1) == [PixelCoord(77, 33)]

    def test_underflow(self):
        a = np.zeros((256, 256), dtype=bool)
        a[5, 5] = True
        with pytest.raises(Underflow):
            extract_centroids(bits(a), 2)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_union_find(self, seed):
        g = np.random.default_rng(seed)
        a = g.random((256, 256)) < 0.02
        for _ in range(8):
            r, c = g.integers(0, 240, 2)
            a[r:r + g.integers(1, 15), c:c + g.integers(1, 15)] = True
        n = ppa.count_components(bits(a))
        got = sorted(tuple(p) for p in extract_centroids(bits(a), n))
        assert got == bbox_centres(a)


# ---------------------------------------------------------------- detect --

class TestDetect:
    @pytest.mark.parametrize("distance,lateral,yaw", [
        (1.0, 0.0, 0.0), (1.5, 0.1, 0.05), (2.5, -0.2, -0.1), (0.7, 0.05, 0.0)])
    def test_direct_mode_near_truth(self, distance, lateral, yaw):
        frame, truth = gate_scene(viewer(distance, lateral, yaw))
        obs = detect_disks(frame, CFG, TrackerState())
        assert obs.mode == DIRECT
        assert close_to(obs.points, truth)
        mean_r = sum(p[0] for p in obs.points) / 4
        mean_c = sum(p[1] for p in obs.points) / 4
        assert obs.centroid == PixelCoord(math.floor(mean_r), math.floor(mean_c))

    def test_blank_frame_no_target(self):
        assert detect_disks(GreyImage.filled(200), CFG, TrackerState()) is None

    def test_fallback_on_broken_outline(self):
        before = viewer(1.2, 0.05, 0.02)
        now = viewer(1.19, 0.05, 0.02)
        marker = GateMarker().with_breaks(Break("left", 0.05, 0.1))
        _, prev_truth = gate_scene(before)
        frame, truth = gate_scene(now, marker)
        tracker = TrackerState(previous_points=[PixelCoord(round(r), round(c)) for r, c in prev_truth])
        obs = detect_disks(frame, CFG, tracker)
        assert obs.mode == FALLBACK
        assert close_to(obs.points, truth)
        assert tracker.previous_points == list(obs.points)
        assert tracker.frames_since_lock == 0

    def test_fallback_agrees_with_direct(self):
        for distance in (0.9, 1.4, 2.0):
            frame, truth = gate_scene(viewer(distance, 0.03))
            direct = detect_disks(frame, CFG, TrackerState())
            mask = denoise(ppa.bit_not(ppa.threshold(frame, CFG.threshold_level)), CFG.p_step)
            fb = sorted(_fallback(mask, direct.points))
            for a, b in zip(sorted(direct.points), fb):
                assert abs(a[0] - b[0]) <= 1 and abs(a[1] - b[1]) <= 1

    def test_fallback_point_off_disk_is_no_target(self):
        marker = GateMarker().with_breaks(Break("left", 0.0, 0.1))
        frame, _ = gate_scene(viewer(1.0), marker)
        tracker = TrackerState(previous_points=[PixelCoord(5, 5), PixelCoord(5, 250),
                                                PixelCoord(250, 5), PixelCoord(250, 250)])
        assert detect_disks(frame, CFG, tracker) is None
        assert tracker.frames_since_lock == 1
        assert tracker.previous_points is not None

    def test_tracker_cleared_after_patience(self):
        cfg = PipelineConfig(loss_patience=3)
        tracker = TrackerState(previous_points=[PixelCoord(5, 5)] * 4)
        blank = GreyImage.filled(200)
        for i in range(3):
            detect_disks(blank, cfg, tracker)
            assert tracker.previous_points is not None
        detect_disks(blank, cfg, tracker)
        assert tracker.previous_points is None

    def test_jump_to_other_pattern_uses_tracker(self):
        frame, truth = gate_scene(viewer(1.5))
        far = [PixelCoord(r, c - 60) for r, c in (map(round, p) for p in truth)]
        tracker = TrackerState(previous_points=far)
        # the tracked points miss this pattern, so neither mode may accept it
        assert detect_disks(frame, CFG, tracker) is None

    def test_register_budget(self):
        frame, truth = gate_scene(viewer(1.1))
        prev = [PixelCoord(round(r), round(c)) for r, c in truth]
        broken, _ = gate_scene(viewer(1.1), GateMarker().with_breaks(Break("top", 0, 0.1)))
        for f, tracker in ((frame, TrackerState()), (broken, TrackerState(previous_points=prev))):
            with ppa.register_budget() as budget:
                assert detect_disks(f, CFG, tracker) is not None
            assert budget.bit <= ppa.BIT_REGISTERS
            assert budget.grey <= ppa.GREY_REGISTERS

    def test_deterministic(self):
        frame, _ = gate_scene(viewer(1.3, 0.1, 0.1))
        a = detect_disks(frame, CFG, TrackerState())
        b = detect_disks(frame, CFG, TrackerState())
        assert a == b

    def test_timings_recorded(self):
        frame, _ = gate_scene(viewer(1.3))
        t = {}
        detect_disks(frame, CFG, TrackerState(), t)
        assert set(t) == {"threshold", "flooding", "denoise", "centroid"}
        assert all(v >= 0 for v in t.values())

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            PipelineConfig(flood_steps=0)
        with pytest.raises(ValueError):
            PipelineConfig(p_step=0)


# ---------------------------------------------------------------- slalom --

def slalom_frame(direction, k, distance, lateral=0.0):
    camera = CameraModel()
    course = Course((GatePose(3.0, 0.0, 0.0, pattern=SlalomMarker(direction, k)),), camera=camera)
    return render(course, viewer(distance, lateral))


class TestSlalom:
    def test_left_two_at_three_metres(self):
        cmd = decode_slalom(slalom_frame("left", 2, 3.0), CFG, TrackerState())
        assert cmd.direction == "left"
        assert cmd.angle == 30
        assert abs(cmd.range_estimate - 3.0) <= 0.3

    def test_mirrored_is_right(self):
        cmd = decode_slalom(slalom_frame("right", 2, 3.0), CFG, TrackerState())
        assert cmd.direction == "right" and cmd.angle == 30

    @pytest.mark.parametrize("k", [1, 3, 5])
    @pytest.mark.parametrize("direction", ["left", "right"])
    def test_counts(self, direction, k):
        cmd = decode_slalom(slalom_frame(direction, k, 1.5, 0.05), CFG, TrackerState())
        assert (cmd.direction, cmd.angle) == (direction, 15 * k)
        assert abs(cmd.range_estimate - 1.5) <= 0.15

    def test_gate_pattern_is_not_slalom(self):
        frame, _ = gate_scene(viewer(1.5))
        assert decode_slalom(frame, CFG, TrackerState()) is None

    def test_blank(self):
        assert decode_slalom(GreyImage.filled(200), CFG, TrackerState()) is None
