import copy
import math

import numpy as np
import pytest

from canyonsim.errors import ConfigError
from canyonsim.geometry import Polyline, Side
from canyonsim.scenario import (
    CanyonProfile,
    CanyonSegment,
    Region,
    ScenarioConfig,
    VisibilityTimeline,
    array_frame_angle,
    classify_visibility,
    effective_width_sets,
    effective_widths,
    sample_trajectory,
    widths_from_footprints,
)

from oracle import straight_scenario_dict, turn_scenario_dict


class TestClassifyVisibility:
    def test_straight_shared_road_is_all_los(self, straight_cfg):
        tl = classify_visibility(straight_cfg)
        assert all(r is Region.LOS_SAME_ROAD for r in tl.regions)
        assert tl.breakpoint is None

    def test_turn_scenario_has_all_four_phases_in_order(self, turn_cfg):
        tl = classify_visibility(turn_cfg)
        seen = [r.value for r in tl.regions]
        phases = [v for i, v in enumerate(seen) if i == 0 or seen[i - 1] != v]
        assert phases == ["los_same_road", "turn", "los_after_turn", "nlos"]
        assert np.allclose(tl.breakpoint, [300.0, 0.0])

    def test_rx_beyond_intersection_all_nlos(self):
        d = turn_scenario_dict()
        d["rx"] = {"waypoints": [[300.0, -40.0], [300.0, -200.0]], "speed_mps": 8.33}
        tl = classify_visibility(ScenarioConfig.from_dict(d))
        assert all(r is Region.NLOS for r in tl.regions)
        assert np.allclose(tl.breakpoint, [300.0, 0.0])

    def test_rigid_motion_invariance(self):
        base = turn_scenario_dict()
        tl0 = classify_visibility(ScenarioConfig.from_dict(base))

        ang = math.radians(37.0)
        c, s = math.cos(ang), math.sin(ang)
        shift = np.array([812.5, -333.25])

        def move(pt):
            x, y = pt
            return [c * x - s * y + shift[0], s * x + c * y + shift[1]]

        moved = copy.deepcopy(base)
        for route in moved["routes"]:
            route["waypoints"] = [move(p) for p in route["waypoints"]]
        moved["tx"]["position"] = move(moved["tx"]["position"])
        moved["rx"]["waypoints"] = [move(p) for p in moved["rx"]["waypoints"]]

        tl1 = classify_visibility(ScenarioConfig.from_dict(moved))
        assert [r.value for r in tl0.regions] == [r.value for r in tl1.regions]
        assert np.allclose(tl1.breakpoint, move(tl0.breakpoint), atol=1e-6)

    def test_out_of_bounds_trajectories_rejected(self):
        d = straight_scenario_dict()
        d["scene_margin_m"] = 50.0
        d["tx"] = {"position": [0.0, 5000.0]}
        with pytest.raises(ConfigError):
            classify_visibility(ScenarioConfig.from_dict(d))

    def test_monotone_region_invariant_enforced(self):
        with pytest.raises(ConfigError):
            VisibilityTimeline(
                regions=[Region.NLOS, Region.LOS_SAME_ROAD], breakpoint=np.zeros(2)
            )


def profile(segments):
    return CanyonProfile(
        segments=[CanyonSegment(Side.parse(s), w, (a, b)) for s, w, a, b in segments],
        route=Polyline([[0, 0], [200, 0]]),
    )


class TestEffectiveWidths:
    def test_interval_containment(self):
        p = profile([("left", 15.0, 20.0, 60.0)])
        out = effective_widths(p, Region.LOS_SAME_ROAD, 0.0, 100.0, margin_m=0.0)
        assert out == {(Side.LEFT, 15.0)}

    def test_turn_region_is_empty(self):
        p = profile([("left", 15.0, 20.0, 60.0)])
        assert effective_widths(p, Region.TURN, 0.0, 100.0) == set()

    def test_margin_pulls_in_nearby_segment(self):
        p = profile([("left", 15.0, 90.0, 120.0)])
        assert effective_widths(p, Region.LOS_SAME_ROAD, 0.0, 100.0, margin_m=30.0) == {
            (Side.LEFT, 15.0)
        }
        # and without the margin a fully disjoint segment stays out
        p2 = profile([("left", 15.0, 110.0, 120.0)])
        assert effective_widths(p2, Region.LOS_SAME_ROAD, 0.0, 100.0, margin_m=0.0) == set()

    def test_margin_monotone(self, rng):
        for _ in range(50):
            segs = [
                (
                    "left" if rng.random() < 0.5 else "right",
                    float(rng.uniform(5, 50)),
                    float(a := rng.uniform(0, 150)),
                    float(a + rng.uniform(1, 50)),
                )
                for _ in range(6)
            ]
            # avoid same-side overlap by spacing sides apart per id
            p = CanyonProfile(
                segments=[
                    CanyonSegment(Side.parse(s), w + i * 0.001, (a + 400.0 * i, b + 400.0 * i))
                    for i, (s, w, a, b) in enumerate(segs)
                ],
                route=Polyline([[0, 0], [3000, 0]]),
            )
            anchor, rx = sorted(rng.uniform(0, 2500, size=2))
            small = effective_widths(p, Region.LOS_SAME_ROAD, anchor, rx, margin_m=10.0)
            large = effective_widths(p, Region.LOS_SAME_ROAD, anchor, rx, margin_m=80.0)
            assert small <= large

    def test_result_subset_of_profile(self, rng):
        p = profile([("left", 15.0, 0.0, 50.0), ("right", 25.0, 30.0, 90.0)])
        declared = {(s.side, s.width_m) for s in p.segments}
        for _ in range(50):
            anchor, rx = sorted(rng.uniform(-50, 250, size=2))
            out = effective_widths(p, Region.LOS_SAME_ROAD, anchor, rx, margin_m=20.0)
            assert out <= declared

    def test_per_snapshot_sets_over_turn_scenario(self, turn_cfg):
        tl = classify_visibility(turn_cfg)
        sets = effective_width_sets(turn_cfg, tl)
        for region, widths in zip(tl.regions, sets):
            if region is Region.TURN:
                assert widths == set()
        # NLOS widths come from the side road only
        assert sets[-1] == {(Side.LEFT, 14.0), (Side.RIGHT, 22.0)}
        # multipath reappears between the turn and the breakpoint
        after_turn = next(i for i, r in enumerate(tl.regions) if r is Region.LOS_AFTER_TURN)
        assert sets[after_turn + 5] != set()


class TestArrayFrameAngle:
    def test_wave_from_behind_is_boresight(self):
        assert array_frame_angle(180.0, 0.0) == pytest.approx(90.0)
        assert array_frame_angle(270.0, 90.0) == pytest.approx(90.0)

    def test_frame_rotation_is_additive(self):
        base = array_frame_angle(180.0, 0.0)
        assert array_frame_angle(180.0, 45.0) == pytest.approx(base - 45.0)

    def test_full_turn_modulus(self, rng):
        for _ in range(200):
            b = float(rng.uniform(-720, 720))
            h = float(rng.uniform(0, 360))
            assert array_frame_angle(b, h) == pytest.approx(array_frame_angle(b + 360.0, h))
            assert 0.0 <= array_frame_angle(b, h) <= 180.0

    def test_case3_sweep_rises_to_max_then_decays(self, turn_cfg):
        tl = classify_visibility(turn_cfg)
        n = turn_cfg.n_snapshots()
        rx = sample_trajectory(turn_cfg.rx, turn_cfg.snapshot_rate_hz, n, turn_cfg.heading_blend_m)
        from canyonsim.geometry import bearing_deg

        aoa = np.array(
            [
                array_frame_angle(bearing_deg(rx.xy[i], [0.0, 0.0]), rx.heading_deg[i])
                for i in range(n)
            ]
        )
        last_turn = max(i for i, r in enumerate(tl.regions) if r is Region.TURN)
        peak = int(np.argmax(aoa))
        assert abs(peak - last_turn) <= 1
        after = aoa[peak : tl.first_nlos()]
        assert np.all(np.diff(after) <= 1e-9)


class TestWidthsFromFootprints:
    ROUTE = [[0.0, 0.0], [200.0, 0.0]]

    def test_single_rectangle_left(self):
        rect = [[0.0, 10.0], [50.0, 10.0], [50.0, 18.0], [0.0, 18.0]]
        p = widths_from_footprints([rect], self.ROUTE)
        assert len(p.segments) == 1
        seg = p.segments[0]
        assert seg.side is Side.LEFT
        assert seg.width_m == pytest.approx(10.0)
        assert seg.extent_m == pytest.approx((0.0, 50.0))

    def test_symmetric_rectangles(self):
        left = [[20.0, 12.0], [70.0, 12.0], [70.0, 20.0], [20.0, 20.0]]
        right = [[20.0, -12.0], [70.0, -12.0], [70.0, -20.0], [20.0, -20.0]]
        p = widths_from_footprints([left, right], self.ROUTE)
        assert {s.side for s in p.segments} == {Side.LEFT, Side.RIGHT}
        assert all(s.width_m == pytest.approx(12.0) for s in p.segments)

    def test_staggered_facades(self):
        near = [[0.0, 10.0], [40.0, 10.0], [40.0, 16.0], [0.0, 16.0]]
        far = [[60.0, 25.0], [110.0, 25.0], [110.0, 31.0], [60.0, 31.0]]
        p = widths_from_footprints([near, far], self.ROUTE)
        assert len(p.segments) == 2
        widths = sorted(s.width_m for s in p.segments)
        assert widths == pytest.approx([10.0, 25.0])
        exts = sorted(s.extent_m for s in p.segments)
        assert exts[0][1] <= exts[1][0]  # non-overlapping extents

    def test_straddling_building_rejected(self):
        rect = [[10.0, -5.0], [30.0, -5.0], [30.0, 5.0], [10.0, 5.0]]
        with pytest.raises(ConfigError):
            widths_from_footprints([rect], self.ROUTE)

    def test_dict_polygon_form(self):
        rect = {"polygon": [[0.0, 10.0], [50.0, 10.0], [50.0, 18.0], [0.0, 18.0]]}
        p = widths_from_footprints([rect], self.ROUTE)
        assert p.segments[0].width_m == pytest.approx(10.0)


class TestScenarioConfig:
    def test_field_path_in_errors(self):
        d = straight_scenario_dict()
        del d["rx"]
        with pytest.raises(ConfigError, match="scenario.rx"):
            ScenarioConfig.from_dict(d)

    def test_overlapping_canyons_rejected(self):
        d = straight_scenario_dict(
            canyons=[
                {"route": "main", "side": "left", "width_m": 10.0, "extent_m": [0.0, 60.0]},
                {"route": "main", "side": "left", "width_m": 12.0, "extent_m": [50.0, 90.0]},
            ]
        )
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(d)

    def test_unknown_canyon_route_rejected(self):
        d = straight_scenario_dict()
        d["canyons"][0]["route"] = "nope"
        with pytest.raises(ConfigError, match="nope"):
            ScenarioConfig.from_dict(d)

    def test_n_snapshots_precedence(self):
        d = straight_scenario_dict(n_snapshots=123)
        assert ScenarioConfig.from_dict(d).n_snapshots() == 123
        del d["n_snapshots"]
        d["duration_s"] = 2.0
        assert ScenarioConfig.from_dict(d).n_snapshots() == 90

    def test_parked_rx_without_duration_rejected(self):
        d = straight_scenario_dict()
        del d["n_snapshots"]
        d["rx"] = {"waypoints": [[30.0, 0.0]], "speed_mps": 0.0}
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(d).n_snapshots()


class TestTrajectory:
    def test_constant_speed_arclength(self):
        from canyonsim.scenario import MotionSpec

        spec = MotionSpec(waypoints=np.array([[0.0, 0.0], [100.0, 0.0]]), speed_mps=10.0)
        tr = sample_trajectory(spec, rate_hz=10.0, n=50, blend_m=0.0)
        assert tr.arclength_m[1] - tr.arclength_m[0] == pytest.approx(1.0)
        assert np.allclose(tr.heading_deg, 0.0)

    def test_heading_blends_through_corner(self):
        from canyonsim.scenario import MotionSpec

        spec = MotionSpec(
            waypoints=np.array([[0.0, 0.0], [50.0, 0.0], [50.0, -50.0]]), speed_mps=10.0
        )
        tr = sample_trajectory(spec, rate_hz=20.0, n=200, blend_m=10.0)
        h = tr.heading_deg
        assert h[0] == pytest.approx(0.0)
        assert h[-1] == pytest.approx(270.0)
        rates = np.abs(np.diff([((x + 180) % 360) - 180 for x in h]))
        assert rates.max() < 15.0  # no instantaneous jump

    def test_route_points_view(self):
        from canyonsim.scenario import MotionSpec

        spec = MotionSpec(waypoints=np.array([[0.0, 0.0], [10.0, 0.0]]), speed_mps=1.0)
        pts = sample_trajectory(spec, 5.0, 10, 0.0).route_points()
        assert len(pts) == 10
        assert pts[3].arclength_m == pytest.approx(0.6)
