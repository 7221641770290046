"""Environment geometry: routes, canyon profiles, visibility, effective widths.

A scenario is a set of roads (centerline polylines with corridor widths
and per-road canyon profiles), a parked-or-moving TX, and an RX trajectory
given as waypoints plus speed. Visibility is classified geometrically: a
snapshot is LOS while the straight TX-RX segment stays inside the union of
road corridors; the turn region is flagged by the RX heading rate. The
breakpoint is the intersection of the TX road and RX road centerlines and
acts as the virtual TX for everything downstream.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import Polyline, Side, distance, polyline_intersection, wrap180, wrap360
from .synthesis import ArrayGeometry

DEFAULT_MARGIN_M = 30.0
DEFAULT_TURN_RATE_DEG_S = 5.0
DEFAULT_HEADING_BLEND_M = 12.0
DEFAULT_ROAD_WIDTH_M = 20.0
DEFAULT_SCENE_MARGIN_M = 500.0


class Region(enum.Enum):
    LOS_SAME_ROAD = "los_same_road"
    TURN = "turn"
    LOS_AFTER_TURN = "los_after_turn"
    NLOS = "nlos"


_REGION_ORDER = {
    Region.LOS_SAME_ROAD: 0,
    Region.TURN: 1,
    Region.LOS_AFTER_TURN: 2,
    Region.NLOS: 3,
}


@dataclass(frozen=True)
class RoutePoint:
    position: np.ndarray
    heading_deg: float
    arclength_m: float


@dataclass(frozen=True)
class CanyonSegment:
    """One building facade: side, one-sided width, longitudinal extent."""

    side: Side
    width_m: float
    extent_m: tuple[float, float]

    def __post_init__(self):
        if self.width_m <= 0:
            raise ConfigError(f"canyon width must be > 0, got {self.width_m}")
        if self.extent_m[0] >= self.extent_m[1]:
            raise ConfigError(f"canyon extent must satisfy l_start < l_end, got {self.extent_m}")


@dataclass
class CanyonProfile:
    """Ordered canyon segments along one route."""

    segments: list[CanyonSegment]
    route: Polyline

    def __post_init__(self):
        self.segments = sorted(self.segments, key=lambda s: (s.side.value, s.extent_m[0]))
        for side in Side:
            prev_end = -math.inf
            for seg in (s for s in self.segments if s.side is side):
                if seg.extent_m[0] < prev_end - 1e-9:
                    raise ConfigError(
                        f"overlapping canyon extents on side {side.value}: "
                        f"{seg.extent_m} starts before {prev_end}"
                    )
                prev_end = seg.extent_m[1]


@dataclass
class Road:
    road_id: str
    centerline: Polyline
    width_m: float = DEFAULT_ROAD_WIDTH_M
    segments: list[CanyonSegment] = field(default_factory=list)

    @property
    def profile(self) -> CanyonProfile:
        return CanyonProfile(self.segments, self.centerline)


@dataclass
class VisibilityTimeline:
    """Per-snapshot region labels plus the breakpoint, when one exists."""

    regions: list[Region]
    breakpoint: np.ndarray | None = None

    def __post_init__(self):
        order = [_REGION_ORDER[r] for r in self.regions]
        if any(b < a for a, b in zip(order, order[1:])):
            raise ConfigError(
                "visibility regions must be monotone in the order "
                "los_same_road -> turn -> los_after_turn -> nlos"
            )
        has_nlos = any(r is Region.NLOS for r in self.regions)
        if has_nlos and self.breakpoint is None:
            raise ConfigError("NLOS snapshots present but no breakpoint")

    def first_nlos(self) -> int | None:
        for i, r in enumerate(self.regions):
            if r is Region.NLOS:
                return i
        return None


@dataclass
class MotionSpec:
    """Waypoints plus constant speed; a single waypoint means parked."""

    waypoints: np.ndarray
    speed_mps: float = 0.0
    heading_deg: float = 0.0  # used only when parked

    def __post_init__(self):
        self.waypoints = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if self.waypoints.shape[1] != 2:
            raise ConfigError("waypoints must be 2D points")
        if self.speed_mps < 0:
            raise ConfigError("speed must be >= 0")

    @property
    def parked(self) -> bool:
        return len(self.waypoints) == 1 or self.speed_mps == 0.0


@dataclass(frozen=True)
class RfSpec:
    fc_hz: float = 5.8e9
    bw_hz: float = 30e6
    tx_power_dbm: float = 45.0

    def __post_init__(self):
        if self.fc_hz <= 0 or self.bw_hz <= 0:
            raise ConfigError("rf.fc_hz and rf.bw_hz must be > 0")

    @property
    def wavelength_m(self) -> float:
        from .geometry import SPEED_OF_LIGHT

        return SPEED_OF_LIGHT / self.fc_hz


@dataclass
class Trajectory:
    t: np.ndarray
    xy: np.ndarray
    heading_deg: np.ndarray
    arclength_m: np.ndarray

    def route_points(self) -> list[RoutePoint]:
        return [
            RoutePoint(self.xy[i].copy(), float(self.heading_deg[i]), float(self.arclength_m[i]))
            for i in range(len(self.t))
        ]


@dataclass
class ScenarioConfig:
    roads: list[Road]
    tx: MotionSpec
    rx: MotionSpec
    snapshot_rate_hz: float = 45.0
    duration_s: float | None = None
    n_snapshots_override: int | None = None
    rf: RfSpec = field(default_factory=RfSpec)
    array: ArrayGeometry = field(default_factory=ArrayGeometry)
    seed: int = 0
    margin_m: float = DEFAULT_MARGIN_M
    turn_rate_threshold_deg_s: float = DEFAULT_TURN_RATE_DEG_S
    heading_blend_m: float = DEFAULT_HEADING_BLEND_M
    scene_margin_m: float = DEFAULT_SCENE_MARGIN_M

    def __post_init__(self):
        if self.snapshot_rate_hz <= 0:
            raise ConfigError("snapshot_rate_hz must be > 0")
        if not self.roads:
            raise ConfigError("scenario needs at least one road")

    def n_snapshots(self) -> int:
        if self.n_snapshots_override is not None:
            if self.n_snapshots_override < 1:
                raise ConfigError("n_snapshots must be >= 1")
            return self.n_snapshots_override
        if self.duration_s is not None:
            return max(1, int(round(self.duration_s * self.snapshot_rate_hz)))
        if self.rx.parked:
            raise ConfigError("cannot infer duration: rx is parked and duration_s is unset")
        travel = Polyline(self.rx.waypoints).length / self.rx.speed_mps
        return int(math.floor(travel * self.snapshot_rate_hz)) + 1

    def road_by_id(self, road_id: str) -> Road:
        for r in self.roads:
            if r.road_id == road_id:
                return r
        raise ConfigError(f"unknown route id {road_id!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        def need(d, key, where):
            if key not in d:
                raise ConfigError(f"missing required key {where}.{key}")
            return d[key]

        roads = []
        for i, rd in enumerate(need(data, "routes", "scenario")):
            roads.append(
                Road(
                    road_id=str(rd.get("id", f"route{i}")),
                    centerline=Polyline(need(rd, "waypoints", f"routes[{i}]")),
                    width_m=float(rd.get("width_m", DEFAULT_ROAD_WIDTH_M)),
                )
            )
        cfg_roads = {r.road_id: r for r in roads}
        for j, cn in enumerate(data.get("canyons", [])):
            route_id = cn.get("route", roads[0].road_id)
            if route_id not in cfg_roads:
                raise ConfigError(f"canyons[{j}].route {route_id!r} does not match any route id")
            extent = need(cn, "extent_m", f"canyons[{j}]")
            seg = CanyonSegment(
                side=Side.parse(need(cn, "side", f"canyons[{j}]")),
                width_m=float(need(cn, "width_m", f"canyons[{j}]")),
                extent_m=(float(extent[0]), float(extent[1])),
            )
            cfg_roads[route_id].segments.append(seg)
        for r in roads:
            r.profile  # validates per-side extent overlap

        tx_d = need(data, "tx", "scenario")
        if "position" in tx_d:
            tx = MotionSpec(
                waypoints=np.array([tx_d["position"]], dtype=float),
                speed_mps=0.0,
                heading_deg=float(tx_d.get("heading_deg", 0.0)),
            )
        else:
            tx = MotionSpec(
                waypoints=np.asarray(need(tx_d, "waypoints", "tx"), dtype=float),
                speed_mps=float(tx_d.get("speed_mps", 0.0)),
            )
        rx_d = need(data, "rx", "scenario")
        rx = MotionSpec(
            waypoints=np.asarray(need(rx_d, "waypoints", "rx"), dtype=float),
            speed_mps=float(need(rx_d, "speed_mps", "rx")),
        )

        rf_d = data.get("rf", {})
        rf = RfSpec(
            fc_hz=float(rf_d.get("fc_hz", 5.8e9)),
            bw_hz=float(rf_d.get("bw_hz", 30e6)),
            tx_power_dbm=float(rf_d.get("tx_power_dbm", 45.0)),
        )
        ar_d = data.get("array", {})
        array = ArrayGeometry(
            rows=int(ar_d.get("rows", 4)),
            cols=int(ar_d.get("cols", 8)),
            spacing_wavelengths=float(ar_d.get("spacing_wavelengths", 0.5)),
        )
        return cls(
            roads=roads,
            tx=tx,
            rx=rx,
            snapshot_rate_hz=float(data.get("snapshot_rate_hz", 45.0)),
            duration_s=(float(data["duration_s"]) if data.get("duration_s") is not None else None),
            n_snapshots_override=(
                int(data["n_snapshots"]) if data.get("n_snapshots") is not None else None
            ),
            rf=rf,
            array=array,
            seed=int(data.get("seed", 0)),
            margin_m=float(data.get("margin_m", DEFAULT_MARGIN_M)),
            turn_rate_threshold_deg_s=float(
                data.get("turn_rate_threshold_deg_s", DEFAULT_TURN_RATE_DEG_S)
            ),
            heading_blend_m=float(data.get("heading_blend_m", DEFAULT_HEADING_BLEND_M)),
            scene_margin_m=float(data.get("scene_margin_m", DEFAULT_SCENE_MARGIN_M)),
        )


def load_scenario(path) -> ScenarioConfig:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from None
    return ScenarioConfig.from_dict(data)


def _blended_heading(poly: Polyline, s: float, blend_m: float) -> float:
    """Segment heading with a linear blend across interior corners."""
    n_seg = len(poly.points) - 1
    i, _ = poly._locate(s)
    h = poly.segment_heading(i)
    half = blend_m / 2.0
    if half <= 0:
        return h
    # corner behind (vertex i) and ahead (vertex i+1)
    for v in (i, i + 1):
        if v <= 0 or v >= n_seg:
            continue
        sv = poly.vertex_arclength(v)
        if abs(s - sv) >= half:
            continue
        h_in = poly.segment_heading(v - 1)
        h_out = poly.segment_heading(v)
        turn = wrap180(h_out - h_in)
        frac = (s - (sv - half)) / blend_m
        return wrap360(h_in + turn * min(max(frac, 0.0), 1.0))
    return h


def sample_trajectory(spec: MotionSpec, rate_hz: float, n: int, blend_m: float) -> Trajectory:
    t = np.arange(n) / rate_hz
    if spec.parked:
        xy = np.tile(spec.waypoints[0], (n, 1))
        return Trajectory(
            t=t,
            xy=xy,
            heading_deg=np.full(n, wrap360(spec.heading_deg)),
            arclength_m=np.zeros(n),
        )
    poly = Polyline(spec.waypoints)
    s = np.minimum(spec.speed_mps * t, poly.length)
    xy = np.array([poly.point_at(si) for si in s])
    heading = np.array([_blended_heading(poly, si, blend_m) for si in s])
    return Trajectory(t=t, xy=xy, heading_deg=heading, arclength_m=s)


def _points_to_polyline_dist(points: np.ndarray, poly: Polyline) -> np.ndarray:
    """Distance of many points to a polyline, vectorized over points."""
    best = np.full(len(points), np.inf)
    for i in range(len(poly.points) - 1):
        a = poly.points[i]
        v = poly._seg[i]
        ln2 = poly._seg_len[i] ** 2
        w = points - a
        tt = np.clip((w @ v) / ln2, 0.0, 1.0)
        cp = a + tt[:, None] * v
        d = np.hypot(*(points - cp).T)
        np.minimum(best, d, out=best)
    return best


def segment_visible(p, q, roads: list[Road], step_m: float = 1.0) -> bool:
    """True when the straight segment p-q stays inside the road-corridor union."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = max(2, min(int(math.ceil(distance(p, q) / step_m)) + 1, 512))
    pts = p + np.linspace(0.0, 1.0, n)[:, None] * (q - p)
    covered = np.zeros(n, dtype=bool)
    for road in roads:
        covered |= _points_to_polyline_dist(pts, road.centerline) <= road.width_m / 2.0 + 1e-9
        if covered.all():
            return True
    return bool(covered.all())


def road_containing(point, roads: list[Road]) -> Road | None:
    best, best_d = None, math.inf
    for road in roads:
        d = road.centerline.distance_to(point)
        if d <= road.width_m / 2.0 + 1e-9 and d < best_d:
            best, best_d = road, d
    return best


def classify_visibility(config: ScenarioConfig) -> VisibilityTimeline:
    """Label every snapshot and locate the breakpoint.

    LOS is a corridor-union visibility test on the TX-RX segment; the turn
    region is where the RX heading rate exceeds the configured threshold;
    NLOS is entered once and never left (single-intersection scenarios).
    """
    n = config.n_snapshots()
    tx_traj = sample_trajectory(config.tx, config.snapshot_rate_hz, n, config.heading_blend_m)
    rx_traj = sample_trajectory(config.rx, config.snapshot_rate_hz, n, config.heading_blend_m)

    pts = np.vstack([r.centerline.points for r in config.roads])
    lo = pts.min(axis=0) - config.scene_margin_m
    hi = pts.max(axis=0) + config.scene_margin_m
    inside = lambda a: bool(np.all((a >= lo) & (a <= hi), axis=1).any())  # noqa: E731
    if not (inside(tx_traj.xy) and inside(rx_traj.xy)):
        raise ConfigError("trajectories never come within the configured scene bounds")

    los = np.array(
        [segment_visible(tx_traj.xy[i], rx_traj.xy[i], config.roads) for i in range(n)]
    )
    h = rx_traj.heading_deg
    rate = np.zeros(n)
    if n > 1:
        diffs = np.array([wrap180(h[i + 1] - h[i]) for i in range(n - 1)])
        rate[:-1] = diffs * config.snapshot_rate_hz
        rate[-1] = rate[-2]
    turning = np.abs(rate) > config.turn_rate_threshold_deg_s

    regions: list[Region] = []
    turned = False
    nlos_hit = False
    for i in range(n):
        if nlos_hit or not los[i]:
            regions.append(Region.NLOS)
            nlos_hit = True
        elif turning[i]:
            regions.append(Region.TURN)
            turned = True
        else:
            regions.append(Region.LOS_SAME_ROAD if not turned else Region.LOS_AFTER_TURN)

    breakpoint_pt = None
    if nlos_hit:
        tx_road = road_containing(tx_traj.xy[0], config.roads)
        rx_road = road_containing(rx_traj.xy[-1], config.roads)
        if tx_road is None or rx_road is None:
            raise ConfigError("TX or terminal RX position lies outside every road corridor")
        if tx_road.road_id == rx_road.road_id:
            raise ConfigError("NLOS snapshots on a single shared road: breakpoint undefined")
        breakpoint_pt = polyline_intersection(tx_road.centerline, rx_road.centerline)
        if breakpoint_pt is None:
            raise ConfigError(
                f"routes {tx_road.road_id!r} and {rx_road.road_id!r} do not intersect; "
                "breakpoint undefined"
            )
        rx_route = Polyline(config.rx.waypoints) if not config.rx.parked else None
        if rx_route is not None:
            s_bp, _ = rx_route.project(breakpoint_pt)
            off_route = rx_route.distance_to(breakpoint_pt) > rx_road.width_m
            # a breakpoint behind the route start is valid: the RX simply
            # began beyond it (all-NLOS runs)
            if off_route and s_bp > 1e-9:
                raise ConfigError("breakpoint does not lie on the RX route")
    return VisibilityTimeline(regions=regions, breakpoint=breakpoint_pt)


def effective_widths(
    profile: CanyonProfile,
    region: Region,
    anchor_s: float,
    rx_s: float,
    margin_m: float = DEFAULT_MARGIN_M,
) -> set[tuple[Side, float]]:
    """Widths whose extent meets the anchor-RX interval expanded by the margin.

    The anchor is the TX projection under LOS and the breakpoint projection
    under NLOS. The turn region contributes nothing: the channel there is
    the direct path alone.
    """
    if region is Region.TURN:
        return set()
    lo, hi = sorted((anchor_s, rx_s))
    lo -= margin_m
    hi += margin_m
    return {
        (seg.side, seg.width_m)
        for seg in profile.segments
        if seg.extent_m[0] <= hi and seg.extent_m[1] >= lo
    }


def effective_width_sets(
    config: ScenarioConfig, timeline: VisibilityTimeline, margin_m: float | None = None
) -> list[set[tuple[Side, float]]]:
    """Per-snapshot effective width sets D(t) over all roads of the scenario."""
    margin = config.margin_m if margin_m is None else margin_m
    n = config.n_snapshots()
    tx_traj = sample_trajectory(config.tx, config.snapshot_rate_hz, n, config.heading_blend_m)
    rx_traj = sample_trajectory(config.rx, config.snapshot_rate_hz, n, config.heading_blend_m)
    out: list[set[tuple[Side, float]]] = []
    for i in range(n):
        region = timeline.regions[i]
        if region is Region.TURN:
            out.append(set())
            continue
        widths: set[tuple[Side, float]] = set()
        if region is Region.NLOS:
            road = road_containing(rx_traj.xy[i], config.roads)
            if road is not None:
                bp_s, _ = road.centerline.project(timeline.breakpoint)
                rx_s, _ = road.centerline.project(rx_traj.xy[i])
                widths |= effective_widths(road.profile, region, bp_s, rx_s, margin)
        else:
            for road in config.roads:
                half = road.width_m / 2.0 + 1e-9
                tx_on = road.centerline.distance_to(tx_traj.xy[i]) <= half
                rx_on = road.centerline.distance_to(rx_traj.xy[i]) <= half
                if not (tx_on or rx_on):
                    continue
                tx_s, _ = road.centerline.project(tx_traj.xy[i])
                rx_s, _ = road.centerline.project(rx_traj.xy[i])
                widths |= effective_widths(road.profile, region, tx_s, rx_s, margin)
        out.append(widths)
    return out


def array_frame_angle(global_bearing_deg: float, rx_heading_deg: float) -> float:
    """Azimuth of arrival in the RX array frame, degrees in [0, 180].

    The array boresight points opposite the direction of travel, so a wave
    arriving from directly behind maps to 90 degrees; left-side arrivals
    fall below 90, right-side arrivals above. Front/back ambiguity folds
    forward arrivals onto the same range.
    """
    offset = wrap180(global_bearing_deg - (rx_heading_deg + 180.0))
    raw = 90.0 + offset
    if raw < 0.0:
        raw = -raw
    elif raw > 180.0:
        raw = 360.0 - raw
    return raw


def widths_from_footprints(
    buildings,
    route_waypoints,
    parallel_tol_m: float = 1.5,
    min_extent_m: float = 0.5,
) -> CanyonProfile:
    """Canyon profile from building footprints along a route.

    Every polygon edge roughly parallel to the route is a candidate facade;
    per building the nearest such facade wins. Buildings crossing the
    centerline are rejected.
    """
    poly = Polyline(route_waypoints)
    segments: list[CanyonSegment] = []
    for bi, building in enumerate(buildings):
        verts = np.asarray(
            building["polygon"] if isinstance(building, dict) else building, dtype=float
        )
        if verts.ndim != 2 or len(verts) < 3:
            raise ConfigError(f"buildings[{bi}] is not a polygon")
        proj = [poly.project(v) for v in verts]
        lats = np.array([p[1] for p in proj])
        if lats.min() < -1e-9 and lats.max() > 1e-9:
            raise ConfigError(f"buildings[{bi}] straddles the route centerline")
        side = Side.LEFT if lats.mean() > 0 else Side.RIGHT
        best = None
        nv = len(verts)
        for k in range(nv):
            (s1, l1), (s2, l2) = proj[k], proj[(k + 1) % nv]
            if abs(s2 - s1) < min_extent_m:
                continue
            if abs(abs(l1) - abs(l2)) > parallel_tol_m:
                continue
            width = (abs(l1) + abs(l2)) / 2.0
            if best is None or width < best[0]:
                best = (width, (min(s1, s2), max(s1, s2)))
        if best is not None:
            segments.append(CanyonSegment(side=side, width_m=best[0], extent_m=best[1]))
    return CanyonProfile(segments=segments, route=poly)
