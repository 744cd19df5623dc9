"""Lane-graph map schema, validating loader, and runtime lookups.

Maps are JSON documents (schema_version 1).  The loader validates every
structural invariant and reports failures with a JSON-path diagnostic
(e.g. ``lanes[3].successors[1]: unknown lane 'x'``) so broken maps are
rejected at load time rather than mid-simulation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo

SCHEMA_VERSION = 1

LANE_KINDS = ("drive", "sidewalk", "cross")
BOUNDARIES = ("solid", "broken", "none")
LIGHT_COLORS = ("green", "yellow", "red")

# Successor lanes must start where their predecessor ends, to within this.
CONTINUITY_TOL = 1e-6


class MapError(ValueError):
    """Raised with a json-path diagnostic when a map document is invalid."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class Lane:
    id: str
    centerline: np.ndarray  # (N, 2) float64
    width: float
    kind: str = "drive"
    boundary_left: str = "solid"
    boundary_right: str = "solid"
    successors: list[str] = field(default_factory=list)
    junction: str | None = None
    adjacent_left: str | None = None
    adjacent_right: str | None = None
    change: str | None = None  # "left"/"right" if this lane performs a lane change
    yields: bool = False  # must give way to traffic on the successor lane

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=np.float64)
        self.lengths = geo.polyline_lengths(self.centerline)
        self.length = float(self.lengths[-1])

    def point_at(self, s: float):
        return geo.point_at_arclength(self.centerline, s)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "centerline": [[float(x), float(y)] for x, y in self.centerline],
            "width": self.width,
            "kind": self.kind,
            "boundary_left": self.boundary_left,
            "boundary_right": self.boundary_right,
            "successors": list(self.successors),
            "junction": self.junction,
            "adjacent_left": self.adjacent_left,
            "adjacent_right": self.adjacent_right,
            "change": self.change,
            "yield": self.yields,
        }


@dataclass
class TrafficLight:
    id: str
    lane: str
    stop_line: np.ndarray  # (2, 2)
    phases: list[tuple[str, float]]
    offset: float = 0.0

    def __post_init__(self):
        self.stop_line = np.asarray(self.stop_line, dtype=np.float64)
        self.cycle = sum(d for _, d in self.phases)

    def color_at(self, t: float) -> str:
        u = (t + self.offset) % self.cycle
        for color, dur in self.phases:
            if u < dur:
                return color
            u -= dur
        return self.phases[-1][0]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "lane": self.lane,
            "stop_line": [[float(x), float(y)] for x, y in self.stop_line],
            "phases": [[c, float(d)] for c, d in self.phases],
            "offset": self.offset,
        }


@dataclass
class StopSign:
    id: str
    lane: str
    stop_line: np.ndarray  # (2, 2)
    trigger: np.ndarray  # (N, 2) polygon

    def __post_init__(self):
        self.stop_line = np.asarray(self.stop_line, dtype=np.float64)
        self.trigger = np.asarray(self.trigger, dtype=np.float64)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "lane": self.lane,
            "stop_line": [[float(x), float(y)] for x, y in self.stop_line],
            "trigger": [[float(x), float(y)] for x, y in self.trigger],
        }


@dataclass
class Junction:
    id: str
    polygon: np.ndarray

    def __post_init__(self):
        self.polygon = np.asarray(self.polygon, dtype=np.float64)

    def to_json(self) -> dict:
        return {"id": self.id, "polygon": [[float(x), float(y)] for x, y in self.polygon]}


@dataclass
class SpawnPoint:
    lane: str
    s: float

    def to_json(self) -> dict:
        return {"lane": self.lane, "s": self.s}


@dataclass
class ParkingSpot:
    position: np.ndarray
    heading: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)

    def to_json(self) -> dict:
        return {"position": [float(self.position[0]), float(self.position[1])],
                "heading": self.heading}


class MapGraph:
    """Validated, immutable road network with runtime lookup tables."""

    def __init__(self, name: str, lanes: list[Lane], junctions: list[Junction],
                 lights: list[TrafficLight], stop_signs: list[StopSign],
                 spawn_points: list[SpawnPoint], parking: list[ParkingSpot] | None = None):
        self.name = name
        self.lanes = {l.id: l for l in lanes}
        self.junctions = {j.id: j for j in junctions}
        self.lights = {t.id: t for t in lights}
        self.stop_signs = {s.id: s for s in stop_signs}
        self.spawn_points = list(spawn_points)
        self.parking = list(parking or [])
        self.lights_by_lane = {}
        for t in lights:
            self.lights_by_lane.setdefault(t.lane, []).append(t)
        self.signs_by_lane = {}
        for s in stop_signs:
            self.signs_by_lane.setdefault(s.lane, []).append(s)
        self.drive_lanes = [l for l in lanes if l.kind == "drive"]
        self.walk_lanes = [l for l in lanes if l.kind in ("sidewalk", "cross")]
        pts = np.vstack([l.centerline for l in lanes])
        self.bounds = (pts.min(axis=0), pts.max(axis=0))

    # -- queries ---------------------------------------------------------

    def lane(self, lane_id: str) -> Lane:
        return self.lanes[lane_id]

    def locate_drive(self, point) -> tuple[str, float, float]:
        """Nearest drive lane: (lane id, arc length, |lateral|)."""
        best = None
        for lane in self.drive_lanes:
            s, lat, _ = geo.project_to_polyline(point, lane.centerline, lane.lengths)
            key = abs(lat)
            if best is None or key < best[2]:
                best = (lane.id, s, key)
        return best

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "lanes": [l.to_json() for l in self.lanes.values()],
            "junctions": [j.to_json() for j in self.junctions.values()],
            "lights": [t.to_json() for t in self.lights.values()],
            "stop_signs": [s.to_json() for s in self.stop_signs.values()],
            "spawn_points": [sp.to_json() for sp in self.spawn_points],
            "parking": [p.to_json() for p in self.parking],
        }

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# validation


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise MapError(path, message)


def _check_points(pts, path: str, min_points: int = 2):
    _require(isinstance(pts, (list, np.ndarray)) and len(pts) >= min_points,
             path, f"needs at least {min_points} points")
    arr = np.asarray(pts, dtype=np.float64)
    _require(arr.ndim == 2 and arr.shape[1] == 2, path, "points must be [x, y] pairs")
    _require(bool(np.all(np.isfinite(arr))), path, "coordinates must be finite")
    return arr


def _strongly_connected(ids: list[str], edges: dict[str, list[str]]) -> bool:
    if not ids:
        return True
    idset = set(ids)

    def reach(start: str, graph: dict[str, list[str]]) -> set[str]:
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for nxt in graph.get(node, []):
                if nxt in idset and nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    fwd = {i: [s for s in edges.get(i, []) if s in idset] for i in ids}
    rev: dict[str, list[str]] = {i: [] for i in ids}
    for i, outs in fwd.items():
        for o in outs:
            rev[o].append(i)
    return reach(ids[0], fwd) == idset and reach(ids[0], rev) == idset


def validate_map(doc: dict) -> MapGraph:
    """Build a MapGraph from a schema-version-1 JSON document."""
    _require(isinstance(doc, dict), "$", "map document must be an object")
    _require(doc.get("schema_version") == SCHEMA_VERSION, "$.schema_version",
             f"expected {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    name = doc.get("name")
    _require(isinstance(name, str) and name, "$.name", "map name required")

    raw_lanes = doc.get("lanes", [])
    _require(isinstance(raw_lanes, list) and raw_lanes, "$.lanes", "at least one lane required")
    lanes: list[Lane] = []
    ids = set()
    for i, rl in enumerate(raw_lanes):
        path = f"$.lanes[{i}]"
        lid = rl.get("id")
        _require(isinstance(lid, str) and lid, f"{path}.id", "lane id required")
        _require(lid not in ids, f"{path}.id", f"duplicate lane id {lid!r}")
        ids.add(lid)
        pts = _check_points(rl.get("centerline"), f"{path}.centerline")
        width = rl.get("width")
        _require(isinstance(width, (int, float)) and width > 0, f"{path}.width",
                 "width must be > 0")
        kind = rl.get("kind", "drive")
        _require(kind in LANE_KINDS, f"{path}.kind", f"kind must be one of {LANE_KINDS}")
        bl = rl.get("boundary_left", "solid")
        br = rl.get("boundary_right", "solid")
        _require(bl in BOUNDARIES and br in BOUNDARIES, f"{path}.boundary_left",
                 f"boundaries must be one of {BOUNDARIES}")
        change = rl.get("change")
        _require(change in (None, "left", "right"), f"{path}.change",
                 "change must be null, 'left' or 'right'")
        lanes.append(Lane(
            id=lid, centerline=pts, width=float(width), kind=kind,
            boundary_left=bl, boundary_right=br,
            successors=list(rl.get("successors", [])),
            junction=rl.get("junction"),
            adjacent_left=rl.get("adjacent_left"),
            adjacent_right=rl.get("adjacent_right"),
            change=change,
            yields=bool(rl.get("yield", False)),
        ))

    by_id = {l.id: l for l in lanes}
    for i, lane in enumerate(lanes):
        for j, succ in enumerate(lane.successors):
            path = f"$.lanes[{i}].successors[{j}]"
            _require(succ in by_id, path, f"unknown lane {succ!r}")
            gap = float(np.linalg.norm(lane.centerline[-1] - by_id[succ].centerline[0]))
            _require(gap <= CONTINUITY_TOL, path,
                     f"discontinuous link {lane.id}->{succ}: gap {gap:.2e} m")
            _require(by_id[succ].kind == lane.kind or {lane.kind, by_id[succ].kind} <= {"sidewalk", "cross"},
                     path, f"kind mismatch {lane.kind}->{by_id[succ].kind}")
        for attr in ("adjacent_left", "adjacent_right"):
            ref = getattr(lane, attr)
            if ref is not None:
                _require(ref in by_id, f"$.lanes[{i}].{attr}", f"unknown lane {ref!r}")

    raw_junctions = doc.get("junctions", [])
    junctions = []
    jids = set()
    for i, rj in enumerate(raw_junctions):
        path = f"$.junctions[{i}]"
        jid = rj.get("id")
        _require(isinstance(jid, str) and jid and jid not in jids, f"{path}.id",
                 "unique junction id required")
        jids.add(jid)
        junctions.append(Junction(jid, _check_points(rj.get("polygon"), f"{path}.polygon", 3)))
    for i, lane in enumerate(lanes):
        if lane.junction is not None:
            _require(lane.junction in jids, f"$.lanes[{i}].junction",
                     f"unknown junction {lane.junction!r}")

    lights = []
    for i, rt in enumerate(doc.get("lights", [])):
        path = f"$.lights[{i}]"
        _require(rt.get("lane") in by_id, f"{path}.lane", f"unknown lane {rt.get('lane')!r}")
        _require(by_id[rt["lane"]].kind == "drive", f"{path}.lane", "light must control a drive lane")
        stop_line = _check_points(rt.get("stop_line"), f"{path}.stop_line")
        _require(len(stop_line) == 2, f"{path}.stop_line", "stop line is a single segment")
        phases = rt.get("phases", [])
        _require(isinstance(phases, list) and phases, f"{path}.phases", "phases required")
        parsed = []
        for k, ph in enumerate(phases):
            _require(isinstance(ph, (list, tuple)) and len(ph) == 2 and ph[0] in LIGHT_COLORS
                     and isinstance(ph[1], (int, float)) and ph[1] > 0,
                     f"{path}.phases[{k}]", "phase must be [color, positive duration]")
            parsed.append((ph[0], float(ph[1])))
        lights.append(TrafficLight(rt.get("id", f"light{i}"), rt["lane"], stop_line,
                                   parsed, float(rt.get("offset", 0.0))))

    signs = []
    for i, rs in enumerate(doc.get("stop_signs", [])):
        path = f"$.stop_signs[{i}]"
        _require(rs.get("lane") in by_id, f"{path}.lane", f"unknown lane {rs.get('lane')!r}")
        stop_line = _check_points(rs.get("stop_line"), f"{path}.stop_line")
        trigger = _check_points(rs.get("trigger"), f"{path}.trigger", 3)
        signs.append(StopSign(rs.get("id", f"sign{i}"), rs["lane"], stop_line, trigger))

    spawns = []
    for i, sp in enumerate(doc.get("spawn_points", [])):
        path = f"$.spawn_points[{i}]"
        _require(sp.get("lane") in by_id, f"{path}.lane", f"unknown lane {sp.get('lane')!r}")
        s = sp.get("s")
        lane = by_id[sp["lane"]]
        _require(isinstance(s, (int, float)) and 0.0 <= s <= lane.length, f"{path}.s",
                 f"s must be within [0, {lane.length:.1f}]")
        spawns.append(SpawnPoint(sp["lane"], float(s)))

    parking = []
    for i, pp in enumerate(doc.get("parking", [])):
        path = f"$.parking[{i}]"
        pos = _check_points([pp.get("position", [math.nan, math.nan])], f"{path}.position", 1)[0]
        heading = pp.get("heading")
        _require(isinstance(heading, (int, float)) and math.isfinite(heading),
                 f"{path}.heading", "finite heading required")
        parking.append(ParkingSpot(pos, float(heading)))

    drive_ids = [l.id for l in lanes if l.kind == "drive"]
    edges = {l.id: l.successors for l in lanes}
    _require(_strongly_connected(drive_ids, edges), "$.lanes",
             "drive-lane graph is not strongly connected")

    return MapGraph(name, lanes, junctions, lights, signs, spawns, parking)


def load_map(path) -> MapGraph:
    """Load and validate a map file; JSON syntax errors keep line/column."""
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise MapError(f"{path}:{e.lineno}:{e.colno}", e.msg) from None
    return validate_map(doc)
