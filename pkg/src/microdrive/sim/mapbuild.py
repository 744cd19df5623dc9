"""Programmatic construction of the built-in maps.

All builders emit schema-version-1 JSON documents and run them through
the validating loader, so the shipped maps can never drift from the
schema contract.  Geometry conventions: right-hand traffic, lane
centerlines point in the travel direction, offsets to the right of
travel are positive.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry as geo
from .mapdata import MapGraph, validate_map

LANE_W = 3.5
SIDEWALK_OFF = 5.0


def _seg(a, b, spacing: float = 4.0):
    """Straight polyline from a to b sampled every ~spacing metres."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = max(2, int(math.ceil(np.linalg.norm(b - a) / spacing)) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) * a + t * b


def _compose(*pieces) -> np.ndarray:
    out = [np.asarray(pieces[0], dtype=np.float64)]
    for p in pieces[1:]:
        p = np.asarray(p, dtype=np.float64)
        if np.linalg.norm(out[-1][-1] - p[0]) < 1e-9:
            p = p[1:]
        out.append(p)
    return np.vstack(out)


def _lane(lid, pts, *, width=LANE_W, kind="drive", bl="none", br="solid",
          succ=(), junction=None, change=None):
    return {
        "id": lid,
        "centerline": [[float(x), float(y)] for x, y in np.asarray(pts)],
        "width": width,
        "kind": kind,
        "boundary_left": bl,
        "boundary_right": br,
        "successors": list(succ),
        "junction": junction,
        "change": change,
    }


def _stop_line_at_end(pts, width=LANE_W):
    pts = np.asarray(pts, dtype=np.float64)
    end = pts[-1]
    d = pts[-1] - pts[-2]
    heading = math.atan2(d[1], d[0])
    r = geo.right_of(heading) * (width / 2.0)
    return [[float((end - r)[0]), float((end - r)[1])],
            [float((end + r)[0]), float((end + r)[1])]]


def _rect(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def _spawn_points(doc, lane_ids, spacing=15.0, margin=10.0):
    lanes = {l["id"]: l for l in doc["lanes"]}
    for lid in lane_ids:
        pts = np.asarray(lanes[lid]["centerline"])
        total = geo.polyline_lengths(pts)[-1]
        s = margin
        while s <= total - margin:
            doc["spawn_points"].append({"lane": lid, "s": round(s, 2)})
            s += spacing


def _connector(lid, p0, h0, p1, h1, junction=None, change=None, yields=False,
               succ=()):
    pts = geo.bezier_connector(p0, h0, p1, h1)
    lane = _lane(lid, pts, bl="none", br="none", junction=junction,
                 change=change, succ=succ)
    lane["yield"] = yields
    return lane


# ---------------------------------------------------------------------------
# ring world: two-way single-lane loop with a middle bar and two signalized
# T-junctions


def _build_ring_doc(name: str, hw: float, hh: float, corner_r: float,
                    bar_x: float, light_offsets=(0.0, 10.0), rotate=0.0) -> dict:
    half = LANE_W / 2.0
    jw = 7.0  # junction half-width along the ring
    jd = 7.0  # junction depth into the interior

    # Ring axis pieces, counterclockwise.  A: bottom-east around to top-east;
    # B: top-west around to bottom-west.  The bar joins them at x = bar_x.
    r = corner_r
    e, w, n, s = hw, -hw, hh, -hh
    piece_a = _compose(
        _seg([bar_x + jw, s], [e - r, s]),
        geo.arc_points([e - r, s + r], r, -math.pi / 2, 0.0, 1.5),
        _seg([e, s + r], [e, n - r]),
        geo.arc_points([e - r, n - r], r, 0.0, math.pi / 2, 1.5),
        _seg([e - r, n], [bar_x + jw, n]),
    )
    piece_b = _compose(
        _seg([bar_x - jw, n], [w + r, n]),
        geo.arc_points([w + r, n - r], r, math.pi / 2, math.pi, 1.5),
        _seg([w, n - r], [w, s + r]),
        geo.arc_points([w + r, s + r], r, math.pi, 1.5 * math.pi, 1.5),
        _seg([w + r, s], [bar_x - jw, s]),
    )

    ccw_a = geo.offset_polyline(piece_a, half)
    ccw_b = geo.offset_polyline(piece_b, half)
    cw_a = geo.offset_polyline(piece_a[::-1], half)
    cw_b = geo.offset_polyline(piece_b[::-1], half)
    bar_n = geo.offset_polyline(_seg([bar_x, s + jd], [bar_x, n - jd], 3.0), half)
    bar_s = geo.offset_polyline(_seg([bar_x, n - jd], [bar_x, s + jd], 3.0), half)

    lanes = [
        _lane("ring:ccwA", ccw_a, bl="broken", succ=["jt:ew", "jt:es"]),
        _lane("ring:ccwB", ccw_b, bl="broken", succ=["jb:we", "jb:wn"]),
        _lane("ring:cwA", cw_a, bl="none", succ=["jb:ew", "jb:en"]),
        _lane("ring:cwB", cw_b, bl="none", succ=["jt:we", "jt:ws"]),
        _lane("bar:n", bar_n, bl="broken", succ=["jt:se", "jt:sw"]),
        _lane("bar:s", bar_s, bl="none", succ=["jb:ne", "jb:nw"]),
    ]

    def endpoint(pts, at_end=True):
        pts = np.asarray(pts)
        p = pts[-1] if at_end else pts[0]
        d = (pts[-1] - pts[-2]) if at_end else (pts[1] - pts[0])
        return p, math.atan2(d[1], d[0])

    # Bottom junction (jb): legs west (ccwB in, cwB out), east (cwA in,
    # ccwA out), north (bar:s in, bar:n out).
    pbi, hbi = endpoint(ccw_b)          # west incoming
    pao, hao = endpoint(ccw_a, False)   # east outgoing
    pai, hai = endpoint(cw_a)           # east incoming
    pbo, hbo = endpoint(cw_b, False)    # west outgoing
    pni, hni = endpoint(bar_s)          # north incoming
    pno, hno = endpoint(bar_n, False)   # north outgoing
    lanes += [
        _connector("jb:we", pbi, hbi, pao, hao, junction="jb", succ=["ring:ccwA"]),
        _connector("jb:wn", pbi, hbi, pno, hno, junction="jb", succ=["bar:n"]),
        _connector("jb:ew", pai, hai, pbo, hbo, junction="jb", succ=["ring:cwB"]),
        _connector("jb:en", pai, hai, pno, hno, junction="jb", succ=["bar:n"]),
        _connector("jb:ne", pni, hni, pao, hao, junction="jb", succ=["ring:ccwA"]),
        _connector("jb:nw", pni, hni, pbo, hbo, junction="jb", succ=["ring:cwB"]),
    ]

    # Top junction (jt): legs east (ccwA in, cwA out), west (cwB in, ccwB
    # out), south (bar:n in, bar:s out).
    pai2, hai2 = endpoint(ccw_a)
    pbo2, hbo2 = endpoint(ccw_b, False)
    pbi2, hbi2 = endpoint(cw_b)
    pao2, hao2 = endpoint(cw_a, False)
    pni2, hni2 = endpoint(bar_n)
    pno2, hno2 = endpoint(bar_s, False)
    lanes += [
        _connector("jt:ew", pai2, hai2, pbo2, hbo2, junction="jt", succ=["ring:ccwB"]),
        _connector("jt:es", pai2, hai2, pno2, hno2, junction="jt", succ=["bar:s"]),
        _connector("jt:we", pbi2, hbi2, pao2, hao2, junction="jt", succ=["ring:cwA"]),
        _connector("jt:ws", pbi2, hbi2, pno2, hno2, junction="jt", succ=["bar:s"]),
        _connector("jt:se", pni2, hni2, pao2, hao2, junction="jt", succ=["ring:cwA"]),
        _connector("jt:sw", pni2, hni2, pbo2, hbo2, junction="jt", succ=["ring:ccwB"]),
    ]

    junctions = [
        {"id": "jb", "polygon": _rect(bar_x - jw, s - LANE_W, bar_x + jw, s + jd)},
        {"id": "jt", "polygon": _rect(bar_x - jw, n - jd, bar_x + jw, n + LANE_W)},
    ]

    ring_phases = [["green", 10.0], ["yellow", 2.0], ["red", 8.0]]
    bar_phases = [["green", 6.0], ["yellow", 2.0], ["red", 12.0]]
    ob, ot = light_offsets
    lights = [
        {"id": "jb:w", "lane": "ring:ccwB", "stop_line": _stop_line_at_end(ccw_b),
         "phases": ring_phases, "offset": ob},
        {"id": "jb:e", "lane": "ring:cwA", "stop_line": _stop_line_at_end(cw_a),
         "phases": ring_phases, "offset": ob},
        {"id": "jb:n", "lane": "bar:s", "stop_line": _stop_line_at_end(bar_s),
         "phases": bar_phases, "offset": ob + 8.0},
        {"id": "jt:e", "lane": "ring:ccwA", "stop_line": _stop_line_at_end(ccw_a),
         "phases": ring_phases, "offset": ot},
        {"id": "jt:w", "lane": "ring:cwB", "stop_line": _stop_line_at_end(cw_b),
         "phases": ring_phases, "offset": ot},
        {"id": "jt:s", "lane": "bar:n", "stop_line": _stop_line_at_end(bar_n),
         "phases": bar_phases, "offset": ot + 8.0},
    ]

    # Pedestrian network: outer loop, two interior loops split by the bar,
    # and four road crossings.
    ring_axis = _compose(piece_a, _seg([bar_x + jw, n], [bar_x - jw, n], 3.0),
                         piece_b, _seg([bar_x - jw, s], [bar_x + jw, s], 3.0))
    outer = geo.offset_polyline(ring_axis, -SIDEWALK_OFF)
    outer[-1] = outer[0]

    def inner_loop(x0, x1):
        rr = 4.0
        y0, y1 = s + SIDEWALK_OFF, n - SIDEWALK_OFF
        return _compose(
            _seg([x0 + rr, y0], [x1 - rr, y0]),
            geo.arc_points([x1 - rr, y0 + rr], rr, -math.pi / 2, 0.0, 1.5),
            _seg([x1, y0 + rr], [x1, y1 - rr]),
            geo.arc_points([x1 - rr, y1 - rr], rr, 0.0, math.pi / 2, 1.5),
            _seg([x1 - rr, y1], [x0 + rr, y1]),
            geo.arc_points([x0 + rr, y1 - rr], rr, math.pi / 2, math.pi, 1.5),
            _seg([x0, y1 - rr], [x0, y0 + rr]),
            geo.arc_points([x0 + rr, y0 + rr], rr, math.pi, 1.5 * math.pi, 1.5),
        )

    inner_w = inner_loop(w + SIDEWALK_OFF, bar_x - SIDEWALK_OFF)
    inner_e = inner_loop(bar_x + SIDEWALK_OFF, e - SIDEWALK_OFF)
    inner_w = np.vstack([inner_w, inner_w[:1]])
    inner_e = np.vstack([inner_e, inner_e[:1]])

    walk = [
        _lane("sw:outer", outer, width=1.5, kind="sidewalk", bl="none", br="none"),
        _lane("sw:innerW", inner_w, width=1.5, kind="sidewalk", bl="none", br="none"),
        _lane("sw:innerE", inner_e, width=1.5, kind="sidewalk", bl="none", br="none"),
        _lane("cx:e", _seg([e + SIDEWALK_OFF, 0], [e - SIDEWALK_OFF, 0], 2.0),
              width=2.0, kind="cross", bl="none", br="none"),
        _lane("cx:w", _seg([w - SIDEWALK_OFF, 0], [w + SIDEWALK_OFF, 0], 2.0),
              width=2.0, kind="cross", bl="none", br="none"),
        _lane("cx:bar", _seg([bar_x - SIDEWALK_OFF, 10], [bar_x + SIDEWALK_OFF, 10], 2.0),
              width=2.0, kind="cross", bl="none", br="none"),
        _lane("cx:s", _seg([w / 2, s - SIDEWALK_OFF], [w / 2, s + SIDEWALK_OFF], 2.0),
              width=2.0, kind="cross", bl="none", br="none"),
    ]

    doc = {
        "schema_version": 1,
        "name": name,
        "lanes": lanes + walk,
        "junctions": junctions,
        "lights": lights,
        "stop_signs": [],
        "spawn_points": [],
        "parking": [],
    }
    _spawn_points(doc, ["ring:ccwA", "ring:ccwB", "ring:cwA", "ring:cwB",
                        "bar:n", "bar:s"])

    if rotate:
        _rotate_doc(doc, rotate)
    return doc


def _rotate_doc(doc: dict, angle: float):
    c, si = math.cos(angle), math.sin(angle)

    def rot(p):
        return [c * p[0] - si * p[1], si * p[0] + c * p[1]]

    for lane in doc["lanes"]:
        lane["centerline"] = [rot(p) for p in lane["centerline"]]
    for j in doc["junctions"]:
        j["polygon"] = [rot(p) for p in j["polygon"]]
    for t in doc["lights"]:
        t["stop_line"] = [rot(p) for p in t["stop_line"]]
    for sgn in doc["stop_signs"]:
        sgn["stop_line"] = [rot(p) for p in sgn["stop_line"]]
        sgn["trigger"] = [rot(p) for p in sgn["trigger"]]
    for p in doc["parking"]:
        p["position"] = rot(p["position"])
        p["heading"] = p["heading"] + angle


# ---------------------------------------------------------------------------
# town world: single/dual-lane stretch, signalized T, all-way-stop spur,
# roundabout, and an elevated return loop


def _dual_lane_pair(prefix, a, b, succ_l, succ_r, spacing=4.0):
    """Two same-direction lanes (l = inner/left, r = outer/right)."""
    axis = _seg(a, b, spacing)
    inner = geo.offset_polyline(axis, LANE_W / 2.0)
    outer = geo.offset_polyline(axis, 1.5 * LANE_W)
    return [
        _lane(f"{prefix}_l", inner, bl="broken", br="broken", succ=succ_l),
        _lane(f"{prefix}_r", outer, bl="none", br="solid", succ=succ_r),
    ]


def _build_town_doc(name: str) -> dict:
    half = LANE_W / 2.0
    lanes: list[dict] = []
    lights = []
    signs = []
    junctions = []

    # Main east-west road, axis y = 0.  Segments: W (west of the signalized
    # T-junction "jx"), M (between jx and the stop-controlled T "js"),
    # E (dual carriageway from js to the roundabout).
    xw0, xjx, xjs, xe1 = -56.0, -32.0, 0.0, 28.0
    jhw = 7.0  # junction half-extent along the road

    def ew(a, b):
        return geo.offset_polyline(_seg([a, 0.0], [b, 0.0]), half)

    def we(a, b):
        return geo.offset_polyline(_seg([a, 0.0], [b, 0.0]), half)

    lanes += [
        _lane("W:eb", ew(xw0, xjx - jhw), bl="broken", succ=["jx:we", "jx:wn"]),
        _lane("W:wb", we(xjx - jhw, xw0), bl="none", succ=["w:turn"]),
        _lane("M:eb", ew(xjx + jhw, xjs - jhw), bl="broken",
              succ=["js:wel", "js:wer", "js:ws"]),
        _lane("M:wb", we(xjs - jhw, xjx + jhw), bl="none", succ=["jx:ew", "jx:en"]),
    ]
    lanes.append(_connector("w:turn", np.asarray(ew(xjx - jhw, xw0))[-1], math.pi,
                            np.asarray(ew(xw0, xjx - jhw))[0], 0.0))
    lanes[-1]["successors"] = ["W:eb"]

    # Segment E: dual lanes each way, split at x = 12 and x = 20 so the
    # lane-change connectors join at real lane endpoints.
    xa, xb = 12.0, 20.0
    eb_succ_end = (["rb:in_l"], ["rb:in_r"])
    lanes += _dual_lane_pair("E:eb_a", [xjs + jhw, 0], [xa, 0],
                             ["E:eb_b_l", "ch:eb_lr"], ["E:eb_b_r", "ch:eb_rl"])
    lanes += _dual_lane_pair("E:eb_b", [xa, 0], [xb, 0], ["E:eb_c_l"], ["E:eb_c_r"])
    lanes += _dual_lane_pair("E:eb_c", [xb, 0], [xe1, 0], *eb_succ_end)
    lanes += _dual_lane_pair("E:wb_a", [xe1, 0], [xb, 0],
                             ["E:wb_b_l", "ch:wb_lr"], ["E:wb_b_r", "ch:wb_rl"])
    lanes += _dual_lane_pair("E:wb_b", [xb, 0], [xa, 0], ["E:wb_c_l"], ["E:wb_c_r"])
    lanes += _dual_lane_pair("E:wb_c", [xa, 0], [xjs + jhw, 0],
                             ["js:ew", "js:es"], ["js:ewr"])

    def lane_pts(lid):
        return np.asarray(next(l for l in lanes if l["id"] == lid)["centerline"])

    def end_pose(lid):
        pts = lane_pts(lid)
        d = pts[-1] - pts[-2]
        return pts[-1], math.atan2(d[1], d[0])

    def start_pose(lid):
        pts = lane_pts(lid)
        d = pts[1] - pts[0]
        return pts[0], math.atan2(d[1], d[0])

    # Lane-change connectors (diagonals between the split points).
    for pre, frm, to, side in (
        ("ch:eb_lr", "E:eb_a_l", "E:eb_c_r", "right"),
        ("ch:eb_rl", "E:eb_a_r", "E:eb_c_l", "left"),
        ("ch:wb_lr", "E:wb_a_l", "E:wb_c_r", "right"),
        ("ch:wb_rl", "E:wb_a_r", "E:wb_c_l", "left"),
    ):
        p0, h0 = end_pose(frm)
        p1, h1 = start_pose(to)
        lane = _connector(pre, p0, h0, p1, h1, change=side)
        lane["successors"] = [to]
        lanes.append(lane)

    # Signalized T-junction jx: legs W (W:eb in / W:wb out), E (M:wb in /
    # M:eb out), N (north road: "ns:sb" in / "ns:nb" out).
    ns_x = xjx
    ns_y0, ns_y1 = 9.0, 18.0
    lanes += [
        _lane("ns:nb", geo.offset_polyline(_seg([ns_x, ns_y0], [ns_x, ns_y1], 3.0), half),
              bl="broken", succ=["rt:e_on"]),
        _lane("ns:sb", geo.offset_polyline(_seg([ns_x, ns_y1], [ns_x, ns_y0], 3.0), half),
              bl="none", succ=["jx:nw", "jx:ne"]),
    ]

    jx_moves = [
        ("jx:we", "W:eb", "M:eb", None),
        ("jx:wn", "W:eb", "ns:nb", None),
        ("jx:ew", "M:wb", "W:wb", None),
        ("jx:en", "M:wb", "ns:nb", None),
        ("jx:nw", "ns:sb", "W:wb", None),
        ("jx:ne", "ns:sb", "M:eb", None),
    ]
    for lid, frm, to, _ in jx_moves:
        p0, h0 = end_pose(frm)
        p1, h1 = start_pose(to)
        lane = _connector(lid, p0, h0, p1, h1, junction="jx")
        lane["successors"] = [to]
        lanes.append(lane)
    junctions.append({"id": "jx", "polygon": _rect(xjx - jhw, -jhw, xjx + jhw, ns_y0)})

    ew_phases = [["green", 12.0], ["yellow", 2.0], ["red", 8.0]]
    ns_phases = [["green", 6.0], ["yellow", 2.0], ["red", 14.0]]
    lights += [
        {"id": "jx:w", "lane": "W:eb", "stop_line": _stop_line_at_end(lane_pts("W:eb")),
         "phases": ew_phases, "offset": 0.0},
        {"id": "jx:e", "lane": "M:wb", "stop_line": _stop_line_at_end(lane_pts("M:wb")),
         "phases": ew_phases, "offset": 0.0},
        {"id": "jx:n", "lane": "ns:sb", "stop_line": _stop_line_at_end(lane_pts("ns:sb")),
         "phases": ns_phases, "offset": 8.0},
    ]

    # Stop-controlled T-junction js with a southern cul-de-sac spur.
    sp_y0, sp_y1 = -9.0, -20.0
    lanes += [
        _lane("sp:s", geo.offset_polyline(_seg([xjs, sp_y0], [xjs, sp_y1], 3.0), half),
              bl="broken", succ=["sp:loop"]),
        _lane("sp:n", geo.offset_polyline(_seg([xjs, sp_y1], [xjs, sp_y0], 3.0), half),
              bl="none", succ=["js:ne", "js:nw"]),
    ]
    # Turnaround bulb from sp:s end to sp:n start.
    p0, h0 = end_pose("sp:s")
    p1, h1 = start_pose("sp:n")
    mid = np.array([xjs, sp_y1 - 7.0])
    loop = _compose(
        geo.bezier_connector(p0, h0, mid + np.array([-4.0, 0.0]), 0.0),
        geo.bezier_connector(mid + np.array([-4.0, 0.0]), 0.0, p1, h1),
    )
    lane = _lane("sp:loop", loop, bl="none", br="solid", succ=["sp:n"])
    lanes.append(lane)

    js_moves = [
        ("js:wel", "M:eb", "E:eb_a_l", None),
        ("js:wer", "M:eb", "E:eb_a_r", None),
        ("js:ws", "M:eb", "sp:s", None),
        ("js:ew", "E:wb_c_l", "M:wb", None),
        ("js:ewr", "E:wb_c_r", "M:wb", None),
        ("js:es", "E:wb_c_l", "sp:s", None),
        ("js:ne", "sp:n", "E:eb_a_r", None),
        ("js:nw", "sp:n", "M:wb", None),
    ]
    for lid, frm, to, _ in js_moves:
        p0, h0 = end_pose(frm)
        p1, h1 = start_pose(to)
        lane = _connector(lid, p0, h0, p1, h1, junction="js")
        lane["successors"] = [to]
        lanes.append(lane)
    junctions.append({"id": "js", "polygon": _rect(xjs - jhw, sp_y0, xjs + jhw, jhw)})

    # All approaches to js are stop-controlled.
    for sid, lid in (("js:stop_n", "sp:n"), ("js:stop_w", "M:eb"),
                     ("js:stop_el", "E:wb_c_l"), ("js:stop_er", "E:wb_c_r")):
        pts = lane_pts(lid)
        end = pts[-1]
        d = pts[-1] - pts[-2]
        h = math.atan2(d[1], d[0])
        fwd = geo.unit(h)
        # Trigger quad covering the last 8 m of the approach lane, ordered
        # back-right, front-right, front-left, back-left.
        br_ = end - 8.0 * fwd + geo.right_of(h) * 1.9
        fr_ = end + geo.right_of(h) * 1.9
        fl_ = end - geo.right_of(h) * 1.9
        bl_ = end - 8.0 * fwd - geo.right_of(h) * 1.9
        trig = [[float(p[0]), float(p[1])] for p in (br_, fr_, fl_, bl_)]
        signs.append({"id": sid, "lane": lid,
                      "stop_line": _stop_line_at_end(pts), "trigger": trig})

    # Roundabout: counterclockwise circle, radius 8, centre (40, 0); legs
    # west (dual road) and north (link to the return loop).
    cx, cy, R = 40.0, 0.0, 8.0

    def circ(a0, a1):
        return geo.arc_points([cx, cy], R, math.radians(a0), math.radians(a1), 1.0)

    lanes += [
        _lane("rb:x1", circ(160, 200), bl="none", br="none", succ=["rb:x2"]),
        _lane("rb:x2", circ(200, 430), bl="none", br="none", succ=["rb:x3", "rb:out_n"]),
        _lane("rb:x3", circ(430, 470), bl="none", br="none", succ=["rb:x4"]),
        _lane("rb:x4", circ(470, 520), bl="none", br="none",
              succ=["rb:x1", "rb:out_wl", "rb:out_wr"]),
    ]

    # North leg of the roundabout up to the return road.
    nx = cx
    lanes += [
        _lane("rbn:nb", geo.offset_polyline(_seg([nx, 12.0], [nx, 18.0], 3.0), half),
              bl="broken", succ=["rt:w_on"]),
        _lane("rbn:sb", geo.offset_polyline(_seg([nx, 18.0], [nx, 12.0], 3.0), half),
              bl="none", succ=["rb:in_n"]),
    ]

    def circle_pose(deg):
        a = math.radians(deg)
        p = np.array([cx + R * math.cos(a), cy + R * math.sin(a)])
        return p, a + math.pi / 2.0

    for lid, frm_pose, to_pose, yields, succ in (
        ("rb:in_l", end_pose("E:eb_c_l"), circle_pose(200), True, ["rb:x2"]),
        ("rb:in_r", end_pose("E:eb_c_r"), circle_pose(200), True, ["rb:x2"]),
        ("rb:in_n", end_pose("rbn:sb"), circle_pose(110), True, ["rb:x4"]),
    ):
        p0, h0 = frm_pose
        p1, h1 = to_pose
        lane = _connector(lid, p0, h0, p1, h1, yields=yields)
        lane["successors"] = succ
        lanes.append(lane)
    for lid, from_deg, to_pose, succ in (
        ("rb:out_wl", 160, start_pose("E:wb_a_l"), ["E:wb_a_l"]),
        ("rb:out_wr", 160, start_pose("E:wb_a_r"), ["E:wb_a_r"]),
        ("rb:out_n", 70, start_pose("rbn:nb"), ["rbn:nb"]),
    ):
        p0, h0 = circle_pose(from_deg)
        p1, h1 = to_pose
        lane = _connector(lid, p0, h0, p1, h1)
        lane["successors"] = succ
        lanes.append(lane)

    # Return road: two-way, along y = 26, linking the roundabout north leg
    # with the jx north road.
    rt_y = 26.0
    rx0, rx1 = xjx + 4.0, nx - 4.0
    lanes += [
        _lane("rt:w", geo.offset_polyline(_seg([rx1, rt_y], [rx0, rt_y], 4.0), half),
              bl="broken", succ=["rt:w_off"]),
        _lane("rt:e", geo.offset_polyline(_seg([rx0, rt_y], [rx1, rt_y], 4.0), half),
              bl="none", succ=["rt:e_off"]),
    ]
    for lid, frm, to in (
        ("rt:w_on", "rbn:nb", "rt:w"),
        ("rt:w_off", "rt:w", "ns:sb"),
        ("rt:e_on", "ns:nb", "rt:e"),
        ("rt:e_off", "rt:e", "rbn:sb"),
    ):
        p0, h0 = end_pose(frm) if frm != lid else (None, None)
        p1, h1 = start_pose(to)
        lane = _connector(lid, p0, h0, p1, h1)
        lane["successors"] = [to]
        lanes.append(lane)

    # Rewire: the through lanes already point at these connectors by name.
    # Sidewalks: one loop around the M/E stretch, plus two crossings.
    sw_y = 9.5
    sw = _compose(
        _seg([xjx + jhw, -sw_y], [xe1, -sw_y]),
        geo.arc_points([xe1, 0.0], sw_y, -math.pi / 2, math.pi / 2, 2.0),
        _seg([xe1, sw_y], [xjx + jhw, sw_y]),
        geo.arc_points([xjx + jhw, 0.0], sw_y, math.pi / 2, 1.5 * math.pi, 2.0),
    )
    sw = np.vstack([sw, sw[:1]])
    walk = [
        _lane("sw:loop", sw, width=1.5, kind="sidewalk", bl="none", br="none"),
        _lane("cx:m", _seg([-14.0, -sw_y], [-14.0, sw_y], 2.0), width=2.0,
              kind="cross", bl="none", br="none"),
        _lane("cx:e2", _seg([24.0, sw_y], [24.0, -sw_y], 2.0), width=2.0,
              kind="cross", bl="none", br="none"),
    ]
    lanes += walk

    doc = {
        "schema_version": 1,
        "name": name,
        "lanes": lanes,
        "junctions": junctions,
        "lights": lights,
        "stop_signs": signs,
        "spawn_points": [],
        "parking": [
            {"position": [-24.0, -5.2], "heading": 0.0},
            {"position": [-14.0 - 4.0, 31.0], "heading": 0.0},
            {"position": [10.0, 31.0], "heading": 0.0},
        ],
    }
    _spawn_points(doc, ["W:eb", "W:wb", "M:eb", "M:wb", "rt:w", "rt:e"],
                  spacing=12.0, margin=6.0)
    _spawn_points(doc, ["E:eb_a_l", "E:eb_a_r", "E:wb_a_l", "E:wb_a_r",
                        "E:eb_c_l", "E:eb_c_r", "E:wb_c_l", "E:wb_c_r"],
                  spacing=10.0, margin=4.0)
    _spawn_points(doc, ["sp:s", "sp:n"], spacing=8.0, margin=3.0)
    return doc


# ---------------------------------------------------------------------------
# registry

_BUILDERS = {
    "nocrash-train": lambda: _build_ring_doc("nocrash-train", 42.0, 30.0, 8.0, 0.0),
    "nocrash-test": lambda: _build_ring_doc("nocrash-test", 34.0, 25.0, 7.0, 6.0,
                                            light_offsets=(5.0, 13.0),
                                            rotate=math.pi / 2.0),
    "town-train": lambda: _build_town_doc("town-train"),
}

_CACHE: dict[str, MapGraph] = {}


def available_maps() -> list[str]:
    return sorted(_BUILDERS)


def get_map(name: str) -> MapGraph:
    """Build (and cache) one of the built-in maps by name."""
    if name not in _BUILDERS:
        raise KeyError(f"unknown map {name!r}; available: {available_maps()}")
    if name not in _CACHE:
        _CACHE[name] = validate_map(_BUILDERS[name]())
    return _CACHE[name]
