from __future__ import annotations

import json
import math
from types import MappingProxyType

import numpy as np
import pytest

from rvv.kinematics import VariableRegistry
from rvv.scene import (
    Binding,
    ConnectedLink,
    EmbeddedVisual,
    IDENTITY_QUAT,
    ObjectHighlight,
    ObjectHold,
    PropertyBinding,
    SceneError,
    SceneGraph,
    TextAnnotation,
    billboard_orient,
    evaluate,
    quat_canonical,
    quat_mul,
    quat_rotate,
    resolve_transforms,
    snapshot_bytes,
)
from rvv.tracking import TrackedPoint


def reg(values, frame=0):
    return VariableRegistry(frame, MappingProxyType(values))


def tp(name, p, frame=0, valid=True):
    return TrackedPoint(name, frame, p, valid)


def make_graph(trackers={"obj_1"}):
    g = SceneGraph()
    return g


# --- billboard ---------------------------------------------------------------

def test_billboard_faces_camera_head_on():
    q = billboard_orient((0.0, 0.0, 2.0), (0.0, 0.0, 0.0))
    z_local = quat_rotate(q, (0.0, 0.0, 1.0))
    assert np.dot(z_local, (0.0, 0.0, -1.0)) >= 1 - 1e-9


def test_billboard_90_degree_azimuth():
    # camera to the side: analytically the local +z must equal the unit
    # direction from object to camera
    obj = (0.0, 0.0, 2.0)
    cam = (2.0, 0.0, 2.0)
    q = billboard_orient(obj, cam)
    z_local = quat_rotate(q, (0.0, 0.0, 1.0))
    assert np.allclose(z_local, (1.0, 0.0, 0.0), atol=1e-9)
    # roll: local +y projects onto world up (0,-1,0)
    y_local = quat_rotate(q, (0.0, 1.0, 0.0))
    assert np.dot(y_local, (0.0, -1.0, 0.0)) > 0.99


def test_billboard_orbit_invariant():
    obj = (0.1, -0.2, 1.5)
    for i in range(72):
        a = 2 * math.pi * i / 72
        cam = (2 * math.cos(a), -0.4, 1.5 + 2 * math.sin(a))
        q = billboard_orient(obj, cam)
        z_local = quat_rotate(q, (0.0, 0.0, 1.0))
        to_cam = np.subtract(cam, obj)
        to_cam /= np.linalg.norm(to_cam)
        assert float(np.dot(z_local, to_cam)) >= 1 - 1e-6
        # quaternion stays unit-norm and canonical
        assert math.isclose(sum(c * c for c in q), 1.0, abs_tol=1e-9)
        assert q[0] >= 0


def test_billboard_coincident_keeps_previous():
    prev = quat_canonical((0.9, 0.1, 0.2, 0.1))
    assert billboard_orient((1.0, 1.0, 1.0), (1.0, 1.0, 1.0), prev) == prev
    assert billboard_orient((1.0, 1.0, 1.0), (1.0, 1.0, 1.0)) == IDENTITY_QUAT


def test_billboard_straight_up_fallback():
    q = billboard_orient((0.0, 0.0, 1.0), (0.0, -2.0, 1.0))  # camera along world up
    z_local = quat_rotate(q, (0.0, 0.0, 1.0))
    assert np.allclose(z_local, (0.0, -1.0, 0.0), atol=1e-9)


# --- object validation ---------------------------------------------------------

def test_object_invariants():
    with pytest.raises(SceneError):
        ObjectHighlight(id="h", shape="blob")
    with pytest.raises(SceneError):
        ObjectHighlight(id="h", scale=(0.0, 1.0, 1.0))
    with pytest.raises(SceneError):
        EmbeddedVisual(id="v", source="x", opacity=1.5)
    with pytest.raises(SceneError):
        ConnectedLink(id="l", a="t1", b="t1")
    with pytest.raises(SceneError):
        PropertyBinding("o", "sparkle", "1")


def test_attach_unknown_tracker_rejected():
    g = SceneGraph()
    g.add_object(TextAnnotation(id="label"))
    with pytest.raises(SceneError, match="unknown tracker"):
        g.attach("label", "ghost_tracker", {"obj_1"})


def test_attach_default_offsets():
    g = SceneGraph()
    g.add_object(TextAnnotation(id="label"))
    g.add_object(ObjectHighlight(id="hl"))
    b1 = g.attach("label", "obj_1", {"obj_1"})
    b2 = g.attach("hl", "obj_1", {"obj_1"})
    assert b1.offset == (0.0, 0.15, 0.0)  # annotations float above the point
    assert b2.offset == (0.0, 0.0, 0.0)  # highlights sit at the center


def test_template_bind_time_validation():
    g = SceneGraph()
    g.add_object(TextAnnotation(id="label"))
    declared = {"obj_1.x"}
    g.set_template("label", "X: ${obj_1.x}", declared)
    with pytest.raises(SceneError, match="unknown variable"):
        g.set_template("label", "X: ${obj_9.x}", declared)


# --- transforms / holds ----------------------------------------------------------

def _one_object_graph(kind="highlight"):
    g = SceneGraph()
    if kind == "highlight":
        g.add_object(ObjectHighlight(id="hl"))
        g.attach("hl", "obj_1", {"obj_1"})
    elif kind == "text":
        g.add_object(TextAnnotation(id="hl"))
        g.attach("hl", "obj_1", {"obj_1"})
    return g


def test_bound_object_follows_tracker():
    g = _one_object_graph()
    holds = {}
    for i, x in enumerate((0.0, 0.1, 0.2)):
        tracked = {"obj_1": tp("obj_1", (x, 0.0, 1.0), frame=i)}
        resolve_transforms(g, tracked, (0, 0, 0), holds)
        assert holds["hl"].position == pytest.approx((x, 0.0, 1.0))
    snap = evaluate(g, reg({}), tracked, holds, {}, (0.0, 0.0, 0.0), 2)
    assert snap["objects"][0]["position"] == pytest.approx([0.2, 0.0, 1.0])
    assert snap["objects"][0]["stale"] is False


def test_annotation_offset_applies():
    g = SceneGraph()
    g.add_object(TextAnnotation(id="label"))
    g.attach("label", "obj_1", {"obj_1"})
    holds = {}
    tracked = {"obj_1": tp("obj_1", (1.0, 2.0, 3.0))}
    resolve_transforms(g, tracked, (0, 0, 0), holds)
    assert holds["label"].position == pytest.approx((1.0, 2.15, 3.0))


def test_lost_tracker_holds_last_transform_and_flags_stale():
    g = _one_object_graph()
    holds = {}
    tracked = {"obj_1": tp("obj_1", (0.5, 0.0, 1.0))}
    resolve_transforms(g, tracked, (0, 0, 0), holds)
    lost = {"obj_1": TrackedPoint("obj_1", 1, None, False)}
    resolve_transforms(g, lost, (0, 0, 0), holds)
    assert holds["hl"].position == pytest.approx((0.5, 0.0, 1.0))
    snap = evaluate(g, reg({}), lost, holds, {}, (0.0, 0.0, 0.0), 1)
    assert snap["objects"][0]["stale"] is True
    assert snap["objects"][0]["position"] == pytest.approx([0.5, 0.0, 1.0])


def test_link_endpoints_and_length_match_distance():
    g = SceneGraph()
    g.add_object(ConnectedLink(id="link", a="obj_1", b="anchor_1"))
    holds = {}
    a = (0.0, 0.0, 1.0)
    b = (0.3, 0.4, 1.0)
    tracked = {"obj_1": tp("obj_1", a), "anchor_1": tp("anchor_1", b)}
    resolve_transforms(g, tracked, (0, 0, 0), holds)
    snap = evaluate(g, reg({}), tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    ends = snap["objects"][0]["endpoints"]
    assert ends[0] == pytest.approx(list(a)) and ends[1] == pytest.approx(list(b))
    length = math.dist(ends[0], ends[1])
    from rvv.kinematics import distance

    assert abs(length - distance(tracked["obj_1"], tracked["anchor_1"])) <= 1e-12
    # fixed endpoint variant
    g2 = SceneGraph()
    g2.add_object(ConnectedLink(id="link", a="obj_1", b=(1.0, 1.0, 1.0)))
    holds2 = {}
    resolve_transforms(g2, tracked, (0, 0, 0), holds2)
    snap2 = evaluate(g2, reg({}), tracked, holds2, {}, (0.0, 0.0, 0.0), 0)
    assert snap2["objects"][0]["endpoints"][1] == [1.0, 1.0, 1.0]


# --- property bindings ------------------------------------------------------------

def test_scale_binding_replaces_uniform():
    g = _one_object_graph()
    g.set_property_binding("hl", "scale", "distance_1", 1.0, 0.0, {"distance_1"})
    holds = {}
    tracked = {"obj_1": tp("obj_1", (0, 0, 1))}
    resolve_transforms(g, tracked, (0, 0, 0), holds)
    snap = evaluate(g, reg({"distance_1": 2.0}), tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    assert snap["objects"][0]["scale"] == [2.0, 2.0, 2.0]
    # negative mapped scale clamps to a positive epsilon
    snap = evaluate(g, reg({"distance_1": -5.0}), tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    assert snap["objects"][0]["scale"][0] == pytest.approx(1e-6)


def test_opacity_binding_clamps():
    g = _one_object_graph()
    g.set_property_binding("hl", "opacity", "distance_1", 1.0, 0.0, {"distance_1"})
    holds = {}
    tracked = {"obj_1": tp("obj_1", (0, 0, 1))}
    resolve_transforms(g, tracked, (0, 0, 0), holds)
    snap = evaluate(g, reg({"distance_1": 3.0}), tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    assert snap["objects"][0]["opacity"] == 1.0
    snap = evaluate(g, reg({"distance_1": -3.0}), tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    assert snap["objects"][0]["opacity"] == 0.0
    # unavailable source: authored opacity stands
    snap = evaluate(g, reg({"distance_1": None}), tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    assert snap["objects"][0]["opacity"] == pytest.approx(160 / 255)


def test_rotation_binding_spins_about_local_z():
    g = _one_object_graph()
    g.set_property_binding("hl", "rotation", "angle_1", 1.0, 0.0, {"angle_1"})
    holds = {}
    tracked = {"obj_1": tp("obj_1", (0, 0, 1))}
    resolve_transforms(g, tracked, (0, 0, 0), holds)
    snap = evaluate(g, reg({"angle_1": 90.0}), tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    q = snap["objects"][0]["orientation"]
    x_local = quat_rotate(tuple(q), (1.0, 0.0, 0.0))
    assert np.allclose(x_local, (0.0, 1.0, 0.0), atol=1e-9)


def test_color_intensity_binding():
    g = _one_object_graph()
    g.set_property_binding("hl", "color-intensity", "v", 1.0, 0.0, {"v"})
    holds = {}
    tracked = {"obj_1": tp("obj_1", (0, 0, 1))}
    resolve_transforms(g, tracked, (0, 0, 0), holds)
    snap = evaluate(g, reg({"v": 0.5}), tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    color = snap["objects"][0]["color"]
    assert color[0] == pytest.approx(0.5 * 255 / 255)
    with pytest.raises(SceneError):
        g2 = SceneGraph()
        g2.add_object(TextAnnotation(id="t"))
        g2.set_property_binding("t", "color-intensity", "v", 1.0, 0.0, {"v"})


def test_property_binding_validates_expression_variables():
    g = _one_object_graph()
    with pytest.raises(SceneError, match="unknown variable"):
        g.set_property_binding("hl", "scale", "nope_1", 1.0, 0.0, {"distance_1"})


# --- snapshot determinism -----------------------------------------------------------

def test_snapshot_bytes_deterministic_and_nan_free():
    g = _one_object_graph()
    holds = {}
    tracked = {"obj_1": tp("obj_1", (0.1, 0.2, 1.0))}
    resolve_transforms(g, tracked, (0, 0, 0), holds)
    r = reg({"obj_1.x": 0.1, "d": None})
    snap1 = evaluate(g, r, tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    snap2 = evaluate(g, r, tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    b1 = snapshot_bytes(snap1)
    b2 = snapshot_bytes(snap2)
    assert b1 == b2
    doc = json.loads(b1)
    assert doc["variables"]["d"] is None

    def no_nan(x):
        if isinstance(x, float):
            assert math.isfinite(x)
        elif isinstance(x, dict):
            for v in x.values():
                no_nan(v)
        elif isinstance(x, list):
            for v in x:
                no_nan(v)

    no_nan(doc)


def test_snapshot_objects_sorted_by_id():
    g = SceneGraph()
    g.add_object(ObjectHighlight(id="zed"))
    g.attach("zed", "obj_1", {"obj_1"})
    g.add_object(ObjectHighlight(id="abc"))
    g.attach("abc", "obj_1", {"obj_1"})
    holds = {}
    tracked = {"obj_1": tp("obj_1", (0, 0, 1))}
    resolve_transforms(g, tracked, (0, 0, 0), holds)
    snap = evaluate(g, reg({}), tracked, holds, {}, (0.0, 0.0, 0.0), 0)
    assert [o["id"] for o in snap["objects"]] == ["abc", "zed"]


def test_remove_object_cleans_bindings():
    g = _one_object_graph()
    g.set_property_binding("hl", "scale", "1 + 1", 1.0, 0.0, set())
    g.remove_object("hl")
    assert not g.objects and not g.bindings and not g.property_bindings
    with pytest.raises(SceneError):
        g.remove_object("hl")
