"""Authoring scene graph: virtual objects bound to trackers, property
bindings driven by registry expressions, and per-frame snapshot evaluation.

Snapshots are self-contained dicts (no tracker references) serialized with
stable key order so identical inputs always produce identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .camera import Vec3, vec_norm, vec_sub
from .expressions import Template, eval_expr, parse_expression, parse_template, expr_variables
from .kinematics import VariableRegistry
from .tracking import TrackedPoint

Quat = tuple[float, float, float, float]  # (w, x, y, z)

IDENTITY_QUAT: Quat = (1.0, 0.0, 0.0, 0.0)
TEXT_DEFAULT_OFFSET: Vec3 = (0.0, 0.15, 0.0)
HIGHLIGHT_SHAPES = ("box", "sphere", "cylinder", "circle2d", "rect2d")
PROPERTIES = ("scale", "rotation", "position-offset", "opacity", "color-intensity")
# world up in this camera convention (y grows downward)
WORLD_UP: Vec3 = (0.0, -1.0, 0.0)


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class TextAnnotation:
    id: str
    template_src: str = ""
    offset: Vec3 = TEXT_DEFAULT_OFFSET
    billboard: bool = True
    precision: int = 2
    orientation: Quat = IDENTITY_QUAT  # used when billboard is disabled
    kind: str = "text"


@dataclass(frozen=True)
class ObjectHighlight:
    id: str
    shape: str = "sphere"
    scale: Vec3 = (0.1, 0.1, 0.1)
    color: tuple[int, int, int, int] = (255, 220, 0, 160)
    offset: Vec3 = (0.0, 0.0, 0.0)
    orientation: Quat = IDENTITY_QUAT
    kind: str = "highlight"

    def __post_init__(self) -> None:
        if self.shape not in HIGHLIGHT_SHAPES:
            raise SceneError(f"unknown highlight shape {self.shape!r}")
        if any(s <= 0 for s in self.scale):
            raise SceneError(f"highlight scale must be positive, got {self.scale}")
        _check_color(self.color)


@dataclass(frozen=True)
class EmbeddedVisual:
    id: str
    source: str
    size: tuple[float, float] = (0.4, 0.3)
    opacity: float = 1.0
    billboard: bool = True
    orientation: Quat = IDENTITY_QUAT  # used when billboard is disabled
    kind: str = "visual"

    def __post_init__(self) -> None:
        if not (0.0 <= self.opacity <= 1.0):
            raise SceneError(f"opacity {self.opacity} outside [0, 1]")
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise SceneError(f"visual size must be positive, got {self.size}")


@dataclass(frozen=True)
class ConnectedLink:
    id: str
    a: str | Vec3  # tracker name or fixed world point
    b: str | Vec3
    thickness: float = 0.005
    color: tuple[int, int, int, int] = (255, 255, 255, 255)
    kind: str = "link"

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise SceneError("link endpoints must be distinct")
        if self.thickness <= 0:
            raise SceneError("link thickness must be positive")
        _check_color(self.color)


VirtualObject = TextAnnotation | ObjectHighlight | EmbeddedVisual | ConnectedLink


def _check_color(color) -> None:
    if len(color) != 4 or any(not (0 <= int(c) <= 255) for c in color):
        raise SceneError(f"color must be RGBA with 0..255 channels, got {color}")


@dataclass(frozen=True)
class Binding:
    object_id: str
    tracker: str
    offset: Vec3


@dataclass(frozen=True)
class PropertyBinding:
    object_id: str
    prop: str
    expr_src: str
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.prop not in PROPERTIES:
            raise SceneError(f"unknown property {self.prop!r}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise SceneError("affine map coefficients must be finite")


# properties that need a color / a transform to act on
_LINK_PROPERTIES = {"opacity", "color-intensity"}
_COLORED_KINDS = {"highlight", "link"}


class SceneGraph:
    """Mutable authoring state; evaluation never mutates it."""

    def __init__(self) -> None:
        self.objects: dict[str, VirtualObject] = {}
        self.bindings: dict[str, Binding] = {}
        self.property_bindings: dict[tuple[str, str], PropertyBinding] = {}
        self.templates: dict[str, Template] = {}
        self._parsed_exprs: dict[tuple[str, str], object] = {}

    def add_object(self, obj: VirtualObject) -> None:
        if obj.id in self.objects:
            raise SceneError(f"object id {obj.id!r} already exists")
        self.objects[obj.id] = obj
        if isinstance(obj, TextAnnotation) and obj.template_src:
            self.templates[obj.id] = parse_template(obj.template_src)

    def attach(self, object_id: str, tracker: str, tracker_names: set[str],
               offset: Vec3 | None = None) -> Binding:
        obj = self._require(object_id)
        if isinstance(obj, ConnectedLink):
            raise SceneError("links bind through their endpoints, not attach()")
        if tracker not in tracker_names:
            raise SceneError(f"unknown tracker {tracker!r}")
        if offset is None:
            offset = TEXT_DEFAULT_OFFSET if isinstance(obj, TextAnnotation) else (0.0, 0.0, 0.0)
        binding = Binding(object_id, tracker, tuple(float(v) for v in offset))
        self.bindings[object_id] = binding
        return binding

    def set_template(self, object_id: str, src: str, declared: set[str]) -> Template:
        obj = self._require(object_id)
        if not isinstance(obj, TextAnnotation):
            raise SceneError(f"object {object_id!r} is not a text annotation")
        template = parse_template(src)  # TemplateError carries the byte offset
        unknown = template.variables() - declared
        if unknown:
            raise SceneError(f"unknown variable(s) in template: {sorted(unknown)}")
        self.objects[object_id] = replace(obj, template_src=src)
        self.templates[object_id] = template
        return template

    def set_property_binding(self, object_id: str, prop: str, expr_src: str,
                             a: float, b: float, declared: set[str]) -> PropertyBinding:
        obj = self._require(object_id)
        pb = PropertyBinding(object_id, prop, expr_src, a, b)
        if isinstance(obj, ConnectedLink) and prop not in _LINK_PROPERTIES:
            raise SceneError(f"property {prop!r} does not apply to links")
        if prop == "color-intensity" and obj.kind not in _COLORED_KINDS:
            raise SceneError(f"object {object_id!r} has no color to modulate")
        expr = parse_expression(expr_src)
        unknown = expr_variables(expr) - declared
        if unknown:
            raise SceneError(f"unknown variable(s) in expression: {sorted(unknown)}")
        self.property_bindings[(object_id, prop)] = pb
        self._parsed_exprs[(object_id, prop)] = expr
        return pb

    def remove_object(self, object_id: str) -> None:
        self._require(object_id)
        del self.objects[object_id]
        self.bindings.pop(object_id, None)
        self.templates.pop(object_id, None)
        for key in [k for k in self.property_bindings if k[0] == object_id]:
            del self.property_bindings[key]
            del self._parsed_exprs[key]

    def trackers_in_use(self) -> set[str]:
        used = {b.tracker for b in self.bindings.values()}
        for obj in self.objects.values():
            if isinstance(obj, ConnectedLink):
                for end in (obj.a, obj.b):
                    if isinstance(end, str):
                        used.add(end)
        return used

    def _require(self, object_id: str) -> VirtualObject:
        if object_id not in self.objects:
            raise SceneError(f"unknown object {object_id!r}")
        return self.objects[object_id]


# --- orientation math -------------------------------------------------------

def billboard_orient(obj_pos: Vec3, cam_pos: Vec3, prev: Quat | None = None) -> Quat:
    """Local +z toward the camera, roll fixed so local +y follows world up.

    Coincident positions keep the previous orientation.
    """
    to_cam = vec_sub(cam_pos, obj_pos)
    n = vec_norm(to_cam)
    if n < 1e-12:
        return prev if prev is not None else IDENTITY_QUAT
    f = (to_cam[0] / n, to_cam[1] / n, to_cam[2] / n)
    up = WORLD_UP
    r = _cross(up, f)
    rn = vec_norm(r)
    if rn < 1e-9:  # aiming along world up: pick an arbitrary stable roll
        up = (0.0, 0.0, 1.0)
        r = _cross(up, f)
        rn = vec_norm(r)
    r = (r[0] / rn, r[1] / rn, r[2] / rn)
    u = _cross(f, r)
    return _quat_from_columns(r, u, f)


def _cross(a: Vec3, b: Vec3) -> Vec3:
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _quat_from_columns(x: Vec3, y: Vec3, z: Vec3) -> Quat:
    """Rotation with local axes x/y/z expressed in world coordinates (matrix columns)."""
    m00, m01, m02 = x[0], y[0], z[0]
    m10, m11, m12 = x[1], y[1], z[1]
    m20, m21, m22 = x[2], y[2], z[2]
    tr = m00 + m11 + m22
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = (0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
    elif m00 > m11 and m00 > m22:
        s = math.sqrt(1.0 + m00 - m11 - m22) * 2
        q = ((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
    elif m11 > m22:
        s = math.sqrt(1.0 + m11 - m00 - m22) * 2
        q = ((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
    else:
        s = math.sqrt(1.0 + m22 - m00 - m11) * 2
        q = ((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)
    return quat_canonical(q)


def quat_canonical(q: Quat) -> Quat:
    w, x, y, z = q
    n = math.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / n, x / n, y / n, z / n
    if w < 0 or (w == 0 and (x < 0 or (x == 0 and (y < 0 or (y == 0 and z < 0))))):
        return (-w, -x, -y, -z)
    return (w, x, y, z)


def quat_mul(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_rotate(q: Quat, v: Vec3) -> Vec3:
    w, x, y, z = q
    # v' = q v q*
    tx = 2 * (y * v[2] - z * v[1])
    ty = 2 * (z * v[0] - x * v[2])
    tz = 2 * (x * v[1] - y * v[0])
    return (
        v[0] + w * tx + (y * tz - z * ty),
        v[1] + w * ty + (z * tx - x * tz),
        v[2] + w * tz + (x * ty - y * tx),
    )


def quat_spin_z(degrees: float) -> Quat:
    half = math.radians(degrees) / 2.0
    return (math.cos(half), 0.0, 0.0, math.sin(half))


# --- per-frame resolution -----------------------------------------------------

@dataclass
class ObjectHold:
    """Last resolved transform; reused (stale) while the tracker is lost."""

    position: Vec3 = (0.0, 0.0, 0.0)
    orientation: Quat = IDENTITY_QUAT
    endpoints: tuple[Vec3, Vec3] | None = None
    resolved_once: bool = False

    def clone(self) -> "ObjectHold":
        return replace(self)


def resolve_transforms(graph: SceneGraph, tracked: dict[str, TrackedPoint],
                       camera_pos: Vec3, holds: dict[str, ObjectHold]) -> None:
    """Advances hold state for each object: follow the tracker when valid,
    keep the last transform when lost. Idempotent for a given frame."""
    for oid, obj in graph.objects.items():
        hold = holds.get(oid)
        if hold is None:
            hold = holds[oid] = ObjectHold()
        if isinstance(obj, ConnectedLink):
            ends = []
            ok = True
            for endpoint in (obj.a, obj.b):
                if isinstance(endpoint, str):
                    tp = tracked.get(endpoint)
                    if tp is not None and tp.valid:
                        ends.append(tp.world)
                    else:
                        ok = False
                        break
                else:
                    ends.append(tuple(endpoint))
            if ok:
                hold.endpoints = (ends[0], ends[1])
                hold.resolved_once = True
            continue
        binding = graph.bindings.get(oid)
        if binding is None:
            continue
        tp = tracked.get(binding.tracker)
        if tp is None or not tp.valid:
            continue
        pos = (tp.world[0] + binding.offset[0],
               tp.world[1] + binding.offset[1],
               tp.world[2] + binding.offset[2])
        if isinstance(obj, ObjectHighlight):
            orient = obj.orientation
        elif obj.billboard:
            orient = billboard_orient(pos, camera_pos, hold.orientation)
        else:
            orient = obj.orientation
        hold.position = pos
        hold.orientation = quat_canonical(tuple(float(c) for c in orient))
        hold.resolved_once = True


def _is_stale(graph: SceneGraph, oid: str, tracked: dict[str, TrackedPoint]) -> bool:
    obj = graph.objects[oid]
    if isinstance(obj, ConnectedLink):
        for endpoint in (obj.a, obj.b):
            if isinstance(endpoint, str):
                tp = tracked.get(endpoint)
                if tp is None or not tp.valid:
                    return True
        return False
    binding = graph.bindings.get(oid)
    if binding is None:
        return True
    tp = tracked.get(binding.tracker)
    return tp is None or not tp.valid


def evaluate(graph: SceneGraph, registry: VariableRegistry,
             tracked: dict[str, TrackedPoint], holds: dict[str, ObjectHold],
             effects_geometry: dict, camera_pos: Vec3, frame: int) -> dict:
    """Composes the complete snapshot document for one frame. Pure."""
    objects = []
    for oid in sorted(graph.objects):
        obj = graph.objects[oid]
        hold = holds.get(oid, ObjectHold())
        stale = _is_stale(graph, oid, tracked) or not hold.resolved_once
        props = _applied_properties(graph, registry, oid)
        entry: dict = {"id": oid, "kind": obj.kind, "stale": stale}
        if isinstance(obj, ConnectedLink):
            ends = hold.endpoints or ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
            color = _modulate_color(obj.color, props.get("color-intensity"))
            entry.update({
                "endpoints": [list(ends[0]), list(ends[1])],
                "thickness": float(obj.thickness),
                "color": color,
                "opacity": props.get("opacity", obj.color[3] / 255.0),
            })
            objects.append(entry)
            continue
        position = hold.position
        if "position-offset" in props:
            position = (position[0], position[1] + props["position-offset"], position[2])
        orientation = hold.orientation
        if "rotation" in props:
            orientation = quat_canonical(quat_mul(orientation, quat_spin_z(props["rotation"])))
        scale = (1.0, 1.0, 1.0)
        if isinstance(obj, ObjectHighlight):
            scale = obj.scale
        if "scale" in props:
            s = props["scale"]
            scale = (s, s, s)
        entry.update({
            "position": list(position),
            "orientation": list(orientation),
            "scale": list(scale),
        })
        if isinstance(obj, TextAnnotation):
            template = graph.templates.get(oid)
            entry["text"] = template.render(registry, obj.precision) if template else ""
            entry["opacity"] = props.get("opacity", 1.0)
        elif isinstance(obj, ObjectHighlight):
            entry["shape"] = obj.shape
            entry["color"] = _modulate_color(obj.color, props.get("color-intensity"))
            entry["opacity"] = props.get("opacity", obj.color[3] / 255.0)
        elif isinstance(obj, EmbeddedVisual):
            entry["source"] = obj.source
            entry["size"] = [float(obj.size[0]), float(obj.size[1])]
            entry["opacity"] = props.get("opacity", obj.opacity)
        objects.append(entry)
    return {
        "type": "snapshot",
        "frame": frame,
        "time": frame / 30.0,
        "camera": {"position": list(camera_pos)},
        "objects": objects,
        "effects": effects_geometry,
        "variables": {name: registry.values[name] for name in sorted(registry.values)},
    }


def _applied_properties(graph: SceneGraph, registry: VariableRegistry, oid: str) -> dict:
    out: dict[str, float] = {}
    for (target, prop), pb in graph.property_bindings.items():
        if target != oid:
            continue
        value = eval_expr(graph._parsed_exprs[(target, prop)], registry)
        if value is None:
            continue  # unavailable source: the authored value stands
        mapped = pb.a * value + pb.b
        if not math.isfinite(mapped):
            continue
        if prop == "scale":
            mapped = max(mapped, 1e-6)
        elif prop in ("opacity", "color-intensity"):
            mapped = min(1.0, max(0.0, mapped))
        out[prop] = float(mapped)
    return out


def _modulate_color(color: tuple[int, int, int, int], intensity: float | None) -> list[float]:
    rgb = [c / 255.0 for c in color[:3]]
    if intensity is not None:
        rgb = [c * intensity for c in rgb]
    return rgb + [color[3] / 255.0]


def snapshot_bytes(snapshot: dict) -> bytes:
    """Canonical serialization: sorted keys, minimal separators, UTF-8."""
    return json.dumps(snapshot, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False).encode("utf-8")
