"""Project files: the JSON document tying a sequence, trackers, parameters,
virtual objects, bindings, and effects together. Versioned ("projver": 1)
and round-trips losslessly through load/save."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .expressions import TemplateError, expr_variables, parse_expression, parse_template
from .kinematics import OPERAND_COUNT, tracker_variable_names
from .scene import HIGHLIGHT_SHAPES, PROPERTIES

PROJECT_VERSION = 1


class ProjectError(ValueError):
    pass


@dataclass
class Project:
    """Parsed project document. Paths are relative to the project file."""

    sequence: str
    pose_sidecar: str | None = None
    background_ply: str | None = None
    camera: dict = field(default_factory=lambda: {"kind": "static", "position": [0.0, 0.0, 0.0]})
    trackers: list[dict] = field(default_factory=list)
    params: list[dict] = field(default_factory=list)
    objects: list[dict] = field(default_factory=list)
    bindings: list[dict] = field(default_factory=list)
    property_bindings: list[dict] = field(default_factory=list)
    effects: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "projver": PROJECT_VERSION,
            "sequence": self.sequence,
            "pose_sidecar": self.pose_sidecar,
            "background_ply": self.background_ply,
            "camera": self.camera,
            "trackers": self.trackers,
            "params": self.params,
            "objects": self.objects,
            "bindings": self.bindings,
            "property_bindings": self.property_bindings,
            "effects": self.effects,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Project":
        if not isinstance(doc, dict):
            raise ProjectError("project document must be a JSON object")
        ver = doc.get("projver")
        if ver != PROJECT_VERSION:
            raise ProjectError(f"unsupported projver {ver!r}, expected {PROJECT_VERSION}")
        if "sequence" not in doc or not isinstance(doc["sequence"], str):
            raise ProjectError("project needs a 'sequence' path")
        return cls(
            sequence=doc["sequence"],
            pose_sidecar=doc.get("pose_sidecar"),
            background_ply=doc.get("background_ply"),
            camera=doc.get("camera", {"kind": "static", "position": [0.0, 0.0, 0.0]}),
            trackers=list(doc.get("trackers", [])),
            params=list(doc.get("params", [])),
            objects=list(doc.get("objects", [])),
            bindings=list(doc.get("bindings", [])),
            property_bindings=list(doc.get("property_bindings", [])),
            effects=list(doc.get("effects", [])),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Project":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ProjectError(f"{path}: not valid JSON: {e}") from e
        return cls.from_json(doc)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


_TRACKER_KINDS = ("color", "body", "stationary")
_OBJECT_KINDS = ("text", "highlight", "visual", "link")
_EFFECT_KINDS = ("trajectory", "ghost", "graph")
_CAMERA_KINDS = ("static", "orbit")


def validate(project: Project, base_dir: str | Path | None = None) -> list[str]:
    """Schema and reference checks; returns a list of error strings naming
    the offending entity. Empty means valid."""
    errors: list[str] = []
    base = Path(base_dir) if base_dir is not None else None

    def check_file(label: str, rel: str | None) -> None:
        if rel is None or base is None:
            return
        if not (base / rel).exists():
            errors.append(f"{label}: file not found: {rel}")

    check_file("sequence", project.sequence)
    check_file("pose_sidecar", project.pose_sidecar)
    check_file("background_ply", project.background_ply)

    if project.camera.get("kind") not in _CAMERA_KINDS:
        errors.append(f"camera: unknown kind {project.camera.get('kind')!r}")

    tracker_names: list[str] = []
    body_used = False
    for t in project.trackers:
        name = t.get("name", "<unnamed>")
        kind = t.get("kind")
        if kind not in _TRACKER_KINDS:
            errors.append(f"tracker {name}: unknown kind {kind!r}")
            continue
        if not isinstance(name, str) or not name.isidentifier():
            errors.append(f"tracker {name!r}: name must be a valid identifier")
            continue
        if name in tracker_names:
            errors.append(f"tracker {name}: duplicate name")
            continue
        if kind in ("color", "stationary") and "click" not in t:
            errors.append(f"tracker {name}: missing click coordinates")
        if kind == "body":
            body_used = True
            if "keypoint" not in t:
                errors.append(f"tracker {name}: missing keypoint index")
        tracker_names.append(name)
    if body_used and not project.pose_sidecar:
        errors.append("tracker: body tracker requires a pose_sidecar")

    names = set(tracker_names)
    declared: set[str] = set()
    for t in tracker_names:
        declared.update(tracker_variable_names(t))
    param_names: set[str] = set()
    for p in project.params:
        pname = p.get("name", "<unnamed>")
        kind = p.get("kind")
        if kind not in OPERAND_COUNT:
            errors.append(f"param {pname}: unknown kind {kind!r}")
            continue
        ops = p.get("operands", [])
        if len(ops) != OPERAND_COUNT[kind]:
            errors.append(f"param {pname}: {kind} takes {OPERAND_COUNT[kind]} operands")
        for op in ops:
            if op not in names:
                errors.append(f"param {pname}: unknown tracker {op!r}")
        if not isinstance(pname, str) or not pname.isidentifier():
            errors.append(f"param {pname!r}: name must be a valid identifier")
        elif pname in param_names or pname in names:
            errors.append(f"param {pname}: duplicate name")
        else:
            param_names.add(pname)
            if kind in ("position", "speed"):
                declared.update(f"{pname}{sfx}" for sfx in (".x", ".y", ".z"))
                if kind == "speed":
                    declared.add(pname)
            else:
                declared.add(pname)

    object_ids: set[str] = set()
    for o in project.objects:
        oid = o.get("id", "<no-id>")
        kind = o.get("kind")
        if kind not in _OBJECT_KINDS:
            errors.append(f"object {oid}: unknown kind {kind!r}")
            continue
        if oid in object_ids or oid in names or oid in param_names:
            errors.append(f"object {oid}: duplicate id")
            continue
        object_ids.add(oid)
        if kind == "text" and o.get("template"):
            try:
                tpl = parse_template(o["template"])
            except TemplateError as e:
                errors.append(f"object {oid}: bad template: {e}")
            else:
                unknown = tpl.variables() - declared
                if unknown:
                    errors.append(f"object {oid}: unknown variable(s) {sorted(unknown)}")
        if kind == "highlight" and o.get("shape", "sphere") not in HIGHLIGHT_SHAPES:
            errors.append(f"object {oid}: unknown shape {o.get('shape')!r}")
        if kind == "visual":
            if "source" not in o:
                errors.append(f"object {oid}: visual needs a source")
            opacity = o.get("opacity", 1.0)
            if not (isinstance(opacity, (int, float)) and 0.0 <= opacity <= 1.0):
                errors.append(f"object {oid}: opacity {opacity!r} outside [0, 1]")
        if kind == "link":
            for end_key in ("a", "b"):
                end = o.get(end_key)
                if isinstance(end, dict) and "tracker" in end:
                    if end["tracker"] not in names:
                        errors.append(f"object {oid}: unknown tracker {end['tracker']!r}")
                elif not (isinstance(end, dict) and "fixed" in end):
                    errors.append(f"object {oid}: endpoint {end_key} must name a tracker or a fixed point")

    bound: set[str] = set()
    for b in project.bindings:
        oid = b.get("object", "<no-object>")
        if oid not in object_ids:
            errors.append(f"binding for {oid}: unknown object")
            continue
        if b.get("tracker") not in names:
            errors.append(f"binding for {oid}: unknown tracker {b.get('tracker')!r}")
        if oid in bound:
            errors.append(f"binding for {oid}: object bound twice")
        bound.add(oid)

    for pb in project.property_bindings:
        oid = pb.get("object", "<no-object>")
        prop = pb.get("property")
        if oid not in object_ids:
            errors.append(f"property binding on {oid}: unknown object")
            continue
        if prop not in PROPERTIES:
            errors.append(f"property binding on {oid}: unknown property {prop!r}")
            continue
        a = pb.get("a", 1.0)
        b = pb.get("b", 0.0)
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in (a, b)):
            errors.append(f"property binding on {oid}: affine coefficients must be finite")
        try:
            expr = parse_expression(pb.get("expr", ""))
        except TemplateError as e:
            errors.append(f"property binding on {oid}: bad expression: {e}")
            continue
        unknown = expr_variables(expr) - declared
        if unknown:
            errors.append(f"property binding on {oid}: unknown variable(s) {sorted(unknown)}")

    effect_ids: set[str] = set()
    for e in project.effects:
        eid = e.get("id", "<no-id>")
        kind = e.get("kind")
        if kind not in _EFFECT_KINDS:
            errors.append(f"effect {eid}: unknown kind {kind!r}")
            continue
        if eid in effect_ids or eid in object_ids or eid in names or eid in param_names:
            errors.append(f"effect {eid}: duplicate id")
            continue
        effect_ids.add(eid)
        if kind in ("trajectory", "ghost"):
            if e.get("tracker") not in names:
                errors.append(f"effect {eid}: unknown tracker {e.get('tracker')!r}")
            if kind == "ghost":
                t = next((t for t in project.trackers if t.get("name") == e.get("tracker")), None)
                if t is not None and t.get("kind") == "stationary":
                    errors.append(f"effect {eid}: ghosts need a color or body tracker")
        if kind == "graph" and e.get("variable") not in declared:
            errors.append(f"effect {eid}: unknown variable {e.get('variable')!r}")

    return errors
