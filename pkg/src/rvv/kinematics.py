"""Motion parameters derived from tracked points: position, speed, distance,
angle, area. Values publish into an immutable per-frame variable registry;
anything that cannot be computed is an explicit unavailable marker (None),
never NaN or zero."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .camera import Vec3, vec_cross, vec_norm, vec_sub
from .tracking import TrackedPoint

SPEED_WINDOW_FRAMES = 15  # endpoints 0.5 s apart at 30 FPS
SPEED_WINDOW_SECONDS = 0.5
ARM_EPSILON = 1e-9  # meters; shorter angle arms are degenerate

PARAM_KINDS = ("position", "speed", "distance", "angle", "area3", "area4")
OPERAND_COUNT = {"position": 1, "speed": 1, "distance": 2, "angle": 3, "area3": 3, "area4": 4}
_DEFAULT_PREFIX = {"position": "position", "speed": "speed", "distance": "distance",
                   "angle": "angle", "area3": "area", "area4": "area"}


class ParamError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    kind: str
    operands: tuple[str, ...]
    name: str

    def __post_init__(self) -> None:
        if self.kind not in OPERAND_COUNT:
            raise ParamError(f"unknown parameter kind {self.kind!r}")
        want = OPERAND_COUNT[self.kind]
        if len(self.operands) != want:
            raise ParamError(
                f"{self.kind} takes {want} tracker operand(s), got {len(self.operands)}"
            )
        if not self.name.isidentifier():
            raise ParamError(f"parameter name {self.name!r} is not a valid identifier")

    def variable_names(self) -> tuple[str, ...]:
        if self.kind == "position":
            return (f"{self.name}.x", f"{self.name}.y", f"{self.name}.z")
        if self.kind == "speed":
            return (self.name, f"{self.name}.x", f"{self.name}.y", f"{self.name}.z")
        return (self.name,)


def default_param_name(kind: str, ordinal: int) -> str:
    return f"{_DEFAULT_PREFIX[kind]}_{ordinal}"


class SampleWindow:
    """Ring of the last 16 resolutions of one tracker; invalid frames are None."""

    def __init__(self) -> None:
        self._ring: deque[tuple[int, Vec3 | None]] = deque(maxlen=SPEED_WINDOW_FRAMES + 1)

    def push(self, frame: int, world: Vec3 | None) -> None:
        self._ring.append((frame, world))

    def endpoints(self, frame: int) -> tuple[Vec3, Vec3] | None:
        """Positions at frame-15 and frame, or None while either is missing."""
        if not self._ring or self._ring[-1][0] != frame:
            return None
        first = self._ring[0]
        if len(self._ring) < self._ring.maxlen or first[0] != frame - SPEED_WINDOW_FRAMES:
            return None
        p0, p1 = first[1], self._ring[-1][1]
        if p0 is None or p1 is None:
            return None
        return p0, p1

    def clone(self) -> "SampleWindow":
        w = SampleWindow()
        w._ring.extend(self._ring)
        return w


def position(tp: TrackedPoint) -> tuple[float | None, float | None, float | None]:
    if not tp.valid or tp.world is None:
        return (None, None, None)
    return tp.world


def speed(window: SampleWindow, frame: int) -> tuple[float | None, Vec3 | None]:
    """Endpoint displacement over the 0.5 s window: magnitude and per-axis |d|/dt."""
    pair = window.endpoints(frame)
    if pair is None:
        return None, None
    p0, p1 = pair
    d = vec_sub(p1, p0)
    mag = vec_norm(d) / SPEED_WINDOW_SECONDS
    per_axis = (abs(d[0]) / SPEED_WINDOW_SECONDS,
                abs(d[1]) / SPEED_WINDOW_SECONDS,
                abs(d[2]) / SPEED_WINDOW_SECONDS)
    return mag, per_axis


def distance(a: TrackedPoint, b: TrackedPoint) -> float | None:
    if not (a.valid and b.valid):
        return None
    return vec_norm(vec_sub(a.world, b.world))


def angle(a: TrackedPoint, vertex: TrackedPoint, c: TrackedPoint) -> float | None:
    """Angle at the vertex in degrees, [0, 180]; degenerate arms are unavailable."""
    if not (a.valid and vertex.valid and c.valid):
        return None
    u = vec_sub(a.world, vertex.world)
    w = vec_sub(c.world, vertex.world)
    nu = vec_norm(u)
    nw = vec_norm(w)
    if nu <= ARM_EPSILON or nw <= ARM_EPSILON:
        return None
    cosang = (u[0] * w[0] + u[1] * w[1] + u[2] * w[2]) / (nu * nw)
    cosang = min(1.0, max(-1.0, cosang))
    return math.degrees(math.acos(cosang))


def area3(a: TrackedPoint, b: TrackedPoint, c: TrackedPoint) -> float | None:
    if not (a.valid and b.valid and c.valid):
        return None
    return _triangle_area(a.world, b.world, c.world)


def area4(a: TrackedPoint, b: TrackedPoint, c: TrackedPoint, d: TrackedPoint) -> float | None:
    """Fan triangulation in selection order: (a,b,c) + (a,c,d)."""
    if not (a.valid and b.valid and c.valid and d.valid):
        return None
    return _triangle_area(a.world, b.world, c.world) + _triangle_area(a.world, c.world, d.world)


def _triangle_area(p: Vec3, q: Vec3, r: Vec3) -> float:
    return 0.5 * vec_norm(vec_cross(vec_sub(q, p), vec_sub(r, p)))


@dataclass(frozen=True)
class VariableRegistry:
    """Immutable name -> scalar snapshot for one frame; None marks unavailable."""

    frame: int
    values: Mapping[str, float | None]

    def get(self, name: str) -> float | None:
        return self.values.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.values


class ParamSet:
    """Declared parameter specs; owns name uniqueness across specs and trackers."""

    def __init__(self) -> None:
        self.specs: list[ParamSpec] = []

    def next_name(self, kind: str) -> str:
        taken = {s.name for s in self.specs}
        n = 1
        while default_param_name(kind, n) in taken:
            n += 1
        return default_param_name(kind, n)

    def register(self, kind: str, operands: tuple[str, ...], name: str | None,
                 tracker_names: set[str]) -> ParamSpec:
        if name is None:
            name = self.next_name(kind)
        spec = ParamSpec(kind, tuple(operands), name)
        if spec.name in tracker_names:
            raise ParamError(f"parameter name {spec.name!r} is already a tracker name")
        for t in spec.operands:
            if t not in tracker_names:
                raise ParamError(f"parameter {name!r} references unknown tracker {t!r}")
        existing = set()
        for s in self.specs:
            existing.update(s.variable_names())
        for tn in tracker_names:
            existing.update(tracker_variable_names(tn))
        clash = set(spec.variable_names()) & existing
        if clash:
            raise ParamError(f"variable name(s) already declared: {sorted(clash)}")
        self.specs.append(spec)
        return spec

    def remove(self, name: str) -> bool:
        for i, s in enumerate(self.specs):
            if s.name == name:
                del self.specs[i]
                return True
        return False

    def clone_specs(self) -> list[ParamSpec]:
        return list(self.specs)


def tracker_variable_names(tracker: str) -> tuple[str, ...]:
    return (f"{tracker}.x", f"{tracker}.y", f"{tracker}.z",
            f"{tracker}.speed", f"{tracker}.speed.x", f"{tracker}.speed.y", f"{tracker}.speed.z")


def declared_variables(tracker_names, specs) -> set[str]:
    names: set[str] = set()
    for t in tracker_names:
        names.update(tracker_variable_names(t))
    for s in specs:
        names.update(s.variable_names())
    return names


def commit_frame(frame: int, tracked: Mapping[str, TrackedPoint],
                 windows: Mapping[str, SampleWindow],
                 specs: list[ParamSpec]) -> VariableRegistry:
    """Evaluates every declared variable for the frame and freezes the registry."""
    values: dict[str, float | None] = {}
    for name, tp in tracked.items():
        x, y, z = position(tp)
        values[f"{name}.x"] = x
        values[f"{name}.y"] = y
        values[f"{name}.z"] = z
        mag, per_axis = speed(windows[name], frame)
        values[f"{name}.speed"] = mag
        values[f"{name}.speed.x"] = per_axis[0] if per_axis else None
        values[f"{name}.speed.y"] = per_axis[1] if per_axis else None
        values[f"{name}.speed.z"] = per_axis[2] if per_axis else None
    for spec in specs:
        ops = [tracked[t] for t in spec.operands]
        if spec.kind == "position":
            x, y, z = position(ops[0])
            values[f"{spec.name}.x"] = x
            values[f"{spec.name}.y"] = y
            values[f"{spec.name}.z"] = z
        elif spec.kind == "speed":
            mag, per_axis = speed(windows[spec.operands[0]], frame)
            values[spec.name] = mag
            values[f"{spec.name}.x"] = per_axis[0] if per_axis else None
            values[f"{spec.name}.y"] = per_axis[1] if per_axis else None
            values[f"{spec.name}.z"] = per_axis[2] if per_axis else None
        elif spec.kind == "distance":
            values[spec.name] = distance(ops[0], ops[1])
        elif spec.kind == "angle":
            values[spec.name] = angle(ops[0], ops[1], ops[2])
        elif spec.kind == "area3":
            values[spec.name] = area3(ops[0], ops[1], ops[2])
        elif spec.kind == "area4":
            values[spec.name] = area4(ops[0], ops[1], ops[2], ops[3])
    return VariableRegistry(frame, MappingProxyType(values))
