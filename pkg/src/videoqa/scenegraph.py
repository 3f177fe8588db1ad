"""Temporal scene graphs and the relation/attribute queries executed over them.

Coordinate conventions, used identically by the renderer, the relations and
the question generator:

* world x grows to the right, world y grows away from the camera (depth),
  z is up; objects rest on the ground plane z = 0;
* ``Left``/``Right`` compare world x, ``Behind``/``Front`` compare world y
  (larger y is behind);
* ``Near`` holds when the ground-plane distance of the two centroids is
  below ``NEAR_TAU * world_width``;
* relations without an explicit frame refer to frame 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from .errors import ContractError, RelationUndefinedError

NEAR_TAU = 0.2
EPS = 1e-9


class Shape(str, Enum):
    CUBE = "Cube"
    SPHERE = "Sphere"
    CONE = "Cone"


class Color(str, Enum):
    RED = "Red"
    GREEN = "Green"
    BLUE = "Blue"
    YELLOW = "Yellow"
    PURPLE = "Purple"
    GRAY = "Gray"


class Size(str, Enum):
    SMALL = "Small"
    LARGE = "Large"


class EventKind(str, Enum):
    TRANSLATE = "Translate"
    ROTATE = "Rotate"
    CONTAIN = "Contain"
    SCALE = "Scale"


class Relation(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"
    BEHIND = "Behind"
    FRONT = "Front"
    NEAR = "Near"


class Attribute(str, Enum):
    SHAPE = "Shape"
    COLOR = "Color"
    LOCATION = "Location"


SHAPES = list(Shape)
COLORS = list(Color)
RELATIONS = list(Relation)


@dataclass(frozen=True)
class FrameState:
    world: tuple[float, float, float]
    pixel: tuple[float, float]
    box: tuple[int, int, int, int] | None
    visible: bool
    contained_by: int | None = None


@dataclass
class ObjectTrack:
    id: int
    shape: Shape
    color: Color
    size: Size
    frames: list[FrameState]


@dataclass(frozen=True)
class Event:
    kind: EventKind
    subject: int
    start: int
    end: int
    target: int | None = None

    @property
    def interval(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass
class TemporalSceneGraph:
    F: int
    objects: list[ObjectTrack]
    events: list[Event] = field(default_factory=list)
    world_width: float = 6.0

    def __post_init__(self):
        self.validate()

    @property
    def n(self) -> int:
        return len(self.objects)

    def validate(self) -> None:
        ids = [o.id for o in self.objects]
        if ids != list(range(len(ids))):
            raise ContractError(f"object ids must be dense 0..n-1, got {ids}")
        for o in self.objects:
            if len(o.frames) != self.F:
                raise ContractError(f"object {o.id} has {len(o.frames)} frames, expected {self.F}")
            for st in o.frames:
                if st.contained_by is not None and st.visible:
                    raise ContractError(f"object {o.id} is contained yet visible")
        spans: dict[int, list[tuple[int, int]]] = {}
        for ev in self.events:
            if not 0 <= ev.subject < self.n:
                raise ContractError(f"event references unknown object {ev.subject}")
            if ev.target is not None and not 0 <= ev.target < self.n:
                raise ContractError(f"event references unknown target {ev.target}")
            if not 0 <= ev.start < ev.end <= self.F:
                raise ContractError(f"invalid event interval [{ev.start}, {ev.end})")
            for a, b in spans.get(ev.subject, []):
                if ev.start < b and a < ev.end:
                    raise ContractError(f"overlapping events on object {ev.subject}")
            spans.setdefault(ev.subject, []).append((ev.start, ev.end))

    def track(self, obj_id: int) -> ObjectTrack:
        if not 0 <= obj_id < self.n:
            raise ContractError(f"unknown object id {obj_id}")
        return self.objects[obj_id]

    def state(self, obj_id: int, frame: int) -> FrameState:
        if not 0 <= frame < self.F:
            raise ContractError(f"frame {frame} outside [0, {self.F})")
        return self.track(obj_id).frames[frame]

    def visible(self, obj_id: int, frame: int) -> bool:
        return self.state(obj_id, frame).visible

    # ------------------------------------------------------------ JSON codec
    def to_json(self) -> dict[str, Any]:
        return {
            "F": self.F,
            "world_width": self.world_width,
            "objects": [
                {
                    "id": o.id,
                    "shape": o.shape.value,
                    "color": o.color.value,
                    "size": o.size.value,
                    "track": [
                        {
                            "world": list(s.world),
                            "pixel": list(s.pixel),
                            "visible": s.visible,
                            "contained_by": s.contained_by,
                        }
                        for s in o.frames
                    ],
                }
                for o in self.objects
            ],
            "events": [event_to_json(e) for e in self.events],
            "boxes": [
                [None if o.frames[f].box is None else list(o.frames[f].box) for o in self.objects]
                for f in range(self.F)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "TemporalSceneGraph":
        boxes = doc["boxes"]
        objects = []
        for o in doc["objects"]:
            frames = []
            for f, s in enumerate(o["track"]):
                box = boxes[f][o["id"]]
                frames.append(FrameState(
                    world=tuple(s["world"]),
                    pixel=tuple(s["pixel"]),
                    box=None if box is None else tuple(box),
                    visible=s["visible"],
                    contained_by=s["contained_by"],
                ))
            objects.append(ObjectTrack(o["id"], Shape(o["shape"]), Color(o["color"]), Size(o["size"]), frames))
        events = [event_from_json(e) for e in doc["events"]]
        return cls(doc["F"], objects, events, doc.get("world_width", 6.0))


def event_to_json(e: Event) -> dict[str, Any]:
    return {"kind": e.kind.value, "subject": e.subject, "target": e.target,
            "interval": [e.start, e.end]}


def event_from_json(d: dict[str, Any]) -> Event:
    start, end = d["interval"]
    return Event(EventKind(d["kind"]), d["subject"], start, end, d.get("target"))


# ---------------------------------------------------------------- queries

def relation_value(graph: TemporalSceneGraph, a: int, b: int, frame: int, rel: Relation,
                   tau: float = NEAR_TAU) -> float:
    """Signed margin of ``rel(a, b)``; positive means the relation holds.

    For the ordering relations this is the coordinate difference, for Near
    it is ``threshold - distance``.
    """
    sa, sb = graph.state(a, frame), graph.state(b, frame)
    if not (sa.visible and sb.visible):
        raise RelationUndefinedError(f"relation {rel.value}({a}, {b}) undefined at frame {frame}")
    xa, ya, _ = sa.world
    xb, yb, _ = sb.world
    if rel is Relation.LEFT:
        return xb - xa
    if rel is Relation.RIGHT:
        return xa - xb
    if rel is Relation.BEHIND:
        return ya - yb
    if rel is Relation.FRONT:
        return yb - ya
    return tau * graph.world_width - math.hypot(xa - xb, ya - yb)


def spatial_relation(graph: TemporalSceneGraph, a: int, b: int, frame: int, rel: Relation,
                     tau: float = NEAR_TAU) -> bool:
    rel = Relation(rel)
    margin = relation_value(graph, a, b, frame, rel, tau)
    if rel is Relation.NEAR:
        return margin > 0
    return margin > EPS


def objects_matching(graph: TemporalSceneGraph, shape: Shape | None = None,
                     color: Color | None = None, frame: int | None = None) -> set[int]:
    out = set()
    for o in graph.objects:
        if shape is not None and o.shape is not Shape(shape):
            continue
        if color is not None and o.color is not Color(color):
            continue
        if frame is not None and not graph.visible(o.id, frame):
            continue
        out.add(o.id)
    return out


def attribute(graph: TemporalSceneGraph, obj_id: int, which: Attribute, frame: int | None = None):
    o = graph.track(obj_id)
    which = Attribute(which)
    if which is Attribute.SHAPE:
        return o.shape
    if which is Attribute.COLOR:
        return o.color
    if frame is None:
        raise ContractError("Location needs a frame")
    return graph.state(obj_id, frame).pixel


def actions_of(graph: TemporalSceneGraph, obj_id: int) -> list[tuple[EventKind, tuple[int, int]]]:
    graph.track(obj_id)
    evs = sorted((e for e in graph.events if e.subject == obj_id), key=lambda e: (e.start, e.end))
    return [(e.kind, e.interval) for e in evs]


def was_contained(graph: TemporalSceneGraph, obj_id: int, frame: int) -> bool:
    return graph.state(obj_id, frame).contained_by is not None


def visible_ids(graph: TemporalSceneGraph, frame: int) -> list[int]:
    return [o.id for o in graph.objects if o.frames[frame].visible]


def unique(ids: Iterable[int]) -> int | None:
    ids = list(ids)
    return ids[0] if len(ids) == 1 else None
