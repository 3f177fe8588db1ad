"""Synthetic CATER-style clips with exact ground truth.

World: a ground plane spanning x, y in [-3, 3] (``WORLD_WIDTH`` = 6), z up.
Camera: fixed orthographic view with a depth offset. With
``s = min(H, W) / 8`` pixels per world unit a world point projects to::

    u = W / 2 + s * x
    v = H / 2 + s / 2 - s * (DEPTH_K * y + HEIGHT_M * z)

so objects further back (larger y) sit higher in the image. Objects are
drawn as screen-aligned sprites (cube: square, sphere: disk, cone:
triangle) of pixel radius ``s * radius * scale``, far-to-near (painter's
algorithm). Each sprite is shaded by a Lambertian term against the fixed
light ``LIGHT`` plus an ambient floor, and carries a small multiplicative
surface texture in sprite-local pixel coordinates so that block matching
can lock onto its interior.

A cube's front is flat-shaded with the width-weighted mean of its two
camera-facing side faces, whose normals follow its yaw angle. A Rotate
event therefore changes the front's brightness smoothly while the
silhouette and centroid stay put;
this is what the rotation detector keys on. Spheres and cones are
rotationally symmetric under this model and are never given Rotate events.

Translate events move an object by an integer number of pixels per frame
(the world displacement is back-projected from the pixel velocity), which
keeps frame-to-frame motion exactly representable by integer flow.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import (
    ChecksumError,
    ContractError,
    GenerationError,
    LoadError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .rng import SplitMix64
from .scenegraph import (
    COLORS,
    SHAPES,
    Color,
    Event,
    EventKind,
    FrameState,
    ObjectTrack,
    Shape,
    Size,
    TemporalSceneGraph,
)

WORLD_HALF = 3.0
WORLD_WIDTH = 2 * WORLD_HALF
PLACEMENT_HALF = 2.6
DEPTH_K = 0.7
HEIGHT_M = 0.5
SIZE_RADIUS = {Size.SMALL: 0.35, Size.LARGE: 0.6}

BACKGROUND = (0.94, 0.94, 0.94)
COLOR_RGB = {
    Color.RED: (0.80, 0.15, 0.15),
    Color.GREEN: (0.15, 0.65, 0.20),
    Color.BLUE: (0.15, 0.30, 0.85),
    Color.YELLOW: (0.85, 0.75, 0.10),
    Color.PURPLE: (0.55, 0.20, 0.70),
    Color.GRAY: (0.50, 0.50, 0.50),
}
_L = np.array([-0.85, -0.40, 0.30])
LIGHT = _L / np.linalg.norm(_L)
AMBIENT = 0.35
DIFFUSE = 0.65
TEXTURE_AMPLITUDE = 0.12
CUBE_TOP_FRACTION = 0.4
# total yaw swept by one Rotate event: most of a facet period, spread thin per frame
ROTATE_ANGLE = (1.1, 1.5)

MAX_ATTEMPTS = 1000
IMAGE_MARGIN_PX = 2
CLIP_MAGIC = b"CLIP"
FLOW_MAGIC = b"FLOW"
FORMAT_VERSION = 1
TRUTH_VERSION = 1


@dataclass(frozen=True)
class SceneConfig:
    n_objects: int = 5
    F: int = 24
    H: int = 64
    W: int = 64
    n_events: int = 3
    event_kinds: tuple[EventKind, ...] = tuple(EventKind)

    def validate(self) -> None:
        if not 3 <= self.n_objects <= 8:
            raise ContractError(f"n_objects must be in 3..8, got {self.n_objects}")
        if self.F < 8 or self.H < 32 or self.W < 32:
            raise ContractError(f"clip size {self.F}x{self.H}x{self.W} below 8x32x32")
        if not 0 <= self.n_events <= 2 * self.n_objects:
            raise ContractError(f"n_events must be in 0..{2 * self.n_objects}")
        if self.n_events and not self.event_kinds:
            raise ContractError("events requested but no event kinds allowed")


@dataclass(frozen=True)
class ObjectSpec:
    id: int
    shape: Shape
    color: Color
    size: Size
    position0: tuple[float, float, float]
    yaw0: float = 0.0

    @property
    def radius(self) -> float:
        return SIZE_RADIUS[self.size]


@dataclass(frozen=True)
class MotionEvent:
    kind: EventKind
    subject: int
    start: int
    end: int
    target: int | None = None
    displacement: tuple[float, float, float] | None = None
    rate: float | None = None
    factor: float | None = None

    def to_event(self) -> Event:
        return Event(self.kind, self.subject, self.start, self.end, self.target)

    def to_json(self) -> dict[str, Any]:
        params: dict[str, Any] = {}
        if self.displacement is not None:
            params["displacement"] = list(self.displacement)
        if self.rate is not None:
            params["rate"] = self.rate
        if self.factor is not None:
            params["factor"] = self.factor
        return {"kind": self.kind.value, "subject": self.subject, "target": self.target,
                "interval": [self.start, self.end], "params": params}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "MotionEvent":
        p = d.get("params", {})
        disp = p.get("displacement")
        return cls(EventKind(d["kind"]), d["subject"], d["interval"][0], d["interval"][1],
                   d.get("target"), None if disp is None else tuple(disp),
                   p.get("rate"), p.get("factor"))


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    config: SceneConfig
    objects: tuple[ObjectSpec, ...]

    def to_json(self) -> dict[str, Any]:
        c = self.config
        return {
            "seed": self.seed,
            "config": {"n_objects": c.n_objects, "F": c.F, "H": c.H, "W": c.W,
                       "n_events": c.n_events, "event_kinds": [k.value for k in c.event_kinds]},
            "objects": [{"id": o.id, "shape": o.shape.value, "color": o.color.value,
                         "size": o.size.value, "position0": list(o.position0), "yaw0": o.yaw0}
                        for o in self.objects],
        }


@dataclass
class Clip:
    F: int
    H: int
    W: int
    pixels: np.ndarray  # F x H x W x 3 float32 in [0, 1]

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.float32)
        if self.pixels.shape != (self.F, self.H, self.W, 3):
            raise ContractError(f"pixels {self.pixels.shape} do not match {self.F}x{self.H}x{self.W}x3")
        if self.pixels.size and (self.pixels.min() < 0 or self.pixels.max() > 1):
            raise ContractError("pixel values outside [0, 1]")

    def __eq__(self, other):
        return (isinstance(other, Clip) and (self.F, self.H, self.W) == (other.F, other.H, other.W)
                and self.pixels.tobytes() == other.pixels.tobytes())

    def channels_first(self) -> np.ndarray:
        """The clip as a 3 x F x H x W array."""
        return np.ascontiguousarray(self.pixels.transpose(3, 0, 1, 2))


@dataclass
class GroundTruth:
    graph: TemporalSceneGraph
    motion_events: list[MotionEvent]
    H: int
    W: int
    seed: int | None = None

    @property
    def F(self) -> int:
        return self.graph.F

    def boxes(self) -> list[list[tuple[int, int, int, int] | None]]:
        """``boxes[frame][object]``."""
        return [[o.frames[f].box for o in self.graph.objects] for f in range(self.F)]

    def object_boxes(self, obj_id: int) -> list[tuple[int, int, int, int] | None]:
        return [s.box for s in self.graph.objects[obj_id].frames]

    def visibility(self) -> np.ndarray:
        return np.array([[s.visible for s in o.frames] for o in self.graph.objects], dtype=bool)

    def to_json(self) -> dict[str, Any]:
        doc = {"version": TRUTH_VERSION, "seed": self.seed, "H": self.H, "W": self.W}
        doc.update(self.graph.to_json())
        doc["events"] = [e.to_json() for e in self.motion_events]
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "GroundTruth":
        if doc.get("version") != TRUTH_VERSION:
            raise VersionMismatchError(f"ground truth version {doc.get('version')}, expected {TRUTH_VERSION}")
        graph = TemporalSceneGraph.from_json(doc)
        events = [MotionEvent.from_json(e) for e in doc["events"]]
        return cls(graph, events, doc["H"], doc["W"], doc.get("seed"))


# ---------------------------------------------------------------- camera

def pixel_scale(H: int, W: int) -> float:
    return min(H, W) / 8.0


def project(x: float, y: float, z: float, H: int, W: int) -> tuple[float, float]:
    s = pixel_scale(H, W)
    return (W / 2 + s * x, H / 2 + s / 2 - s * (DEPTH_K * y + HEIGHT_M * z))


def world_displacement_for_pixels(du: float, dv: float, H: int, W: int) -> tuple[float, float, float]:
    """Ground-plane displacement whose projection moves by (du, dv) pixels."""
    s = pixel_scale(H, W)
    return (du / s, -dv / (s * DEPTH_K), 0.0)


# ---------------------------------------------------------------- kinematics

@dataclass
class _States:
    pos: np.ndarray        # n x F x 3
    scale: np.ndarray      # n x F
    yaw: np.ndarray        # n x F
    contained_by: list[list[int | None]]


def _progress(f: int, start: int, end: int) -> float:
    return min(max(f - start, 0), end - start) / (end - start)


def simulate(objects: Sequence[ObjectSpec], events: Sequence[MotionEvent], F: int) -> _States:
    n = len(objects)
    pos = np.zeros((n, F, 3))
    scale = np.ones((n, F))
    yaw = np.zeros((n, F))
    for o in objects:
        pos[o.id, :] = o.position0
        yaw[o.id, :] = o.yaw0
    for e in events:
        for f in range(F):
            p = _progress(f, e.start, e.end)
            if e.kind is EventKind.TRANSLATE:
                pos[e.subject, f] += np.asarray(e.displacement) * p
            elif e.kind is EventKind.ROTATE:
                yaw[e.subject, f] += e.rate * (e.end - e.start) * p
            elif e.kind is EventKind.SCALE:
                scale[e.subject, f] *= 1.0 + (e.factor - 1.0) * p
    pos[:, :, 2] = np.array([o.position0[2] for o in objects])[:, None] * scale
    contained: list[list[int | None]] = [[None] * F for _ in range(n)]
    for e in events:
        if e.kind is EventKind.CONTAIN:
            for f in range(e.start, e.end):
                contained[e.subject][f] = e.target
                pos[e.subject, f, :2] = pos[e.target, f, :2]
    return _States(pos, scale, yaw, contained)


# ---------------------------------------------------------------- rasterizer

def _texture(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return 1.0 + TEXTURE_AMPLITUDE * np.sin(2.3 * dx + 0.7) * np.sin(1.9 * dy + 0.3)


def _lambert(nx, ny, nz) -> np.ndarray:
    norm = np.sqrt(nx * nx + ny * ny + nz * nz)
    dot = (nx * LIGHT[0] + ny * LIGHT[1] + nz * LIGHT[2]) / norm
    return AMBIENT + DIFFUSE * np.maximum(dot, 0.0)


def cube_front_facet_shade(yaw: float) -> float:
    """Mean Lambert shade of the two camera-facing side faces, weighted by projected width.

    Continuous and of period pi/2 in ``yaw``, so rotation never makes the shade jump.
    """
    phi = (yaw + math.pi / 4) % (math.pi / 2) - math.pi / 4
    side = phi - math.copysign(math.pi / 2, phi)
    w0, w1 = math.cos(phi), max(math.cos(side), 0.0)
    s0 = float(_lambert(math.sin(phi), 0.0, math.cos(phi)))
    s1 = float(_lambert(math.sin(side), 0.0, math.cos(side)))
    return (w0 * s0 + w1 * s1) / (w0 + w1)


def _sprite(shape: Shape, u: float, v: float, R: float, yaw: float, H: int, W: int):
    """Coverage mask and shading of one sprite over its pixel window."""
    i0, i1 = max(int(math.floor(v - R)) - 1, 0), min(int(math.ceil(v + R)) + 2, H)
    j0, j1 = max(int(math.floor(u - R)) - 1, 0), min(int(math.ceil(u + R)) + 2, W)
    if i0 >= i1 or j0 >= j1:
        return None
    py = np.arange(i0, i1)[:, None] + 0.5
    px = np.arange(j0, j1)[None, :] + 0.5
    dy = py - v
    dx = px - u
    dx, dy = np.broadcast_arrays(dx, dy)
    if shape is Shape.CUBE:
        cover = (np.abs(dx) < R) & (np.abs(dy) < R)
        top = dy < -R + 2 * R * CUBE_TOP_FRACTION
        shade = np.where(top, float(_lambert(0.0, -0.8, 0.6)), cube_front_facet_shade(yaw))
    elif shape is Shape.SPHERE:
        r2 = (dx * dx + dy * dy) / (R * R)
        cover = r2 < 1.0
        shade = _lambert(dx / R, dy / R, np.sqrt(np.maximum(1.0 - r2, 0.0)))
    else:
        half = R * (dy + R) / (2 * R)
        cover = (dy > -R) & (dy < R) & (np.abs(dx) < half)
        t = np.clip(dx / np.maximum(half, 1e-6), -1.0, 1.0)
        shade = _lambert(0.9 * t, np.full_like(t, -0.35), np.sqrt(np.maximum(1.0 - 0.81 * t * t, 0.0)))
    shade = shade * _texture(dx, dy)
    return (slice(i0, i1), slice(j0, j1)), cover, shade


def render(scene: SceneSpec, events: Sequence[MotionEvent]) -> tuple[Clip, GroundTruth]:
    cfg = scene.config
    F, H, W = cfg.F, cfg.H, cfg.W
    objects = sorted(scene.objects, key=lambda o: o.id)
    st = simulate(objects, events, F)
    s = pixel_scale(H, W)
    pixels = np.empty((F, H, W, 3), dtype=np.float64)
    pixels[:] = BACKGROUND
    tracks: list[list[FrameState]] = [[] for _ in objects]
    for f in range(F):
        owner = np.full((H, W), -1, dtype=np.int64)
        order = sorted((o for o in objects if st.contained_by[o.id][f] is None),
                       key=lambda o: (-st.pos[o.id, f, 1], o.id))
        for o in order:
            x, y, z = st.pos[o.id, f]
            u, v = project(x, y, z, H, W)
            spr = _sprite(o.shape, u, v, s * o.radius * st.scale[o.id, f], st.yaw[o.id, f], H, W)
            if spr is None:
                continue
            win, cover, shade = spr
            albedo = np.asarray(COLOR_RGB[o.color])
            patch = pixels[f][win]
            patch[cover] = np.clip(albedo[None, :] * shade[cover][:, None], 0.0, 1.0)
            owner[win][cover] = o.id
        for o in objects:
            x, y, z = st.pos[o.id, f]
            u, v = project(x, y, z, H, W)
            rows, cols = np.nonzero(owner == o.id)
            box = None
            if rows.size:
                box = (int(cols.min()), int(rows.min()), int(cols.max()) + 1, int(rows.max()) + 1)
            tracks[o.id].append(FrameState(
                world=(float(x), float(y), float(z)),
                pixel=(float(u), float(v)),
                box=box,
                visible=box is not None,
                contained_by=st.contained_by[o.id][f],
            ))
    graph = TemporalSceneGraph(
        F,
        [ObjectTrack(o.id, o.shape, o.color, o.size, tracks[o.id]) for o in objects],
        [e.to_event() for e in events],
        WORLD_WIDTH,
    )
    clip = Clip(F, H, W, pixels.astype(np.float32))
    return clip, GroundTruth(graph, list(events), H, W, scene.seed)


# ---------------------------------------------------------------- generator

def _sprite_box(o: ObjectSpec, pos, scale: float, H: int, W: int) -> tuple[float, float, float, float]:
    u, v = project(pos[0], pos[1], pos[2], H, W)
    R = pixel_scale(H, W) * o.radius * scale
    return (u - R, v - R, u + R, v + R)


def _layout_ok(objects: Sequence[ObjectSpec], st: _States, frames: range, H: int, W: int) -> bool:
    m = IMAGE_MARGIN_PX
    for f in frames:
        live = [o for o in objects if st.contained_by[o.id][f] is None]
        boxes = {o.id: _sprite_box(o, st.pos[o.id, f], st.scale[o.id, f], H, W) for o in live}
        for o in live:
            x0, y0, x1, y1 = boxes[o.id]
            if x0 < m or y0 < m or x1 > W - m or y1 > H - m:
                return False
            px, py = st.pos[o.id, f, :2]
            if abs(px) > WORLD_HALF or abs(py) > WORLD_HALF:
                return False
        for i, a in enumerate(live):
            for b in live[i + 1:]:
                ax0, ay0, ax1, ay1 = boxes[a.id]
                bx0, by0, bx1, by1 = boxes[b.id]
                if ax0 < bx1 + m and bx0 < ax1 + m and ay0 < by1 + m and by0 < ay1 + m:
                    return False
                d = np.hypot(*(st.pos[a.id, f, :2] - st.pos[b.id, f, :2]))
                if d <= a.radius * st.scale[a.id, f] + b.radius * st.scale[b.id, f]:
                    return False
    return True


def _sample_event(rng: SplitMix64, objects: Sequence[ObjectSpec], cfg: SceneConfig) -> MotionEvent | None:
    kind = rng.choice(list(cfg.event_kinds))
    length = rng.randint(4, min(8, cfg.F - 1))
    start = rng.randint(0, cfg.F - 1 - length)
    end = start + length
    if kind is EventKind.ROTATE:
        cubes = [o for o in objects if o.shape is Shape.CUBE]
        if not cubes:
            return None
        subj = rng.choice(cubes)
        rate = rng.uniform(*ROTATE_ANGLE) / length * (1 if rng.random() < 0.5 else -1)
        return MotionEvent(kind, subj.id, start, end, rate=rate)
    if kind is EventKind.CONTAIN:
        cones = [o for o in objects if o.shape is Shape.CONE]
        others = [o for o in objects if o.shape is not Shape.CONE]
        if not cones or not others:
            return None
        subj, tgt = rng.choice(others), rng.choice(cones)
        return MotionEvent(kind, subj.id, start, end, target=tgt.id)
    subj = rng.choice(objects)
    if kind is EventKind.TRANSLATE:
        du, dv = 0, 0
        while du == 0 and dv == 0:
            du, dv = rng.randint(-2, 2), rng.randint(-2, 2)
        disp = world_displacement_for_pixels(du * length, dv * length, cfg.H, cfg.W)
        return MotionEvent(kind, subj.id, start, end, displacement=disp)
    factor = rng.uniform(0.6, 0.8) if rng.random() < 0.5 else rng.uniform(1.25, 1.5)
    return MotionEvent(kind, subj.id, start, end, factor=factor)


def _overlaps(e: MotionEvent, events: Sequence[MotionEvent]) -> bool:
    for other in events:
        involved = {other.subject, other.target} - {None}
        if (e.subject in involved or e.target in involved) and e.start < other.end and other.start < e.end:
            return True
    return False


def generate_scene(seed: int, config: SceneConfig | None = None) -> tuple[SceneSpec, list[MotionEvent]]:
    cfg = config or SceneConfig()
    cfg.validate()
    rng = SplitMix64(seed)
    attr_rng, pos_rng, ev_rng = rng.child("attributes"), rng.child("positions"), rng.child("events")
    specs: list[ObjectSpec] = []
    for i in range(cfg.n_objects):
        shape = attr_rng.choice(SHAPES)
        color = attr_rng.choice(COLORS)
        size = attr_rng.choice([Size.SMALL, Size.LARGE])
        yaw = attr_rng.uniform(-math.pi, math.pi)
        for _ in range(MAX_ATTEMPTS):
            x = pos_rng.uniform(-PLACEMENT_HALF, PLACEMENT_HALF)
            y = pos_rng.uniform(-PLACEMENT_HALF, PLACEMENT_HALF)
            cand = ObjectSpec(i, shape, color, size, (x, y, SIZE_RADIUS[size]), yaw)
            trial = specs + [cand]
            if _layout_ok(trial, simulate(trial, [], 1), range(1), cfg.H, cfg.W):
                specs.append(cand)
                break
        else:
            raise GenerationError(f"seed {seed}: could not place object {i} after {MAX_ATTEMPTS} attempts")
    events: list[MotionEvent] = []
    for k in range(cfg.n_events):
        for _ in range(MAX_ATTEMPTS):
            ev = _sample_event(ev_rng, specs, cfg)
            if ev is None or _overlaps(ev, events):
                continue
            trial = events + [ev]
            if _layout_ok(specs, simulate(specs, trial, cfg.F), range(cfg.F), cfg.H, cfg.W):
                events.append(ev)
                break
        else:
            raise GenerationError(f"seed {seed}: could not place event {k} after {MAX_ATTEMPTS} attempts")
    events.sort(key=lambda e: (e.start, e.subject, e.end))
    return SceneSpec(seed, cfg, tuple(specs)), events


def scene_bytes(scene: SceneSpec, events: Sequence[MotionEvent]) -> bytes:
    doc = {"scene": scene.to_json(), "events": [e.to_json() for e in events]}
    return json.dumps(doc, sort_keys=True).encode("utf-8")


# ---------------------------------------------------------------- files

def _pack_frames(magic: bytes, data: np.ndarray) -> bytes:
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    F, H, W = data.shape[:3]
    header = magic + struct.pack("<IIIII", FORMAT_VERSION, F, H, W, zlib.crc32(payload))
    return header + payload


def _unpack_frames(buf: bytes, magic: bytes, channels: int, where: str) -> np.ndarray:
    if len(buf) < 24:
        raise TruncatedPayloadError(f"{where}: header truncated")
    if buf[:4] != magic:
        raise LoadError(f"{where}: bad magic {buf[:4]!r}, expected {magic!r}")
    version, F, H, W, crc = struct.unpack_from("<IIIII", buf, 4)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{where}: version {version}, expected {FORMAT_VERSION}")
    payload = buf[24:]
    expected = 4 * F * H * W * channels
    if len(payload) < expected:
        raise TruncatedPayloadError(f"{where}: payload has {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise LoadError(f"{where}: {len(payload) - expected} trailing bytes")
    if zlib.crc32(payload) != crc:
        raise ChecksumError(f"{where}: CRC32 mismatch")
    return np.frombuffer(payload, dtype="<f4").reshape(F, H, W, channels).astype(np.float32)


def clip_to_bytes(clip: Clip) -> bytes:
    return _pack_frames(CLIP_MAGIC, clip.pixels)


def clip_from_bytes(buf: bytes, where: str = "<clip>") -> Clip:
    px = _unpack_frames(buf, CLIP_MAGIC, 3, where)
    return Clip(px.shape[0], px.shape[1], px.shape[2], px)


def save_clip(clip: Clip, path) -> None:
    Path(path).write_bytes(clip_to_bytes(clip))


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc


def load_clip(path) -> Clip:
    return clip_from_bytes(_read(path), str(path))


def save_truth(truth: GroundTruth, path) -> None:
    Path(path).write_text(json.dumps(truth.to_json(), sort_keys=True) + "\n", encoding="utf-8")


def load_truth(path) -> GroundTruth:
    try:
        doc = json.loads(_read(path).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LoadError(f"{path}: malformed ground truth: {exc}") from exc
    return GroundTruth.from_json(doc)


def export_dataset(items: Sequence[tuple[Clip, GroundTruth]], out_dir) -> list[dict[str, Any]]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, (clip, truth) in enumerate(items):
        clip_name, truth_name = f"clip_{i:04d}.clip", f"clip_{i:04d}.json"
        save_clip(clip, out / clip_name)
        save_truth(truth, out / truth_name)
        manifest.append({"clip": clip_name, "truth": truth_name, "seed": truth.seed})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return manifest


def read_manifest(data_dir) -> list[dict[str, Any]]:
    path = Path(data_dir) / "manifest.json"
    try:
        return json.loads(_read(path).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: malformed manifest: {exc}") from exc


def import_dataset(data_dir) -> list[tuple[Clip, GroundTruth]]:
    root = Path(data_dir)
    return [(load_clip(root / m["clip"]), load_truth(root / m["truth"])) for m in read_manifest(root)]


def make_clip(seed: int, config: SceneConfig | None = None) -> tuple[Clip, GroundTruth]:
    scene, events = generate_scene(seed, config)
    return render(scene, events)
