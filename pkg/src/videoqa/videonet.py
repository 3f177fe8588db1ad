"""Two-stream (2+1)D recognition network over ground-truth object boxes.

Each block factorises a spatiotemporal convolution into two per-frame
spatial convolutions followed by one per-pixel temporal convolution, each
followed by a ReLU. Feature tensors are laid out ``[C, F, H, W]``.

The RGB stream feeds the shape and colour heads, the flow stream feeds the
action head; the two never mix. Rotation is not a learned class: a
rule-based detector flags it from stationary flow plus a swing in the mean
in-box luminance, and the flag overrides the action head at inference.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import tensorcore as tc
from .errors import ContractError, DimensionError, LoadError, NumericError
from .opticalflow import RADIUS, FlowField, flow_clip, flow_stream
from .rng import SplitMix64
from .scenegraph import COLORS, SHAPES, Event, EventKind, ObjectTrack, TemporalSceneGraph
from .scenesim import Clip, GroundTruth

ACTIONS = ["Translate", "Rotate", "Contain", "Scale", "NoAction"]
NO_ACTION = ACTIONS.index("NoAction")
ROTATE = ACTIONS.index("Rotate")
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)
GRAD_CLIP = 1.0


@dataclass(frozen=True)
class R21DBlockConfig:
    N_in: int
    N_out: int
    M: int
    d: int = 3
    t: int = 3
    stride: int = 1

    def validate(self) -> None:
        if min(self.N_in, self.N_out, self.M, self.d, self.t, self.stride) < 1:
            raise ContractError(f"block sizes must be positive: {self}")
        if self.d % 2 == 0 or self.t % 2 == 0:
            raise ContractError(f"kernel extents must be odd: d={self.d}, t={self.t}")

    @property
    def param_count(self) -> int:
        d2 = self.d * self.d
        return (self.M * self.N_in * d2 + self.M + self.M * self.M * d2 + self.M
                + self.N_out * self.M * self.t + self.N_out)


def default_stream(n_in: int, widths=(8, 16, 16), strides=(2, 2, 1)) -> tuple[R21DBlockConfig, ...]:
    blocks, c = [], n_in
    for w, s in zip(widths, strides):
        blocks.append(R21DBlockConfig(c, w, w, 3, 3, s))
        c = w
    return tuple(blocks)


@dataclass(frozen=True)
class NetworkConfig:
    rgb: tuple[R21DBlockConfig, ...] = field(default_factory=lambda: default_stream(3))
    flow: tuple[R21DBlockConfig, ...] = field(default_factory=lambda: default_stream(2))
    head_width: int = 32
    n_shapes: int = 3
    n_colors: int = 6
    n_actions: int = 5
    roi_k: int = 4
    segments: int = 3
    theta_move: float = 0.3
    theta_shade: float = 0.05

    def validate(self) -> None:
        for name, stream, n_in in (("rgb", self.rgb, 3), ("flow", self.flow, 2)):
            if not stream:
                raise ContractError(f"{name} stream has no blocks")
            c = n_in
            for b in stream:
                b.validate()
                if b.N_in != c:
                    raise ContractError(f"{name} stream: block expects {b.N_in} channels, gets {c}")
                c = b.N_out
        if (self.n_shapes, self.n_colors, self.n_actions) != (len(SHAPES), len(COLORS), len(ACTIONS)):
            raise ContractError("class counts do not match the scene vocabulary")
        if min(self.head_width, self.roi_k, self.segments) < 1:
            raise ContractError("head sizes must be positive")

    def stride(self, stream: str) -> int:
        return math.prod(b.stride for b in getattr(self, stream))

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "NetworkConfig":
        doc = dict(doc)
        for key in ("rgb", "flow"):
            doc[key] = tuple(R21DBlockConfig(**b) for b in doc[key])
        cfg = cls(**doc)
        cfg.validate()
        return cfg


@dataclass
class ObjectPrediction:
    id: int
    shape_logits: np.ndarray
    color_logits: np.ndarray
    action_logits: np.ndarray       # segments x 5
    segment_rotation: list[bool]
    segments: list[tuple[int, int]]

    @property
    def rotation(self) -> bool:
        return any(self.segment_rotation)

    @property
    def shape(self):
        return SHAPES[int(np.argmax(self.shape_logits))]

    @property
    def color(self):
        return COLORS[int(np.argmax(self.color_logits))]

    def actions(self) -> list[str]:
        out = [ACTIONS[int(i)] for i in np.argmax(self.action_logits, axis=1)]
        return ["Rotate" if r else a for a, r in zip(out, self.segment_rotation)]


# ---------------------------------------------------------------- layers

class R21DBlock:
    def __init__(self, cfg: R21DBlockConfig, prefix: str, rng: SplitMix64):
        cfg.validate()
        self.cfg = cfg
        d, t, M = cfg.d, cfg.t, cfg.M

        def param(name, shape, fan_in, fan_out):
            full = f"{prefix}.{name}"
            return tc.Parameter(tc.he_uniform(shape, fan_in, rng.child(full)), full)

        self.w1 = param("spatial1.weight", (M, cfg.N_in, d, d), cfg.N_in * d * d, M * d * d)
        self.b1 = tc.Parameter(np.zeros(M), f"{prefix}.spatial1.bias")
        self.w2 = param("spatial2.weight", (M, M, d, d), M * d * d, M * d * d)
        self.b2 = tc.Parameter(np.zeros(M), f"{prefix}.spatial2.bias")
        self.w3 = param("temporal.weight", (cfg.N_out, M, t), M * t, cfg.N_out * t)
        self.b3 = tc.Parameter(np.zeros(cfg.N_out), f"{prefix}.temporal.bias")

    @property
    def params(self) -> list[tc.Parameter]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]


def r21d_block(x, block: R21DBlock) -> tc.Tensor:
    """``x[N_in, F, H, W]`` to ``[N_out, F, H', W']`` with same-padding."""
    cfg = block.cfg
    x = tc.as_tensor(x)
    if x.ndim != 4 or x.shape[0] != cfg.N_in:
        raise DimensionError(f"block expects [{cfg.N_in}, F, H, W], got {x.shape}")
    F = x.shape[1]
    h = x.transpose(1, 0, 2, 3)
    h = tc.relu(tc.conv2d(h, block.w1, block.b1, stride=cfg.stride, pad=cfg.d // 2))
    h = tc.relu(tc.conv2d(h, block.w2, block.b2, stride=1, pad=cfg.d // 2))
    _, M, Ho, Wo = h.shape
    h = h.transpose(1, 0, 2, 3).reshape(1, M, F, Ho * Wo)
    h = tc.relu(tc.conv1d_temporal(h, block.w3, block.b3, stride=1, pad=cfg.t // 2))
    return h.reshape(cfg.N_out, F, Ho, Wo)


def scale_box(box, stride: int, H: int, W: int):
    if box is None:
        return None
    x0, y0, x1, y1 = box
    return (min(x0 // stride, W - 1), min(y0 // stride, H - 1),
            max(min(-(-x1 // stride), W), x0 // stride + 1), max(min(-(-y1 // stride), H), y0 // stride + 1))


def roi_pool(features, boxes, stride: int = 1, k: int = 4) -> tc.Tensor:
    """Per-object ``[C, F, k, k]`` max-pools; boxes are in input pixels."""
    features = tc.as_tensor(features)
    _, _, H, W = features.shape
    scaled = [[scale_box(b, stride, H, W) for b in per_frame] for per_frame in boxes]
    return tc.roi_max_pool(features, scaled, k)


# ---------------------------------------------------------------- model

class Model:
    def __init__(self, config: NetworkConfig | None = None, seed: int = 0):
        self.config = config or NetworkConfig()
        self.config.validate()
        self.seed = seed
        rng = SplitMix64(seed)
        cfg = self.config
        self.rgb_blocks = [R21DBlock(b, f"rgb.{i}", rng) for i, b in enumerate(cfg.rgb)]
        self.flow_blocks = [R21DBlock(b, f"flow.{i}", rng) for i, b in enumerate(cfg.flow)]
        k2 = cfg.roi_k ** 2
        self.heads: dict[str, tuple[tc.Parameter, ...]] = {}
        self._head("shape", cfg.rgb[-1].N_out * k2, cfg.n_shapes, rng)
        self._head("color", cfg.rgb[-1].N_out * k2, cfg.n_colors, rng)
        self._head("action", cfg.flow[-1].N_out * k2 + 1, cfg.n_actions, rng)

    def _head(self, name: str, n_in: int, n_out: int, rng: SplitMix64) -> None:
        w = self.config.head_width

        def p(suffix, shape, fi, fo):
            full = f"head.{name}.{suffix}"
            return tc.Parameter(tc.glorot_uniform(shape, fi, fo, rng.child(full)), full)

        self.heads[name] = (p("fc1.weight", (n_in, w), n_in, w), tc.Parameter(np.zeros(w), f"head.{name}.fc1.bias"),
                            p("fc2.weight", (w, n_out), w, n_out), tc.Parameter(np.zeros(n_out), f"head.{name}.fc2.bias"))

    @property
    def params(self) -> list[tc.Parameter]:
        out = []
        for b in self.rgb_blocks + self.flow_blocks:
            out.extend(b.params)
        for name in ("shape", "color", "action"):
            out.extend(self.heads[name])
        return out

    def head(self, name: str, x) -> tc.Tensor:
        w1, b1, w2, b2 = self.heads[name]
        return tc.linear(tc.relu(tc.linear(x, w1, b1)), w2, b2)

    def state_bytes(self) -> bytes:
        return b"".join(p.data.tobytes() for p in self.params)


def segment_bounds(F: int, segments: int) -> list[tuple[int, int]]:
    edges = [round(s * F / segments) for s in range(segments + 1)]
    return [(edges[s], edges[s + 1]) for s in range(segments)]


@dataclass
class ClipInputs:
    """Everything the network consumes for one clip, precomputed once."""
    rgb: np.ndarray              # 3 x F x H x W
    flow: np.ndarray             # 2 x (F-1) x H x W
    fields: list[FlowField]
    boxes: list[list]            # per object, per frame
    ids: list[int]

    @classmethod
    def build(cls, clip: Clip, truth: GroundTruth, fields: list[FlowField] | None = None) -> "ClipInputs":
        fields = fields if fields is not None else flow_clip(clip)
        boxes = [truth.object_boxes(o.id) for o in truth.graph.objects]
        return cls(rgb_input(clip), flow_stream(fields, RADIUS), fields, boxes,
                   [o.id for o in truth.graph.objects])


def rgb_input(clip: Clip) -> np.ndarray:
    """Channels-first clip mapped from [0, 1] to [-1, 1]."""
    return clip.channels_first() * 2.0 - 1.0


def _visible_mean_matrix(boxes: Sequence[Sequence], F: int) -> np.ndarray:
    """Row o averages the visible frames of object o in an [O*F, D] stack."""
    O = len(boxes)
    m = np.zeros((O, O * F), dtype=tc.default_dtype())
    for o, per in enumerate(boxes):
        vis = [f for f in range(F) if per[f] is not None]
        for f in vis:
            m[o, o * F + f] = 1.0 / len(vis)
    return m


def _segment_matrix(boxes, F: int, segs) -> tuple[np.ndarray, np.ndarray]:
    O, S = len(boxes), len(segs)
    m = np.zeros((O * S, O * F), dtype=tc.default_dtype())
    frac = np.zeros((O * S, 1), dtype=tc.default_dtype())
    for o, per in enumerate(boxes):
        for s, (a, b) in enumerate(segs):
            # hidden frames pool to zero and still count, so disappearing dims the segment
            vis = [f for f in range(a, min(b, F)) if per[f] is not None]
            for f in vis:
                m[o * S + s, o * F + f] = 1.0 / max(min(b, F) - a, 1)
            frac[o * S + s, 0] = len(vis) / max(min(b, F) - a, 1)
    return m, frac


def stream_features(blocks: Sequence[R21DBlock], x) -> tc.Tensor:
    h = tc.as_tensor(x)
    for b in blocks:
        h = r21d_block(h, b)
    return h


def _flatten_pooled(pooled: tc.Tensor) -> tc.Tensor:
    O, C, F, k, _ = pooled.shape
    return pooled.transpose(0, 2, 1, 3, 4).reshape(O * F, C * k * k)


def shape_color_logits(model: Model, rgb, boxes) -> tuple[tc.Tensor, tc.Tensor]:
    cfg = model.config
    feats = stream_features(model.rgb_blocks, rgb)
    pooled = roi_pool(feats, boxes, cfg.stride("rgb"), cfg.roi_k)
    per_obj = _visible_mean_matrix(boxes, feats.shape[1]) @ _flatten_pooled(pooled)
    return model.head("shape", per_obj), model.head("color", per_obj)


def action_logits(model: Model, flow, boxes, F: int) -> tc.Tensor:
    """``[O * segments, 5]`` logits; flow pair f uses the box of frame f."""
    cfg = model.config
    feats = stream_features(model.flow_blocks, flow)
    Fp = feats.shape[1]
    pair_boxes = [per[:Fp] for per in boxes]
    pooled = roi_pool(feats, pair_boxes, cfg.stride("flow"), cfg.roi_k)
    m, frac = _segment_matrix(pair_boxes, Fp, segment_bounds(F, cfg.segments))
    seg = m @ _flatten_pooled(pooled)
    return model.head("action", tc.concat([seg, tc.Tensor(frac)], axis=1))


# ---------------------------------------------------------------- rotation

def mean_box_luminance(frame: np.ndarray, box) -> float:
    x0, y0, x1, y1 = box
    return float((frame[y0:y1, x0:x1] @ LUMA).mean())


def detect_rotation(clip: Clip, boxes: Sequence, fields: Sequence[FlowField], interval: tuple[int, int],
                    theta_move: float = 0.3, theta_shade: float = 0.05,
                    diagnostics: dict | None = None) -> bool:
    """Rotation test for one object over ``[start, end)``.

    ``boxes`` are the object's per-frame boxes. Motion is the mean flow
    magnitude inside the box over the pairs ``f -> f+1`` with ``f`` in the
    interval; shading is the mean in-box luminance over frames ``start`` to
    ``end`` inclusive (clamped to the clip), whose relative range
    ``(max - min) / max`` must exceed ``theta_shade``.
    """
    start, end = interval
    if not 0 <= start < end <= clip.F:
        raise ContractError(f"interval [{start}, {end}) outside clip of {clip.F} frames")
    diag = diagnostics if diagnostics is not None else {}
    frames = [f for f in range(start, min(end, clip.F - 1) + 1) if boxes[f] is not None]
    pairs = [f for f in range(start, min(end, len(fields))) if boxes[f] is not None]
    if not frames:
        diag["invisible"] = True
        return False
    mags = []
    for f in pairs:
        x0, y0, x1, y1 = boxes[f]
        v = fields[f].vectors[y0:y1, x0:x1]
        mags.append(float(np.sqrt((v.astype(np.float64) ** 2).sum(-1)).mean()))
    lum = np.array([mean_box_luminance(clip.pixels[f], boxes[f]) for f in frames])
    motion = float(np.mean(mags)) if mags else 0.0
    shade = float((lum.max() - lum.min()) / lum.max()) if lum.max() > 0 else 0.0
    diag.update(invisible=False, motion=motion, shade=shade)
    return motion < theta_move and shade > theta_shade


# ---------------------------------------------------------------- labels

def segment_action_labels(truth: GroundTruth, obj_id: int, segments, train: bool = False) -> list[int]:
    """Event kind with the largest overlap per segment, NoAction if none.

    With ``train`` set, Rotate maps to NoAction since the detector owns it.
    """
    evs = [e for e in truth.graph.events if e.subject == obj_id]
    labels = []
    for a, b in segments:
        best, best_ov = NO_ACTION, 0
        for e in sorted(evs, key=lambda e: e.start):
            ov = min(b, e.end) - max(a, e.start)
            if ov > best_ov:
                best, best_ov = ACTIONS.index(e.kind.value), ov
        if train and best == ROTATE:
            best = NO_ACTION
        labels.append(best)
    return labels


# ---------------------------------------------------------------- inference

def forward(clip: Clip, flow: Sequence[FlowField], truth_boxes: Sequence[Sequence], model: Model,
            ids: Sequence[int] | None = None) -> list[ObjectPrediction]:
    """One prediction per object that is visible in at least one frame."""
    ids = list(range(len(truth_boxes))) if ids is None else list(ids)
    keep = [i for i, per in enumerate(truth_boxes) if any(b is not None for b in per)]
    if not keep:
        return []
    boxes = [truth_boxes[i] for i in keep]
    cfg = model.config
    rgb = rgb_input(clip)
    shape, color = shape_color_logits(model, rgb, boxes)
    act = action_logits(model, flow_stream(list(flow), RADIUS), boxes, clip.F)
    segs = segment_bounds(clip.F, cfg.segments)
    S = len(segs)
    out = []
    for j, i in enumerate(keep):
        rot = [detect_rotation(clip, boxes[j], flow, seg, cfg.theta_move, cfg.theta_shade) for seg in segs]
        out.append(ObjectPrediction(ids[i], shape.data[j].copy(), color.data[j].copy(),
                                    act.data[j * S:(j + 1) * S].copy(), rot, segs))
    return out


def predict_clip(model: Model, clip: Clip, truth: GroundTruth,
                 fields: list[FlowField] | None = None) -> list[ObjectPrediction]:
    fields = fields if fields is not None else flow_clip(clip)
    return forward(clip, fields, [truth.object_boxes(o.id) for o in truth.graph.objects], model)


def predicted_graph(truth: GroundTruth, predictions: Sequence[ObjectPrediction]) -> TemporalSceneGraph:
    """Ground-truth geometry with predicted attributes and segment actions."""
    by_id = {p.id: p for p in predictions}
    objects, events = [], []
    for o in truth.graph.objects:
        p = by_id.get(o.id)
        shape, color = (p.shape, p.color) if p else (o.shape, o.color)
        objects.append(ObjectTrack(o.id, shape, color, o.size, list(o.frames)))
        if p is None:
            continue
        run = None
        for (a, b), act in zip(p.segments, p.actions()):
            if run and run[0] == act and run[2] == a:
                run = (act, run[1], b)
                continue
            if run and run[0] != "NoAction":
                events.append(Event(EventKind(run[0]), o.id, run[1], run[2]))
            run = (act, a, b)
        if run and run[0] != "NoAction":
            events.append(Event(EventKind(run[0]), o.id, run[1], run[2]))
    return TemporalSceneGraph(truth.graph.F, objects, events, truth.graph.world_width)


# ---------------------------------------------------------------- training

@dataclass
class TrainReport:
    epochs: int
    lr: float
    seed: int
    epoch_losses: list[float]
    accuracies: dict[str, float]
    seconds: float = 0.0

    def to_json(self) -> dict[str, Any]:
        return {"epochs": self.epochs, "lr": self.lr, "seed": self.seed,
                "epoch_losses": self.epoch_losses, "accuracies": self.accuracies}


def _labels(truth: GroundTruth, keep: Sequence[int], segs, train: bool):
    objs = [truth.graph.objects[i] for i in keep]
    shapes = np.array([SHAPES.index(o.shape) for o in objs])
    colors = np.array([COLORS.index(o.color) for o in objs])
    actions = np.array([l for o in objs for l in segment_action_labels(truth, o.id, segs, train)])
    return shapes, colors, actions


def clip_loss(model: Model, inputs: ClipInputs, truth: GroundTruth) -> tc.Tensor:
    keep = [i for i, per in enumerate(inputs.boxes) if any(b is not None for b in per)]
    boxes = [inputs.boxes[i] for i in keep]
    F = inputs.rgb.shape[1]
    shape, color = shape_color_logits(model, inputs.rgb, boxes)
    act = action_logits(model, inputs.flow, boxes, F)
    ys, yc, ya = _labels(truth, keep, segment_bounds(F, model.config.segments), train=True)
    return (tc.cross_entropy(tc.softmax(shape), ys) + tc.cross_entropy(tc.softmax(color), yc)
            + tc.cross_entropy(tc.softmax(act), ya))


def train(dataset: Sequence[tuple[Clip, GroundTruth]], model: Model, epochs: int, lr: float, seed: int,
          inputs: Sequence[ClipInputs] | None = None, log=None, max_grad_norm: float | None = GRAD_CLIP) -> TrainReport:
    """Per-clip SGD on summed cross-entropy; clip order reshuffled each epoch.

    Gradients are clipped to a global norm of ``max_grad_norm`` (None disables).
    """
    if epochs < 0 or lr < 0:
        raise ContractError("epochs and lr must be non-negative")
    t0 = time.perf_counter()
    inputs = list(inputs) if inputs is not None else [ClipInputs.build(c, t) for c, t in dataset]
    order_rng = SplitMix64(seed).child("order")
    params = model.params
    losses = []
    for ep in range(epochs):
        order = list(range(len(dataset)))
        order_rng.shuffle(order)
        total = 0.0
        for i in order:
            tc.zero_grads(params)
            with tc.ComputeGraph() as g:
                loss = clip_loss(model, inputs[i], dataset[i][1])
            if not math.isfinite(loss.item()):
                raise NumericError(f"loss diverged at epoch {ep}")
            g.backward(loss)
            if max_grad_norm:
                tc.clip_grad_norm(params, max_grad_norm)
            tc.sgd_step(params, lr)
            total += loss.item()
        losses.append(total / max(len(dataset), 1))
        if log:
            log(ep, losses[-1])
    acc = evaluate(dataset, model, inputs)
    return TrainReport(epochs, lr, seed, losses, acc, time.perf_counter() - t0)


def evaluate(dataset: Sequence[tuple[Clip, GroundTruth]], model: Model,
             inputs: Sequence[ClipInputs] | None = None) -> dict[str, float]:
    """Argmax accuracy per head; actions include the rotation override."""
    inputs = list(inputs) if inputs is not None else [ClipInputs.build(c, t) for c, t in dataset]
    right = {"shape": 0, "color": 0, "action": 0}
    total = {"shape": 0, "color": 0, "action": 0}
    for (clip, truth), inp in zip(dataset, inputs):
        preds = forward(clip, inp.fields, inp.boxes, model, inp.ids)
        for p in preds:
            o = truth.graph.objects[p.id]
            right["shape"] += p.shape == o.shape
            right["color"] += p.color == o.color
            labels = segment_action_labels(truth, p.id, p.segments)
            right["action"] += sum(ACTIONS.index(a) == l for a, l in zip(p.actions(), labels))
            total["shape"] += 1
            total["color"] += 1
            total["action"] += len(labels)
    return {k: (right[k] / total[k] if total[k] else float("nan")) for k in right}


# ---------------------------------------------------------------- persistence

def config_path(model_path) -> Path:
    p = Path(model_path)
    return p.with_name(p.name + ".config.json")


def save_model(model: Model, path) -> None:
    tc.save_checkpoint(path, model.params)
    doc = {"seed": model.seed, "network": model.config.to_json()}
    config_path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path) -> Model:
    try:
        doc = json.loads(config_path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read model config for {path}: {exc}") from exc
    model = Model(NetworkConfig.from_json(doc["network"]), doc.get("seed", 0))
    weights = tc.load_checkpoint(path)
    for p in model.params:
        if p.name not in weights or weights[p.name].shape != p.data.shape:
            raise LoadError(f"{path}: parameter {p.name} missing or mis-shaped")
        p.data[...] = weights[p.name]
    return model
