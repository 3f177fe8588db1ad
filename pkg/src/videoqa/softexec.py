"""Program execution over temporal scene graphs.

Symbolic mode works on exact object sets. Each set step produces a value:

* ``FilterShape``/``FilterColor`` intersect the previous value with the
  objects of that attribute (the value before step 0 is every object);
* ``AtFrame(f)`` moves the evaluation frame to ``f`` (frame 0 until then)
  and keeps only objects visible at ``f``;
* ``Relate(rel, ref)`` yields the visible objects ``o`` for which
  ``rel(o, a)`` holds for some other object ``a`` in the value of step
  ``ref``; an invisible anchor makes the relation undefined.

Soft mode replays the same steps on attention vectors through a fixed-depth
stack of attention slots: every set step pushes its output, ``Relate``
reads its anchor at the matching depth below the top, and the terminal
step pops. With exact one-hot encodings this reproduces symbolic mode
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import tensorcore as tc
from .errors import AmbiguousReferentError, ContractError, RelationUndefinedError
from .program import Answer, Program, ProgramStep
from .scenegraph import (
    COLORS, SHAPES, Color, Relation, Shape, TemporalSceneGraph, actions_of, spatial_relation,
)

STACK_DEPTH = 8


# ---------------------------------------------------------------- symbolic

def _terminal(step: ProgramStep, graph: TemporalSceneGraph, ids: set[int], frame: int,
              subject: tuple) -> Answer:
    if step.op == "Count":
        return Answer("count", len(ids), subject)
    if step.op == "Exist":
        return Answer("bool", bool(ids), subject)
    if len(ids) != 1:
        raise AmbiguousReferentError(f"{step.op} needs exactly one referent, found {len(ids)}")
    (o,) = ids
    track = graph.objects[o]
    if step.op == "QueryColor":
        return Answer("color", track.color, subject)
    if step.op == "QueryShape":
        return Answer("shape", track.shape, subject)
    if step.op == "QueryLocation":
        return Answer("location", (frame, graph.state(o, frame).pixel), subject)
    return Answer("actions", tuple(k.value for k, _ in actions_of(graph, o)), subject)


def trace_symbolic(program: Program, graph: TemporalSceneGraph) -> list[tuple[set[int], int]]:
    """The object set and evaluation frame after each set step."""
    frame = 0
    trace: list[tuple[set[int], int]] = []
    current = set(range(graph.n))
    for step in program.steps[:-1]:
        if step.op == "FilterShape":
            current = {o for o in current if graph.objects[o].shape is step.arg}
        elif step.op == "FilterColor":
            current = {o for o in current if graph.objects[o].color is step.arg}
        elif step.op == "AtFrame":
            if step.arg >= graph.F:
                raise ContractError(f"frame {step.arg} outside clip of {graph.F} frames")
            frame = step.arg
            current = {o for o in current if graph.visible(o, frame)}
        else:
            anchors = trace[step.ref][0]
            for a in anchors:
                if not graph.visible(a, frame):
                    raise RelationUndefinedError(f"anchor {a} invisible at frame {frame}")
            current = {o for o in range(graph.n) if graph.visible(o, frame)
                       and any(o != a and spatial_relation(graph, o, a, frame, step.arg) for a in anchors)}
        trace.append((current, frame))
    return trace


def exec_symbolic(program: Program, graph: TemporalSceneGraph) -> Answer:
    trace = trace_symbolic(program, graph)
    current, frame = trace[-1] if trace else (set(range(graph.n)), 0)
    return _terminal(program.terminal, graph, current, frame, program.subject())


# ---------------------------------------------------------------- encodings

@dataclass
class GraphEncoding:
    """Exact per-object one-hots, visibility masks and relation matrices."""
    graph: TemporalSceneGraph
    shape: np.ndarray          # N x 3
    color: np.ndarray          # N x 6
    visible: np.ndarray        # F x N
    _rel: dict = field(default_factory=dict)

    @classmethod
    def from_graph(cls, graph: TemporalSceneGraph) -> "GraphEncoding":
        n = graph.n
        shape = np.zeros((n, len(SHAPES)))
        color = np.zeros((n, len(COLORS)))
        for o in graph.objects:
            shape[o.id, SHAPES.index(o.shape)] = 1.0
            color[o.id, COLORS.index(o.color)] = 1.0
        vis = np.array([[o.frames[f].visible for o in graph.objects] for f in range(graph.F)],
                       dtype=float).reshape(graph.F, n)
        return cls(graph, shape, color, vis)

    @property
    def n(self) -> int:
        return self.graph.n

    def relation(self, rel: Relation, frame: int) -> np.ndarray:
        """``R[a, o] = rel(o, a)``; zero on the diagonal and for invisible objects."""
        key = (Relation(rel), frame)
        if key not in self._rel:
            R = np.zeros((self.n, self.n))
            vis = self.visible[frame]
            for a in range(self.n):
                for o in range(self.n):
                    if a != o and vis[a] and vis[o]:
                        R[a, o] = float(spatial_relation(self.graph, o, a, frame, rel))
            self._rel[key] = R
        return self._rel[key]

    def pixels(self, frame: int) -> np.ndarray:
        return np.array([o.frames[frame].pixel for o in self.graph.objects]).reshape(self.n, 2)


# ---------------------------------------------------------------- soft modules

def soft_filter(att, scores):
    return np.clip(np.asarray(att, dtype=float) * np.asarray(scores, dtype=float), 0.0, 1.0)


def soft_relate(att, R):
    return np.clip(np.asarray(R, dtype=float).T @ np.asarray(att, dtype=float), 0.0, 1.0)


def soft_count(att) -> float:
    return float(np.sum(att))


def soft_exist(att) -> float:
    return float(1.0 - np.prod(1.0 - np.asarray(att, dtype=float)))


def soft_query(att, onehots) -> tuple[np.ndarray, bool]:
    """Attention-weighted class distribution and a degenerate-input flag."""
    mass = np.asarray(att, dtype=float) @ np.asarray(onehots, dtype=float)
    total = mass.sum()
    if total <= 0:
        return np.full(mass.shape, 1.0 / mass.size), True
    return mass / total, False


def soft_location(att, pixels) -> tuple[np.ndarray, bool]:
    att = np.asarray(att, dtype=float)
    total = att.sum()
    if total <= 0:
        return np.zeros(2), True
    return (att @ np.asarray(pixels, dtype=float)) / total, False


# ---------------------------------------------------------------- stack

class SoftStack:
    """Fixed-depth stack of attention slots under a soft pointer.

    Slot 0 starts as the all-ones attention with the pointer on it. Values
    may be numpy arrays or tensorcore Tensors.
    """

    def __init__(self, n: int, depth: int = STACK_DEPTH, base=None):
        if depth < 1:
            raise ContractError("stack depth must be positive")
        self.depth = depth
        self.slots: list[Any] = [np.zeros(n) for _ in range(depth)]
        self.slots[0] = np.ones(n) if base is None else base
        self.pointer = np.zeros(depth)
        self.pointer[0] = 1.0

    def _shifted(self, k: int) -> np.ndarray:
        """Pointer moved ``k`` slots towards the bottom (negative: towards the top)."""
        p = np.zeros(self.depth)
        if k >= 0:
            if self.pointer[:k].sum() > 1e-9:
                raise ContractError("soft stack underflow")
            p[:self.depth - k] = self.pointer[k:]
        else:
            if self.pointer[self.depth + k:].sum() > 1e-9:
                raise ContractError(f"soft stack overflow beyond depth {self.depth}")
            p[-k:] = self.pointer[:self.depth + k]
        return p

    def read(self, k: int = 0):
        p = self._shifted(k)
        out = None
        for d in np.nonzero(p)[0]:
            term = self.slots[d] * float(p[d])
            out = term if out is None else out + term
        return out

    def push(self, value) -> None:
        p = self._shifted(-1)
        for d in np.nonzero(p)[0]:
            w = float(p[d])
            self.slots[d] = value if w == 1.0 else self.slots[d] * (1.0 - w) + value * w
        self.pointer = p

    def pop(self):
        value = self.read(0)
        if self.pointer[0] < 1.0:
            moved = np.zeros(self.depth)
            moved[:-1] = self.pointer[1:]
            moved[0] += self.pointer[0]
            self.pointer = moved
        return value


# ---------------------------------------------------------------- soft answers

@dataclass
class SoftAnswer:
    kind: str
    value: Any                  # float for count/bool, distribution, or (frame, pixel)
    subject: tuple = ()
    degenerate: bool = False

    def harden(self) -> Answer:
        if self.kind == "count":
            return Answer("count", int(round(float(self.value))), self.subject)
        if self.kind == "bool":
            return Answer("bool", float(self.value) > 0.5, self.subject)
        if self.kind == "color":
            return Answer("color", COLORS[int(np.argmax(self.value))], self.subject)
        if self.kind == "shape":
            return Answer("shape", SHAPES[int(np.argmax(self.value))], self.subject)
        if self.kind == "location":
            frame, px = self.value
            return Answer("location", (frame, (float(px[0]), float(px[1]))), self.subject)
        return Answer("actions", self.value, self.subject)


def _data(x) -> np.ndarray:
    return x.data.astype(float) if isinstance(x, tc.Tensor) else np.asarray(x, dtype=float)


def _soft_terminal(step: ProgramStep, enc: GraphEncoding, att, frame: int, subject: tuple) -> SoftAnswer:
    a = _data(att)
    if step.op == "Count":
        return SoftAnswer("count", soft_count(a), subject)
    if step.op == "Exist":
        return SoftAnswer("bool", soft_exist(a), subject)
    if step.op == "QueryColor":
        dist, deg = soft_query(a, enc.color)
        return SoftAnswer("color", dist, subject, deg)
    if step.op == "QueryShape":
        dist, deg = soft_query(a, enc.shape)
        return SoftAnswer("shape", dist, subject, deg)
    if step.op == "QueryLocation":
        px, deg = soft_location(a, enc.pixels(frame))
        return SoftAnswer("location", (frame, px), subject, deg)
    o = int(np.argmax(a))
    return SoftAnswer("actions", tuple(k.value for k, _ in actions_of(enc.graph, o)), subject, a.sum() <= 0)


def _set_step(step: ProgramStep, enc: GraphEncoding, stack: SoftStack, i: int, frame: int):
    top = stack.read(0)
    if step.op == "FilterShape":
        return soft_filter(top, enc.shape[:, SHAPES.index(step.arg)])
    if step.op == "FilterColor":
        return soft_filter(top, enc.color[:, COLORS.index(step.arg)])
    if step.op == "AtFrame":
        return soft_filter(top, enc.visible[step.arg])
    return soft_relate(stack.read(i - step.ref - 1), enc.relation(step.arg, frame))


def _tensor_set_step(step: ProgramStep, enc: GraphEncoding, stack: SoftStack, i: int, frame: int):
    top = stack.read(0)
    if step.op == "FilterShape":
        return tc.clamp(top * enc.shape[:, SHAPES.index(step.arg)], 0.0, 1.0)
    if step.op == "FilterColor":
        return tc.clamp(top * enc.color[:, COLORS.index(step.arg)], 0.0, 1.0)
    if step.op == "AtFrame":
        return tc.clamp(top * enc.visible[step.arg], 0.0, 1.0)
    R = enc.relation(step.arg, frame)
    anchor = tc.reshape(stack.read(i - step.ref - 1), (enc.n, 1))
    return tc.clamp(tc.reshape(tc.matmul(R.T, anchor), (enc.n,)), 0.0, 1.0)


def exec_soft(program: Program, graph: TemporalSceneGraph | GraphEncoding, mode: str = "hard",
              module_weights: Sequence[dict[ProgramStep, Any]] | None = None,
              depth: int = STACK_DEPTH) -> SoftAnswer:
    """Run ``program`` on attention vectors.

    ``mode="hard"`` executes the program's own steps. ``mode="blended"``
    replaces each set position ``i`` (other than ``AtFrame``) by the mixture
    ``sum_k w_k * module_k(stack)`` over ``module_weights[i]``; weights may
    be tensorcore Tensors, in which case the result is differentiable
    through :func:`exec_soft_tensor`.
    """
    enc = graph if isinstance(graph, GraphEncoding) else GraphEncoding.from_graph(graph)
    if mode == "blended":
        att, frame = exec_soft_tensor(program, enc, module_weights, depth)
        return _soft_terminal(program.terminal, enc, att, frame, program.subject())
    if mode != "hard":
        raise ContractError(f"unknown execution mode {mode!r}")
    stack = SoftStack(enc.n, depth)
    frame = 0
    for i, step in enumerate(program.steps[:-1]):
        if step.op == "AtFrame":
            if step.arg >= enc.graph.F:
                raise ContractError(f"frame {step.arg} outside clip of {enc.graph.F} frames")
            frame = step.arg
        stack.push(_set_step(step, enc, stack, i, frame))
    return _soft_terminal(program.terminal, enc, stack.pop(), frame, program.subject())


def exec_soft_tensor(program: Program, enc: GraphEncoding,
                     module_weights: Sequence[dict[ProgramStep, Any]] | None,
                     depth: int = STACK_DEPTH) -> tuple[tc.Tensor, int]:
    """Blended execution on tensorcore Tensors; returns the final attention and frame."""
    weights = list(module_weights or [])
    n_set = len(program.steps) - 1
    if len(weights) < n_set:
        weights += [None] * (n_set - len(weights))
    stack = SoftStack(enc.n, depth, base=tc.Tensor(np.ones(enc.n)))
    frame = 0
    for i, step in enumerate(program.steps[:-1]):
        if step.op == "AtFrame":
            frame = step.arg
            stack.push(_tensor_set_step(step, enc, stack, i, frame))
            continue
        mix = weights[i] or {step: 1.0}
        out = None
        for cand, w in mix.items():
            if cand.op == "AtFrame" or cand.terminal:
                raise ContractError("blended positions mix filter and relate modules only")
            if cand.op == "Relate" and not 0 <= cand.ref < i:
                raise ContractError(f"blended Relate at step {i} refers to step {cand.ref}")
            term = _tensor_set_step(cand, enc, stack, i, frame) * w
            out = term if out is None else out + term
        stack.push(tc.clamp(out, 0.0, 1.0))
    return stack.pop(), frame


def one_hot_weights(program: Program) -> list[dict[ProgramStep, float]]:
    return [{s: 1.0} for s in program.steps[:-1]]


def answers_match(a: Answer, b: Answer, tol: float = 1e-6) -> bool:
    if a.kind != b.kind or a.subject != b.subject:
        return False
    if a.kind == "location":
        return a.value[0] == b.value[0] and max(abs(x - y) for x, y in zip(a.value[1], b.value[1])) <= tol
    return a.value == b.value
