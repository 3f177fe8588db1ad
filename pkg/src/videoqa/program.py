"""Program steps and answers shared by the parsers, executors and grader."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .errors import ContractError
from .scenegraph import Color, Relation, Shape

SET_OPS = ("FilterShape", "FilterColor", "Relate", "AtFrame")
TERMINAL_OPS = ("Count", "Exist", "QueryColor", "QueryShape", "QueryLocation", "QueryAction")
_ARG_TYPES = {"FilterShape": Shape, "FilterColor": Color, "Relate": Relation, "AtFrame": int}


@dataclass(frozen=True)
class ProgramStep:
    op: str
    arg: Any = None
    ref: int | None = None

    def __post_init__(self):
        if self.op not in SET_OPS + TERMINAL_OPS:
            raise ContractError(f"unknown program op {self.op!r}")
        kind = _ARG_TYPES.get(self.op)
        if kind is None:
            if self.arg is not None or self.ref is not None:
                raise ContractError(f"{self.op} takes no arguments")
            return
        if kind is int:
            if not isinstance(self.arg, int) or isinstance(self.arg, bool) or self.arg < 0:
                raise ContractError(f"{self.op} needs a frame index, got {self.arg!r}")
        else:
            object.__setattr__(self, "arg", kind(self.arg))
        if (self.op == "Relate") != (self.ref is not None):
            raise ContractError("Relate, and only Relate, takes an anchor reference")

    @property
    def terminal(self) -> bool:
        return self.op in TERMINAL_OPS

    def descriptor(self) -> tuple:
        arg = self.arg.value if hasattr(self.arg, "value") else self.arg
        return tuple(x for x in (self.op, arg, self.ref) if x is not None)

    def to_json(self) -> dict[str, Any]:
        d: dict[str, Any] = {"op": self.op}
        if self.arg is not None:
            d["arg"] = self.arg.value if hasattr(self.arg, "value") else self.arg
        if self.ref is not None:
            d["ref"] = self.ref
        return d

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "ProgramStep":
        return cls(d["op"], d.get("arg"), d.get("ref"))

    def __str__(self):
        if self.op == "Relate":
            return f"Relate({self.arg.value}, step {self.ref})"
        if self.arg is None:
            return self.op
        return f"{self.op}({self.arg.value if hasattr(self.arg, 'value') else self.arg})"


@dataclass(frozen=True)
class Program:
    steps: tuple[ProgramStep, ...]

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps or not steps[-1].terminal:
            raise ContractError("a program must end with exactly one terminal step")
        for i, s in enumerate(steps[:-1]):
            if s.terminal:
                raise ContractError(f"terminal step {s.op} at position {i} is not last")
            if s.op == "Relate" and not 0 <= s.ref < i:
                raise ContractError(f"Relate at step {i} refers to step {s.ref}")

    def __len__(self):
        return len(self.steps)

    @property
    def terminal(self) -> ProgramStep:
        return self.steps[-1]

    def subject(self) -> tuple:
        """What the answer is about: the set steps other than frame selection."""
        return tuple(s.descriptor() for s in self.steps[:-1] if s.op != "AtFrame")

    def to_json(self) -> list[dict[str, Any]]:
        return [s.to_json() for s in self.steps]

    @classmethod
    def from_json(cls, steps: list[dict[str, Any]]) -> "Program":
        return cls(tuple(ProgramStep.from_json(d) for d in steps))

    def __str__(self):
        return "[" + ", ".join(str(s) for s in self.steps) + "]"


ANSWER_KINDS = {"Count": "count", "Exist": "bool", "QueryColor": "color", "QueryShape": "shape",
                "QueryLocation": "location", "QueryAction": "actions"}


@dataclass(frozen=True)
class Answer:
    """A hard answer: its domain, its value, and what it is about.

    Values: ``count`` int, ``bool`` bool, ``color``/``shape`` enum,
    ``location`` ``(frame, (u, v))``, ``actions`` tuple of event kind names.
    """
    kind: str
    value: Any
    subject: tuple = ()

    def to_json(self) -> dict[str, Any]:
        v = self.value
        if hasattr(v, "value"):
            v = v.value
        elif self.kind == "location":
            v = [v[0], list(v[1])]
        elif self.kind == "actions":
            v = list(v)
        return {"kind": self.kind, "value": v, "subject": [list(s) for s in self.subject]}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Answer":
        kind, v = d["kind"], d["value"]
        if kind == "color":
            v = Color(v)
        elif kind == "shape":
            v = Shape(v)
        elif kind == "location":
            v = (int(v[0]), (float(v[1][0]), float(v[1][1])))
        elif kind == "actions":
            v = tuple(v)
        return cls(kind, v, tuple(tuple(s) for s in d["subject"]))

    def text(self) -> str:
        v = self.value
        if self.kind == "location":
            return f"frame {v[0]} at ({v[1][0]:.1f}, {v[1][1]:.1f})"
        if self.kind == "bool":
            return "yes" if v else "no"
        if self.kind == "actions":
            return ", ".join(v) if v else "nothing"
        return str(v.value if hasattr(v, "value") else v)
