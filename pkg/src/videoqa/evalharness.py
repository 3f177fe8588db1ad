"""Answer grading, per-category accuracy, pipeline evaluation and the ask loop.

An answer carries its domain (count, colour, ...) and its subject, the set
steps of the program that produced it. Grading:

* Correct: same domain, same subject, same value (locations: same frame and
  both pixel coordinates within ``LOCATION_TOLERANCE``);
* Wrong: same domain and subject, different value;
* Invalid: anything else, including no answer at all. Answering "one
  triangle" to a question about spheres is Invalid, not Wrong.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence, TextIO

from .errors import AmbiguousReferentError, ContractError, LoadError, RelationUndefinedError
from .program import Answer, Program
from .questlang import CATEGORIES, QAItem, lexicon, parse, tokenize
from .scenegraph import TemporalSceneGraph
from .softexec import exec_soft, exec_symbolic

LOCATION_TOLERANCE = 2.0
CANT_ANSWER = "Sorry, I can't answer that question."
REPORT_VERSION = 1
TABLE_HEADER = ("Method", "Count%", "color %", "shape %", "location %")
# Published figures, shown for orientation only.
REFERENCE_ROWS = (
    ("Lei et al.", 69.32, 68.23, 64.34, 53.72),
    ("Jie et al.[23]", 70.16, 73.32, 69.81, 57.34),
    ("Jie et al.[24]", 72.81, 73.23, 71.45, 61.23),
    ("Yang et al.", 75.13, 74.97, 77.14, 63.76),
    ("Chadha et al.", 77.23, 74.31, 74.56, 62.56),
    ("R(2+1)D", 80.42, 72.67, 75.23, 65.71),
)
REFERENCE_NOTE = "published, not reproduced"


class Grade(str, Enum):
    CORRECT = "Correct"
    WRONG = "Wrong"
    INVALID = "Invalid"


def accuracy(right: int, total: int) -> float | None:
    """``right / total``; None when nothing was asked."""
    if total < 0 or right < 0:
        raise ContractError(f"negative counts: right={right}, total={total}")
    if right > total:
        raise ContractError(f"right answers {right} exceed total {total}")
    return None if total == 0 else right / total


def _same_value(kind: str, a, b, tol: float) -> bool:
    if kind == "location":
        (fa, pa), (fb, pb) = a, b
        return fa == fb and abs(pa[0] - pb[0]) <= tol and abs(pa[1] - pb[1]) <= tol
    return a == b


def grade(expected: Answer, actual: Answer | None, tol: float = LOCATION_TOLERANCE) -> Grade:
    if actual is None or actual.kind != expected.kind or tuple(actual.subject) != tuple(expected.subject):
        return Grade.INVALID
    return Grade.CORRECT if _same_value(expected.kind, expected.value, actual.value, tol) else Grade.WRONG


def parse_answer_phrase(text: str) -> Answer | None:
    """Read a short spoken-style answer such as "four cubes" or "red".

    A number makes a count whose subject is the colour and shape words that
    follow it; a lone colour or shape is a query answer; yes/no is boolean.
    """
    toks, vals = tokenize(text)
    words = [t for t in toks if t not in lexicon().stopwords]
    nums = [v for t, v in zip(toks, vals) if t == "<num>"]
    colors = [v for t, v in zip(toks, vals) if t == "<color>"]
    shapes = [v for t, v in zip(toks, vals) if t == "<shape>"]
    if len(nums) == 1:
        subject = tuple([("FilterColor", c.value) for c in colors] + [("FilterShape", s.value) for s in shapes])
        return Answer("count", int(nums[0]), subject)
    if nums:
        return None
    if words in (["yes"], ["no"]):
        return Answer("bool", words == ["yes"])
    if len(colors) == 1 and not shapes:
        return Answer("color", colors[0])
    if len(shapes) == 1 and not colors:
        return Answer("shape", shapes[0])
    return None


_NUMBER_WORDS = ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
                 "eleven", "twelve")


def answer_phrase(answer: Answer) -> str:
    """Spoken-style rendering, e.g. ``four cubes`` or ``one red object``."""
    if answer.kind != "count":
        return answer.text()
    n = answer.value
    words = [_NUMBER_WORDS[n] if 0 <= n < len(_NUMBER_WORDS) else str(n)]
    surface = lexicon().surface
    noun = "object"
    for step in answer.subject:
        if step[0] == "FilterColor":
            words.append(surface.get(step[1], step[1].lower()))
        elif step[0] == "FilterShape":
            noun = surface.get(step[1], step[1].lower())
    if any(step[0] == "Relate" for step in answer.subject):
        noun = "object"
    words.append(noun if n == 1 else noun + "s")
    return " ".join(words)


# ---------------------------------------------------------------- reports

@dataclass
class CategoryReport:
    """Grade counts per category; ``right`` is the Correct count."""
    grades: dict[str, dict[str, int]] = field(default_factory=dict)

    def add(self, category: str, g: Grade) -> None:
        row = self.grades.setdefault(category, {x.value: 0 for x in Grade})
        row[g.value] += 1

    def right(self, category: str) -> int:
        return self.grades.get(category, {}).get(Grade.CORRECT.value, 0)

    def total(self, category: str) -> int:
        return sum(self.grades.get(category, {}).values())

    def accuracy(self, category: str) -> float | None:
        return accuracy(self.right(category), self.total(category))

    def to_json(self) -> dict[str, Any]:
        cats = list(CATEGORIES) + sorted(c for c in self.grades if c not in CATEGORIES)
        return {c: {"right": self.right(c), "total": self.total(c), "accuracy": self.accuracy(c),
                    "grades": dict(self.grades.get(c, {x.value: 0 for x in Grade}))} for c in cats}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "CategoryReport":
        rep = cls({c: dict(v["grades"]) for c, v in doc.items() if v["total"]})
        for c, v in doc.items():
            if rep.right(c) != v["right"] or rep.total(c) != v["total"]:
                raise LoadError(f"category {c}: counts disagree with grades")
        return rep

    @classmethod
    def from_log(cls, log: Iterable[dict[str, Any]]) -> "CategoryReport":
        rep = cls()
        for entry in log:
            rep.add(entry["category"], Grade(entry["grade"]))
        return rep


def _pct(x: float | None) -> str:
    return "n/a" if x is None else f"{100 * x:.2f}"


def render_table(report: CategoryReport, label: str = "This run", references: bool = True) -> str:
    lines = ["\t".join(TABLE_HEADER)]
    if references:
        for name, *vals in REFERENCE_ROWS:
            lines.append("\t".join([f"{name} ({REFERENCE_NOTE})"] + [f"{v:.2f}" for v in vals]))
    lines.append("\t".join([label] + [_pct(report.accuracy(c)) for c in CATEGORIES]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- pipeline

def _execute(program: Program, graph: TemporalSceneGraph, executor: str) -> Answer | None:
    try:
        if executor == "symbolic":
            return exec_symbolic(program, graph)
        soft = exec_soft(program, graph)
        return None if soft.degenerate else soft.harden()
    except (AmbiguousReferentError, RelationUndefinedError, ContractError):
        return None


def answer_question(question: str, graph: TemporalSceneGraph, executor: str = "symbolic") -> dict[str, Any]:
    """Parse, arbitrate and execute one question; the trace of every stage."""
    if executor not in ("symbolic", "soft"):
        raise ContractError(f"unknown executor {executor!r}")
    t, s, w = parse(question)
    answer = _execute(w.program, graph, executor) if w.program is not None else None
    return {"question": question,
            "template_confidence": round(t.confidence, 6), "statistical_confidence": round(s.confidence, 6),
            "parser": w.parser if w.program is not None else None,
            "program": w.program.to_json() if w.program is not None else None,
            "answer": answer}


def evaluate_pipeline(items: Sequence[QAItem], graphs: dict[str, TemporalSceneGraph],
                      executor: str = "symbolic") -> tuple[CategoryReport, list[dict[str, Any]]]:
    """Grade every item against the graph of its clip; the report and a per-item log."""
    if not items:
        raise ContractError("cannot evaluate an empty dataset")
    report = CategoryReport()
    log = []
    for i, item in enumerate(items):
        if item.clip not in graphs:
            raise ContractError(f"item {i} refers to unknown clip {item.clip!r}")
        trace = answer_question(item.question, graphs[item.clip], executor)
        g = grade(item.answer, trace["answer"])
        report.add(item.category, g)
        actual = trace.pop("answer")
        log.append({"index": i, "clip": item.clip, "category": item.category, **trace,
                    "expected": item.answer.to_json(),
                    "actual": actual.to_json() if actual is not None else None,
                    "grade": g.value})
    return report, log


def report_document(report: CategoryReport, log: list[dict[str, Any]], settings: dict[str, Any]) -> dict[str, Any]:
    return {"version": REPORT_VERSION, "settings": settings, "categories": report.to_json(), "items": log}


def write_report(doc: dict[str, Any], path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_report(path) -> tuple[CategoryReport, dict[str, Any]]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read report {path}: {exc}") from exc
    if doc.get("version") != REPORT_VERSION:
        raise LoadError(f"{path}: unsupported report version {doc.get('version')!r}")
    return CategoryReport.from_json(doc["categories"]), doc


# ---------------------------------------------------------------- interactive

def ask_repl(graph: TemporalSceneGraph, stdin: TextIO, stdout: TextIO, log_path,
             executor: str = "symbolic", prompt: str = "> ") -> int:
    """Answer questions line by line until EOF; returns the number asked.

    Every exchange is appended to ``log_path`` as one JSON line.
    """
    asked = 0
    with open(log_path, "a", encoding="utf-8") as log:
        while True:
            stdout.write(prompt)
            stdout.flush()
            line = stdin.readline()
            if not line:
                stdout.write("\n")
                break
            question = line.strip()
            if not question:
                continue
            asked += 1
            trace = answer_question(question, graph, executor)
            answer = trace.pop("answer")
            reply = CANT_ANSWER if answer is None else answer_phrase(answer)
            if trace["parser"] is None:
                how = "no parser matched"
            else:
                how = (f"{trace['parser']} parser won (template {trace['template_confidence']:.2f}, "
                       f"statistical {trace['statistical_confidence']:.2f})")
            stdout.write(f"{reply}\n  [{how}]\n")
            log.write(json.dumps({**trace, "reply": reply,
                                  "answer": answer.to_json() if answer is not None else None},
                                 sort_keys=True) + "\n")
            log.flush()
    return asked
