"""Question parsing, parser arbitration and ground-truthed question generation.

Text is normalised to lower-case word tokens; plural nouns from the
vocabulary are singularised; shape, colour, relation and number phrases
(longest phrase first, from ``resources/synonyms.json``) become slot tokens
``<shape>``, ``<color>``, ``<rel>`` and ``<num>`` that remember their value.

The template parser searches each template pattern of
``resources/templates.json`` in the slotted token string and keeps the match
covering the most tokens; confidence is the covered fraction, and matches
covering less than half the question are discarded. The statistical parser
ignores word order: among templates whose slot counts equal the question's,
it picks the one whose keyword set (non-stopword tokens of the template
text) has the highest binary cosine similarity with the question's keyword
set. Both parsers fill slots in order of appearance, so on template text
they agree.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import AmbiguousReferentError, ContractError, GenerationError, LoadError, RelationUndefinedError
from .program import Answer, Program, ProgramStep
from .rng import SplitMix64
from .scenegraph import (
    COLORS, NEAR_TAU, RELATIONS, SHAPES, Color, Relation, Shape, TemporalSceneGraph, relation_value,
    spatial_relation,
)
from .softexec import exec_symbolic, trace_symbolic

TEMPLATE = "Template"
STATISTICAL = "Statistical"
CATEGORIES = ("Count", "Color", "Shape", "Location")
MIN_TEMPLATE_COVERAGE = 0.5
MIN_SIMILARITY = 0.2
MAX_ATTEMPTS = 1000
LOCATION_FRAMES = 5
NEAR_MARGIN = 0.1        # fraction of the Near threshold
ORDER_MARGIN = 0.1       # world units
SLOT_TYPES = ("shape", "color", "rel", "num")


def _load(name: str) -> dict[str, Any]:
    return json.loads(resources.files("videoqa").joinpath("resources").joinpath(name).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Template:
    id: str
    category: str
    text: str
    pattern: re.Pattern
    steps: tuple
    keywords: frozenset
    slots: tuple              # slot counts in SLOT_TYPES order
    roles: tuple = ()         # (slot name, role) pairs used by the generator


@dataclass(frozen=True)
class Lexicon:
    shapes: dict
    colors: dict
    relations: dict
    nouns: dict
    numbers: dict
    surface: dict
    stopwords: frozenset
    templates: tuple


@lru_cache(maxsize=1)
def lexicon() -> Lexicon:
    syn = _load("synonyms.json")
    tpl = _load("templates.json")
    lex = Lexicon(syn["shapes"], syn["colors"], syn["relations"], syn["nouns"], syn["numbers"],
                  syn["surface"], frozenset(syn["stopwords"]), ())
    templates = []
    for t in tpl["templates"]:
        keyword_text = re.sub(r"\{(shape|color|rel|num)\d\}s?", lambda m: f" SLOT{m.group(1)} ", t["text"])
        toks = [f"<{w[4:]}>" if w.startswith("SLOT") else w for w in re.findall(r"SLOT\w+|[A-Za-z]+|\d+", keyword_text)]
        toks = [_singular(w.lower(), lex) if not w.startswith("<") else w for w in toks]
        kw = frozenset(w for w in toks if w not in lex.stopwords)
        slots = tuple(toks.count(f"<{s}>") for s in SLOT_TYPES)
        pat = re.compile(r"(?:^| )(" + t["pattern"] + r")(?= |$)")
        templates.append(Template(t["id"], t["category"], t["text"], pat,
                                  tuple(tuple(s) for s in t["steps"]), kw, slots,
                                  tuple(sorted(t.get("roles", {}).items()))))
    return Lexicon(**{**lex.__dict__, "templates": tuple(templates)})


def _singular(word: str, lex: Lexicon) -> str:
    vocab = lex.shapes.keys() | lex.colors.keys() | lex.nouns.keys()
    if word in vocab:
        return word
    if word.endswith("es") and word[:-2] in vocab:
        return word[:-2]
    if word.endswith("s") and word[:-1] in vocab:
        return word[:-1]
    return word


def tokenize(text: str) -> tuple[list[str], list[Any]]:
    """Slotted tokens plus the value behind each slot token (None for words)."""
    lex = lexicon()
    words = [_singular(w, lex) for w in re.findall(r"[a-z]+|\d+", text.lower())]
    words = [lex.nouns.get(w, w) for w in words]
    phrases = sorted(lex.relations, key=lambda p: -len(p.split()))
    toks, vals = [], []
    i = 0
    while i < len(words):
        for p in phrases:
            n = len(p.split())
            if words[i:i + n] == p.split():
                toks.append("<rel>")
                vals.append(Relation(lex.relations[p]))
                i += n
                break
        else:
            w = words[i]
            if w in lex.shapes:
                toks.append("<shape>"); vals.append(Shape(lex.shapes[w]))
            elif w in lex.colors:
                toks.append("<color>"); vals.append(Color(lex.colors[w]))
            elif w.isdigit():
                toks.append("<num>"); vals.append(int(w))
            elif w in lex.numbers:
                toks.append("<num>"); vals.append(lex.numbers[w])
            else:
                toks.append(w); vals.append(None)
            i += 1
    return toks, vals


@dataclass(frozen=True)
class ParseResult:
    program: Program | None
    confidence: float
    parser: str
    template: str | None = None

    def __post_init__(self):
        if self.program is None and self.confidence != 0:
            raise ContractError("a failed parse must have zero confidence")
        if not 0.0 <= self.confidence <= 1.0:
            raise ContractError(f"confidence {self.confidence} outside [0, 1]")


def _instantiate(t: Template, slot_values: Sequence[tuple[str, Any]]) -> Program | None:
    by_type: dict[str, list] = {s: [] for s in SLOT_TYPES}
    for kind, v in slot_values:
        by_type[kind].append(v)
    steps = []
    for spec in t.steps:
        op, rest = spec[0], spec[1:]
        arg = ref = None
        if rest:
            name = rest[0]
            kind, idx = name[:-1], int(name[-1])
            if idx >= len(by_type[kind]):
                return None
            arg = by_type[kind][idx]
            if len(rest) > 1:
                ref = rest[1]
        steps.append(ProgramStep(op, arg, ref))
    try:
        return Program(tuple(steps))
    except ContractError:
        return None


def _slots_of(toks, vals) -> list[tuple[str, Any]]:
    return [(t[1:-1], v) for t, v in zip(toks, vals) if t.startswith("<") and t[1:-1] in SLOT_TYPES]


def parse_template(question: str) -> ParseResult:
    toks, vals = tokenize(question)
    if not toks:
        return ParseResult(None, 0.0, TEMPLATE)
    line = " ".join(toks)
    best = None
    for t in lexicon().templates:
        m = t.pattern.search(line)
        if not m:
            continue
        start = line[:m.start(1)].count(" ") if m.start(1) else 0
        n = len(m.group(1).split(" "))
        if best is None or n > best[0]:
            best = (n, start, t)
    if best is None or best[0] / len(toks) < MIN_TEMPLATE_COVERAGE:
        return ParseResult(None, 0.0, TEMPLATE)
    n, start, t = best
    prog = _instantiate(t, _slots_of(toks[start:start + n], vals[start:start + n]))
    if prog is None:
        return ParseResult(None, 0.0, TEMPLATE)
    return ParseResult(prog, n / len(toks), TEMPLATE, t.id)


def cosine(a: Iterable[str], b: Iterable[str]) -> float:
    a, b = set(a), set(b)
    if not a or not b:
        return 0.0
    return len(a & b) / math.sqrt(len(a) * len(b))


def parse_statistical(question: str) -> ParseResult:
    toks, vals = tokenize(question)
    lex = lexicon()
    slots = _slots_of(toks, vals)
    counts = tuple(sum(1 for k, _ in slots if k == s) for s in SLOT_TYPES)
    words = [w for w in toks if w not in lex.stopwords]
    best_t, best_s = None, 0.0
    for t in lex.templates:
        if t.slots != counts:
            continue
        s = cosine(words, t.keywords)
        if s > best_s:
            best_t, best_s = t, s
    if best_t is None or best_s < MIN_SIMILARITY:
        return ParseResult(None, 0.0, STATISTICAL)
    prog = _instantiate(best_t, slots)
    if prog is None:
        return ParseResult(None, 0.0, STATISTICAL)
    return ParseResult(prog, min(best_s, 1.0), STATISTICAL, best_t.id)


def arbitrate(a: ParseResult, b: ParseResult) -> ParseResult:
    """Higher confidence wins; on a tie the Template parser's result wins."""
    if a.confidence != b.confidence:
        return a if a.confidence > b.confidence else b
    if a.parser == b.parser:
        return a
    return a if a.parser == TEMPLATE else b


def parse(question: str) -> tuple[ParseResult, ParseResult, ParseResult]:
    """Both parses and the arbitrated winner."""
    t, s = parse_template(question), parse_statistical(question)
    return t, s, arbitrate(t, s)


# ---------------------------------------------------------------- QA items

@dataclass(frozen=True)
class QAItem:
    question: str
    program: Program
    answer: Answer
    category: str
    template: str
    clip: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {"question": self.question, "program": self.program.to_json(),
                "answer": self.answer.to_json(), "category": self.category,
                "template": self.template, "clip": self.clip}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "QAItem":
        return cls(d["question"], Program.from_json(d["program"]), Answer.from_json(d["answer"]),
                   d["category"], d["template"], d.get("clip"))


def write_corpus(items: Sequence[QAItem], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for it in items:
            fh.write(json.dumps(it.to_json(), sort_keys=True) + "\n")


def read_corpus(path) -> list[QAItem]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise LoadError(f"cannot read corpus {path}: {exc}") from exc
    try:
        return [QAItem.from_json(json.loads(line)) for line in lines if line.strip()]
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise LoadError(f"{path}: malformed corpus line: {exc}") from exc


# ---------------------------------------------------------------- generation

def _surface(value) -> str:
    lex = lexicon()
    return lex.surface.get(value.value, value.value.lower())


def render_question(t: Template, fills: dict[str, Any]) -> str:
    return t.text.format(**{k: (str(v) if isinstance(v, int) else _surface(v)) for k, v in fills.items()})


def _program_for(t: Template, fills: dict[str, Any]) -> Program:
    steps = []
    for spec in t.steps:
        op, rest = spec[0], spec[1:]
        steps.append(ProgramStep(op, fills[rest[0]] if rest else None, rest[1] if len(rest) > 1 else None))
    return Program(tuple(steps))


def relations_unambiguous(program: Program, graph: TemporalSceneGraph) -> bool:
    """True when every Relate has one visible anchor and no object sits near a decision boundary."""
    try:
        trace = trace_symbolic(program, graph)
    except RelationUndefinedError:
        return False
    thr = NEAR_TAU * graph.world_width
    for i, step in enumerate(program.steps[:-1]):
        if step.op != "Relate":
            continue
        anchors, frame = trace[step.ref][0], trace[i][1]
        if len(anchors) != 1:
            return False
        (a,) = anchors
        for o in range(graph.n):
            if o == a or not graph.visible(o, frame):
                continue
            m = relation_value(graph, o, a, frame, step.arg)
            if abs(m) < (NEAR_MARGIN * thr if step.arg is Relation.NEAR else ORDER_MARGIN):
                return False
    return True


def _fills(t: Template, graph: TemporalSceneGraph, rng: SplitMix64, frame: int) -> dict[str, Any]:
    """Slot values taken from a target object and an anchor object of the scene.

    The relation slot is usually one that holds between target and anchor
    at the question's frame, so relational questions tend to have answers.
    """
    target = graph.objects[rng.randbelow(graph.n)]
    others = [o for o in graph.objects if o.id != target.id] or [target]
    anchor = rng.choice(others)
    rel_frame = frame if any(r == "frame" for _, r in t.roles) else 0
    holding = [r for r in RELATIONS
               if graph.visible(target.id, rel_frame) and graph.visible(anchor.id, rel_frame)
               and target.id != anchor.id and spatial_relation(graph, target.id, anchor.id, rel_frame, r)]
    fills: dict[str, Any] = {}
    for name, role in t.roles:
        if role == "frame":
            fills[name] = frame
        elif role == "relation":
            fills[name] = rng.choice(holding) if holding and rng.random() < 0.75 else rng.choice(RELATIONS)
        else:
            who, attr = role.split(".")
            fills[name] = getattr(target if who == "target" else anchor, attr)
    return fills


def generate_questions(graph: TemporalSceneGraph, seed: int, n_per_category: int | dict[str, int],
                       categories: Sequence[str] = CATEGORIES, clip: str | None = None) -> list[QAItem]:
    """Unambiguous items per category with executor-made gold answers.

    ``n_per_category`` is a count for every category or a per-category dict.

    Location items cycle through ``LOCATION_FRAMES`` distinct frames drawn
    once per graph; Count items with a frame draw it uniformly.
    """
    if graph.n == 0:
        raise GenerationError("cannot ask questions about an empty scene")
    rng = SplitMix64(seed)
    lex = lexicon()
    frame_rng = rng.child("frames")
    loc_frames = frame_rng.sample(range(graph.F), min(LOCATION_FRAMES, graph.F))
    seen: set[str] = set()
    items: list[QAItem] = []
    counts = n_per_category if isinstance(n_per_category, dict) else {c: n_per_category for c in categories}
    for cat in categories:
        wanted = counts.get(cat, 0)
        templates = [t for t in lex.templates if t.category == cat and (cat != "Location" or "{num0}" in t.text)]
        if not templates:
            raise GenerationError(f"no templates for category {cat}")
        crng = rng.child(cat)
        made, attempts = 0, 0
        while made < wanted:
            attempts += 1
            if attempts > MAX_ATTEMPTS:
                raise GenerationError(f"could not fill category {cat} after {MAX_ATTEMPTS} attempts")
            t = crng.choice(templates)
            frame = loc_frames[made % len(loc_frames)] if cat == "Location" else crng.randbelow(graph.F)
            fills = _fills(t, graph, crng, frame)
            text = render_question(t, fills)
            if text in seen:
                continue
            program = _program_for(t, fills)
            if not relations_unambiguous(program, graph):
                continue
            try:
                answer = exec_symbolic(program, graph)
            except (AmbiguousReferentError, RelationUndefinedError):
                continue
            seen.add(text)
            items.append(QAItem(text, program, answer, cat, t.id, clip))
            made += 1
    return items
