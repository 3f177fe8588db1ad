import pytest
from hypothesis import given, settings, strategies as st

from videoqa.errors import ContractError, GenerationError, LoadError
from videoqa.program import Program, ProgramStep
from videoqa.questlang import (
    STATISTICAL, TEMPLATE, ParseResult, arbitrate, generate_questions, lexicon, parse,
    parse_statistical, parse_template, read_corpus, tokenize, write_corpus,
)
from videoqa.scenegraph import Color, FrameState, ObjectTrack, Relation, Shape, Size, TemporalSceneGraph
from videoqa.scenesim import make_clip
from videoqa.softexec import exec_symbolic


def steps(p):
    return [s.descriptor() for s in p.steps]


def test_how_many_spheres():
    r = parse_template("How many spheres?")
    assert steps(r.program) == [("FilterShape", "Sphere"), ("Count",)]
    assert r.confidence == 1.0 and r.parser == TEMPLATE


def test_color_near_cube():
    r = parse_template("What color is the object near the cube?")
    assert steps(r.program) == [("FilterShape", "Cube"), ("Relate", "Near", 0), ("QueryColor",)]


@pytest.mark.parametrize("text", ["blorp glorp?", "", "   ", "?!"])
def test_template_no_match(text):
    r = parse_template(text)
    assert r.program is None and r.confidence == 0.0


def test_statistical_paraphrase():
    q = "Could you tell me about the environment and how many objects look like a cycle in there."
    assert parse_template(q).program is None
    r = parse_statistical(q)
    assert 0.2 < r.confidence < 1.0
    assert r.program.terminal.op == "Count"
    assert steps(r.program) == [("FilterShape", "Sphere"), ("Count",)]
    assert parse(q)[2] == r


def test_statistical_clean_and_empty():
    assert parse_statistical("How many spheres?").program == parse_template("How many spheres?").program
    r = parse_statistical("")
    assert r.program is None and r.confidence == 0.0


@pytest.mark.parametrize("word,shape", [("triangles", Shape.CONE), ("balls", Shape.SPHERE),
                                        ("circle", Shape.SPHERE), ("blocks", Shape.CUBE),
                                        ("pyramid", Shape.CONE), ("boxes", Shape.CUBE)])
def test_synonyms(word, shape):
    toks, vals = tokenize(f"how many {word}")
    assert toks[-1] == "<shape>" and vals[-1] is shape


def test_relation_phrase_longest_first():
    toks, vals = tokenize("the cube to the left of the sphere")
    assert toks.count("<rel>") == 1 and Relation.LEFT in vals


def _r(conf, parser, prog=True):
    p = Program((ProgramStep("Count"),)) if prog and conf > 0 else None
    return ParseResult(p, conf, parser)


@pytest.mark.parametrize("ca,cb,winner", [(0.9, 0.6, TEMPLATE), (0.0, 0.4, STATISTICAL), (0.7, 0.7, TEMPLATE)])
def test_arbitrate_examples(ca, cb, winner):
    a, b = _r(ca, TEMPLATE), _r(cb, STATISTICAL)
    assert arbitrate(a, b).parser == winner
    assert arbitrate(b, a).parser == winner


def test_arbitrate_both_none():
    assert arbitrate(_r(0, TEMPLATE), _r(0, STATISTICAL)).program is None


def test_parse_result_contract():
    with pytest.raises(ContractError):
        ParseResult(None, 0.5, TEMPLATE)
    with pytest.raises(ContractError):
        ParseResult(Program((ProgramStep("Count"),)), 1.5, TEMPLATE)


conf = st.floats(0, 1)
parsers = st.sampled_from([TEMPLATE, STATISTICAL])


@given(conf, parsers, conf, parsers)
def test_arbitrate_properties(ca, pa, cb, pb):
    a, b = _r(ca, pa), _r(cb, pb)
    w = arbitrate(a, b)
    assert w is a or w is b
    assert w.confidence == max(ca, cb)
    assert arbitrate(a, a) is a
    assert arbitrate(a, b) is arbitrate(a, b)


words = st.sampled_from(["how", "many", "cube", "spheres", "red", "left", "of", "near", "what",
                         "color", "is", "the", "frame", "3", "where", "blorp", "behind", "triangle",
                         "shape", "there", "any", "objects", "in", "front", "to", "right"])


@settings(max_examples=300)
@given(st.one_of(st.text(max_size=40), st.lists(words, max_size=12).map(" ".join)))
def test_fuzz_outputs_are_well_formed(text):
    for r in parse(text):
        assert 0.0 <= r.confidence <= 1.0
        if r.program is None:
            assert r.confidence == 0.0
        else:
            Program(r.program.steps)
            assert r.program.terminal.terminal
            assert not any(s.terminal for s in r.program.steps[:-1])


def test_templates_cover_categories():
    lex = lexicon()
    cats = {t.category for t in lex.templates}
    assert {"Count", "Color", "Shape", "Location"} <= cats
    assert len(lex.templates) >= 15


# ---------------------------------------------------------------- generation

def cube_graph():
    objs = []
    for i, (shape, x) in enumerate([(Shape.CUBE, -2.0), (Shape.CUBE, 0.0), (Shape.CUBE, 2.0),
                                    (Shape.SPHERE, 0.0)]):
        y = 2.0 if shape is Shape.SPHERE else 0.0
        frames = [FrameState((x, y, 0.3), (32 + 8 * x, 32 - 5 * y), (0, 0, 1, 1), True) for _ in range(8)]
        objs.append(ObjectTrack(i, shape, [Color.RED, Color.BLUE, Color.GREEN, Color.GRAY][i], Size.SMALL, frames))
    return TemporalSceneGraph(8, objs)


def test_three_cubes_counted():
    items = generate_questions(cube_graph(), 1, {"Count": 10})
    found = [it for it in items if steps(it.program) == [("FilterShape", "Cube"), ("Count",)]]
    assert found and found[0].answer.value == 3
    assert found[0].question == "How many cubes are there?"
    assert exec_symbolic(parse("How many cubes?")[2].program, cube_graph()).value == 3


def _corpus(n_clips, per):
    items, graphs = [], {}
    for seed in range(n_clips):
        _, truth = make_clip(seed)
        graphs[str(seed)] = truth.graph
        try:
            items += generate_questions(truth.graph, seed, per, clip=str(seed))
        except GenerationError:
            pass
    return items, graphs


@pytest.fixture(scope="module")
def corpus():
    return _corpus(30, {"Count": 3, "Color": 2, "Shape": 2, "Location": 5})


def test_location_frames_distinct(corpus):
    items, graphs = corpus
    for clip in graphs:
        frames = {s.arg for it in items if it.clip == clip and it.category == "Location"
                  for s in it.program.steps if s.op == "AtFrame"}
        if frames:
            assert len(frames) == 5


def test_counts_per_category(corpus):
    items, graphs = corpus
    clips = {it.clip for it in items}
    assert len(clips) >= 25
    for clip in clips:
        cats = [it.category for it in items if it.clip == clip]
        assert cats.count("Count") == 3 and cats.count("Location") == 5


def test_gold_answers_reverified(corpus):
    items, graphs = corpus
    for it in items:
        again = exec_symbolic(Program.from_json(it.program.to_json()), graphs[it.clip])
        assert again == it.answer


def test_parsers_agree_on_corpus(corpus):
    items, _ = corpus
    for it in items:
        t, s, w = parse(it.question)
        assert t.program == it.program, it.question
        assert s.program == it.program, it.question
        assert w.program == it.program


def test_questions_unique_per_clip(corpus):
    items, _ = corpus
    keys = [(it.clip, it.question) for it in items]
    assert len(keys) == len(set(keys))


def test_generation_deterministic():
    g = cube_graph()
    a = generate_questions(g, 5, 2)
    b = generate_questions(g, 5, 2)
    assert [x.to_json() for x in a] == [x.to_json() for x in b]


def test_generation_failure_names_category():
    g = TemporalSceneGraph(8, [cube_graph().objects[0]])
    with pytest.raises(GenerationError, match="Shape|Color|Count|Location"):
        generate_questions(g, 1, 5)


def test_corpus_round_trip(tmp_path, corpus):
    items, _ = corpus
    path = tmp_path / "qa.jsonl"
    write_corpus(items[:50], path)
    assert read_corpus(path) == items[:50]
    assert len(path.read_text().splitlines()) == 50


def test_corpus_errors(tmp_path):
    with pytest.raises(LoadError):
        read_corpus(tmp_path / "missing.jsonl")
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json}\n")
    with pytest.raises(LoadError):
        read_corpus(bad)
