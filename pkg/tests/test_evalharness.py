import io
import json

import pytest
from hypothesis import given, strategies as st

from videoqa.errors import ContractError, LoadError
from videoqa.evalharness import (
    CANT_ANSWER, TABLE_HEADER, CategoryReport, Grade, accuracy, answer_phrase, answer_question, ask_repl,
    evaluate_pipeline, grade, parse_answer_phrase, read_report, render_table, report_document, write_report,
)
from videoqa.program import Answer
from videoqa.questlang import QAItem, generate_questions
from videoqa.scenegraph import Color, FrameState, ObjectTrack, Shape, Size, TemporalSceneGraph
from videoqa.scenesim import make_clip


@pytest.mark.parametrize("right,total,expected", [(3, 4, 0.75), (0, 10, 0.0), (5, 5, 1.0)])
def test_accuracy_examples(right, total, expected):
    assert accuracy(right, total) == expected


def test_accuracy_undefined_and_errors():
    assert accuracy(0, 0) is None
    with pytest.raises(ContractError):
        accuracy(6, 5)
    with pytest.raises(ContractError):
        accuracy(-1, 5)


def test_grade_wrong_count_and_invalid_subject():
    assert grade(parse_answer_phrase("four cubes."), parse_answer_phrase("one cube")) is Grade.WRONG
    assert grade(parse_answer_phrase("one sphere."), parse_answer_phrase("one triangle.")) is Grade.INVALID
    assert grade(parse_answer_phrase("two red balls"), parse_answer_phrase("2 red spheres")) is Grade.CORRECT


def test_grade_location_tolerance():
    exp = Answer("location", (3, (10.0, 20.0)))
    assert grade(exp, Answer("location", (3, (11.9, 18.1)))) is Grade.CORRECT
    assert grade(exp, Answer("location", (3, (12.5, 20.0)))) is Grade.WRONG
    assert grade(exp, Answer("location", (4, (10.0, 20.0)))) is Grade.WRONG


def test_grade_missing_answer_invalid():
    assert grade(Answer("count", 3), None) is Grade.INVALID
    assert grade(Answer("count", 3), Answer("shape", Shape.CUBE)) is Grade.INVALID


answers = st.one_of(
    st.builds(Answer, st.just("count"), st.integers(0, 5), st.sampled_from([(), (("FilterShape", "Cube"),)])),
    st.builds(Answer, st.just("bool"), st.booleans()),
    st.builds(Answer, st.just("color"), st.sampled_from(list(Color))),
    st.builds(Answer, st.just("shape"), st.sampled_from(list(Shape))),
    st.builds(Answer, st.just("location"), st.tuples(st.integers(0, 3), st.tuples(st.floats(0, 64), st.floats(0, 64)))),
)


@given(answers, st.one_of(st.none(), answers))
def test_grade_is_total_and_reflexive(a, b):
    assert grade(a, b) in set(Grade)
    assert grade(a, a) is Grade.CORRECT


@pytest.mark.parametrize("phrase,kind,value", [("four cubes", "count", 4), ("red", "color", Color.RED),
                                               ("a ball", "shape", Shape.SPHERE), ("yes", "bool", True),
                                               ("12 objects", "count", 12)])
def test_parse_answer_phrase(phrase, kind, value):
    a = parse_answer_phrase(phrase)
    assert (a.kind, a.value) == (kind, value)


@pytest.mark.parametrize("phrase", ["", "blorp", "red cube", "two three"])
def test_parse_answer_phrase_none(phrase):
    assert parse_answer_phrase(phrase) is None


@given(st.integers(0, 12), st.sampled_from([(), (("FilterShape", "Cube"),), (("FilterColor", "Red"),),
                                            (("FilterColor", "Blue"), ("FilterShape", "Cone"))]))
def test_answer_phrase_round_trip(n, subject):
    a = Answer("count", n, subject)
    assert parse_answer_phrase(answer_phrase(a)) == a


def test_answer_phrase_reads_naturally():
    assert answer_phrase(Answer("count", 4, (("FilterShape", "Cube"),))) == "four cubes"
    assert answer_phrase(Answer("count", 1, (("FilterShape", "Sphere"),))) == "one sphere"


# ---------------------------------------------------------------- pipeline

@pytest.fixture(scope="module")
def corpus():
    items, graphs = [], {}
    for seed in range(6):
        _, truth = make_clip(seed)
        graphs[str(seed)] = truth.graph
        items += generate_questions(truth.graph, seed, {"Count": 2, "Color": 1, "Shape": 1, "Location": 5},
                                    clip=str(seed))
    return items, graphs


@pytest.mark.parametrize("executor", ["symbolic", "soft"])
def test_ground_truth_fixed_point(corpus, executor):
    items, graphs = corpus
    report, log = evaluate_pipeline(items, graphs, executor)
    for cat in ("Count", "Color", "Shape", "Location"):
        assert report.accuracy(cat) == 1.0
    assert len(log) == len(items)


def test_domain_mismatch_all_invalid(corpus):
    items, graphs = corpus
    swapped = [QAItem(it.question, it.program, Answer("shape" if it.answer.kind != "shape" else "color",
                                                      Shape.CUBE if it.answer.kind != "shape" else Color.RED),
                      it.category, it.template, it.clip) for it in items]
    report, _ = evaluate_pipeline(swapped, graphs)
    for cat, row in report.grades.items():
        assert row["Correct"] == 0 and row["Invalid"] == report.total(cat)


def test_grades_partition_and_log_consistent(corpus):
    items, graphs = corpus
    noisy = [QAItem(it.question if i % 3 else "blorp glorp", it.program, it.answer, it.category, it.template, it.clip)
             for i, it in enumerate(items)]
    report, log = evaluate_pipeline(noisy, graphs)
    total = sum(report.total(c) for c in report.grades)
    assert total == len(items)
    for cat, row in report.grades.items():
        assert sum(row.values()) == sum(1 for it in items if it.category == cat)
    assert CategoryReport.from_log(log).to_json() == report.to_json()


def test_report_deterministic(corpus, tmp_path):
    items, graphs = corpus
    paths = []
    for k in range(2):
        report, log = evaluate_pipeline(items, graphs)
        p = tmp_path / f"r{k}.json"
        write_report(report_document(report, log, {"executor": "symbolic"}), p)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    again, doc = read_report(paths[0])
    assert again.to_json() == report.to_json()


def test_report_errors(tmp_path, corpus):
    with pytest.raises(LoadError):
        read_report(tmp_path / "none.json")
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"version": 99}))
    with pytest.raises(LoadError):
        read_report(p)
    with pytest.raises(ContractError):
        evaluate_pipeline([], {})
    with pytest.raises(ContractError):
        answer_question("How many cubes?", corpus[1]["0"], executor="magic")


def test_table_layout():
    rep = CategoryReport()
    rep.add("Count", Grade.CORRECT)
    rep.add("Count", Grade.WRONG)
    lines = render_table(rep).splitlines()
    assert lines[0] == "\t".join(TABLE_HEADER) == "Method\tCount%\tcolor %\tshape %\tlocation %"
    assert all("published, not reproduced" in line for line in lines[1:-1])
    assert lines[-1].split("\t")[1:] == ["50.00", "n/a", "n/a", "n/a"]
    assert any(line.startswith("R(2+1)D") and "80.42" in line for line in lines)


# ---------------------------------------------------------------- ask loop

def two_sphere_graph():
    objs = []
    for i, (shape, x) in enumerate([(Shape.SPHERE, -2.0), (Shape.SPHERE, 2.0), (Shape.CUBE, 0.0)]):
        frames = [FrameState((x, 0.0, 0.3), (32 + 8 * x, 30.0), (0, 0, 1, 1), True) for _ in range(3)]
        objs.append(ObjectTrack(i, shape, Color.RED, Size.SMALL, frames))
    return TemporalSceneGraph(3, objs)


def test_ask_repl_session(tmp_path):
    log = tmp_path / "session.jsonl"
    out = io.StringIO()
    n = ask_repl(two_sphere_graph(), io.StringIO("How many spheres?\nblorp\n\nWhat color is the cube?\n"), out, log)
    text = out.getvalue()
    assert n == 3
    assert "two spheres" in text and CANT_ANSWER in text and "Red" in text
    assert "Template parser won" in text
    lines = [json.loads(line) for line in log.read_text().splitlines()]
    assert [e["question"] for e in lines] == ["How many spheres?", "blorp", "What color is the cube?"]
    assert lines[0]["answer"]["value"] == 2 and lines[1]["answer"] is None


def test_ask_repl_appends(tmp_path):
    log = tmp_path / "session.jsonl"
    for _ in range(2):
        ask_repl(two_sphere_graph(), io.StringIO("How many spheres?"), io.StringIO(), log)
    assert len(log.read_text().splitlines()) == 2
