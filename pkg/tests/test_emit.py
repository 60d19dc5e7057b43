import json

import pytest
from hypothesis import HealthCheck, given, settings

from racefix.emit import (
    CHANGES_RECOMMENDED, REPAIRED, SAFE_NO_CHANGES, Edit, add_ordered_clause, apply_edits, emit_summary,
    finalize, unsupported_summary, write_summary,
)
from racefix.engine import Outcome, Strategy, repair
from racefix.frontend import SourceLoc, parse
from racefix.instrument import instrument

from _support import corpus_path, corpus_programs, load, program_sources

SLOW = dict(deadline=None, suppress_health_check=list(HealthCheck))


def result(stem, strategy=Strategy.MHS):
    return finalize(repair(load(stem), strategy))


def test_race_inserts_one_barrier_before_the_write():
    r = result("race")
    assert [str(e) for e in r.edits] == ["InsertBarrier at line 6"]
    assert r.category == REPAIRED
    lines = r.program_text.splitlines()
    assert lines[4:7] == ["", "    barrier;", "    data[tid] = temp;"]


def test_race_for_wraps_both_accesses():
    r = result("race_for")
    assert [str(e) for e in r.edits] == ["AddOrderedClause at line 2", "WrapOrdered lines 4-6"]
    assert r.program_text == (
        "shared int data[5];\n"
        "parallel_for(4) ordered {\n"
        "    compute;\n"
        "    ordered {\n"
        "    temp = data[i + 1];\n"
        "\n"
        "    data[i] = temp;\n"
        "    }\n"
        "}\n"
    )


def test_redundant_ordered_region_is_removed():
    r = result("redundant_ordered")
    assert r.edits == [Edit("RemoveOrderedRegion", SourceLoc(4, 5), SourceLoc(6, 5))]
    assert r.category == CHANGES_RECOMMENDED
    assert "\n    ordered {\n" not in r.program_text
    # the loop keeps its clause; only the region goes
    assert "parallel_for(4) ordered {" in r.program_text


def test_two_barriers_drop_only_the_redundant_one():
    r = result("two_barriers")
    assert [str(e) for e in r.edits] == ["RemoveBarrier at line 9"]
    assert r.program_text.count("barrier;") == 1


def test_unchanged_programs_are_byte_identical():
    for stem in ("racefree", "race_with_barrier", "needed_ordered", "compute_only"):
        r = result(stem)
        assert r.category == SAFE_NO_CHANGES and r.edits == []
        assert r.program_text == corpus_path(stem).read_text()


def test_crlf_is_preserved_in_inserted_lines():
    source = corpus_path("race").read_text().replace("\n", "\r\n")
    r = finalize(repair(instrument(parse(source))))
    assert r.program_text == result("race").program_text.replace("\n", "\r\n")


def test_add_ordered_clause_keeps_trailing_comment():
    assert add_ordered_clause("parallel_for(4) { // loop\n") == "parallel_for(4) ordered { // loop\n"
    assert add_ordered_clause("parallel_for(4){\r\n") == "parallel_for(4) ordered {\r\n"


def test_edit_json_round_trip():
    for e in (Edit("InsertBarrier", SourceLoc(3, 5)), Edit("WrapOrdered", SourceLoc(4, 5), SourceLoc(9, 5))):
        assert Edit.from_json(json.loads(json.dumps(e.to_json()))) == e


def test_apply_edits_rejects_unknown_actions():
    with pytest.raises(ValueError):
        apply_edits("x\n", [Edit("Rewrite", SourceLoc(1))])


def test_repaired_summary():
    doc = emit_summary(repair(load("algo_barrier")))
    assert doc["programName"] == "algo_barrier"
    assert doc["status"] == "repaired" and doc["category"] == REPAIRED
    assert doc["clauses"] == [["b2", "b3"], ["b3", "b4"]]
    assert doc["enabled"] == ["b3"] and doc["enabledCount"] == 1
    assert doc["optimal"] is True and doc["iterations"] == 3
    assert doc["edits"] == [{"action": "InsertBarrier", "loc": {"line": 6, "col": 5}}]
    assert [v["line"] for v in doc["variables"]] == [4, 5, 6, 7]


def test_failure_summary_has_reason_and_no_edits():
    doc = emit_summary(repair(load("race_sameline")))
    assert doc["status"] == "cannot_repair" and doc["category"] == "CANNOT-REPAIR"
    assert doc["edits"] == [] and doc["reason"] == "write-write same line"
    assert doc["clauses"] == [[]]
    assert "enabled" not in doc


def test_unsupported_summary():
    doc = unsupported_summary("task", "3:5: unsupported construct 'task'", "mhs")
    assert doc["status"] == "unsupported" and doc["edits"] == []


def test_write_summary_reports_the_path(tmp_path):
    write_summary({"a": 1}, tmp_path / "ok.json")
    assert json.loads((tmp_path / "ok.json").read_text()) == {"a": 1}
    with pytest.raises(OSError, match="missing"):
        write_summary({}, tmp_path / "missing" / "x.json")


@pytest.mark.parametrize("strategy", list(Strategy))
def test_corpus_round_trips(strategy):
    for stem, program in corpus_programs().items():
        out = repair(instrument(program), strategy)
        if out.status is not Outcome.REPAIRED:
            continue
        r = finalize(out)
        assert apply_edits(program.source, r.edits) == r.program_text, stem
        again = parse(r.program_text, program.name)
        assert [len(x.body) for x in again.regions] == [len(x.body) for x in r.candidate.program.regions]
        assert again == r.candidate.program, stem


@settings(max_examples=200, **SLOW)
@given(program_sources())
def test_applying_summary_edits_reproduces_emitted_text(source):
    for text in (source, source.replace("\n", "\r\n")):
        out = repair(instrument(parse(text)))
        if out.status is not Outcome.REPAIRED:
            return
        r = finalize(out)
        assert apply_edits(text, r.edits) == r.program_text
        assert parse(r.program_text) == r.candidate.program
        if not r.edits:
            assert r.program_text == text
