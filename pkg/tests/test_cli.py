import csv
import io
import json
import shutil
import subprocess
import sys
import time

import pytest

from racefix import cli

from _support import CORPUS, MANIFEST, corpus_path


def run_main(capsys, *argv):
    status = cli.main([str(a) for a in argv])
    return status, capsys.readouterr()


def copy(tmp_path, *stems):
    for stem in stems:
        shutil.copy(corpus_path(stem), tmp_path / f"{stem}.mmp")
    return tmp_path


def test_repaired_file_writes_artifacts(tmp_path, capsys):
    copy(tmp_path, "race")
    status, out = run_main(capsys, tmp_path / "race.mmp")
    assert status == 0
    assert out.out.strip() == f"{tmp_path / 'race.mmp'}: REPAIRED 1 edit"
    doc = json.loads((tmp_path / "race.llor.json").read_text())
    assert doc["category"] == "REPAIRED"
    assert "barrier;" in (tmp_path / "race.repaired.mmp").read_text()


def test_output_dir_and_dump_clauses(tmp_path, capsys):
    out_dir = tmp_path / "out"
    status, _ = run_main(capsys, corpus_path("algo_barrier"), "--output-dir", out_dir, "--dump-clauses")
    assert status == 0
    assert (out_dir / "algo_barrier.clauses.cnf").read_text() == "p cnf 4 2\n2 3 0\n3 4 0\n"
    assert (out_dir / "algo_barrier.llor.json").exists()


def test_no_write_only_prints(tmp_path, capsys):
    copy(tmp_path, "redundant_barrier")
    status, out = run_main(capsys, tmp_path, "--no-write", "-v")
    assert status == 0
    assert "CHANGES-RECOMMENDED 1 removal" in out.out
    assert "RemoveBarrier at line 5" in out.out
    assert sorted(p.name for p in tmp_path.iterdir()) == ["redundant_barrier.mmp"]


@pytest.mark.parametrize("stem, verdict", [
    ("race_sameline", "CANNOT-REPAIR (write-write same line)"),
    ("task", "UNSUPPORTED (3:5: unsupported construct 'task')"),
    ("racefree", "SAFE-no-changes"),
])
def test_verdict_lines(tmp_path, capsys, stem, verdict):
    status, out = run_main(capsys, corpus_path(stem), "--output-dir", tmp_path)
    assert out.out.strip().endswith(": " + verdict)
    assert status == (0 if verdict.startswith("SAFE") else 1)


def test_unsupported_still_writes_a_summary(tmp_path, capsys):
    run_main(capsys, corpus_path("sections"), "--output-dir", tmp_path)
    doc = json.loads((tmp_path / "sections.llor.json").read_text())
    assert doc["status"] == "unsupported" and doc["edits"] == []
    assert not (tmp_path / "sections.repaired.mmp").exists()


def test_usage_and_input_errors_exit_2(tmp_path, capsys):
    assert run_main(capsys, tmp_path / "nope.mmp")[0] == 2
    assert run_main(capsys, corpus_path("race"), "--timeout", "0")[0] == 2
    bad = tmp_path / "bad.mmp"
    bad.write_text("shared int a[2];\nparallel(2) {\n    x = b[tid];\n}\n")
    status, out = run_main(capsys, bad, "--no-write")
    assert status == 2
    assert "ERROR (syntax error at 3:5: undeclared array 'b')" in out.out
    with pytest.raises(SystemExit) as info:
        cli.main(["--solver", "z3", str(bad)])
    assert info.value.code == 2


def test_run_config_invariants():
    with pytest.raises(ValueError):
        cli.RunConfig(inputs=[])
    with pytest.raises(ValueError):
        cli.RunConfig(inputs=[CORPUS], timeout_secs=-1)


def test_report_counts(tmp_path, capsys):
    copy(tmp_path, "race", "race_sameline", "racefree", "two_barriers", "simd_loop")
    report = tmp_path / "report.json"
    status, _ = run_main(capsys, tmp_path, "--no-write", "--report", report)
    assert status == 1
    doc = json.loads(report.read_text())
    assert doc["counts"] == {
        "SAFE-no-changes": 1, "CHANGES-RECOMMENDED": 1, "REPAIRED": 1,
        "CANNOT-REPAIR": 1, "UNSUPPORTED": 1, "TIMEOUT": 0,
    }
    assert len(doc["files"]) == 5


def test_jobs_give_the_same_verdicts(tmp_path, capsys):
    copy(tmp_path, "race", "race_for", "stencil", "task")
    _, serial = run_main(capsys, tmp_path, "--no-write")
    _, parallel = run_main(capsys, tmp_path, "--no-write", "--jobs", "2")
    assert serial.out == parallel.out


def test_compare_solvers_csv(tmp_path, capsys):
    copy(tmp_path, "algo_barrier", "race", "race_sameline")
    status, out = run_main(capsys, tmp_path, "--compare-solvers", "--no-write")
    assert status == 0
    rows = list(csv.DictReader(io.StringIO(out.out)))
    assert [r["input"].rsplit("/", 1)[-1] for r in rows] == ["algo_barrier.mmp", "race.mmp"]
    assert rows[0]["mhs_iters"] == rows[0]["maxsat_iters"] == "3"
    assert rows[0]["mhs_enabled"] == rows[0]["maxsat_enabled"] == "1"
    assert float(rows[0]["mhs_ms"]) >= 0


def test_compare_solvers_on_empty_corpus_prints_header(tmp_path, capsys):
    status, out = run_main(capsys, tmp_path, "--compare-solvers")
    assert status == 0
    assert out.out == ",".join(cli.CSV_COLUMNS) + "\n"


def test_compare_solvers_report_path(tmp_path, capsys):
    target = tmp_path / "cmp.csv"
    run_main(capsys, corpus_path("race"), "--compare-solvers", "--report", target)
    assert target.read_text().startswith("input,mhs_ms")


@pytest.mark.parametrize("solver", ["mhs", "maxsat"])
def test_timeout_is_enforced_within_slack(solver):
    budget = 1.0
    started = time.monotonic()
    res = cli.repair_file(corpus_path("bomb"), solver, budget)
    elapsed = time.monotonic() - started
    assert res.category == "TIMEOUT"
    assert elapsed <= budget * 1.1


def test_golden_corpus_counts(tmp_path, capsys):
    report = tmp_path / "report.json"
    status, _ = run_main(capsys, CORPUS, "--no-write", "--timeout", MANIFEST["timeout_secs"], "--report", report)
    doc = json.loads(report.read_text())
    assert doc["counts"] == MANIFEST["counts"]
    got = {f["input"].rsplit("/", 1)[-1]: f["category"] for f in doc["files"]}
    assert got == MANIFEST["files"]
    assert status == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "racefix", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--compare-solvers" in proc.stdout


def _corpus_without_stress(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    for path in CORPUS.glob("*.mmp"):
        if path.name not in MANIFEST["stress"]:
            shutil.copy(path, src / path.name)
    return src


def test_compare_rows_never_favour_mhs(tmp_path, capsys):
    status, out = run_main(capsys, _corpus_without_stress(tmp_path), "--compare-solvers")
    rows = list(csv.DictReader(io.StringIO(out.out)))
    assert len(rows) == sum(v in ("REPAIRED", "SAFE-no-changes", "CHANGES-RECOMMENDED") for v in MANIFEST["files"].values())
    assert all(int(r["maxsat_enabled"]) <= int(r["mhs_enabled"]) for r in rows)


def test_outputs_are_deterministic(tmp_path, capsys):
    src = _corpus_without_stress(tmp_path)
    for name in ("a", "b"):
        run_main(capsys, src, "--output-dir", tmp_path / name, "--dump-clauses")
    first = sorted((tmp_path / "a").iterdir())
    assert first
    for path in first:
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes(), path.name


def test_strategies_agree_on_worked_example(tmp_path, capsys):
    for solver in ("mhs", "maxsat"):
        run_main(capsys, corpus_path("algo_barrier"), "--solver", solver, "--output-dir", tmp_path / solver)
    docs = [json.loads((tmp_path / s / "algo_barrier.llor.json").read_text()) for s in ("mhs", "maxsat")]
    assert docs[0]["edits"] == docs[1]["edits"]
    assert docs[0]["enabled"] == docs[1]["enabled"] == ["b3"]


def test_race_free_input_gets_zero_edit_summary(tmp_path, capsys):
    status, out = run_main(capsys, corpus_path("racefree"), "--output-dir", tmp_path)
    doc = json.loads((tmp_path / "racefree.llor.json").read_text())
    assert status == 0 and doc["category"] == "SAFE-no-changes" and doc["edits"] == []
    assert (tmp_path / "racefree.repaired.mmp").read_text() == corpus_path("racefree").read_text()
