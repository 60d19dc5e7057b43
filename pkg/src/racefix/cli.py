"""Command-line driver: parse, instrument, repair and emit, per input file."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import emit
from .engine import Budget, Strategy, repair
from .frontend import MiniMPSyntaxError, UnsupportedConstruct, parse_file
from .instrument import instrument

log = logging.getLogger("racefix")

EXIT_OK, EXIT_FAILURES, EXIT_USAGE = 0, 1, 2
ERROR = "ERROR"
CSV_COLUMNS = ("input", "mhs_ms", "maxsat_ms", "mhs_iters", "maxsat_iters", "mhs_enabled", "maxsat_enabled")


@dataclass
class RunConfig:
    inputs: list[Path]
    solver: str = "mhs"
    timeout_secs: float = 300.0
    verbose: bool = False
    report_path: Optional[Path] = None
    compare_solvers: bool = False
    dump_clauses: bool = False
    output_dir: Optional[Path] = None
    write_outputs: bool = True
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.inputs:
            raise ValueError("at least one input is required")
        if self.timeout_secs <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class FileResult:
    input: str
    category: str
    message: str = ""
    summary: Optional[dict] = None
    program_text: Optional[str] = None
    dimacs: Optional[str] = None
    edits: list[str] = field(default_factory=list)
    iterations: int = 0
    enabled: int = 0
    elapsed_ms: float = 0.0

    @property
    def verdict(self) -> str:
        n = len(self.edits)
        if self.category == emit.REPAIRED:
            return f"{emit.REPAIRED} {n} edit{'s' * (n != 1)}"
        if self.category == emit.CHANGES_RECOMMENDED:
            return f"{emit.CHANGES_RECOMMENDED} {n} removal{'s' * (n != 1)}"
        if self.message and self.category != emit.SAFE_NO_CHANGES:
            return f"{self.category} ({self.message})"
        return self.category


def repair_file(path: Path, solver: str, timeout_secs: float) -> FileResult:
    started = time.monotonic()
    try:
        program = parse_file(path)
    except UnsupportedConstruct as exc:
        doc = emit.unsupported_summary(path.name.split(".")[0], str(exc), solver)
        return FileResult(str(path), emit.UNSUPPORTED, str(exc), summary=doc)
    except MiniMPSyntaxError as exc:
        return FileResult(str(path), ERROR, f"syntax error at {exc}")
    except OSError as exc:
        return FileResult(str(path), ERROR, f"cannot read: {exc.strerror or exc}")

    outcome = repair(instrument(program), Strategy(solver), Budget(timeout_secs=timeout_secs))
    result = emit.finalize(outcome)
    summary = emit.emit_summary(outcome, result.edits)
    return FileResult(
        str(path),
        result.category,
        outcome.reason,
        summary=summary,
        program_text=result.program_text,
        dimacs=outcome.phi.to_dimacs(),
        edits=[str(e) for e in result.edits],
        iterations=outcome.iterations,
        enabled=outcome.enabled_count,
        elapsed_ms=(time.monotonic() - started) * 1000.0,
    )


def _expand(inputs: Sequence[Path]) -> list[Path]:
    files = []
    for p in inputs:
        if p.is_dir():
            files.extend(sorted(p.glob("*.mmp")))
        else:
            files.append(p)
    return files


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(*item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*items)))


def _artifact_path(cfg: RunConfig, source: Path, suffix: str) -> Path:
    directory = cfg.output_dir or source.parent
    return directory / (source.name.removesuffix(".mmp") + suffix)


def _write_artifacts(cfg: RunConfig, res: FileResult) -> None:
    source = Path(res.input)
    if cfg.output_dir:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if res.summary is not None:
        emit.write_summary(res.summary, _artifact_path(cfg, source, ".llor.json"))
    if res.program_text is not None:
        _artifact_path(cfg, source, ".repaired.mmp").write_text(res.program_text, encoding="utf-8", newline="")
    if cfg.dump_clauses and res.dimacs is not None:
        _artifact_path(cfg, source, ".clauses.cnf").write_text(res.dimacs, encoding="utf-8")


def category_counts(results: Sequence[FileResult]) -> dict[str, int]:
    counts = {c: 0 for c in emit.CATEGORIES}
    for r in results:
        counts[r.category] = counts.get(r.category, 0) + 1
    return counts


def exit_status(results: Sequence[FileResult]) -> int:
    if any(r.category == ERROR for r in results):
        return EXIT_USAGE
    ok = (emit.SAFE_NO_CHANGES, emit.CHANGES_RECOMMENDED, emit.REPAIRED)
    return EXIT_OK if all(r.category in ok for r in results) else EXIT_FAILURES


def run(cfg: RunConfig, out=None) -> tuple[int, list[FileResult]]:
    out = out or sys.stdout
    files = _expand(cfg.inputs)
    if cfg.compare_solvers:
        return compare_solvers(cfg, files, out), []
    results = _map(repair_file, [(f, cfg.solver, cfg.timeout_secs) for f in files], cfg.jobs)
    for res in results:
        if cfg.write_outputs and res.category != ERROR:
            try:
                _write_artifacts(cfg, res)
            except OSError as exc:
                res.category, res.message = ERROR, str(exc)
        print(f"{res.input}: {res.verdict}", file=out)
        if cfg.verbose:
            for e in res.edits:
                print(f"    {e}", file=out)
    if cfg.report_path:
        report = {
            "counts": category_counts(results),
            "files": [
                {"input": r.input, "category": r.category, "message": r.message,
                 "edits": r.edits, "iterations": r.iterations}
                for r in results
            ],
        }
        cfg.report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return exit_status(results), results


def compare_solvers(cfg: RunConfig, files: Sequence[Path], out=None) -> int:
    """Per-input timings and iteration counts for both strategies, as CSV."""
    out = out or sys.stdout
    mhs = _map(repair_file, [(f, "mhs", cfg.timeout_secs) for f in files], cfg.jobs)
    maxsat = _map(repair_file, [(f, "maxsat", cfg.timeout_secs) for f in files], cfg.jobs)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    repaired = (emit.SAFE_NO_CHANGES, emit.CHANGES_RECOMMENDED, emit.REPAIRED)
    status = EXIT_OK
    for a, b in zip(mhs, maxsat):
        if ERROR in (a.category, b.category):
            status = EXIT_USAGE
        if a.category not in repaired or b.category not in repaired:
            continue
        writer.writerow([
            a.input, f"{a.elapsed_ms:.3f}", f"{b.elapsed_ms:.3f}",
            a.iterations, b.iterations, a.enabled, b.enabled,
        ])
    if cfg.report_path:
        cfg.report_path.write_text(buf.getvalue(), encoding="utf-8")
    else:
        out.write(buf.getvalue())
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="racefix",
        description="Repair data races in MiniMP programs by placing barriers or ordered regions.",
    )
    p.add_argument("inputs", nargs="+", type=Path, help="MiniMP files or directories of .mmp files")
    p.add_argument("--solver", choices=("mhs", "maxsat"), default="mhs", help="clause solving strategy")
    p.add_argument("--timeout", type=float, default=300.0, metavar="SECS", help="per-file time budget")
    p.add_argument("--verbose", "-v", action="store_true", help="log every iteration and list edits")
    p.add_argument("--report", type=Path, metavar="PATH", help="write a JSON report (CSV with --compare-solvers)")
    p.add_argument("--compare-solvers", action="store_true", help="run both strategies and emit CSV timings")
    p.add_argument("--dump-clauses", action="store_true", help="write learned clauses as <input>.clauses.cnf")
    p.add_argument("--output-dir", type=Path, help="directory for summaries and repaired programs")
    p.add_argument("--no-write", action="store_true", help="print verdicts only")
    p.add_argument("--jobs", "-j", type=int, default=1, help="files to process in parallel")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = RunConfig(
            inputs=list(args.inputs), solver=args.solver, timeout_secs=args.timeout,
            verbose=args.verbose, report_path=args.report, compare_solvers=args.compare_solvers,
            dump_clauses=args.dump_clauses, output_dir=args.output_dir,
            write_outputs=not args.no_write, jobs=args.jobs,
        )
    except ValueError as exc:
        print(f"racefix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    missing = [p for p in cfg.inputs if not p.exists()]
    if missing:
        for p in missing:
            print(f"racefix: error: no such file or directory: {p}", file=sys.stderr)
        return EXIT_USAGE
    status, _ = run(cfg)
    return status


if __name__ == "__main__":
    sys.exit(main())
