"""Render repaired programs and change summaries.

Emission works over the original source lines so comments, blank lines and
formatting survive; only construct lines are inserted or dropped and the
``ordered`` clause is added to a loop header when needed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .engine import Candidate, Outcome, RepairOutcome, generate_repair_candidate
from .frontend import Op, SourceLoc

EDIT_ACTIONS = ("InsertBarrier", "WrapOrdered", "AddOrderedClause", "RemoveBarrier", "RemoveOrderedRegion")


@dataclass(frozen=True)
class Edit:
    action: str
    loc: SourceLoc
    end: Optional[SourceLoc] = None

    def to_json(self) -> dict:
        doc = {"action": self.action, "loc": {"line": self.loc.line, "col": self.loc.col}}
        if self.end is not None:
            doc["end"] = {"line": self.end.line, "col": self.end.col}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Edit":
        end = doc.get("end")
        return cls(
            doc["action"],
            SourceLoc(doc["loc"]["line"], doc["loc"]["col"]),
            SourceLoc(end["line"], end["col"]) if end else None,
        )

    def __str__(self) -> str:
        if self.end is not None:
            return f"{self.action} lines {self.loc.line}-{self.end.line}"
        return f"{self.action} at line {self.loc.line}"


def _sort_key(e: Edit):
    return (e.loc.line, e.loc.col, EDIT_ACTIONS.index(e.action))


def _line_ending(line: str) -> str:
    for ending in ("\r\n", "\n", "\r"):
        if line.endswith(ending):
            return ending
    return "\n"


def _indent(line: str) -> str:
    return line[: len(line) - len(line.lstrip(" \t"))]


_HEADER_BRACE = re.compile(r"\{(\s*(//.*)?)$")


def add_ordered_clause(header: str) -> str:
    body = header.rstrip("\r\n")
    ending = header[len(body):]
    m = _HEADER_BRACE.search(body)
    return body[: m.start()].rstrip() + " ordered {" + m.group(1) + ending


def candidate_edits(candidate: Candidate) -> list[Edit]:
    """Source edits that turn the original program into ``candidate``."""
    edits = []
    original = candidate.ip.original
    for r_idx, (orig, new) in enumerate(zip(original.regions, candidate.program.regions)):
        present = {s.loc.line for s in new.body if s.is_construct and not s.synthetic}
        for s in orig.body:
            if s.op is Op.BARRIER and s.loc.line not in present:
                edits.append(Edit("RemoveBarrier", s.loc))
            elif s.op is Op.ORDERED_BEGIN and s.loc.line not in present:
                end = next(e.loc for e in orig.body if e.op is Op.ORDERED_END and e.loc.line > s.loc.line)
                edits.append(Edit("RemoveOrderedRegion", s.loc, end))
        begin = None
        for s in new.body:
            if not s.synthetic:
                continue
            if s.op is Op.BARRIER:
                edits.append(Edit("InsertBarrier", s.loc))
            elif s.op is Op.ORDERED_BEGIN:
                begin = s.loc
            elif s.op is Op.ORDERED_END:
                edits.append(Edit("WrapOrdered", begin, s.loc))
        if new.ordered_clause and not orig.ordered_clause:
            edits.append(Edit("AddOrderedClause", orig.loc))
    return sorted(edits, key=_sort_key)


def emit_program(candidate: Candidate) -> str:
    """MiniMP text of ``candidate``, laid over the original source lines."""
    original = candidate.ip.original
    lines = original.source_lines
    construct_lines = {
        s.loc.line for r in original.regions for s in r.body if s.is_construct
    }
    present = {
        s.loc.line for r in candidate.program.regions for s in r.body if s.is_construct and not s.synthetic
    }
    before: dict[int, list[str]] = {}
    after: dict[int, list[str]] = {}
    for region in candidate.program.regions:
        for s in region.body:
            if s.synthetic:
                target = after if s.op is Op.ORDERED_END else before
                target.setdefault(s.loc.line, []).append(s.text)
    headers = {
        orig.loc.line
        for orig, new in zip(original.regions, candidate.program.regions)
        if new.ordered_clause and not orig.ordered_clause
    }

    out = []
    for n, line in enumerate(lines, start=1):
        if n in construct_lines and n not in present:
            continue
        pad, ending = _indent(line), _line_ending(line)
        out.extend(pad + text + ending for text in before.get(n, ()))
        if n in headers:
            line = add_ordered_clause(line)
        out.append(line)
        out.extend(pad + text + ending for text in after.get(n, ()))
    return "".join(out)


def apply_edits(source: str, edits: list[Edit]) -> str:
    """Apply summary edits to the original source text."""
    lines = re.findall(r"[^\r\n]*(?:\r\n|\n|\r)|[^\r\n]+$", source)
    drop: set[int] = set()
    before: dict[int, list[str]] = {}
    after: dict[int, list[str]] = {}
    headers: set[int] = set()
    for e in edits:
        if e.action == "InsertBarrier":
            before.setdefault(e.loc.line, []).append("barrier;")
        elif e.action == "WrapOrdered":
            before.setdefault(e.loc.line, []).append("ordered {")
            after.setdefault(e.end.line, []).append("}")
        elif e.action == "AddOrderedClause":
            headers.add(e.loc.line)
        elif e.action == "RemoveBarrier":
            drop.add(e.loc.line)
        elif e.action == "RemoveOrderedRegion":
            drop.update((e.loc.line, e.end.line))
        else:
            raise ValueError(f"unknown edit action {e.action!r}")
    out = []
    for n, line in enumerate(lines, start=1):
        if n in drop:
            continue
        ending = _line_ending(line)
        pad = _indent(line)
        for text in before.get(n, ()):
            out.append(f"{pad}{text}{ending}")
        if n in headers:
            line = add_ordered_clause(line)
        out.append(line)
        # an ordered region always closes before its loop does, so the line
        # carrying a closing insert is never the unterminated last line
        for text in after.get(n, ()):
            out.append(f"{pad}{text}{ending}")
    return "".join(out)


# one-line verdict categories, mirroring the rows of a results table
SAFE_NO_CHANGES = "SAFE-no-changes"
CHANGES_RECOMMENDED = "CHANGES-RECOMMENDED"
REPAIRED = "REPAIRED"
CANNOT_REPAIR = "CANNOT-REPAIR"
UNSUPPORTED = "UNSUPPORTED"
TIMEOUT = "TIMEOUT"
INTERNAL_ERROR = "INTERNAL-ERROR"
CATEGORIES = (SAFE_NO_CHANGES, CHANGES_RECOMMENDED, REPAIRED, CANNOT_REPAIR, UNSUPPORTED, TIMEOUT)

_STATUS_CATEGORY = {
    Outcome.CANNOT_REPAIR: CANNOT_REPAIR,
    Outcome.UNSUPPORTED: UNSUPPORTED,
    Outcome.TIMEOUT: TIMEOUT,
    Outcome.INTERNAL_ERROR: INTERNAL_ERROR,
}


def category(outcome: RepairOutcome, edits: list[Edit]) -> str:
    if outcome.status is not Outcome.REPAIRED:
        return _STATUS_CATEGORY[outcome.status]
    if not edits:
        return SAFE_NO_CHANGES
    if all(e.action.startswith("Remove") for e in edits):
        return CHANGES_RECOMMENDED
    return REPAIRED


@dataclass
class RepairResult:
    """A finished repair with its rendered artifacts."""

    outcome: RepairOutcome
    candidate: Optional[Candidate]
    edits: list[Edit]
    category: str

    @property
    def program_text(self) -> Optional[str]:
        return emit_program(self.candidate) if self.candidate else None


def finalize(outcome: RepairOutcome) -> RepairResult:
    if outcome.status is not Outcome.REPAIRED:
        return RepairResult(outcome, None, [], category(outcome, []))
    candidate = generate_repair_candidate(outcome.ip, outcome.sol)
    edits = candidate_edits(candidate)
    return RepairResult(outcome, candidate, edits, category(outcome, edits))


def emit_summary(outcome: RepairOutcome, edits: Optional[list[Edit]] = None) -> dict:
    """JSON-ready change summary for one repair run."""
    ip = outcome.ip
    if edits is None:
        edits = finalize(outcome).edits
    doc = {
        "programName": ip.original.name,
        "status": outcome.status.value,
        "category": category(outcome, edits),
        "strategy": outcome.strategy.value,
        "iterations": outcome.iterations,
        "variables": [
            {"name": v.name, "line": v.loc.line, "kind": v.kind.value, "fromExisting": v.from_existing}
            for v in ip.vars
        ],
        "clauses": [sorted(ip.vars[i].name for i in c) for c in outcome.phi.clauses],
        "traces": [t.to_json() for t in outcome.traces],
    }
    if outcome.status is Outcome.REPAIRED:
        doc.update({
            "edits": [e.to_json() for e in edits],
            "enabled": [ip.vars[i].name for i, on in sorted(outcome.sol.items()) if on],
            "enabledCount": outcome.enabled_count,
            "optimal": outcome.optimal,
            "optimalCount": outcome.optimal_count,
        })
    else:
        doc.update({"edits": [], "reason": outcome.reason})
    return doc


def unsupported_summary(name: str, message: str, strategy: str) -> dict:
    return {
        "programName": name,
        "status": "unsupported",
        "category": UNSUPPORTED,
        "strategy": strategy,
        "iterations": 0,
        "edits": [],
        "reason": message,
    }


def write_summary(doc: dict, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write summary {path}: {exc.strerror}") from exc
