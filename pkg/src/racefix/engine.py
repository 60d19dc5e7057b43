"""Counterexample-guided repair loop.

Starting from the construct-free program, alternate between solving the
learned clauses for a placement, building the candidate and verifying it.
Each race trace contributes one positive clause listing the disabled
variables whose construct would order the racing pair.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .frontend import Op, Program, RegionKind, Stmt
from .instrument import (
    Assignment, ExistingConstruct, InstrumentedProgram, VarKind, enabled, instrument,
)
from .solver import ClauseSet, DuplicateClause, SolverTimeout, add_clause, optimum_size, solve_maxsat, solve_mhs
from .verifier import RaceTrace, Status, Verifier, verify

log = logging.getLogger(__name__)


class Strategy(Enum):
    MHS = "mhs"
    MAXSAT = "maxsat"


@dataclass(frozen=True)
class Budget:
    max_iterations: int = 1000
    timeout_secs: float = 300.0


class Outcome(Enum):
    REPAIRED = "repaired"
    CANNOT_REPAIR = "cannot_repair"
    UNSUPPORTED = "unsupported"
    TIMEOUT = "timeout"
    INTERNAL_ERROR = "internal_error"


@dataclass
class RepairOutcome:
    status: Outcome
    ip: InstrumentedProgram
    strategy: Strategy
    phi: ClauseSet
    iterations: int = 0
    sol: Optional[Assignment] = None
    traces: list[RaceTrace] = field(default_factory=list)
    reason: str = ""
    # mhs: whether |sol| matches the MaxSAT optimum of phi; None if not checked
    optimal: Optional[bool] = None
    optimal_count: Optional[int] = None
    elapsed: float = 0.0

    @property
    def repaired(self) -> bool:
        return self.status is Outcome.REPAIRED

    @property
    def enabled_count(self) -> int:
        return sum(self.sol.values()) if self.sol else 0


def generate_clause(ip: InstrumentedProgram, a: Assignment, trace: RaceTrace) -> frozenset[int]:
    """Disabled variables whose construct would order the two racing accesses.

    Barrier variables qualify when they sit strictly after the first access's
    line and at or before the second's. Ordered variables qualify when they sit
    at or before the access that runs in the later iteration, because the
    ordered region then covers it.
    """
    line = trace.first.loc.line
    r_idx = next(
        r for r, region in enumerate(ip.base.regions) if region.loc.line < line <= region.end_line
    )
    clause = set()
    for v in ip.region_vars(r_idx):
        if a[v.id]:
            continue
        if ip.base.regions[r_idx].kind is RegionKind.PARALLEL:
            if trace.first.loc.line < v.loc.line <= trace.second.loc.line:
                clause.add(v.id)
        elif v.loc.line <= trace.later.line:
            clause.add(v.id)
    return frozenset(clause)


@dataclass(frozen=True)
class Candidate:
    """Program with the constructs selected by ``sol``, built over the
    original body so kept programmer constructs stay where they were written."""

    ip: InstrumentedProgram
    sol: Assignment
    program: Program
    kept: frozenset[ExistingConstruct]
    # per region: (start position, end position) of the ordered region
    ordered_spans: dict[int, tuple[int, int]]


def _ordered_span(ip: InstrumentedProgram, r_idx: int, sol: Assignment) -> Optional[tuple[int, int]]:
    body = ip.base.regions[r_idx].body
    shared = [p for p, s in enumerate(body) if s.is_shared]
    starts = [v.position for v in ip.region_vars(r_idx) if sol[v.id]]
    if not starts or not shared or min(starts) > shared[-1]:
        return None
    return (min(starts), shared[-1])


def _kept_constructs(ip: InstrumentedProgram, sol: Assignment, spans) -> set[ExistingConstruct]:
    kept = set()
    by_var: dict[int, list[ExistingConstruct]] = {}
    for c in ip.existing:
        by_var.setdefault(c.var, []).append(c)
    for var_id, constructs in by_var.items():
        var = ip.vars[var_id]
        if not sol[var_id]:
            continue
        if var.kind is VarKind.BARRIER:
            # several stacked barriers before one statement: keep the last
            kept.add(constructs[-1])
            continue
        span = spans.get(var.region)
        region = ip.original.regions[var.region]
        for c in constructs:
            if span is None or var.position != span[0] or c.end_loc is None:
                continue
            end_stmt_line = ip.base.regions[var.region].body[span[1]].loc.line
            if c.loc.line < end_stmt_line < c.end_loc.line and region.ordered_clause:
                kept.add(c)
    return kept


def generate_repair_candidate(ip: InstrumentedProgram, sol: Assignment) -> Candidate:
    spans = {}
    for r_idx, region in enumerate(ip.base.regions):
        if region.kind is RegionKind.PARALLEL_FOR:
            span = _ordered_span(ip, r_idx, sol)
            if span is not None:
                spans[r_idx] = span
    kept = _kept_constructs(ip, sol, spans)
    kept_lines = {c.loc.line for c in kept} | {c.end_loc.line for c in kept if c.end_loc}
    kept_vars = {c.var for c in kept}

    regions = []
    for r_idx, (orig, base) in enumerate(zip(ip.original.regions, ip.base.regions)):
        positions = {s.loc.line: p for p, s in enumerate(base.body)}
        span = spans.get(r_idx)
        keeps_block = any(c.region == r_idx for c in kept)
        body: list[Stmt] = []
        for stmt in orig.body:
            if stmt.is_construct:
                if stmt.loc.line in kept_lines:
                    body.append(stmt)
                continue
            pos = positions[stmt.loc.line]
            var = ip.var_at(r_idx, pos)
            if base.kind is RegionKind.PARALLEL:
                if var is not None and sol[var.id] and var.id not in kept_vars:
                    body.append(Stmt(Op.BARRIER, "barrier;", loc=stmt.loc, synthetic=True))
                body.append(stmt)
            else:
                fresh = span is not None and not keeps_block
                if fresh and pos == span[0]:
                    body.append(Stmt(Op.ORDERED_BEGIN, "ordered {", loc=stmt.loc, synthetic=True))
                body.append(stmt)
                if fresh and pos == span[1]:
                    body.append(Stmt(Op.ORDERED_END, "}", loc=stmt.loc, synthetic=True))
        clause = orig.ordered_clause or span is not None
        regions.append(replace(orig, body=tuple(body), ordered_clause=clause))
    program = replace(ip.original, regions=tuple(regions))
    return Candidate(ip, dict(sol), program, frozenset(kept), spans)


def _deadline_passed(deadline: float) -> bool:
    return time.monotonic() > deadline


def repair(
    ip: InstrumentedProgram,
    strategy: Strategy = Strategy.MHS,
    budget: Budget = Budget(),
    verifier: Verifier = verify,
) -> RepairOutcome:
    started = time.monotonic()
    deadline = started + budget.timeout_secs
    outcome = RepairOutcome(Outcome.TIMEOUT, ip, strategy, ClauseSet(len(ip.vars)))
    seen = set()

    def finish(status: Outcome, reason: str = "") -> RepairOutcome:
        outcome.status = status
        outcome.reason = reason
        outcome.elapsed = time.monotonic() - started
        return outcome

    while True:
        if outcome.iterations >= budget.max_iterations:
            return finish(Outcome.TIMEOUT, f"iteration budget of {budget.max_iterations} exhausted")
        if _deadline_passed(deadline):
            return finish(Outcome.TIMEOUT, f"time budget of {budget.timeout_secs:g}s exhausted")
        try:
            if strategy is Strategy.MHS:
                sol = solve_mhs(outcome.phi)
            else:
                sol = solve_maxsat(outcome.phi, deadline)
        except SolverTimeout:
            return finish(Outcome.TIMEOUT, f"time budget of {budget.timeout_secs:g}s exhausted")
        if sol is None:
            last = outcome.traces[-1]
            kinds = "write-write" if last.first.kind == last.second.kind else "read-write"
            return finish(Outcome.CANNOT_REPAIR, f"{kinds} same line")
        outcome.sol = sol
        outcome.iterations += 1
        result = verifier(ip, sol)
        log.debug("iteration %d: enabled=%s -> %s", outcome.iterations,
                  [ip.vars[i].name for i in enabled(sol)], result.trace or result.status.value)
        if result.status is Status.SAFE:
            break
        if result.status is Status.UNSUPPORTED:
            return finish(Outcome.UNSUPPORTED, result.message)
        if result.status is not Status.RACE:
            return finish(Outcome.CANNOT_REPAIR, f"non-race error: {result.message}")
        trace = result.trace
        if trace.pair in seen:
            return finish(Outcome.INTERNAL_ERROR, f"verifier repeated a trace: {trace}")
        seen.add(trace.pair)
        outcome.traces.append(trace)
        clause = generate_clause(ip, sol, trace)
        log.debug("learned clause %s from %s", sorted(ip.vars[i].name for i in clause), trace)
        try:
            outcome.phi = add_clause(outcome.phi, clause)
        except DuplicateClause as exc:
            return finish(Outcome.INTERNAL_ERROR, str(exc))

    if strategy is Strategy.MAXSAT:
        outcome.optimal = True
        outcome.optimal_count = outcome.enabled_count
    else:
        try:
            outcome.optimal_count = optimum_size(outcome.phi, deadline)
            outcome.optimal = outcome.optimal_count == outcome.enabled_count
        except SolverTimeout:
            log.warning("optimality check skipped: time budget exhausted")
    return finish(Outcome.REPAIRED)


def remove_unnecessary(
    ip: InstrumentedProgram,
    strategy: Strategy = Strategy.MHS,
    budget: Budget = Budget(),
    verifier: Verifier = verify,
) -> RepairOutcome:
    """Same loop as :func:`repair`: starting from all-false means programmer
    constructs come back only when a race demands them."""
    return repair(ip, strategy, budget, verifier)


def repair_program(program: Program, **kwargs) -> RepairOutcome:
    return repair(instrument(program), **kwargs)
