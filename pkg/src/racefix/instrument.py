"""Attach a Boolean placement switch to every shared-array access.

In a ``parallel`` region a switch means "barrier immediately before this
statement"; in a ``parallel_for`` loop it means "this statement starts the
loop's ordered region". Programmer-written barriers and ordered regions are
stripped from the base program and remembered, so the repair loop can decide
whether they are needed at all.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .frontend import Op, Program, Region, RegionKind, SourceLoc, Stmt

Assignment = dict[int, bool]


class VarKind(Enum):
    BARRIER = "barrier"
    ORDERED = "ordered"


@dataclass(frozen=True)
class BarrierVariable:
    id: int
    loc: SourceLoc
    kind: VarKind
    region: int
    # index of the guarded statement in the region's base body; len(body) for
    # a position-only variable left behind by a trailing programmer barrier
    position: int
    from_existing: bool = False

    @property
    def name(self) -> str:
        return f"b{self.id + 1}"


@dataclass(frozen=True)
class ExistingConstruct:
    """A barrier or ordered region written in the input program."""

    op: Op  # BARRIER or ORDERED_BEGIN
    loc: SourceLoc
    region: int
    var: int
    end_loc: Optional[SourceLoc] = None  # closing brace of an ordered region


@dataclass(frozen=True)
class InstrumentedProgram:
    base: Program
    vars: tuple[BarrierVariable, ...]
    shared_access_locs: tuple[tuple[SourceLoc, ...], ...]
    original: Program
    existing: tuple[ExistingConstruct, ...] = ()

    def region_vars(self, region: int) -> list[BarrierVariable]:
        return [v for v in self.vars if v.region == region]

    def var_at(self, region: int, position: int) -> Optional[BarrierVariable]:
        for v in self.vars:
            if v.region == region and v.position == position:
                return v
        return None


def _instrument_region(r_idx: int, region: Region, next_id: int):
    kind = VarKind.BARRIER if region.kind is RegionKind.PARALLEL else VarKind.ORDERED
    base_body: list[Stmt] = []
    # constructs waiting for the next shared access: (stmt, end stmt or None)
    pending: list[list] = []
    attached: list[tuple[list, int]] = []
    open_ordered: Optional[list] = None

    for stmt in region.body:
        if stmt.op is Op.BARRIER:
            pending.append([stmt, None])
            continue
        if stmt.op is Op.ORDERED_BEGIN:
            open_ordered = [stmt, None]
            pending.append(open_ordered)
            continue
        if stmt.op is Op.ORDERED_END:
            open_ordered[1] = stmt
            open_ordered = None
            continue
        if stmt.is_shared:
            for entry in pending:
                attached.append((entry, len(base_body)))
            pending = []
        base_body.append(stmt)
    for entry in pending:
        attached.append((entry, len(base_body)))

    vars_: list[BarrierVariable] = []
    existing_positions = {pos for _, pos in attached}
    shared_locs = []
    for pos, stmt in enumerate(base_body):
        if stmt.is_shared:
            shared_locs.append(stmt.loc)
            vars_.append(BarrierVariable(
                next_id + len(vars_), stmt.loc, kind, r_idx, pos, pos in existing_positions,
            ))
    if len(base_body) in existing_positions:
        # trailing construct with no shared access after it
        trailing = [entry[0] for entry, pos in attached if pos == len(base_body)]
        vars_.append(BarrierVariable(
            next_id + len(vars_), trailing[0].loc, kind, r_idx, len(base_body), True,
        ))

    by_position = {v.position: v.id for v in vars_}
    existing = [
        ExistingConstruct(
            entry[0].op, entry[0].loc, r_idx, by_position[pos],
            entry[1].loc if entry[1] is not None else None,
        )
        for entry, pos in attached
    ]
    base_region = replace(region, body=tuple(base_body))
    return base_region, vars_, tuple(shared_locs), existing


def instrument(program: Program) -> InstrumentedProgram:
    regions, vars_, shared, existing = [], [], [], []
    for r_idx, region in enumerate(program.regions):
        base_region, rvars, rshared, rexisting = _instrument_region(r_idx, region, len(vars_))
        regions.append(base_region)
        vars_.extend(rvars)
        shared.append(rshared)
        existing.extend(rexisting)
    base = replace(program, regions=tuple(regions))
    return InstrumentedProgram(base, tuple(vars_), tuple(shared), program, tuple(existing))


def default_assignment(ip: InstrumentedProgram) -> Assignment:
    return {v.id: False for v in ip.vars}


def existing_assignment(ip: InstrumentedProgram) -> Assignment:
    """Assignment that re-enables every programmer-written construct."""
    a = default_assignment(ip)
    for c in ip.existing:
        a[c.var] = True
    return a


def enabled(a: Assignment) -> list[int]:
    return sorted(k for k, v in a.items() if v)
