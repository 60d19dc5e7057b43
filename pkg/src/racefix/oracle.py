"""Exhaustive small-scope race oracle.

Runs every thread (or loop iteration) of a region as a concrete process over
its access events, explores all reachable interleavings with barriers and the
ordered-region token as the only synchronization, and collects every pair of
conflicting accesses that can be pending at the same time. It shares no race
logic with :mod:`racefix.verifier` and exists to cross-check it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .frontend import Op, RegionKind
from .instrument import Assignment, InstrumentedProgram
from .verifier import AccessKind, AccessSite, RacePair


class ResourceLimit(RuntimeError):
    pass


MAX_SCOPE_THREADS = 4
MAX_SCOPE_ARRAY = 16


@dataclass(frozen=True)
class _Event:
    op: str  # "access", "barrier", "enter", "exit"
    site: Optional[AccessSite] = None
    array: Optional[str] = None
    cells: tuple[int, ...] = ()  # cell touched, per worker


def _events(ip: InstrumentedProgram, r_idx: int, a: Assignment) -> list[_Event]:
    region = ip.base.regions[r_idx]
    n = region.count
    enabled_positions = sorted(v.position for v in ip.region_vars(r_idx) if a[v.id])
    last_shared = max((p for p, s in enumerate(region.body) if s.is_shared), default=-1)
    start = enabled_positions[0] if enabled_positions else None
    events: list[_Event] = []

    for pos in range(len(region.body) + 1):
        if region.kind is RegionKind.PARALLEL:
            if pos in enabled_positions:
                events.append(_Event("barrier"))
        elif start is not None and pos == start and start <= last_shared:
            events.append(_Event("enter"))
        if pos == len(region.body):
            break
        stmt = region.body[pos]
        if stmt.op in (Op.READ, Op.READ_WRITE):
            cells = tuple(stmt.read_index.offset + (w if stmt.read_index.symbol else 0) for w in range(n))
            events.append(_Event("access", AccessSite(stmt.loc, AccessKind.READ), stmt.array, cells))
        if stmt.op in (Op.WRITE, Op.READ_WRITE):
            cells = tuple(stmt.write_index.offset + (w if stmt.write_index.symbol else 0) for w in range(n))
            events.append(_Event("access", AccessSite(stmt.loc, AccessKind.WRITE), stmt.array, cells))
        if region.kind is RegionKind.PARALLEL_FOR and start is not None and pos == last_shared and start <= last_shared:
            events.append(_Event("exit"))
    return events


def _explore(events: list[_Event], n: int, max_states: int) -> set[RacePair]:
    end = len(events)
    races: set[RacePair] = set()
    # state: (program counter per worker, next worker allowed into the ordered region)
    initial = ((0,) * n, 0)
    seen = {initial}
    queue = deque([initial])
    while queue:
        pcs, token = queue.popleft()
        pending = [(w, events[pc]) for w, pc in enumerate(pcs) if pc < end and events[pc].op == "access"]
        for i, (w1, e1) in enumerate(pending):
            for w2, e2 in pending[i + 1:]:
                if e1.array != e2.array or e1.cells[w1] != e2.cells[w2]:
                    continue
                if e1.site.kind is AccessKind.READ and e2.site.kind is AccessKind.READ:
                    continue
                lo, hi = sorted((e1.site, e2.site), key=lambda s: s.key)
                races.add((lo, hi, e1.array))

        successors = []
        if all(pc < end and events[pc].op == "barrier" for pc in pcs) and len(set(pcs)) == 1:
            successors.append((tuple(pc + 1 for pc in pcs), token))
        for w, pc in enumerate(pcs):
            if pc >= end:
                continue
            op = events[pc].op
            if op == "barrier":
                continue
            if op == "enter" and token != w:
                continue
            nxt = token + 1 if op == "exit" else token
            successors.append((pcs[:w] + (pc + 1,) + pcs[w + 1:], nxt))
        for state in successors:
            if state not in seen:
                if len(seen) >= max_states:
                    raise ResourceLimit(f"more than {max_states} reachable states")
                seen.add(state)
                queue.append(state)
    return races


def oracle_race_check(
    ip: InstrumentedProgram,
    a: Assignment,
    max_threads: int = 3,
    max_states: int = 1_000_000,
) -> frozenset[RacePair]:
    """All racing access pairs under ``a``; the empty set means SAFE."""
    if not 1 <= max_threads <= MAX_SCOPE_THREADS:
        raise ValueError(f"max_threads must be in [1, {MAX_SCOPE_THREADS}]")
    for region in ip.base.regions:
        if region.count > max_threads:
            raise ValueError(f"region at line {region.loc.line} has {region.count} workers > {max_threads}")
    for decl in ip.base.decls:
        if decl.length > MAX_SCOPE_ARRAY:
            raise ValueError(f"array '{decl.name}' is longer than {MAX_SCOPE_ARRAY}")
    races: set[RacePair] = set()
    for r_idx, region in enumerate(ip.base.regions):
        races |= _explore(_events(ip, r_idx, a), region.count, max_states)
    return frozenset(races)
