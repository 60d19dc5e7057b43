"""Reference data-race checker for instrumented MiniMP programs.

Any checker with the signature of :func:`verify` can drive the repair loop, as
long as it is deterministic and never reports a race again once some variable
from the corresponding clause is enabled.

Semantics, per region:

* ``parallel``: enabled barrier variables split the body into phases. Two
  accesses from different threads race when they share a phase, touch the
  same cell and at least one writes.
* ``parallel_for``: the enabled variables select one ordered region, from the
  earliest enabled statement to the last shared access. Iteration ``j``'s
  ordered region finishes before iteration ``j+1``'s begins, so a conflict
  between iterations ``j < k`` is ordered exactly when the access made by
  iteration ``k`` lies inside the region. Otherwise it races.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional

from .frontend import Index, Op, Region, RegionKind, SourceLoc
from .instrument import Assignment, InstrumentedProgram


class AccessKind(Enum):
    READ = "Read"
    WRITE = "Write"


@dataclass(frozen=True)
class AccessSite:
    loc: SourceLoc
    kind: AccessKind

    @property
    def key(self) -> tuple[int, int]:
        return (self.loc.line, 0 if self.kind is AccessKind.READ else 1)

    def __str__(self) -> str:
        return f"line {self.loc.line} {self.kind.value}"


# (first, second, array) with first.key <= second.key
RacePair = tuple[AccessSite, AccessSite, str]


@dataclass(frozen=True)
class RaceTrace:
    first: AccessSite
    second: AccessSite
    array: str
    # parallel_for only: the access of the pair that runs in the later
    # iteration (the earlier one if either order is possible)
    later: Optional[SourceLoc] = None

    @property
    def pair(self) -> RacePair:
        return (self.first, self.second, self.array)

    def to_json(self) -> dict:
        doc = {
            "first": {"line": self.first.loc.line, "kind": self.first.kind.value},
            "second": {"line": self.second.loc.line, "kind": self.second.kind.value},
            "array": self.array,
        }
        if self.later is not None:
            doc["laterLine"] = self.later.line
        return doc

    def __str__(self) -> str:
        return f"race on '{self.array}' between {self.first} and {self.second}"


class Status(Enum):
    SAFE = "SAFE"
    RACE = "RACE"
    OTHER = "OTHER"
    UNSUPPORTED = "UNSUPPORTED"


@dataclass(frozen=True)
class VerificationResult:
    status: Status
    trace: Optional[RaceTrace] = None
    message: str = ""

    @classmethod
    def safe(cls) -> "VerificationResult":
        return cls(Status.SAFE)

    @classmethod
    def race(cls, trace: RaceTrace) -> "VerificationResult":
        return cls(Status.RACE, trace)

    @classmethod
    def other(cls, message: str) -> "VerificationResult":
        return cls(Status.OTHER, message=message)


Verifier = Callable[[InstrumentedProgram, Assignment], VerificationResult]


@dataclass(frozen=True)
class _Access:
    position: int
    site: AccessSite
    array: str
    index: Index

    @property
    def key(self) -> tuple[int, int]:
        return (self.position, self.site.key[1])


def region_accesses(region: Region) -> list[_Access]:
    """Access events of a base region body in program order; a read-write
    line yields its read and then its write."""
    out = []
    for pos, stmt in enumerate(region.body):
        if stmt.op in (Op.READ, Op.READ_WRITE):
            out.append(_Access(pos, AccessSite(stmt.loc, AccessKind.READ), stmt.array, stmt.read_index))
        if stmt.op in (Op.WRITE, Op.READ_WRITE):
            out.append(_Access(pos, AccessSite(stmt.loc, AccessKind.WRITE), stmt.array, stmt.write_index))
    return out


def _directions(x: Index, y: Index, n: int) -> tuple[bool, bool]:
    """Whether x's worker can be later / y's worker can be later in some pair of
    distinct workers in [0, n) touching the same cell."""
    if n < 2:
        return (False, False)
    if x.symbol is None and y.symbol is None:
        return (x.offset == y.offset,) * 2
    if x.symbol is not None and y.symbol is not None:
        # x's worker tx and y's worker ty meet when ty - tx == x.offset - y.offset
        d = x.offset - y.offset
        if d == 0 or abs(d) > n - 1:
            return (False, False)
        return (d < 0, d > 0)
    if x.symbol is None:
        ty = x.offset - y.offset
        if not 0 <= ty < n:
            return (False, False)
        # x's worker is free: later than ty iff ty < n - 1, earlier iff ty > 0
        return (ty < n - 1, ty > 0)
    later_y, later_x = _directions(y, x, n)
    return (later_x, later_y)


def _ordered_start(ip: InstrumentedProgram, r_idx: int, a: Assignment) -> Optional[int]:
    positions = [v.position for v in ip.region_vars(r_idx) if a[v.id]]
    return min(positions) if positions else None


def _region_races(ip: InstrumentedProgram, r_idx: int, a: Assignment) -> Iterator[RaceTrace]:
    region = ip.base.regions[r_idx]
    accesses = region_accesses(region)
    n = region.count
    if region.kind is RegionKind.PARALLEL:
        cuts = sorted(v.position for v in ip.region_vars(r_idx) if a[v.id])
        # only accesses within one phase can race
        groups: dict[int, list[_Access]] = {}
        for acc in accesses:
            groups.setdefault(bisect_right(cuts, acc.position), []).append(acc)
        for group in groups.values():
            for x, y in _candidate_pairs(group, n):
                yield RaceTrace(x.site, y.site, x.array)
        return

    start = _ordered_start(ip, r_idx, a)
    for x, y, x_later, y_later in _candidate_pairs(accesses, n, with_directions=True):
        later = min(acc.position for acc, ok in ((x, x_later), (y, y_later)) if ok)
        if start is not None and start <= later:
            continue
        yield RaceTrace(x.site, y.site, x.array, region.body[later].loc)


def _candidate_pairs(accesses: list[_Access], n: int, with_directions: bool = False):
    """Conflicting pairs (x before-or-equal y in program order), ignoring
    synchronization."""
    for i, x in enumerate(accesses):
        for y in accesses[i:]:
            if x.array != y.array:
                continue
            if x.site.kind is AccessKind.READ and y.site.kind is AccessKind.READ:
                continue
            x_later, y_later = _directions(x.index, y.index, n)
            if not (x_later or y_later):
                continue
            yield (x, y, x_later, y_later) if with_directions else (x, y)


def _check(ip: InstrumentedProgram, a: Assignment) -> Optional[str]:
    missing = [v.id for v in ip.vars if v.id not in a]
    if missing:
        return f"assignment is missing barrier variables {missing}"
    return None


def _trace_key(t: RaceTrace):
    return (t.first.loc.line, t.second.loc.line, t.first.key[1], t.second.key[1], t.array)


def _all_races(ip: InstrumentedProgram, a: Assignment) -> Iterator[RaceTrace]:
    # first lines come out non-decreasing: regions, phases and accesses are
    # all walked in program order
    for r in range(len(ip.base.regions)):
        yield from _region_races(ip, r, a)


def race_traces(ip: InstrumentedProgram, a: Assignment) -> list[RaceTrace]:
    """Every racing pair under ``a``, sorted by line numbers."""
    return sorted(_all_races(ip, a), key=_trace_key)


def first_race(ip: InstrumentedProgram, a: Assignment) -> Optional[RaceTrace]:
    """Smallest trace of :func:`race_traces`, without enumerating the rest."""
    found: list[RaceTrace] = []
    for t in _all_races(ip, a):
        if found and t.first.loc.line > found[0].first.loc.line:
            break
        found.append(t)
    return min(found, key=_trace_key) if found else None


def race_pairs(ip: InstrumentedProgram, a: Assignment) -> frozenset[RacePair]:
    return frozenset(t.pair for t in race_traces(ip, a))


def verify(ip: InstrumentedProgram, a: Assignment) -> VerificationResult:
    """Check ``ip`` with constructs enabled per ``a``; report the race with
    the lexicographically smallest (first line, second line)."""
    problem = _check(ip, a)
    if problem:
        return VerificationResult.other(problem)
    trace = first_race(ip, a)
    if trace is None:
        return VerificationResult.safe()
    return VerificationResult.race(trace)
