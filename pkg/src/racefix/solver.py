"""Constraint store and the two solve strategies.

Every clause is a disjunction of positive barrier variables, and the soft
constraints prefer each variable false. Partial MaxSAT over that shape is
exactly the minimum-cardinality hitting set problem, which is solved here by
branch and bound. The ``mhs`` strategy is the greedy approximation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Optional

from .instrument import Assignment

Clause = frozenset[int]


class DuplicateClause(RuntimeError):
    """A clause was learned twice: the verifier repeated a trace."""


class SolverTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class ClauseSet:
    var_count: int
    clauses: tuple[Clause, ...] = ()

    def __contains__(self, clause) -> bool:
        return frozenset(clause) in self.clauses

    def __len__(self) -> int:
        return len(self.clauses)

    @property
    def has_empty(self) -> bool:
        return any(not c for c in self.clauses)

    def to_dimacs(self) -> str:
        """DIMACS-style dump; variable ``id`` is written as ``id + 1``."""
        lines = [f"p cnf {self.var_count} {len(self.clauses)}"]
        for c in self.clauses:
            lines.append(" ".join(str(v + 1) for v in sorted(c)) + (" 0" if c else "0"))
        return "\n".join(lines) + "\n"


def add_clause(phi: ClauseSet, clause: Iterable[int]) -> ClauseSet:
    c = frozenset(clause)
    bad = [v for v in c if not 0 <= v < phi.var_count]
    if bad:
        raise ValueError(f"clause references unknown variables {sorted(bad)}")
    if c in phi.clauses:
        raise DuplicateClause(f"clause {sorted(c)} is already present")
    return ClauseSet(phi.var_count, phi.clauses + (c,))


def _assignment(var_count: int, chosen: Iterable[int]) -> Assignment:
    chosen = set(chosen)
    return {v: v in chosen for v in range(var_count)}


def greedy_hitting_set(clauses: Iterable[Clause]) -> list[int]:
    """Unit clauses first (every hitting set contains them), then repeatedly
    the variable in the most uncovered clauses, smallest id on ties."""
    clauses = list(clauses)
    forced = {v for c in clauses if len(c) == 1 for v in c}
    uncovered = [c for c in clauses if forced.isdisjoint(c)]
    chosen = sorted(forced)
    while uncovered:
        counts: dict[int, int] = {}
        for c in uncovered:
            for v in c:
                counts[v] = counts.get(v, 0) + 1
        best = min(counts, key=lambda v: (-counts[v], v))
        chosen.append(best)
        uncovered = [c for c in uncovered if best not in c]
    return sorted(chosen)


def solve_mhs(phi: ClauseSet) -> Optional[Assignment]:
    """Greedy hitting set; None when ``phi`` holds the empty clause."""
    if phi.has_empty:
        return None
    return _assignment(phi.var_count, greedy_hitting_set(phi.clauses))


def _disjoint_lower_bound(clauses: list[Clause]) -> int:
    # pairwise-disjoint clauses each need their own variable
    used: set[int] = set()
    bound = 0
    for c in sorted(clauses, key=len):
        if used.isdisjoint(c):
            used |= c
            bound += 1
    return bound


class _MinHittingSet:
    def __init__(self, deadline: Optional[float]):
        self.deadline = deadline
        self.nodes = 0

    def tick(self) -> None:
        self.nodes += 1
        if self.deadline is not None and self.nodes % 256 == 0 and time.monotonic() > self.deadline:
            raise SolverTimeout("MaxSAT search exceeded its deadline")

    def size(self, clauses: list[Clause], limit: int) -> Optional[int]:
        """Minimum hitting set size if it is < ``limit``, else None."""
        self.tick()
        taken = 0
        while True:
            forced = {v for c in clauses if len(c) == 1 for v in c}
            if not forced:
                break
            clauses = [c for c in clauses if forced.isdisjoint(c)]
            taken += len(forced)
        limit -= taken
        if not clauses:
            return taken if limit > 0 else None
        if limit <= 0 or _disjoint_lower_bound(clauses) >= limit:
            return None
        branch = min(clauses, key=lambda c: (len(c), min(c)))
        best = None
        for v in sorted(branch):
            rest = [c for c in clauses if v not in c]
            sub = self.size(rest, (best if best is not None else limit) - 1)
            if sub is not None:
                best = sub + 1
        return None if best is None else best + taken

    def lex_first(self, clauses: list[Clause], k: int) -> Optional[list[int]]:
        """Lexicographically smallest hitting set of size ``k``, given that
        ``k`` is the minimum."""
        chosen: list[int] = []
        while clauses:
            self.tick()
            for v in sorted({v for c in clauses for v in c}):
                # later picks are all larger than v
                rest = [frozenset(u for u in c if u > v) for c in clauses if v not in c]
                if any(not c for c in rest):
                    continue
                if self.size(rest, k - len(chosen)) is not None:
                    chosen.append(v)
                    clauses = rest
                    break
            else:
                return None
        return chosen if len(chosen) == k else None


def minimum_hitting_set(clauses: Iterable[Clause], deadline: Optional[float] = None) -> list[int]:
    clauses = list(dict.fromkeys(clauses))
    if any(not c for c in clauses):
        raise ValueError("the empty clause cannot be hit")
    search = _MinHittingSet(deadline)
    upper = len(greedy_hitting_set(clauses))
    k = search.size(clauses, upper)
    if k is None:
        k = upper
    chosen = search.lex_first(clauses, k)
    assert chosen is not None
    return chosen


def solve_maxsat(phi: ClauseSet, deadline: Optional[float] = None) -> Optional[Assignment]:
    """Fewest enabled variables satisfying every clause, lexicographically
    smallest among ties; None when ``phi`` holds the empty clause."""
    if phi.has_empty:
        return None
    return _assignment(phi.var_count, minimum_hitting_set(phi.clauses, deadline))


def optimum_size(phi: ClauseSet, deadline: Optional[float] = None) -> Optional[int]:
    sol = solve_maxsat(phi, deadline)
    return None if sol is None else sum(sol.values())


def check_optimal(phi: ClauseSet, a: Assignment, deadline: Optional[float] = None) -> bool:
    return sum(a.values()) == optimum_size(phi, deadline)
