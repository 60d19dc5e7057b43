from hypothesis import given, settings

from racefix.frontend import parse
from racefix.instrument import VarKind, default_assignment, enabled, existing_assignment, instrument

from _support import load, program_sources


def test_race_gets_one_variable_per_shared_access():
    ip = load("race")
    assert [(v.name, v.loc.line) for v in ip.vars] == [("b1", 4), ("b2", 6)]
    assert all(v.kind is VarKind.BARRIER and not v.from_existing for v in ip.vars)
    assert [loc.line for loc in ip.shared_access_locs[0]] == [4, 6]


def test_parallel_for_variables_are_ordered_kind():
    ip = load("race_for")
    assert [v.loc.line for v in ip.vars] == [4, 6]
    assert all(v.kind is VarKind.ORDERED for v in ip.vars)


def test_ids_are_dense_across_regions():
    ip = load("multi_region")
    assert [v.id for v in ip.vars] == list(range(len(ip.vars)))
    assert len({v.region for v in ip.vars}) == 2


def test_base_has_no_constructs():
    ip = load("two_barriers")
    assert not any(s.is_construct for r in ip.base.regions for s in r.body)
    assert any(s.is_construct for r in ip.original.regions for s in r.body)


def test_existing_barriers_attach_to_the_next_access():
    ip = load("two_barriers")
    assert [(c.loc.line, ip.vars[c.var].loc.line) for c in ip.existing] == [(6, 7), (9, 10)]
    assert [v.from_existing for v in ip.vars] == [False, True, True]
    assert enabled(existing_assignment(ip)) == [1, 2]


def test_existing_ordered_region_records_its_end():
    ip = load("redundant_ordered")
    (c,) = ip.existing
    assert (c.loc.line, c.end_loc.line, ip.vars[c.var].loc.line) == (4, 6, 5)


def test_trailing_barrier_gets_a_position_only_variable():
    ip = instrument(parse("shared int a[4];\nparallel(2) {\n    a[tid] = 1;\n    barrier;\n}\n"))
    last = ip.vars[-1]
    assert last.position == len(ip.base.regions[0].body)
    assert last.loc.line == 4 and last.from_existing
    assert ip.var_at(0, last.position) is last


def test_default_assignment_is_all_false():
    ip = load("algo_barrier")
    assert default_assignment(ip) == {0: False, 1: False, 2: False, 3: False}


@settings(max_examples=200, deadline=None)
@given(program_sources())
def test_variable_count_is_bounded_by_statements(source):
    p = parse(source)
    ip = instrument(p)
    statements = sum(len(r.body) for r in p.regions)
    assert len(ip.vars) <= statements
    assert [v.id for v in ip.vars] == list(range(len(ip.vars)))


@settings(max_examples=200, deadline=None)
@given(program_sources())
def test_instrumentation_is_idempotent_on_the_base(source):
    ip = instrument(parse(source))
    again = instrument(ip.base)
    assert again.base == ip.base
    plain = [(v.loc, v.kind, v.region, v.position) for v in ip.vars if v.position < len(ip.base.regions[v.region].body)]
    assert [(v.loc, v.kind, v.region, v.position) for v in again.vars] == plain
