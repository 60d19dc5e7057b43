"""Automated data-race repair for MiniMP, a small barrier-synchronized language."""

from .emit import apply_edits, emit_program, emit_summary, finalize
from .engine import Budget, Outcome, RepairOutcome, Strategy, generate_clause, generate_repair_candidate, repair
from .frontend import MiniMPSyntaxError, ParseError, Program, UnsupportedConstruct, parse, parse_file
from .instrument import InstrumentedProgram, default_assignment, instrument
from .oracle import ResourceLimit, oracle_race_check
from .solver import ClauseSet, DuplicateClause, add_clause, check_optimal, solve_maxsat, solve_mhs
from .verifier import RaceTrace, VerificationResult, verify

__all__ = [
    "Budget", "ClauseSet", "DuplicateClause", "InstrumentedProgram", "MiniMPSyntaxError", "Outcome",
    "ParseError", "Program", "RaceTrace", "RepairOutcome", "ResourceLimit", "Strategy",
    "UnsupportedConstruct", "VerificationResult", "add_clause", "apply_edits", "check_optimal",
    "default_assignment", "emit_program", "emit_summary", "finalize", "generate_clause",
    "generate_repair_candidate", "instrument", "oracle_race_check", "parse", "parse_file", "repair",
    "solve_maxsat", "solve_mhs", "verify",
]
