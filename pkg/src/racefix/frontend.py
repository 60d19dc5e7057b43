"""MiniMP front-end: a line-oriented toy language for barrier-synchronized programs.

One statement per line. Supported forms::

    program NAME;                       (optional, first statement)
    shared int NAME[LEN];
    parallel(N) { ... }                 (N threads, index symbol ``tid``)
    parallel_for(N) [ordered] { ... }   (N iterations, index symbol ``i``)
    barrier;                            (parallel only)
    ordered { ... }                     (parallel_for with ordered clause only)
    LOCAL = ARR[IDX];                   read
    ARR[IDX] = EXPR;                    write
    ARR[IDX1] = ARR[IDX2];              read then write on one line
    LOCAL = EXPR;  /  compute;          local computation

``//`` starts a comment. Indices are ``sym``, ``sym + c``, ``sym - c`` or a
non-negative constant.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union


@dataclass(frozen=True, order=True)
class SourceLoc:
    line: int
    col: int = 1

    def __post_init__(self) -> None:
        if self.line < 1 or self.col < 1:
            raise ValueError(f"invalid source location {self.line}:{self.col}")

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class ParseError(Exception):
    """Base class for structured front-end errors."""

    def __init__(self, loc: SourceLoc, message: str):
        super().__init__(f"{loc}: {message}")
        self.loc = loc
        self.message = message


class MiniMPSyntaxError(ParseError):
    pass


class UnsupportedConstruct(ParseError):
    def __init__(self, loc: SourceLoc, name: str):
        super().__init__(loc, f"unsupported construct '{name}'")
        self.name = name


class RegionKind(Enum):
    PARALLEL = "parallel"
    PARALLEL_FOR = "parallel_for"

    @property
    def symbol(self) -> str:
        return "tid" if self is RegionKind.PARALLEL else "i"


class Op(Enum):
    READ = "read"
    WRITE = "write"
    READ_WRITE = "read_write"
    COMPUTE = "compute"
    BARRIER = "barrier"
    ORDERED_BEGIN = "ordered_begin"
    ORDERED_END = "ordered_end"


CONSTRUCT_OPS = frozenset({Op.BARRIER, Op.ORDERED_BEGIN, Op.ORDERED_END})
SHARED_OPS = frozenset({Op.READ, Op.WRITE, Op.READ_WRITE})


@dataclass(frozen=True)
class Index:
    """Affine index ``symbol + offset``; ``symbol`` is None for a constant."""

    symbol: Optional[str]
    offset: int

    def cell(self, worker: int) -> int:
        return self.offset if self.symbol is None else worker + self.offset

    def cells(self, count: int) -> range:
        if self.symbol is None:
            return range(self.offset, self.offset + 1)
        return range(self.offset, self.offset + count)

    def __str__(self) -> str:
        if self.symbol is None:
            return str(self.offset)
        if self.offset == 0:
            return self.symbol
        sign = "+" if self.offset > 0 else "-"
        return f"{self.symbol} {sign} {abs(self.offset)}"


@dataclass(frozen=True)
class Stmt:
    op: Op
    text: str
    array: Optional[str] = None
    read_index: Optional[Index] = None
    write_index: Optional[Index] = None
    loc: SourceLoc = field(default=SourceLoc(1), compare=False)
    # true for constructs created by repair rather than read from source
    synthetic: bool = field(default=False, compare=False)

    @property
    def is_shared(self) -> bool:
        return self.op in SHARED_OPS

    @property
    def is_construct(self) -> bool:
        return self.op in CONSTRUCT_OPS


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    length: int


@dataclass(frozen=True)
class Region:
    kind: RegionKind
    count: int
    body: tuple[Stmt, ...]
    ordered_clause: bool = False
    loc: SourceLoc = field(default=SourceLoc(1), compare=False)
    end_line: int = field(default=1, compare=False)

    @property
    def shared_stmts(self) -> list[Stmt]:
        return [s for s in self.body if s.is_shared]


@dataclass(frozen=True)
class Program:
    name: str
    decls: tuple[ArrayDecl, ...]
    regions: tuple[Region, ...]
    # physical lines (with line endings) of the text this program was parsed from
    source_lines: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def array(self, name: str) -> ArrayDecl:
        for d in self.decls:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def source(self) -> str:
        return "".join(self.source_lines)


UNSUPPORTED_WORDS = ("sections", "section", "simd", "task", "taskloop", "taskwait", "teams", "target")
_UNSUPPORTED_RE = re.compile(r"\b(" + "|".join(UNSUPPORTED_WORDS) + r")\b")
_IDENT = r"[A-Za-z_]\w*"
_KEYWORDS = frozenset({
    "program", "shared", "int", "parallel", "parallel_for", "barrier", "ordered", "compute", "tid", "i",
})

_PROGRAM_RE = re.compile(rf"^program\s+({_IDENT})\s*;$")
_DECL_RE = re.compile(rf"^shared\s+int\s+({_IDENT})\s*\[\s*(\d+)\s*\]\s*;$")
_REGION_RE = re.compile(r"^(parallel_for|parallel)\s*\(\s*(\d+)\s*\)\s*(ordered\s*)?\{$")
_ACCESS_RE = re.compile(rf"({_IDENT})\s*\[([^\[\]]*)\]")
_READ_RE = re.compile(rf"^({_IDENT})\s*=\s*({_IDENT})\s*\[([^\[\]]*)\]\s*;$")
_RW_RE = re.compile(rf"^({_IDENT})\s*\[([^\[\]]*)\]\s*=\s*({_IDENT})\s*\[([^\[\]]*)\]\s*;$")
_WRITE_RE = re.compile(rf"^({_IDENT})\s*\[([^\[\]]*)\]\s*=\s*([^\[\];]+);$")
_LOCAL_RE = re.compile(rf"^({_IDENT})\s*=\s*([^\[\];]+);$")
_EXPR_RE = re.compile(rf"^\s*(?:{_IDENT}|\d+)(?:\s*[+-]\s*(?:{_IDENT}|\d+))*\s*$")
_SYM_INDEX_RE = re.compile(rf"^\s*({_IDENT})\s*(?:([+-])\s*(\d+))?\s*$")
_CONST_INDEX_RE = re.compile(r"^\s*(\d+)\s*$")


def _strip_comment(line: str) -> str:
    pos = line.find("//")
    return line if pos < 0 else line[:pos]


def _first_col(line: str) -> int:
    return len(line) - len(line.lstrip()) + 1


def _scan_unsupported(lines: list[str]) -> None:
    for n, raw in enumerate(lines, start=1):
        code = _strip_comment(raw.rstrip("\r\n"))
        m = _UNSUPPORTED_RE.search(code)
        if m:
            raise UnsupportedConstruct(SourceLoc(n, m.start() + 1), m.group(1))
        star = code.find("*")
        if star >= 0:
            raise UnsupportedConstruct(SourceLoc(n, star + 1), "pointer")


class _Parser:
    def __init__(self, lines: list[str], name: str):
        self.lines = lines
        self.name = name
        self.decls: dict[str, ArrayDecl] = {}
        self.regions: list[Region] = []

    def error(self, n: int, message: str, col: int = 1) -> MiniMPSyntaxError:
        return MiniMPSyntaxError(SourceLoc(n, col), message)

    def run(self) -> Program:
        region_header: Optional[tuple[int, int, RegionKind, int, bool]] = None
        body: list[Stmt] = []
        ordered_open: Optional[int] = None
        ordered_seen = False
        seen_anything = False

        for n, raw in enumerate(self.lines, start=1):
            code = _strip_comment(raw.rstrip("\r\n")).strip()
            if not code:
                continue
            col = _first_col(_strip_comment(raw))
            loc = SourceLoc(n, col)

            if region_header is None:
                m = _PROGRAM_RE.match(code)
                if m:
                    if seen_anything:
                        raise self.error(n, "'program' must be the first statement", col)
                    self.name = m.group(1)
                    seen_anything = True
                    continue
                seen_anything = True
                m = _DECL_RE.match(code)
                if m:
                    self._declare(n, col, m.group(1), int(m.group(2)))
                    continue
                m = _REGION_RE.match(code)
                if m:
                    kind = RegionKind(m.group(1))
                    count = int(m.group(2))
                    if count < 1:
                        raise self.error(n, "thread/iteration count must be positive", col)
                    has_clause = m.group(3) is not None
                    if has_clause and kind is RegionKind.PARALLEL:
                        raise self.error(n, "'ordered' clause is only valid on parallel_for", col)
                    region_header = (n, col, kind, count, has_clause)
                    body, ordered_open, ordered_seen = [], None, False
                    continue
                if code == "}":
                    raise self.error(n, "unmatched '}'", col)
                raise self.error(n, f"expected declaration or region, got {code!r}", col)

            header_line, header_col, kind, count, has_clause = region_header
            if code == "}":
                if ordered_open is not None:
                    body.append(Stmt(Op.ORDERED_END, "}", loc=loc))
                    ordered_open = None
                    continue
                if all(s.is_construct for s in body):
                    raise self.error(header_line, "empty region", header_col)
                self.regions.append(Region(
                    kind, count, tuple(body), has_clause, SourceLoc(header_line, header_col), n,
                ))
                region_header = None
                continue
            if _REGION_RE.match(code):
                raise self.error(n, "nested regions are not supported", col)
            body.append(self._stmt(n, col, code, kind, count, has_clause, ordered_open, ordered_seen))
            if body[-1].op is Op.ORDERED_BEGIN:
                ordered_open, ordered_seen = n, True

        if region_header is not None:
            raise self.error(region_header[0], "region is not closed", region_header[1])
        return Program(self.name, tuple(self.decls.values()), tuple(self.regions), tuple(self.lines))

    def _declare(self, n: int, col: int, name: str, length: int) -> None:
        if name in _KEYWORDS:
            raise self.error(n, f"'{name}' is reserved", col)
        if name in self.decls:
            raise self.error(n, f"array '{name}' declared twice", col)
        if length < 1:
            raise self.error(n, "array length must be positive", col)
        self.decls[name] = ArrayDecl(name, length)

    def _stmt(self, n, col, code, kind, count, has_clause, ordered_open, ordered_seen) -> Stmt:
        loc = SourceLoc(n, col)
        if code == "barrier;":
            if kind is not RegionKind.PARALLEL:
                raise self.error(n, "barrier is not allowed inside parallel_for", col)
            return Stmt(Op.BARRIER, code, loc=loc)
        if re.match(r"^ordered\s*\{$", code):
            if kind is not RegionKind.PARALLEL_FOR:
                raise self.error(n, "ordered region outside parallel_for", col)
            if not has_clause:
                raise self.error(n, "ordered region requires the loop's ordered clause", col)
            if ordered_open is not None:
                raise self.error(n, "nested ordered regions", col)
            if ordered_seen:
                raise self.error(n, "only one ordered region per loop", col)
            return Stmt(Op.ORDERED_BEGIN, "ordered {", loc=loc)
        if code == "compute;":
            return Stmt(Op.COMPUTE, code, loc=loc)

        m = _RW_RE.match(code)
        if m:
            dst, dst_idx, src, src_idx = m.groups()
            if dst != src:
                raise self.error(n, "a read-write line must use a single array", col)
            self._check_array(n, col, dst)
            return Stmt(
                Op.READ_WRITE, code, dst,
                read_index=self._index(n, col, src, src_idx, kind, count),
                write_index=self._index(n, col, dst, dst_idx, kind, count),
                loc=loc,
            )
        m = _READ_RE.match(code)
        if m:
            local, arr, idx = m.groups()
            self._check_local(n, col, local)
            self._check_array(n, col, arr)
            return Stmt(Op.READ, code, arr, read_index=self._index(n, col, arr, idx, kind, count), loc=loc)
        m = _WRITE_RE.match(code)
        if m:
            arr, idx, expr = m.groups()
            self._check_array(n, col, arr)
            self._check_expr(n, col, expr, kind)
            return Stmt(Op.WRITE, code, arr, write_index=self._index(n, col, arr, idx, kind, count), loc=loc)
        m = _LOCAL_RE.match(code)
        if m:
            self._check_local(n, col, m.group(1))
            self._check_expr(n, col, m.group(2), kind)
            return Stmt(Op.COMPUTE, code, loc=loc)
        if _ACCESS_RE.search(code):
            raise self.error(n, f"unsupported shared-array access form {code!r}", col)
        raise self.error(n, f"cannot parse statement {code!r}", col)

    def _check_array(self, n: int, col: int, name: str) -> None:
        if name not in self.decls:
            raise self.error(n, f"undeclared array '{name}'", col)

    def _check_local(self, n: int, col: int, name: str) -> None:
        if name in _KEYWORDS or name in self.decls:
            raise self.error(n, f"'{name}' cannot be assigned as a local", col)

    def _check_expr(self, n: int, col: int, expr: str, kind: RegionKind) -> None:
        if not _EXPR_RE.match(expr):
            raise self.error(n, f"unsupported expression {expr.strip()!r}", col)
        for word in re.findall(_IDENT, expr):
            if word in self.decls:
                raise self.error(n, f"array '{word}' used without an index", col)
            if word in ("tid", "i") and word != kind.symbol:
                raise self.error(n, f"'{word}' is not defined in a {kind.value} region", col)

    def _index(self, n: int, col: int, arr: str, text: str, kind: RegionKind, count: int) -> Index:
        m = _CONST_INDEX_RE.match(text)
        if m:
            index = Index(None, int(m.group(1)))
        else:
            m = _SYM_INDEX_RE.match(text)
            if not m or m.group(1) != kind.symbol:
                raise self.error(n, f"index {text.strip()!r} must be '{kind.symbol} +/- c' or a constant", col)
            offset = int(m.group(3) or 0)
            index = Index(kind.symbol, -offset if m.group(2) == "-" else offset)
        cells = index.cells(count)
        length = self.decls[arr].length
        if cells.start < 0 or cells.stop > length:
            raise self.error(n, f"index {index} of '{arr}' leaves bounds [0, {length})", col)
        return index


def parse(source: Union[str, bytes], name: str = "main") -> Program:
    """Parse MiniMP source into a validated Program.

    Raises UnsupportedConstruct for out-of-scope OpenMP features (checked over
    the whole text first) and MiniMPSyntaxError for everything else.
    """
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            line = source[: exc.start].count(b"\n") + 1
            raise MiniMPSyntaxError(SourceLoc(line), "input is not valid UTF-8") from None
    if source.startswith("\ufeff"):
        source = source[1:]
    # str.splitlines also breaks on \v, \x1c etc.; only LF / CRLF / CR count here
    lines = re.findall(r"[^\r\n]*(?:\r\n|\n|\r)|[^\r\n]+$", source)
    _scan_unsupported(lines)
    return _Parser(lines, name).run()


def parse_file(path: Union[str, Path], name: Optional[str] = None) -> Program:
    path = Path(path)
    return parse(path.read_bytes(), name or path.name.split(".")[0])
