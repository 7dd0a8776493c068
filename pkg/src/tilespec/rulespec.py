"""Rule files: parsing, canonical serialization and validation.

A rule file is line oriented. ``#`` starts a comment, tokens are separated by
whitespace and everything is case-sensitive. Every file begins with the
header::

    rule NAME
    kind symbolic|inflation|block|fusion|sadic|vector-fusion
    dim D
    alphabet TOKEN+

followed by a body that depends on the kind.

symbolic
    ``map X -> Y+`` once per alphabet symbol.
inflation
    the symbolic body, then ``lengths auto`` or ``lengths a=1.618 b=1``, and
    optionally a bare ``check-lengths`` line.
block
    ``size l_1 .. l_d`` then, per symbol, ``block X :`` followed by the rows of
    its image. Rows are written bottom row first (y = 0), each row left to
    right (x increasing); for d = 3 the y-rows of the z = 0 slice come first.
fusion
    sections ``level N`` (N = 1, 2, ... consecutively) and at most one final
    ``repeat`` section. Each section lists supertiles ``super NAME :`` with
    placements ``place NAME at i_1 .. i_d``. In ``level`` sections the vector
    is an explicit cell offset. In the ``repeat`` section it is a slot in a
    concatenation grid: the slot's cell offset is recomputed at every level
    from the extents of the constituents, so one section describes every
    later level (the same concatenation of n-supertiles at each level).
sadic
    ``sub NAME :`` followed by map lines, then
    ``directive NAME+ [cycle NAME+]``. The first directive entry is applied
    last. Level-0 letters are the header alphabet, level-(n+1) letters are the
    domain of the n-th directive substitution.
vector-fusion
    ``L a b c d`` (row major), ``k0 x y``, ``l0 x y``, ``seeds A B``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .errors import (
    DuplicateDefinition,
    RuleSemanticError,
    RuleSyntaxError,
    UnknownSymbol,
)

KINDS = ("symbolic", "inflation", "block", "fusion", "sadic", "vector-fusion")
LENGTH_RTOL = 1e-9

_INT_RE = re.compile(r"^[+-]?\d+$")


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        if not self.symbols:
            raise RuleSemanticError("alphabet must not be empty")
        seen = set()
        for s in self.symbols:
            if s in seen:
                raise DuplicateDefinition(s)
            seen.add(s)

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __contains__(self, token):
        return token in self.symbols

    def index(self, token: str) -> int:
        try:
            return self.symbols.index(token)
        except ValueError:
            raise UnknownSymbol(token) from None


# ---------------------------------------------------------------- payloads


@dataclass(frozen=True)
class SymbolicPayload:
    # images[j] is the word sigma(a_j) as alphabet indices
    images: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class InflationPayload:
    images: tuple[tuple[int, ...], ...]
    lengths: tuple[float, ...] | None  # None means ``lengths auto``
    check_lengths: bool = False


@dataclass(frozen=True)
class BlockPayload:
    size: tuple[int, ...]
    # blocks[j] lists the cells of S(a_j), x fastest, then y, then z
    blocks: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class Placement:
    constituent: str
    offset: tuple[int, ...]


@dataclass(frozen=True)
class FusionLevel:
    names: tuple[str, ...]
    supertiles: tuple[tuple[Placement, ...], ...]

    def supertile(self, name: str) -> tuple[Placement, ...]:
        return self.supertiles[self.names.index(name)]


@dataclass(frozen=True)
class FusionPayload:
    levels: tuple[FusionLevel, ...]
    repeat: FusionLevel | None = None


@dataclass(frozen=True)
class Substitution:
    name: str
    domain: tuple[str, ...]
    images: tuple[tuple[str, ...], ...]

    def image(self, token: str) -> tuple[str, ...]:
        return self.images[self.domain.index(token)]


@dataclass(frozen=True)
class SadicPayload:
    subs: tuple[Substitution, ...]
    prefix: tuple[str, ...]
    cycle: tuple[str, ...] = ()

    def sub(self, name: str) -> Substitution:
        for s in self.subs:
            if s.name == name:
                return s
        raise UnknownSymbol(name)

    def directive(self, n: int) -> str | None:
        """Name of the n-th substitution of the directive sequence, or None past a finite end."""
        if n < len(self.prefix):
            return self.prefix[n]
        if not self.cycle:
            return None
        return self.cycle[(n - len(self.prefix)) % len(self.cycle)]


@dataclass(frozen=True)
class VectorFusionPayload:
    L: tuple[tuple[int, int], tuple[int, int]]
    k0: tuple[int, int]
    l0: tuple[int, int]
    seeds: tuple[str, str]


@dataclass(frozen=True)
class RuleSpec:
    name: str
    kind: str
    dim: int
    alphabet: Alphabet
    payload: object

    @property
    def m(self) -> int:
        return len(self.alphabet)

    @property
    def images(self) -> tuple[tuple[int, ...], ...]:
        """sigma as index words, for the kinds that have one."""
        if self.kind in ("symbolic", "inflation"):
            return self.payload.images
        if self.kind == "block":
            return self.payload.blocks
        raise TypeError(f"rule kind {self.kind!r} has no single substitution")

    def is_constant_length(self) -> bool:
        if self.kind == "block":
            return True
        if self.kind in ("symbolic", "inflation"):
            return len({len(w) for w in self.payload.images}) == 1
        return False

    def constant_length(self) -> int:
        """q = |sigma(a)| for every a (K = l_1...l_d for blocks)."""
        if self.kind == "block":
            return math.prod(self.payload.size)
        if not self.is_constant_length():
            from .errors import NotConstantLength

            raise NotConstantLength(f"rule {self.name!r} is not of constant length")
        return len(self.payload.images[0])

    def word(self, tokens: str | Sequence[str]) -> tuple[int, ...]:
        """Translate tokens (or a string of one-character tokens) into alphabet indices."""
        if isinstance(tokens, str):
            tokens = tokens.split() if " " in tokens.strip() else list(tokens)
        return tuple(self.alphabet.index(t) for t in tokens)

    def spell(self, word) -> list[str]:
        return [self.alphabet.symbols[int(i)] for i in word]


# ---------------------------------------------------------------- parsing


@dataclass
class _Line:
    number: int
    tokens: list[tuple[str, int]]  # (text, 1-based column)

    @property
    def words(self) -> list[str]:
        return [t for t, _ in self.tokens]

    def col(self, i: int) -> int:
        if i < len(self.tokens):
            return self.tokens[i][1]
        if self.tokens:
            text, c = self.tokens[-1]
            return c + len(text)
        return 1


def _lex(text: str) -> list[_Line]:
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]
        if tokens:
            lines.append(_Line(number, tokens))
    return lines


class _Cursor:
    def __init__(self, lines: list[_Line], eof_line: int):
        self.lines = lines
        self.i = 0
        self.eof_line = eof_line

    def peek(self) -> _Line | None:
        return self.lines[self.i] if self.i < len(self.lines) else None

    def next(self, expected: str) -> _Line:
        line = self.peek()
        if line is None:
            raise RuleSyntaxError(self.eof_line, 1, expected, "end of file")
        self.i += 1
        return line

    def keyword(self, kw: str) -> _Line:
        line = self.next(f"'{kw}'")
        if line.words[0] != kw:
            raise RuleSyntaxError(line.number, line.col(0), f"'{kw}'", line.words[0])
        return line


def _int(line: _Line, i: int) -> int:
    if i >= len(line.tokens):
        raise RuleSyntaxError(line.number, line.col(i), "integer", "end of line")
    text = line.tokens[i][0]
    if not _INT_RE.match(text):
        raise RuleSyntaxError(line.number, line.col(i), "integer", text)
    return int(text)


def _float(line: _Line, text: str, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise RuleSyntaxError(line.number, col, "number", text) from None
    if not math.isfinite(value):
        raise RuleSyntaxError(line.number, col, "finite number", text)
    return value


def _arity(line: _Line, n: int, what: str):
    if len(line.tokens) != n:
        i = min(len(line.tokens), n)
        found = line.tokens[i][0] if i < len(line.tokens) else "end of line"
        raise RuleSyntaxError(line.number, line.col(i), what, found)


def _labelled(line: _Line, kw: str) -> str:
    """``kw NAME :`` or ``kw NAME:``; returns NAME."""
    words = line.words
    if len(words) == 3 and words[2] == ":":
        return words[1]
    if len(words) == 2 and words[1].endswith(":") and len(words[1]) > 1:
        return words[1][:-1]
    raise RuleSyntaxError(line.number, line.col(len(words)), f"'{kw} NAME :'", " ".join(words))


def _parse_map(line: _Line) -> tuple[str, tuple[str, ...]]:
    words = line.words
    if len(words) < 2:
        raise RuleSyntaxError(line.number, line.col(1), "symbol", "end of line")
    if len(words) < 3 or words[2] != "->":
        found = words[2] if len(words) > 2 else "end of line"
        raise RuleSyntaxError(line.number, line.col(2), "'->'", found)
    if len(words) < 4:
        raise RuleSyntaxError(line.number, line.col(3), "non-empty image word", "end of line")
    return words[1], tuple(words[3:])


def _parse_maps(cur: _Cursor, domain_known: Sequence[str] | None, codomain: Sequence[str] | None):
    """Consume consecutive ``map`` lines. Returns (domain order, images, line numbers)."""
    domain, images, numbers = [], [], []
    while (line := cur.peek()) is not None and line.words[0] == "map":
        cur.next("map")
        src, img = _parse_map(line)
        if domain_known is not None and src not in domain_known:
            raise UnknownSymbol(src, line.number)
        if src in domain:
            raise DuplicateDefinition(src, line.number)
        if codomain is not None:
            for t in img:
                if t not in codomain:
                    raise UnknownSymbol(t, line.number)
        domain.append(src)
        images.append(img)
        numbers.append(line.number)
    return domain, images, numbers


def _symbolic_images(cur: _Cursor, alphabet: Alphabet) -> tuple[tuple[int, ...], ...]:
    domain, images, _ = _parse_maps(cur, alphabet.symbols, alphabet.symbols)
    if not domain:
        line = cur.peek()
        n = line.number if line else cur.eof_line
        raise RuleSyntaxError(n, 1, "'map'", line.words[0] if line else "end of file")
    missing = [s for s in alphabet if s not in domain]
    if missing:
        raise RuleSemanticError(f"no map given for symbol(s) {', '.join(missing)}")
    by_src = dict(zip(domain, images))
    return tuple(tuple(alphabet.index(t) for t in by_src[s]) for s in alphabet)


def _parse_lengths(cur: _Cursor, alphabet: Alphabet):
    line = cur.keyword("lengths")
    words = line.words
    if len(words) == 2 and words[1] == "auto":
        lengths = None
    else:
        if len(words) < 2:
            raise RuleSyntaxError(line.number, line.col(1), "'auto' or SYM=LENGTH", "end of line")
        found = {}
        for i, (text, col) in enumerate(line.tokens[1:], start=1):
            if "=" not in text:
                raise RuleSyntaxError(line.number, col, "SYM=LENGTH", text)
            sym, val = text.split("=", 1)
            if sym not in alphabet:
                raise UnknownSymbol(sym, line.number)
            if sym in found:
                raise DuplicateDefinition(sym, line.number)
            found[sym] = _float(line, val, col + len(sym) + 1)
        missing = [s for s in alphabet if s not in found]
        if missing:
            raise RuleSemanticError(f"no length given for symbol(s) {', '.join(missing)}")
        lengths = tuple(found[s] for s in alphabet)
    check = False
    if (nxt := cur.peek()) is not None and nxt.words[0] == "check-lengths":
        _arity(nxt, 1, "end of line")
        cur.next("check-lengths")
        check = True
    return lengths, check


def _parse_block(cur: _Cursor, alphabet: Alphabet, dim: int) -> BlockPayload:
    line = cur.keyword("size")
    _arity(line, dim + 1, f"{dim} integer extents")
    size = tuple(_int(line, i) for i in range(1, dim + 1))
    for i, s in enumerate(size, start=1):
        if s < 1:
            raise RuleSyntaxError(line.number, line.col(i), "positive integer", str(s))
    nrows = math.prod(size[1:])
    found: dict[str, tuple[int, ...]] = {}
    while (line := cur.peek()) is not None:
        if line.words[0] != "block":
            raise RuleSyntaxError(line.number, line.col(0), "'block'", line.words[0])
        cur.next("block")
        sym = _labelled(line, "block")
        if sym not in alphabet:
            raise UnknownSymbol(sym, line.number)
        if sym in found:
            raise DuplicateDefinition(sym, line.number)
        cells: list[int] = []
        for _ in range(nrows):
            row = cur.next(f"row of {size[0]} symbols")
            if row.words[0] in ("block",):
                raise RuleSyntaxError(row.number, row.col(0), f"row of {size[0]} symbols", row.words[0])
            _arity(row, size[0], f"row of {size[0]} symbols")
            for t in row.words:
                if t not in alphabet:
                    raise UnknownSymbol(t, row.number)
                cells.append(alphabet.index(t))
        found[sym] = tuple(cells)
    missing = [s for s in alphabet if s not in found]
    if missing:
        raise RuleSemanticError(f"no block given for symbol(s) {', '.join(missing)}")
    return BlockPayload(size, tuple(found[s] for s in alphabet))


def _parse_fusion(cur: _Cursor, alphabet: Alphabet, dim: int) -> FusionPayload:
    levels: list[FusionLevel] = []
    repeat = None
    sections: list[tuple[_Line, list]] = []
    while (line := cur.peek()) is not None:
        cur.next("section")
        if repeat is not None:
            raise RuleSyntaxError(line.number, line.col(0), "end of file after 'repeat' section", line.words[0])
        if line.words[0] == "level":
            _arity(line, 2, "level number")
            n = _int(line, 1)
            if n != len(levels) + 1:
                raise RuleSyntaxError(line.number, line.col(1), f"level {len(levels) + 1}", str(n))
        elif line.words[0] == "repeat":
            _arity(line, 1, "end of line")
        else:
            raise RuleSyntaxError(line.number, line.col(0), "'level' or 'repeat'", line.words[0])
        names: list[str] = []
        tiles: list[tuple[Placement, ...]] = []
        while (sl := cur.peek()) is not None and sl.words[0] == "super":
            cur.next("super")
            name = _labelled(sl, "super")
            if name in names:
                raise DuplicateDefinition(name, sl.number)
            places = []
            while (pl := cur.peek()) is not None and pl.words[0] == "place":
                cur.next("place")
                _arity(pl, 3 + dim, f"'place NAME at' and {dim} integers")
                if pl.words[2] != "at":
                    raise RuleSyntaxError(pl.number, pl.col(2), "'at'", pl.words[2])
                off = tuple(_int(pl, i) for i in range(3, 3 + dim))
                places.append(Placement(pl.words[1], off))
                sections.append((pl, []))
            if not places:
                nxt = cur.peek()
                raise RuleSyntaxError(
                    nxt.number if nxt else cur.eof_line, 1, "'place'", nxt.words[0] if nxt else "end of file"
                )
            names.append(name)
            tiles.append(tuple(places))
        if not names:
            nxt = cur.peek()
            raise RuleSyntaxError(nxt.number if nxt else cur.eof_line, 1, "'super'", nxt.words[0] if nxt else "end of file")
        section = FusionLevel(tuple(names), tuple(tiles))
        if line.words[0] == "repeat":
            repeat = section
        else:
            levels.append(section)
    if not levels and repeat is None:
        raise RuleSyntaxError(cur.eof_line, 1, "'level' or 'repeat'", "end of file")
    known = set(alphabet.symbols)
    for lev in levels + ([repeat] if repeat else []):
        known.update(lev.names)
    for pl, _ in sections:
        if pl.words[1] not in known:
            raise UnknownSymbol(pl.words[1], pl.number)
    return FusionPayload(tuple(levels), repeat)


def _parse_sadic(cur: _Cursor, alphabet: Alphabet) -> SadicPayload:
    subs: list[Substitution] = []
    while (line := cur.peek()) is not None and line.words[0] == "sub":
        cur.next("sub")
        name = _labelled(line, "sub")
        if any(s.name == name for s in subs):
            raise DuplicateDefinition(name, line.number)
        domain, images, _ = _parse_maps(cur, None, None)
        if not domain:
            nxt = cur.peek()
            raise RuleSyntaxError(nxt.number if nxt else cur.eof_line, 1, "'map'", nxt.words[0] if nxt else "end of file")
        subs.append(Substitution(name, tuple(domain), tuple(images)))
    if not subs:
        line = cur.peek()
        raise RuleSyntaxError(line.number if line else cur.eof_line, 1, "'sub'", line.words[0] if line else "end of file")
    line = cur.keyword("directive")
    words = line.words[1:]
    if "cycle" in words:
        cut = words.index("cycle")
        prefix, cycle = words[:cut], words[cut + 1 :]
        if not cycle:
            raise RuleSyntaxError(line.number, line.col(len(line.words)), "substitution name after 'cycle'", "end of line")
    else:
        prefix, cycle = words, []
    if not prefix and not cycle:
        raise RuleSyntaxError(line.number, line.col(1), "substitution name", "end of line")
    names = {s.name for s in subs}
    for w in prefix + cycle:
        if w not in names:
            raise UnknownSymbol(w, line.number)
    return SadicPayload(tuple(subs), tuple(prefix), tuple(cycle))


def _parse_vector_fusion(cur: _Cursor, alphabet: Alphabet) -> VectorFusionPayload:
    line = cur.keyword("L")
    _arity(line, 5, "4 integers")
    a, b, c, d = (_int(line, i) for i in range(1, 5))
    line = cur.keyword("k0")
    _arity(line, 3, "2 integers")
    k0 = (_int(line, 1), _int(line, 2))
    line = cur.keyword("l0")
    _arity(line, 3, "2 integers")
    l0 = (_int(line, 1), _int(line, 2))
    line = cur.keyword("seeds")
    _arity(line, 3, "2 seed names")
    seeds = (line.words[1], line.words[2])
    for s in seeds:
        if s not in alphabet:
            raise UnknownSymbol(s, line.number)
    if seeds[0] == seeds[1]:
        raise DuplicateDefinition(seeds[1], line.number)
    return VectorFusionPayload(((a, b), (c, d)), k0, l0, seeds)


def parse_rule_file(text: str) -> RuleSpec:
    """Parse rule-file text into a RuleSpec.

    Raises RuleSyntaxError for grammar violations and UnknownSymbol,
    DuplicateDefinition or RuleSemanticError for ill-formed content.
    """
    lines = _lex(text)
    cur = _Cursor(lines, eof_line=len(text.splitlines()) + 1)

    line = cur.keyword("rule")
    _arity(line, 2, "rule name")
    name = line.words[1]

    line = cur.keyword("kind")
    _arity(line, 2, "rule kind")
    kind = line.words[1]
    if kind not in KINDS:
        raise RuleSyntaxError(line.number, line.col(1), "one of " + ", ".join(KINDS), kind)

    line = cur.keyword("dim")
    _arity(line, 2, "dimension")
    dim = _int(line, 1)
    if dim < 1:
        raise RuleSyntaxError(line.number, line.col(1), "positive integer", str(dim))

    line = cur.keyword("alphabet")
    if len(line.words) < 2:
        raise RuleSyntaxError(line.number, line.col(1), "at least one symbol", "end of line")
    seen = set()
    for t in line.words[1:]:
        if t in seen:
            raise DuplicateDefinition(t, line.number)
        seen.add(t)
    alphabet = Alphabet(tuple(line.words[1:]))

    if kind in ("symbolic", "inflation", "sadic") and dim != 1:
        raise RuleSemanticError(f"kind {kind} requires dim 1, got {dim}")
    if kind == "vector-fusion" and dim != 2:
        raise RuleSemanticError(f"kind vector-fusion requires dim 2, got {dim}")
    if kind == "vector-fusion" and len(alphabet) != 2:
        raise RuleSemanticError("kind vector-fusion needs exactly two symbols")

    if kind == "symbolic":
        payload = SymbolicPayload(_symbolic_images(cur, alphabet))
    elif kind == "inflation":
        images = _symbolic_images(cur, alphabet)
        lengths, check = _parse_lengths(cur, alphabet)
        payload = InflationPayload(images, lengths, check)
    elif kind == "block":
        payload = _parse_block(cur, alphabet, dim)
    elif kind == "fusion":
        payload = _parse_fusion(cur, alphabet, dim)
    elif kind == "sadic":
        payload = _parse_sadic(cur, alphabet)
    else:
        payload = _parse_vector_fusion(cur, alphabet)

    if (extra := cur.peek()) is not None:
        raise RuleSyntaxError(extra.number, extra.col(0), "end of file", extra.words[0])
    return RuleSpec(name, kind, dim, alphabet, payload)


def load_rule(path) -> RuleSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_rule_file(fh.read())


# ---------------------------------------------------------------- serialization


def _fmt_float(x: float) -> str:
    return repr(float(x))


def serialize(rule: RuleSpec) -> str:
    """Canonical text form: fixed statement order, single spaces, no comments."""
    sym = rule.alphabet.symbols
    out = [
        f"rule {rule.name}",
        f"kind {rule.kind}",
        f"dim {rule.dim}",
        "alphabet " + " ".join(sym),
    ]
    p = rule.payload
    if rule.kind in ("symbolic", "inflation"):
        for j, img in enumerate(p.images):
            out.append(f"map {sym[j]} -> " + " ".join(sym[i] for i in img))
    if rule.kind == "inflation":
        if p.lengths is None:
            out.append("lengths auto")
        else:
            out.append("lengths " + " ".join(f"{s}={_fmt_float(v)}" for s, v in zip(sym, p.lengths)))
        if p.check_lengths:
            out.append("check-lengths")
    elif rule.kind == "block":
        out.append("size " + " ".join(map(str, p.size)))
        w = p.size[0]
        for j, cells in enumerate(p.blocks):
            out.append(f"block {sym[j]} :")
            for r in range(0, len(cells), w):
                out.append(" ".join(sym[i] for i in cells[r : r + w]))
    elif rule.kind == "fusion":
        sections = [(f"level {n}", lev) for n, lev in enumerate(p.levels, start=1)]
        if p.repeat is not None:
            sections.append(("repeat", p.repeat))
        for head, lev in sections:
            out.append(head)
            for name, places in zip(lev.names, lev.supertiles):
                out.append(f"super {name} :")
                for pl in places:
                    out.append(f"place {pl.constituent} at " + " ".join(map(str, pl.offset)))
    elif rule.kind == "sadic":
        for s in p.subs:
            out.append(f"sub {s.name} :")
            for src, img in zip(s.domain, s.images):
                out.append(f"map {src} -> " + " ".join(img))
        line = "directive " + " ".join(p.prefix)
        if p.cycle:
            line = (line + " cycle " + " ".join(p.cycle)).replace("directive  ", "directive ")
        out.append(line)
    elif rule.kind == "vector-fusion":
        (a, b), (c, d) = p.L
        out.append(f"L {a} {b} {c} {d}")
        out.append(f"k0 {p.k0[0]} {p.k0[1]}")
        out.append(f"l0 {p.l0[0]} {p.l0[1]}")
        out.append(f"seeds {p.seeds[0]} {p.seeds[1]}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    location: str
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "issues": [
                {"severity": i.severity, "location": i.location, "code": i.code, "message": i.message}
                for i in self.issues
            ],
        }


def _neighbours(c: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    for k in range(len(c)):
        for step in (-1, 1):
            yield c[:k] + (c[k] + step,) + c[k + 1 :]


def is_edge_connected(cells) -> bool:
    cells = set(cells)
    if not cells:
        return False
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        for nb in _neighbours(stack.pop()):
            if nb in cells and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(cells)


def is_simply_connected(cells) -> bool:
    """Edge-connected 2-D cell set whose complement has no bounded component."""
    cells = set(cells)
    if not is_edge_connected(cells):
        return False
    if not cells or len(next(iter(cells))) != 2:
        return True
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    x0, x1, y0, y1 = min(xs) - 1, max(xs) + 1, min(ys) - 1, max(ys) + 1
    start = (x0, y0)
    seen = {start}
    stack = [start]
    while stack:
        for nb in _neighbours(stack.pop()):
            if x0 <= nb[0] <= x1 and y0 <= nb[1] <= y1 and nb not in cells and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) + len(cells) == (x1 - x0 + 1) * (y1 - y0 + 1)


def _validate_fusion(rule: RuleSpec, issues: list[Issue]) -> None:
    from .supertile import fusion_cells_by_level  # geometry lives with generation

    p: FusionPayload = rule.payload
    prev = rule.alphabet.symbols
    sections = [(f"level {n}", lev) for n, lev in enumerate(p.levels, start=1)]
    if p.repeat is not None:
        sections.append(("repeat", p.repeat))
    for where, lev in sections:
        for name, places in zip(lev.names, lev.supertiles):
            loc = f"{where}, super {name}"
            for pl in places:
                if pl.constituent not in prev:
                    issues.append(
                        Issue("error", loc, "UnknownConstituent", f"{pl.constituent!r} is not a supertile of the previous level")
                    )
            offs = [pl.offset for pl in places]
            if len(set(offs)) != len(offs):
                issues.append(Issue("error", loc, "OverlappingPlacement", "two constituents placed at the same offset"))
            if where == "repeat" and len(set(offs)) == len(offs) and not is_edge_connected(offs):
                issues.append(Issue("error", loc, "DisconnectedSupport", "repeat slots are not edge-connected"))
        if where == "repeat" and set(lev.names) != set(prev):
            issues.append(
                Issue("error", where, "RepeatNotClosed", "repeat supertile names must equal the names of the level it follows")
            )
        prev = lev.names
    if any(i.severity == "error" for i in issues):
        return
    depth = len(p.levels) + (2 if p.repeat is not None else 0)
    try:
        by_level = fusion_cells_by_level(rule, depth, check=False)
    except Exception as exc:  # geometry problems are reported, never raised
        issues.append(Issue("error", "geometry", type(exc).__name__, str(exc)))
        return
    for n, tiles in enumerate(by_level):
        if n == 0:
            continue
        where = f"level {n}" if n <= len(p.levels) else f"repeat (level {n})"
        for name, (cells, collided) in tiles.items():
            loc = f"{where}, super {name}"
            if collided:
                issues.append(Issue("error", loc, "OverlappingPlacement", "constituents share a cell"))
                continue
            if not is_edge_connected(cells):
                issues.append(Issue("error", loc, "DisconnectedSupport", "support is not edge-connected"))
            elif rule.dim == 2 and not is_simply_connected(cells):
                issues.append(Issue("warning", loc, "NotADisk", "support is connected but has holes"))


def _validate_sadic(rule: RuleSpec, issues: list[Issue]) -> None:
    p: SadicPayload = rule.payload
    used = set(p.prefix) | set(p.cycle)
    for s in p.subs:
        if s.name not in used:
            issues.append(Issue("warning", f"sub {s.name}", "UnusedSubstitution", "never referenced by the directive"))
    seq = list(p.prefix) + list(p.cycle)
    pairs = list(zip(seq, seq[1:]))
    if p.cycle:
        pairs.append((p.cycle[-1], p.cycle[0]))
    first = p.sub(seq[0])
    bad = sorted({t for img in first.images for t in img if t not in rule.alphabet})
    if bad:
        issues.append(Issue("error", f"sub {first.name}", "AlphabetMismatch", f"images use {bad} outside the level-0 alphabet"))
    for n, (outer, inner) in enumerate(pairs):
        so, si = p.sub(outer), p.sub(inner)
        bad = sorted({t for img in si.images for t in img if t not in so.domain})
        if bad:
            issues.append(
                Issue(
                    "error",
                    f"directive {outer} -> {inner}",
                    "AlphabetMismatch",
                    f"images of {inner} use {bad}, not in the domain of {outer}",
                )
            )


def _validate_vector_fusion(rule: RuleSpec, issues: list[Issue]) -> None:
    from .supertile import vector_fusion_states

    p: VectorFusionPayload = rule.payload
    (a, b), (c, d) = p.L
    if a * d - b * c == 0:
        issues.append(Issue("error", "L", "SingularMatrix", "expansion matrix L is singular"))
        return
    if p.k0[0] * p.l0[1] - p.k0[1] * p.l0[0] == 0:
        issues.append(Issue("error", "k0/l0", "DependentVectors", "initial translations are linearly dependent"))
        return
    try:
        states = vector_fusion_states(rule, 4)
    except Exception as exc:
        issues.append(Issue("error", "geometry", type(exc).__name__, str(exc)))
        return
    for st in states[1:]:
        for label, patch in (("A", st.A), ("B", st.B)):
            if not is_edge_connected(patch.cells):
                issues.append(Issue("error", f"level {st.level} {label}", "DisconnectedSupport", "support is not edge-connected"))


def validate(rule: RuleSpec) -> ValidationReport:
    """Check the per-kind invariants. Problems are returned as issues, never raised."""
    issues: list[Issue] = []
    sym = rule.alphabet.symbols
    if rule.kind in ("symbolic", "inflation", "block"):
        images = rule.images
        reached = {i for img in images for i in img}
        for j, s in enumerate(sym):
            if j not in reached and len(sym) > 1:
                issues.append(Issue("warning", f"symbol {s}", "NeverProduced", "symbol never appears in any image"))
    if rule.kind == "block":
        for k, l in enumerate(rule.payload.size, start=1):
            if l < 2:
                issues.append(Issue("error", "size", "SizeTooSmall", f"extent l_{k} = {l} must be at least 2"))
    if rule.kind == "inflation":
        p: InflationPayload = rule.payload
        if p.lengths is not None:
            for s, v in zip(sym, p.lengths):
                if v <= 0:
                    issues.append(Issue("error", f"lengths {s}", "NonPositiveLength", f"length {v} must be positive"))
            if p.check_lengths and all(v > 0 for v in p.lengths):
                from .transition import perron_data, transition_matrix

                try:
                    theta = perron_data(transition_matrix(rule)).theta
                except Exception as exc:
                    issues.append(Issue("error", "lengths", type(exc).__name__, str(exc)))
                else:
                    for j, s in enumerate(sym):
                        total = sum(p.lengths[i] for i in p.images[j])
                        want = theta * p.lengths[j]
                        if abs(total - want) > LENGTH_RTOL * abs(want):
                            issues.append(
                                Issue(
                                    "error",
                                    f"lengths {s}",
                                    "LengthMismatch",
                                    f"|S(t_{s})| = {total!r} but lambda*|t_{s}| = {want!r}",
                                )
                            )
    if rule.kind == "fusion":
        _validate_fusion(rule, issues)
    if rule.kind == "sadic":
        _validate_sadic(rule, issues)
    if rule.kind == "vector-fusion":
        _validate_vector_fusion(rule, issues)
    return ValidationReport(tuple(issues))
