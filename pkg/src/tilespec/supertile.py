"""Supertile generation and language extraction.

Words are 1-D numpy arrays of alphabet indices. Blocks keep their cells in a
numpy array indexed ``[..., y, x]`` so that row 0 is the bottom row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlphabetMismatch,
    LevelOverflow,
    PatchNotFound,
    PlacementCollision,
    TilespecError,
    UnknownSymbol,
)
from .rulespec import RuleSpec, SadicPayload

DEFAULT_CAP = 10**8


def _dtype(m: int):
    return np.uint8 if m <= 255 else np.int32


def _letter(rule: RuleSpec, letter) -> int:
    if isinstance(letter, (int, np.integer)):
        if not 0 <= int(letter) < rule.m:
            raise UnknownSymbol(str(letter))
        return int(letter)
    return rule.alphabet.index(letter)


# ---------------------------------------------------------------- patch types


@dataclass(frozen=True, eq=False)
class Block:
    extents: tuple[int, ...]  # (l_1, ..., l_d), x first
    cells: np.ndarray  # shape extents[::-1]

    def __post_init__(self):
        if self.cells.shape != tuple(reversed(self.extents)):
            raise ValueError("cell array shape does not match extents")

    def __eq__(self, other):
        return isinstance(other, Block) and self.extents == other.extents and np.array_equal(self.cells, other.cells)

    def at(self, *coord: int) -> int:
        return int(self.cells[tuple(reversed(coord))])

    @property
    def size(self) -> int:
        return int(self.cells.size)

    def rows(self) -> list[list[int]]:
        """Rows bottom-up for a 2-D block (row 0 is y = 0)."""
        if len(self.extents) == 1:
            return [self.cells.tolist()]
        return self.cells.reshape(-1, self.extents[0]).tolist()


@dataclass(frozen=True, eq=False)
class IntervalPatch:
    symbols: np.ndarray
    lefts: np.ndarray
    lengths: np.ndarray

    @property
    def total_length(self) -> float:
        return float(self.lefts[-1] + self.lengths[-1])

    @property
    def tiles(self) -> list[tuple[int, float, float]]:
        return list(zip(self.symbols.tolist(), self.lefts.tolist(), self.lengths.tolist()))

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True, eq=False)
class LatticePatch:
    coords: np.ndarray  # (P, d), sorted lexicographically
    symbols: np.ndarray  # (P,)

    @classmethod
    def from_arrays(cls, coords, symbols, check: bool = True) -> "LatticePatch":
        coords = np.asarray(coords, dtype=np.int64)
        symbols = np.asarray(symbols)
        order = np.lexsort(coords.T[::-1])
        coords, symbols = coords[order], symbols[order]
        if check and len(coords) > 1 and np.any(np.all(coords[1:] == coords[:-1], axis=1)):
            raise PlacementCollision("two constituents write the same cell")
        return cls(coords, symbols)

    def __len__(self):
        return len(self.symbols)

    def __eq__(self, other):
        return (
            isinstance(other, LatticePatch)
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.symbols, other.symbols)
        )

    @property
    def cells(self) -> dict[tuple[int, ...], int]:
        return {tuple(c): int(s) for c, s in zip(self.coords.tolist(), self.symbols.tolist())}

    def translate(self, v) -> "LatticePatch":
        return LatticePatch(self.coords + np.asarray(v, dtype=np.int64), self.symbols)

    def extent(self) -> tuple[np.ndarray, np.ndarray]:
        return self.coords.min(axis=0), self.coords.max(axis=0)


@dataclass(frozen=True)
class VectorFusionState:
    level: int
    A: LatticePatch
    B: LatticePatch
    k: tuple[int, int]
    l: tuple[int, int]


# ---------------------------------------------------------------- symbolic words


def _ragged(images):
    lens = np.array([len(w) for w in images], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
    flat = np.array([i for w in images for i in w], dtype=np.int64)
    return flat, starts, lens


def _apply(word: np.ndarray, flat, starts, lens, dtype) -> np.ndarray:
    """One substitution step on an index array, vectorized."""
    w = word.astype(np.int64, copy=False)
    if lens.min() == lens.max():
        q = int(lens[0])
        table = flat.reshape(-1, q)
        return table[w].ravel().astype(dtype, copy=False)
    out_lens = lens[w]
    total = int(out_lens.sum())
    out_start = np.cumsum(out_lens) - out_lens
    idx = np.repeat(starts[w] - out_start, out_lens) + np.arange(total, dtype=np.int64)
    return flat[idx].astype(dtype, copy=False)


def _images_1d(rule: RuleSpec):
    if rule.kind in ("symbolic", "inflation"):
        return rule.payload.images
    if rule.kind == "block" and rule.dim == 1:
        return rule.payload.blocks
    raise TypeError(f"superwords need a 1-D substitution, got kind {rule.kind!r} in dim {rule.dim}")


def count_matrix(images, m: int) -> list[list[int]]:
    """M[i][j] = number of i in images[j], as Python ints."""
    M = [[0] * len(images) for _ in range(m)]
    for j, w in enumerate(images):
        for i in w:
            M[i][j] += 1
    return M


def superword_length(rule: RuleSpec, letter, n: int) -> int:
    """|sigma^n(letter)| exactly, without expansion."""
    images = _images_1d(rule)
    j = _letter(rule, letter)
    M = count_matrix(images, rule.m)
    v = [0] * rule.m
    v[j] = 1
    for _ in range(n):
        v = [sum(M[i][k] * v[k] for k in range(rule.m)) for i in range(rule.m)]
    return sum(v)


def superword(rule: RuleSpec, letter, n: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """sigma^n(letter) as an index array; sigma^0 is the letter itself."""
    if n < 0:
        raise ValueError("level must be non-negative")
    images = _images_1d(rule)
    j = _letter(rule, letter)
    length = superword_length(rule, j, n)
    if length > cap:
        raise LevelOverflow(f"level {n} superword has {length} letters, cap is {cap}")
    dtype = _dtype(rule.m)
    flat, starts, lens = _ragged(images)
    w = np.array([j], dtype=dtype)
    for _ in range(n):
        w = _apply(w, flat, starts, lens, dtype)
    return w


def spell(rule: RuleSpec, word) -> str:
    """Tokens joined without spaces when all are single characters, else with spaces."""
    toks = rule.alphabet.symbols
    sep = "" if all(len(t) == 1 for t in toks) else " "
    return sep.join(toks[int(i)] for i in np.asarray(word).ravel())


def fixed_point_prefix(rule: RuleSpec, length: int, cap: int = DEFAULT_CAP) -> tuple[np.ndarray, int, int]:
    """Prefix of a one-sided fixed point of sigma^t.

    Returns ``(prefix, t, letter)`` where t is the smallest power (up to m!)
    for which some image sigma^t(a) starts with a.
    """
    from .errors import NoFixedPoint

    images = _images_1d(rule)
    m = rule.m
    first = [w[0] for w in images]
    start = None
    for t in range(1, math.factorial(m) + 1):
        for a in range(m):
            b = a
            for _ in range(t):
                b = first[b]
            if b == a and any(len(images[c]) > 1 for c in _orbit(first, a, t)):
                start = (t, a)
                break
        if start:
            break
    if start is None:
        raise NoFixedPoint(f"no power sigma^t with t <= {m}! has a growing fixed point")
    t, a = start
    dtype = _dtype(m)
    flat, starts, lens = _ragged(images)
    w = np.array([a], dtype=dtype)
    while len(w) < length:
        for _ in range(t):
            w = _apply(w, flat, starts, lens, dtype)
        if len(w) > cap:
            raise LevelOverflow(f"fixed-point prefix exceeds cap {cap}")
    return w[:length], t, a


def _orbit(first, a, t):
    out, b = [], a
    for _ in range(t):
        out.append(b)
        b = first[b]
    return out


# ---------------------------------------------------------------- blocks


def superblock(rule: RuleSpec, letter, n: int, cap: int = DEFAULT_CAP) -> Block:
    """The n-superblock S^n(letter) of a block rule."""
    if rule.kind != "block":
        raise TypeError("superblock needs a block rule")
    if n < 0:
        raise ValueError("level must be non-negative")
    size = rule.payload.size
    d = len(size)
    K = math.prod(size)
    if K**n > cap:
        raise LevelOverflow(f"level {n} superblock has {K**n} cells, cap is {cap}")
    j = _letter(rule, letter)
    dtype = _dtype(rule.m)
    table = np.array(rule.payload.blocks, dtype=dtype).reshape((rule.m,) + tuple(reversed(size)))
    B = np.full((1,) * d, j, dtype=dtype)
    # interleave (N_d, l_d, ..., N_1, l_1) then merge each pair
    order = [ax for k in range(d) for ax in (k, d + k)]
    for _ in range(n):
        big = table[B].transpose(order)
        B = big.reshape(tuple(B.shape[k] * table.shape[k + 1] for k in range(d)))
    return Block(tuple(s**n for s in size), np.ascontiguousarray(B))


# ---------------------------------------------------------------- interval tilings


def supertile_interval(rule: RuleSpec, letter, n: int, lengths=None, cap: int = DEFAULT_CAP) -> IntervalPatch:
    """The n-supertile of an inflation rule as an interval tiling starting at 0.

    ``lengths`` defaults to the rule's explicit lengths, or the natural
    lengths when the rule says ``lengths auto``.
    """
    if lengths is None:
        lengths = getattr(rule.payload, "lengths", None)
    if lengths is None:
        from .transition import natural_lengths

        lengths = natural_lengths(rule)
    lengths = np.asarray(lengths, dtype=np.float64)
    if lengths.shape != (rule.m,) or np.any(lengths <= 0):
        raise ValueError("lengths must be one positive value per symbol")
    w = superword(rule, letter, n, cap)
    lens = lengths[w.astype(np.int64)]
    lefts = np.concatenate([[0.0], np.cumsum(lens)[:-1]])
    return IntervalPatch(w, lefts, lens)


# ---------------------------------------------------------------- fusion


def _fusion_sections(rule: RuleSpec, n: int):
    """The section used to build level n (1-based), and whether it is the repeat section."""
    p = rule.payload
    if n <= len(p.levels):
        return p.levels[n - 1], False
    if p.repeat is None:
        raise LevelOverflow(f"fusion rule {rule.name!r} scripts {len(p.levels)} levels and has no repeat section")
    return p.repeat, True


def fusion_names(rule: RuleSpec, n: int) -> tuple[str, ...]:
    if n == 0:
        return rule.alphabet.symbols
    return _fusion_sections(rule, n)[0].names


def fusion_volume(rule: RuleSpec, name: str, n: int) -> int:
    """Cell count of the level-n supertile, by exact integer recursion."""
    vols = {s: 1 for s in rule.alphabet.symbols}
    for k in range(1, n + 1):
        sec, _ = _fusion_sections(rule, k)
        vols = {nm: sum(vols[pl.constituent] for pl in places) for nm, places in zip(sec.names, sec.supertiles)}
    return vols[name]


class _FusionBuilder:
    def __init__(self, rule: RuleSpec, check: bool):
        self.rule = rule
        self.check = check
        self.memo: dict[tuple[int, str], tuple[np.ndarray, np.ndarray, bool]] = {}

    def build(self, name: str, n: int):
        key = (n, name)
        if key in self.memo:
            return self.memo[key]
        rule = self.rule
        d = rule.dim
        if n == 0:
            if name not in rule.alphabet:
                raise UnknownSymbol(name)
            res = (np.zeros((1, d), dtype=np.int64), np.array([rule.alphabet.index(name)]), False)
            self.memo[key] = res
            return res
        sec, is_repeat = _fusion_sections(rule, n)
        if name not in sec.names:
            raise UnknownSymbol(name)
        places = sec.supertile(name)
        kids = [self.build(pl.constituent, n - 1) for pl in places]
        if is_repeat:
            offsets = self._slot_offsets(places, kids)
        else:
            offsets = [np.array(pl.offset, dtype=np.int64) for pl in places]
        coords = np.concatenate([c + off for (c, _, _), off in zip(kids, offsets)])
        syms = np.concatenate([s for _, s, _ in kids])
        collided = any(k[2] for k in kids)
        if not collided and len(coords) > 1:
            collided = len(np.unique(coords, axis=0)) < len(coords)
        if collided and self.check:
            raise PlacementCollision(f"level {n} supertile {name!r}: two constituents write one cell")
        res = (coords, syms, collided)
        self.memo[key] = res
        return res

    @staticmethod
    def _slot_offsets(places, kids):
        d = len(places[0].offset)
        slots = np.array([pl.offset for pl in places], dtype=np.int64)
        lows = [c.min(axis=0) for c, _, _ in kids]
        widths = [c.max(axis=0) - lo + 1 for (c, _, _), lo in zip(kids, lows)]
        corner = np.zeros((len(places), d), dtype=np.int64)
        for k in range(d):
            values = sorted(set(slots[:, k].tolist()))
            width = {v: max(int(w[k]) for w, s in zip(widths, slots) if s[k] == v) for v in values}
            pos, acc = {}, 0
            for v in values:
                pos[v] = acc
                acc += width[v]
            corner[:, k] = [pos[v] for v in slots[:, k].tolist()]
        return [corner[i] - lows[i] for i in range(len(places))]


def fusion_supertile(rule: RuleSpec, name: str, n: int, cap: int = DEFAULT_CAP) -> LatticePatch:
    """The level-n supertile ``name`` resolved to level-0 cells.

    For vector-fusion rules ``name`` is one of the two seeds.
    """
    if rule.kind == "vector-fusion":
        if name not in rule.payload.seeds:
            raise UnknownSymbol(name)
        if 3**n > cap:
            raise LevelOverflow(f"level {n} patch has {3**n} cells, cap is {cap}")
        st = vector_fusion_states(rule, n)[-1]
        return st.A if name == rule.payload.seeds[0] else st.B
    if rule.kind != "fusion":
        raise TypeError("fusion_supertile needs a fusion or vector-fusion rule")
    if n < 0:
        raise ValueError("level must be non-negative")
    if n > 0 and name not in fusion_names(rule, n):
        raise UnknownSymbol(name)
    vol = fusion_volume(rule, name, n)
    if vol > cap:
        raise LevelOverflow(f"level {n} supertile has {vol} cells, cap is {cap}")
    coords, syms, _ = _FusionBuilder(rule, check=True).build(name, n)
    return LatticePatch.from_arrays(coords, syms.astype(_dtype(rule.m)))


def fusion_cells_by_level(rule: RuleSpec, depth: int, check: bool = True):
    """For levels 0..depth: {name: (set of cells, collided)}. Used by validation."""
    b = _FusionBuilder(rule, check=check)
    out = []
    for n in range(depth + 1):
        level = {}
        for name in fusion_names(rule, n):
            coords, _, collided = b.build(name, n)
            level[name] = ({tuple(c) for c in coords.tolist()}, collided)
        out.append(level)
    return out


def fusion_word(rule: RuleSpec, name: str, n: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """A 1-D fusion supertile read left to right as a word."""
    if rule.dim != 1:
        raise TypeError("fusion_word needs a 1-D fusion rule")
    patch = fusion_supertile(rule, name, n, cap)
    xs = patch.coords[:, 0]
    if len(xs) and not np.array_equal(xs, np.arange(xs[0], xs[0] + len(xs))):
        raise TilespecError("1-D supertile is not an interval of cells")
    return patch.symbols


def vector_fusion_states(rule: RuleSpec, n: int) -> list[VectorFusionState]:
    """Levels 0..n of the two-type vector fusion."""
    p = rule.payload
    L = np.array(p.L, dtype=object)
    a, b = p.seeds
    ia, ib = rule.alphabet.index(a), rule.alphabet.index(b)
    zero = np.zeros((1, 2), dtype=np.int64)
    A = LatticePatch(zero, np.array([ia]))
    B = LatticePatch(zero.copy(), np.array([ib]))
    k, l = tuple(p.k0), tuple(p.l0)
    states = [VectorFusionState(0, A, B, k, l)]
    for lev in range(1, n + 1):
        A2 = LatticePatch.from_arrays(
            np.concatenate([A.coords, B.coords + k, B.coords + l]), np.concatenate([A.symbols, B.symbols, B.symbols])
        )
        B2 = LatticePatch.from_arrays(
            np.concatenate([B.coords, A.coords + k, A.coords + l]), np.concatenate([B.symbols, A.symbols, A.symbols])
        )
        A, B = A2, B2
        k = tuple(int(x) for x in L.dot(np.array(k, dtype=object)))
        l = tuple(int(x) for x in L.dot(np.array(l, dtype=object)))
        states.append(VectorFusionState(lev, A, B, k, l))
    return states


# ---------------------------------------------------------------- S-adic


def _sadic_chain(rule: RuleSpec, n: int):
    """Substitutions sigma_0..sigma_{n-1} with images as indices into their codomain."""
    p: SadicPayload = rule.payload
    chain = []
    codomain = rule.alphabet.symbols
    for i in range(n):
        name = p.directive(i)
        if name is None:
            raise LevelOverflow(f"directive sequence has only {len(p.prefix)} entries and no cycle")
        sub = p.sub(name)
        try:
            images = tuple(tuple(codomain.index(t) for t in img) for img in sub.images)
        except ValueError:
            bad = sorted({t for img in sub.images for t in img if t not in codomain})
            raise AlphabetMismatch(f"sigma_{i} = {name} produces {bad}, outside the level-{i} alphabet") from None
        chain.append((sub, images, len(codomain)))
        codomain = sub.domain
    return chain, codomain


def sadic_alphabet(rule: RuleSpec, n: int) -> tuple[str, ...]:
    """Letters of level n: the header alphabet at n = 0, else the domain of sigma_{n-1}."""
    return _sadic_chain(rule, n)[1]


def sadic_superword(rule: RuleSpec, letter, n: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """sigma_0 sigma_1 ... sigma_{n-1}(letter), sigma_{n-1} applied first."""
    if rule.kind != "sadic":
        raise TypeError("sadic_superword needs a sadic rule")
    chain, top = _sadic_chain(rule, n)
    if isinstance(letter, (int, np.integer)):
        j = int(letter)
        if not 0 <= j < len(top):
            raise UnknownSymbol(str(letter))
    else:
        if letter not in top:
            raise UnknownSymbol(letter)
        j = top.index(letter)
    v = [0] * len(top)
    v[j] = 1
    for sub, images, mcod in reversed(chain):
        M = count_matrix(images, mcod)
        v = [sum(M[i][k] * v[k] for k in range(len(v))) for i in range(mcod)]
    if sum(v) > cap:
        raise LevelOverflow(f"level {n} superword has {sum(v)} letters, cap is {cap}")
    dtype = _dtype(max(rule.m, max((len(s.domain) for s in rule.payload.subs), default=1)))
    w = np.array([j], dtype=dtype)
    for sub, images, _ in reversed(chain):
        flat, starts, lens = _ragged(images)
        w = _apply(w, flat, starts, lens, dtype)
    return w


# ---------------------------------------------------------------- language


@dataclass(frozen=True)
class Language:
    words: frozenset  # tuples of tokens
    length: int
    horizon: int
    saturated: bool

    def __len__(self):
        return len(self.words)

    def strings(self) -> set[str]:
        return {"".join(w) if all(len(t) == 1 for t in w) else " ".join(w) for w in self.words}


def _subwords(word: np.ndarray, length: int) -> set[tuple[int, ...]]:
    if len(word) < length:
        return set()
    win = np.lib.stride_tricks.sliding_window_view(word, length)
    return {tuple(r) for r in np.unique(win, axis=0).tolist()}


def _level_words(rule: RuleSpec, n: int, cap: int):
    if rule.kind == "sadic":
        return [sadic_superword(rule, j, n, cap) for j in range(len(sadic_alphabet(rule, n)))]
    if rule.kind == "fusion":
        return [fusion_word(rule, nm, n, cap) for nm in fusion_names(rule, n)]
    from .transition import is_primitive

    if is_primitive(rule).verdict == "primitive":
        return [superword(rule, 0, n, cap)]
    return [superword(rule, j, n, cap) for j in range(rule.m)]


def _raw_language(rule: RuleSpec, length: int, n: int, cap: int) -> set[tuple[int, ...]]:
    out: set[tuple[int, ...]] = set()
    for w in _level_words(rule, n, cap):
        out |= _subwords(w, length)
    return out


def legal_words(rule: RuleSpec, length: int, horizon: int, cap: int = DEFAULT_CAP) -> Language:
    """All length-``length`` subwords of the level-``horizon`` superwords."""
    if length < 1:
        raise ValueError("word length must be at least 1")
    now = _raw_language(rule, length, horizon, cap)
    try:
        nxt = _raw_language(rule, length, horizon + 1, cap)
        saturated = nxt == now
    except LevelOverflow:
        saturated = False
    toks = rule.alphabet.symbols
    words = frozenset(tuple(toks[i] for i in w) for w in now)
    return Language(words, length, horizon, saturated)


def complexity(rule: RuleSpec, length: int, horizon: int, cap: int = DEFAULT_CAP) -> int:
    return len(legal_words(rule, length, horizon, cap))


@dataclass(frozen=True)
class RadiusEstimate:
    radius: int
    horizon: int
    occurrences: int


def find_occurrences(word: np.ndarray, pattern) -> np.ndarray:
    """Start positions of ``pattern`` (index sequence) in ``word``."""
    pat = np.asarray(pattern, dtype=np.int64)
    if len(pat) > len(word):
        return np.zeros(0, dtype=np.int64)
    win = np.lib.stride_tricks.sliding_window_view(word.astype(np.int64, copy=False), len(pat))
    return np.flatnonzero(np.all(win == pat, axis=1))


def repetitivity_radius(rule: RuleSpec, patch, horizon: int, cap: int = DEFAULT_CAP) -> RadiusEstimate:
    """Smallest R such that every length-R window of the level-``horizon`` superword contains ``patch``."""
    pat = rule.word(patch) if isinstance(patch, str) or isinstance(patch[0], str) else tuple(patch)
    w = superword(rule, 0, horizon, cap)
    occ = find_occurrences(w, pat)
    if len(occ) == 0:
        raise PatchNotFound(f"patch does not occur in the level-{horizon} superword")
    k, L = len(pat), len(w)
    # first window, windows starting just after each occurrence, and the tail
    need = [int(occ[0]) + k, L - int(occ[-1])]
    if len(occ) > 1:
        need.append(int(np.max(np.diff(occ))) - 1 + k)
    return RadiusEstimate(min(max(need), L), horizon, len(occ))


# ---------------------------------------------------------------- text dumps


def dump_word(rule: RuleSpec, word) -> str:
    return spell(rule, word) + "\n"


def dump_block(rule: RuleSpec, block: Block) -> str:
    """One row per line, bottom row first; 3-D slices separated by blank lines."""
    toks = rule.alphabet.symbols
    sep = "" if all(len(t) == 1 for t in toks) else " "
    l1 = block.extents[0]
    rows = block.cells.reshape(-1, l1)
    per_slice = block.extents[1] if len(block.extents) > 1 else 1
    lines = []
    for r, row in enumerate(rows.tolist()):
        if r and r % per_slice == 0:
            lines.append("")
        lines.append(sep.join(toks[i] for i in row))
    return "\n".join(lines) + "\n"


def dump_lattice(rule: RuleSpec, patch: LatticePatch) -> str:
    """``x y symbol`` lines sorted lexicographically by coordinate."""
    toks = rule.alphabet.symbols
    return "".join(
        " ".join(map(str, c)) + f" {toks[int(s)]}\n" for c, s in zip(patch.coords.tolist(), patch.symbols.tolist())
    )
