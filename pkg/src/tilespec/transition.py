"""Transition matrices, primitivity, Perron-Frobenius data and frequencies.

Matrix entry ``M[i, j]`` counts type-i tiles inside the type-j supertile, so
columns are indexed by supertile type. Products of transition matrices are
kept as numpy object arrays of Python ints and never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import supertile as st
from .errors import (
    DepthTooShallow,
    LevelOutOfRange,
    NoConvergence,
    NotConverged,
    NotIrreducible,
    NotPrimitive,
)
from .rulespec import RuleSpec

POWER_TOL = 1e-12
POWER_MAXITER = 100_000


# ---------------------------------------------------------------- matrices


def _as_int_matrix(rows) -> np.ndarray:
    return np.array([[int(x) for x in r] for r in rows], dtype=object)


def transition_matrix(rule: RuleSpec, level: int | None = None) -> np.ndarray:
    """Exact integer transition matrix (object dtype).

    For fusion and sadic rules ``level`` n selects M_{n-1,n}: rows are the
    level-(n-1) types, columns the level-n types. It defaults to 1.
    """
    if rule.kind in ("symbolic", "inflation", "block"):
        return _as_int_matrix(st.count_matrix(rule.images, rule.m))
    if rule.kind == "vector-fusion":
        # A_{n+1} = A_n + 2 B_n, B_{n+1} = B_n + 2 A_n
        return _as_int_matrix([[1, 2], [2, 1]])
    n = 1 if level is None else level
    if n < 1:
        raise LevelOutOfRange("transition matrices start at level 1")
    if rule.kind == "fusion":
        try:
            rows = st.fusion_names(rule, n - 1)
            sec, _ = st._fusion_sections(rule, n)
        except Exception as exc:
            raise LevelOutOfRange(str(exc)) from None
        M = [[0] * len(sec.names) for _ in rows]
        for j, places in enumerate(sec.supertiles):
            for pl in places:
                M[rows.index(pl.constituent)][j] += 1
        return _as_int_matrix(M)
    if rule.kind == "sadic":
        try:
            chain, _ = st._sadic_chain(rule, n)
        except Exception as exc:
            raise LevelOutOfRange(str(exc)) from None
        sub, images, mcod = chain[n - 1]
        return _as_int_matrix(st.count_matrix(images, mcod))
    raise TypeError(f"unsupported rule kind {rule.kind!r}")


def _structure(rule: RuleSpec):
    """(s, c) such that factor M_{i,i+1} for i >= s repeats with period c; c = 0 for finite rules."""
    if rule.kind == "fusion":
        s = len(rule.payload.levels)
        return s, (1 if rule.payload.repeat is not None else 0)
    if rule.kind == "sadic":
        return len(rule.payload.prefix), len(rule.payload.cycle)
    return 0, 1


def mat_identity(k: int) -> np.ndarray:
    I = np.zeros((k, k), dtype=object)
    for i in range(k):
        I[i, i] = 1
    return I


def mat_power(M: np.ndarray, n: int) -> np.ndarray:
    """Exact integer power by repeated squaring."""
    M = np.asarray(M, dtype=object)
    out = mat_identity(M.shape[0])
    base = M
    while n:
        if n & 1:
            out = out.dot(base)
        base = base.dot(base)
        n >>= 1
    return out


def matrix_product(rule: RuleSpec, n: int, N: int) -> np.ndarray:
    """M_{n,N} = M_{n,n+1} M_{n+1,n+2} ... M_{N-1,N}, exact."""
    if not 0 <= n < N:
        raise LevelOutOfRange(f"need 0 <= n < N, got n={n}, N={N}")
    s, c = _structure(rule)
    if c == 0 and N > s:
        raise LevelOutOfRange(f"rule scripts only {s} levels")
    if rule.kind not in ("fusion", "sadic"):
        return mat_power(transition_matrix(rule), N - n)
    out = transition_matrix(rule, n + 1)
    for k in range(n + 2, N + 1):
        out = out.dot(transition_matrix(rule, k))
    return out


# ---------------------------------------------------------------- primitivity


@dataclass(frozen=True)
class PrimitivityVerdict:
    verdict: str  # "primitive" | "not_primitive" | "undetermined"
    N: int | None = None
    horizon: int | None = None

    def to_dict(self):
        return {"verdict": self.verdict, "N": self.N, "horizon": self.horizon}


def wielandt_bound(m: int) -> int:
    return (m - 1) ** 2 + 1


def primitive_exponent(M) -> int | None:
    """Smallest N <= (m-1)^2+1 with M^N > 0 entrywise, or None."""
    B = (np.asarray(M, dtype=object) != 0).astype(np.int64)
    m = B.shape[0]
    if B.shape != (m, m):
        return None
    P = B.copy()
    for N in range(1, wielandt_bound(m) + 1):
        if P.all():
            return N
        P = ((P @ B) > 0).astype(np.int64)
    return None


def _positive(M) -> bool:
    return bool(np.all(np.asarray(M, dtype=object) != 0))


def is_primitive(rule: RuleSpec, horizon: int = 20) -> PrimitivityVerdict:
    """Primitivity of a single matrix (exact) or of a level-indexed sequence."""
    if rule.kind not in ("fusion", "sadic"):
        N = primitive_exponent(transition_matrix(rule))
        return PrimitivityVerdict("primitive", N) if N is not None else PrimitivityVerdict("not_primitive")
    s, c = _structure(rule)
    if c == 0:
        # finite script: only evidence inside the scripted depth
        lag = 0
        for n in range(min(s, horizon)):
            found = next((N for N in range(n + 1, min(s, n + horizon) + 1) if _positive(matrix_product(rule, n, N))), None)
            if found is None:
                return PrimitivityVerdict("undetermined", None, horizon)
            lag = max(lag, found - n)
        return PrimitivityVerdict("primitive", lag, horizon) if lag else PrimitivityVerdict("undetermined", None, horizon)
    # periodic tail: each rotation of the cycle product must be primitive
    lag = 0
    for phase in range(s, s + c):
        C = matrix_product(rule, phase, phase + c)
        e = primitive_exponent(C)
        if e is None:
            return PrimitivityVerdict("not_primitive")
        lag = max(lag, e * c)
    # prefix levels: M_{n,s} times a positive matrix is positive iff no zero row
    for n in range(s):
        P = matrix_product(rule, n, s)
        if any(all(x == 0 for x in row) for row in P.tolist()):
            return PrimitivityVerdict("not_primitive")
    return PrimitivityVerdict("primitive", lag + s)


# ---------------------------------------------------------------- Perron data


def char_poly(M) -> list[int]:
    """Coefficients of det(xI - M), highest degree first, by exact Faddeev-LeVerrier."""
    A = [[int(x) for x in row] for row in np.asarray(M, dtype=object).tolist()]
    n = len(A)
    coeffs = [1]
    Mk = [[0] * n for _ in range(n)]
    c = 1
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{n-k+1} I
        Mk = [[sum(A[i][t] * Mk[t][j] for t in range(n)) + (c if i == j else 0) for j in range(n)] for i in range(n)]
        AM = [[sum(A[i][t] * Mk[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        tr = sum(AM[i][i] for i in range(n))
        assert tr % k == 0
        c = -tr // k
        coeffs.append(c)
    return coeffs


def poly_eval(coeffs, x):
    acc = 0
    for a in coeffs:
        acc = acc * x + a
    return acc


def is_irreducible(M) -> bool:
    """Strong connectivity of the graph i -> j when M[i, j] > 0."""
    B = np.asarray(M, dtype=object) != 0
    m = B.shape[0]
    if m == 1:
        return bool(B[0, 0])
    for adj in (B, B.T):
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adj[i]).tolist():
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        if len(seen) < m:
            return False
    return True


def period(M) -> int:
    """Period of an irreducible nonnegative matrix (gcd of cycle lengths)."""
    B = np.asarray(M, dtype=object) != 0
    m = B.shape[0]
    dist = {0: 0}
    queue = [0]
    g = 0
    for i in queue:
        for j in np.flatnonzero(B[i]).tolist():
            if j not in dist:
                dist[j] = dist[i] + 1
                queue.append(j)
            else:
                g = math.gcd(g, dist[i] + 1 - dist[j])
    return g if g else (1 if m == 1 else 0)


def _nullvector(A: list[list[Fraction]]) -> list[Fraction]:
    """A nonzero vector spanning the kernel of a rank-(n-1) rational matrix."""
    n = len(A)
    A = [row[:] for row in A]
    pivots = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, n) if A[i][col] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = 1 / A[r][col]
        A[r] = [x * inv for x in A[r]]
        for i in range(n):
            if i != r and A[i][col] != 0:
                f = A[i][col]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    if len(free) != 1:
        raise NoConvergence("Perron eigenspace is not one-dimensional")
    f = free[0]
    v = [Fraction(0)] * n
    v[f] = Fraction(1)
    for i, col in enumerate(pivots):
        v[col] = -A[i][f]
    return v


@dataclass(frozen=True)
class PerronData:
    theta: float
    left: np.ndarray
    right: np.ndarray
    residual: float
    exact: bool = False  # eigenvectors solved in rational arithmetic
    period: int = 1
    theta_exact: int | None = None
    right_exact: tuple | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "theta": self.theta,
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "residual": self.residual,
        }


def _normalize(l: np.ndarray, r: np.ndarray):
    r = r / r.sum()
    l = l / float(l @ r)
    return l, r


def _power(M: np.ndarray, shift: float, x0: np.ndarray):
    """Power iteration on M + shift*I; returns (theta, vector, converged)."""
    A = M + shift * np.eye(len(M))
    x = x0 / x0.sum()
    theta = 0.0
    for _ in range(POWER_MAXITER):
        y = A @ x
        s = y.sum()
        y = y / s
        theta = s - shift
        if np.max(np.abs(M @ y - theta * y)) <= POWER_TOL * max(theta, 1.0):
            return theta, y, True
        x = y
    return theta, x, False


def _refine(cp, Mf, theta, l, r):
    """Newton on the characteristic polynomial, then kernel vectors by SVD."""
    dcp = [c * (len(cp) - 1 - i) for i, c in enumerate(cp[:-1])]
    t = theta
    for _ in range(8):
        f, df = float(poly_eval(cp, t)), float(poly_eval(dcp, t))
        if df == 0:
            break
        step = f / df
        t -= step
        if abs(step) <= 1e-16 * abs(t):
            break
    if not abs(t - theta) < 1e-6 * theta:
        return theta, l, r
    m = len(Mf)
    A = Mf - t * np.eye(m)
    vr = np.abs(np.linalg.svd(A)[2][-1])
    vl = np.abs(np.linalg.svd(A.T)[2][-1])
    old = max(np.max(np.abs(Mf @ r / r.sum() - theta * r / r.sum())), 0.0)
    new = np.max(np.abs(Mf @ vr / vr.sum() - t * vr / vr.sum()))
    if new <= old:
        return t, vl, vr
    return t, l, r


def perron_data(M) -> PerronData:
    """Perron eigenvalue and positive eigenvectors with sum(r) = 1 and l.r = 1."""
    Mi = np.asarray(M, dtype=object)
    Mf = np.array(Mi.tolist(), dtype=np.float64)
    m = Mf.shape[0]
    if Mf.shape != (m, m):
        raise ValueError("matrix must be square")
    if not is_irreducible(Mi):
        raise NotIrreducible("matrix is reducible; Perron data is not unique")
    p = period(Mi)
    ones = np.ones(m)
    # lazy iteration (M + I) shares eigenvectors with M and is primitive whenever M is irreducible
    shift = 0.0 if p == 1 else 1.0
    theta, r, ok_r = _power(Mf, shift, ones)
    theta_l, l, ok_l = _power(Mf.T, shift, ones)
    if not (ok_r and ok_l):
        w, V = np.linalg.eig(Mf)
        k = int(np.argmax(w.real))
        theta = float(w[k].real)
        r = np.abs(V[:, k].real)
        w2, V2 = np.linalg.eig(Mf.T)
        l = np.abs(V2[:, int(np.argmax(w2.real))].real)
        res = max(np.max(np.abs(Mf @ r / r.sum() - theta * r / r.sum())), 0.0)
        if not np.isfinite(theta) or res > 1e-9 * theta:
            raise NoConvergence("power iteration and eigen-solve both failed")
    exact = False
    theta_exact = None
    right_exact = None
    cp = char_poly(Mi)
    t0 = round(theta)
    if t0 > 0 and abs(theta - t0) < 1e-6 and poly_eval(cp, t0) == 0:
        ints = [[Fraction(int(x)) for x in row] for row in Mi.tolist()]
        A = [[ints[i][j] - (t0 if i == j else 0) for j in range(m)] for i in range(m)]
        At = [list(col) for col in zip(*A)]
        rv = _nullvector(A)
        lv = _nullvector(At)
        sr = sum(rv)
        rv = [x / sr for x in rv]
        dot = sum(a * b for a, b in zip(lv, rv))
        lv = [x / dot for x in lv]
        theta, exact, theta_exact, right_exact = float(t0), True, t0, tuple(rv)
        r = np.array([float(x) for x in rv])
        l = np.array([float(x) for x in lv])
    else:
        theta, l, r = _refine(cp, Mf, theta, l, r)
        l, r = _normalize(l, r)
    res =max(np.max(np.abs(Mf @ r - theta * r)), np.max(np.abs(l @ Mf - theta * l)))
    return PerronData(float(theta), l, r, float(res), exact, p, theta_exact, right_exact)


# ---------------------------------------------------------------- lengths and frequencies


def _require_primitive(rule: RuleSpec):
    if is_primitive(rule).verdict != "primitive":
        raise NotPrimitive(f"rule {rule.name!r} is not primitive")


def natural_lengths(rule: RuleSpec) -> np.ndarray:
    """Left Perron eigenvector scaled so the shortest tile has length 1."""
    if rule.kind not in ("symbolic", "inflation", "block"):
        raise TypeError("natural lengths need a single-substitution rule")
    _require_primitive(rule)
    pd = perron_data(transition_matrix(rule))
    if rule.is_constant_length():
        return np.ones(rule.m)
    return pd.left / pd.left.min()


def volumes(rule: RuleSpec) -> np.ndarray:
    """Per-symbol tile volumes: explicit or natural lengths for inflation rules, else 1."""
    if rule.kind == "inflation":
        if rule.payload.lengths is not None:
            return np.array(rule.payload.lengths, dtype=np.float64)
        return natural_lengths(rule)
    return np.ones(rule.m)


def letter_frequencies(rule: RuleSpec) -> np.ndarray:
    """Right Perron eigenvector normalized so that sum(freq * volume) = 1."""
    if rule.kind not in ("symbolic", "inflation", "block"):
        raise TypeError("letter frequencies need a single-substitution rule")
    _require_primitive(rule)
    pd = perron_data(transition_matrix(rule))
    vol = volumes(rule)
    if pd.right_exact is not None and np.all(vol == 1.0):
        return np.array([float(x) for x in pd.right_exact])
    return pd.right / float(pd.right @ vol)


def empirical_frequencies(rule: RuleSpec, seed, n: int, cap: int = st.DEFAULT_CAP) -> np.ndarray:
    """Letter counts in the level-n supertile of ``seed`` divided by its volume."""
    if rule.kind == "block":
        cells = st.superblock(rule, seed, n, cap).cells.ravel()
    elif rule.kind == "fusion":
        name = seed if isinstance(seed, str) else st.fusion_names(rule, n)[seed]
        cells = st.fusion_supertile(rule, name, n, cap).symbols
    elif rule.kind == "sadic":
        cells = st.sadic_superword(rule, seed, n, cap)
    else:
        cells = st.superword(rule, seed, n, cap)
    counts = np.bincount(cells.astype(np.int64), minlength=rule.m)
    vol = volumes(rule) if rule.kind in ("symbolic", "inflation") else np.ones(rule.m)
    total = math.fsum(c * v for c, v in zip(counts.tolist(), vol.tolist()))
    return counts / total


# ---------------------------------------------------------------- fusion frequency sequences


def level_volumes(rule: RuleSpec, n: int) -> list[int]:
    """Exact cell counts (or letter counts) of the level-n supertiles, in type order."""
    if rule.kind == "fusion":
        return [st.fusion_volume(rule, nm, n) for nm in st.fusion_names(rule, n)]
    if n == 0:
        return [1] * (rule.m if rule.kind != "sadic" else len(rule.alphabet))
    P = matrix_product(rule, 0, n)
    return [int(sum(P[:, j])) for j in range(P.shape[1])]


@dataclass(frozen=True)
class FrequencySequence:
    levels: tuple  # of (n, rho_n as ndarray)
    spread: tuple  # of (n, spread)
    n_max: int
    seeds: tuple  # growing seed columns used
    unique: bool

    def rho(self, n: int) -> np.ndarray:
        for k, r in self.levels:
            if k == n:
                return r
        raise LevelOutOfRange(f"level {n} not in the computed sequence")

    def to_dict(self):
        return {
            "n_max": self.n_max,
            "levels": [{"n": n, "rho": r.tolist()} for n, r in self.levels],
            "spread_by_level": [s for _, s in self.spread],
            "unique_measure_evidence": self.unique,
        }


def _normalized_columns(P: np.ndarray, vol_n: list[int], cols) -> list[np.ndarray]:
    out = []
    for j in cols:
        col = [int(x) for x in P[:, j].tolist()]
        total = sum(c * v for c, v in zip(col, vol_n))
        out.append(np.array([float(Fraction(c, total)) for c in col]))
    return out


def frequency_sequence(rule: RuleSpec, n_max: int = 40, tol: float = 1e-6) -> FrequencySequence:
    """Volume-normalized frequencies rho_n from the columns of M_{n, n_max}.

    Only seed columns whose supertile keeps growing up to ``n_max`` are used:
    a type that never grows (a fixed single tile) carries no limit direction.
    """
    if rule.kind not in ("fusion", "sadic"):
        raise TypeError("frequency sequences need a fusion or sadic rule")
    vol_top = level_volumes(rule, n_max)
    vol_prev = level_volumes(rule, n_max - 1)
    top_names = len(vol_top)
    if len(vol_prev) == top_names:
        seeds = [j for j in range(top_names) if vol_top[j] > vol_prev[j]]
    else:
        seeds = list(range(top_names))
    if not seeds:
        seeds = list(range(top_names))
    main = max(seeds, key=lambda j: vol_top[j])
    levels, spread = [], []
    for n in range(0, n_max // 2 + 1):
        vol_n = level_volumes(rule, n)
        P = matrix_product(rule, n, n_max)
        cols = _normalized_columns(P, vol_n, seeds)
        rho = cols[seeds.index(main)]
        sp = max((float(np.max(np.abs(a - b))) for a in cols for b in cols), default=0.0)
        levels.append((n, rho))
        spread.append((n, sp))
        if n == 0:
            Q = matrix_product(rule, 0, n_max - 1)
            prev_main = main if len(vol_prev) == top_names else 0
            prev = _normalized_columns(Q, vol_n, [prev_main])[0]
            change = float(np.max(np.abs(prev - rho)))
            if change > tol:
                raise DepthTooShallow(f"rho_0 still moves by {change:.3g} between depths {n_max - 1} and {n_max}")
    unique = max(s for _, s in spread) <= tol
    return FrequencySequence(tuple(levels), tuple(spread), n_max, tuple(seeds), unique)


def _count_in(rule: RuleSpec, pattern, name: str, n: int) -> int:
    if rule.dim == 1:
        word = st.fusion_word(rule, name, n) if rule.kind == "fusion" else st.sadic_superword(rule, name, n)
        pat = pattern.symbols if isinstance(pattern, st.LatticePatch) else np.asarray(pattern)
        return len(st.find_occurrences(word, pat))
    patch = st.fusion_supertile(rule, name, n)
    cells = patch.cells
    pc = pattern.coords - pattern.coords[0]
    ps = pattern.symbols.tolist()
    count = 0
    for anchor in cells:
        if all(cells.get(tuple(np.add(anchor, d).tolist())) == s for d, s in zip(pc, ps)):
            count += 1
    return count


def patch_frequency_at_level(rule: RuleSpec, pattern, n: int, seq: FrequencySequence) -> float:
    """Sum over level-n types i of #(pattern in P_n(i)) * rho_n(i)."""
    names = st.fusion_names(rule, n) if rule.kind == "fusion" else st.sadic_alphabet(rule, n)
    rho = seq.rho(n)
    return math.fsum(_count_in(rule, pattern, nm, n) * float(rho[i]) for i, nm in enumerate(names))


@dataclass(frozen=True)
class PatchFrequency:
    value: float
    partial_sums: tuple  # (n, value) at depth-2, depth-1, depth
    gap: float


def patch_frequency(rule: RuleSpec, pattern, depth: int, tol: float = 1e-3, n_max: int | None = None) -> PatchFrequency:
    """Frequency of a patch from the fusion frequency sequence, with a Cauchy gap."""
    if depth < 2:
        raise ValueError("depth must be at least 2")
    if isinstance(pattern, str) or (isinstance(pattern, (tuple, list)) and pattern and isinstance(pattern[0], str)):
        pattern = np.array(rule.word(pattern))
    seq = frequency_sequence(rule, n_max or max(40, 2 * depth))
    partial = tuple((n, patch_frequency_at_level(rule, pattern, n, seq)) for n in (depth - 2, depth - 1, depth))
    vals = [v for _, v in partial]
    gap = max(abs(vals[2] - vals[1]), abs(vals[1] - vals[0]))
    if gap > tol:
        raise NotConverged(f"patch frequency partial sums differ by {gap:.3g} > {tol}")
    return PatchFrequency(vals[-1], partial, gap)
