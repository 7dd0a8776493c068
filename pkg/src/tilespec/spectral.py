"""Spectral diagnostics for substitution rules.

Limits (Host's criterion, the self-similar eigenvalue condition) are
truncated at ``n_max`` and reported as evidence with a verdict of ``pass``,
``fail`` or ``inconclusive``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from . import supertile as st
from . import transition as tr
from .errors import EmptyReturnSample, NotConstantLength, NotConverged
from .rulespec import RuleSpec

BOUNDARY_TOL = 1e-9
DEFAULT_TOL = 1e-6
DEFAULT_NMAX = 40


# ---------------------------------------------------------------- algebraic verdict


@dataclass(frozen=True)
class AlgebraicVerdict:
    char_poly: tuple[int, ...]
    perron_root: float
    conjugate_moduli: tuple[float, ...]  # every other root of the characteristic polynomial
    galois_moduli: tuple[float, ...]  # roots sharing the irreducible factor of the Perron root
    classification: str  # integer | pisot | non_pisot | salem_boundary
    irreducible_over_Q: str  # yes | no | undetermined

    def to_dict(self):
        return {
            "char_poly": list(self.char_poly),
            "perron_root": self.perron_root,
            "conjugate_moduli": list(self.conjugate_moduli),
            "classification": self.classification,
            "irreducible_over_Q": self.irreducible_over_Q,
        }


def _divisors(n: int) -> list[int]:
    n = abs(n)
    out = []
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            out += [d, n // d]
    return sorted(set(out))


def integer_roots(coeffs) -> list[int]:
    """Rational roots of a monic integer polynomial (they are integers), with multiplicity."""
    roots = []
    p = list(coeffs)
    while len(p) > 1:
        if p[-1] == 0:
            roots.append(0)
            p = p[:-1]
            continue
        for cand in [s * d for d in _divisors(p[-1]) for s in (1, -1)]:
            if tr.poly_eval(p, cand) == 0:
                roots.append(cand)
                p = _deflate(p, cand)
                break
        else:
            break
    return roots


def _deflate(p, root):
    """Synthetic division of p by (x - root); exact."""
    out = [p[0]]
    for a in p[1:-1]:
        out.append(a + out[-1] * root)
    return out


def _poly_divmod(num, den):
    num = [Fraction(x) for x in num]
    q = []
    while len(num) >= len(den):
        f = num[0] / den[0]
        q.append(f)
        num = [a - f * b for a, b in zip(num, den + [0] * (len(num) - len(den)))][1:]
    return q, num


def _has_factor_from_roots(p, roots) -> bool:
    """True when some proper subset of the roots gives an exact monic integer factor of p."""
    n = len(roots)
    for k in range(1, n // 2 + 1):
        for sub in itertools.combinations(range(n), k):
            c = np.poly(np.array([roots[i] for i in sub]))
            if np.max(np.abs(c.imag)) > 1e-6 or np.max(np.abs(c.real - np.round(c.real))) > 1e-6:
                continue
            cand = [int(round(x)) for x in c.real]
            _, rem = _poly_divmod(p, cand)
            if all(x == 0 for x in rem):
                return True
    return False


def algebraic_verdict(M) -> AlgebraicVerdict:
    cp = tr.char_poly(M)
    roots = np.roots(np.array(cp, dtype=np.float64)) if len(cp) > 1 else np.array([])
    k = int(np.argmax(np.where(np.abs(roots.imag) < 1e-9, roots.real, -np.inf)))
    theta = float(roots[k].real)
    # Newton polish on the exact coefficients
    dcp = [c * (len(cp) - 1 - i) for i, c in enumerate(cp[:-1])]
    for _ in range(8):
        df = float(tr.poly_eval(dcp, theta))
        if df == 0:
            break
        step = float(tr.poly_eval(cp, theta)) / df
        theta -= step
        if abs(step) <= 1e-16 * abs(theta):
            break
    others = np.delete(roots, k)
    conj = tuple(sorted(float(abs(z)) for z in others))

    rat = integer_roots(cp)
    deg = len(cp) - 1
    t0 = round(theta)
    if t0 in rat and abs(theta - t0) < 1e-6:
        theta = float(t0)
        classification = "integer"
        galois = ()
    else:
        # drop linear rational factors; what remains holds the algebraic conjugates of theta
        rest = list(cp)
        for q in rat:
            rest = _deflate(rest, q)
        rr = np.roots(np.array(rest, dtype=np.float64))
        j = int(np.argmin(np.abs(rr - theta)))
        galois = tuple(sorted(float(abs(z)) for z in np.delete(rr, j)))
        if any(abs(g - 1.0) <= BOUNDARY_TOL for g in galois):
            classification = "salem_boundary"
        elif all(g < 1.0 - BOUNDARY_TOL for g in galois):
            classification = "pisot"
        else:
            classification = "non_pisot"
    if deg <= 1:
        irreducible = "yes"
    elif rat:
        irreducible = "no"
    elif deg <= 3:
        irreducible = "yes"
    elif deg <= 12:
        irreducible = "no" if _has_factor_from_roots(cp, list(roots)) else "yes"
    else:
        irreducible = "undetermined"
    return AlgebraicVerdict(tuple(cp), float(theta), conj, galois, classification, irreducible)


def weak_mixing_verdict(rule: RuleSpec) -> str:
    """Pisot or integer expansion: not weakly mixing; otherwise weakly mixing."""
    cls = algebraic_verdict(tr.transition_matrix(rule)).classification
    if cls in ("pisot", "integer"):
        return "not_weakly_mixing"
    if cls == "non_pisot":
        return "weakly_mixing"
    return "undetermined"


# ---------------------------------------------------------------- height and coincidence


@dataclass(frozen=True)
class HeightResult:
    height: int
    gcd: int
    q: int
    prefix_len: int
    periodic: bool
    warnings: tuple[str, ...] = ()


def _smallest_period(word: np.ndarray, limit: int) -> int | None:
    for p in range(1, limit + 1):
        if np.array_equal(word[p:], word[:-p]):
            return p
    return None


def _position_gcd(word: np.ndarray) -> int:
    pos = np.flatnonzero(word[1:] == word[0]) + 1
    return int(np.gcd.reduce(pos)) if len(pos) else 0


def dekking_height(rule: RuleSpec, prefix_len: int = 10**4) -> HeightResult:
    """Largest divisor of the position gcd of u_0 that is coprime to q."""
    if rule.kind not in ("symbolic", "inflation") or not rule.is_constant_length():
        raise NotConstantLength(f"rule {rule.name!r} is not a constant-length 1-D substitution")
    q = rule.constant_length()
    prefix_len = max(prefix_len, 10**4)
    word, _, _ = st.fixed_point_prefix(rule, 4 * prefix_len)
    gs = [_position_gcd(word[:L]) for L in (prefix_len, 2 * prefix_len, 4 * prefix_len)]
    if gs[1] != gs[2]:
        raise NotConverged(f"position gcd still changing: {gs}")
    g = gs[2]
    m = g
    for p in _prime_factors(q):
        while m % p == 0:
            m //= p
    m = max(m, 1)
    per = _smallest_period(word[: 4 * prefix_len], min(1000, prefix_len))
    warnings = (f"fixed point is periodic with period {per}",) if per else ()
    return HeightResult(m, g, q, prefix_len, per is not None, warnings)


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


@dataclass(frozen=True)
class CoincidenceResult:
    found: bool
    k: int | None = None
    l: int | tuple | None = None
    mode: str = "plain"

    def to_dict(self):
        l = list(self.l) if isinstance(self.l, tuple) else self.l
        return {"found": self.found, "k": self.k, "l": l, "mode": self.mode}


def _level_images(rule: RuleSpec, k: int) -> np.ndarray:
    """Row j is sigma^k(a_j) flattened (x fastest) for constant-length rules."""
    if rule.kind == "block":
        return np.stack([st.superblock(rule, j, k).cells.ravel() for j in range(rule.m)])
    return np.stack([st.superword(rule, j, k) for j in range(rule.m)])


def coincidence(rule: RuleSpec, max_power: int = 8, mode: str = "plain") -> CoincidenceResult:
    """First (k, l) where every sigma^k(a) carries the same symbol at position l."""
    if mode == "strong":
        return strong_coincidence(rule, max_power)
    if not rule.is_constant_length():
        raise NotConstantLength(f"rule {rule.name!r} is not of constant length")
    for k in range(1, max_power + 1):
        imgs = _level_images(rule, k)
        same = np.all(imgs == imgs[0], axis=0)
        if same.any():
            flat = int(np.argmax(same))
            if rule.kind == "block" and rule.dim > 1:
                ext = tuple(s**k for s in rule.payload.size)
                l = tuple(int(c) for c in reversed(np.unravel_index(flat, tuple(reversed(ext)))))
            else:
                l = flat
            return CoincidenceResult(True, k, l, "plain")
    return CoincidenceResult(False, None, None, "plain")


def strong_coincidence(rule: RuleSpec, max_power: int = 8) -> CoincidenceResult:
    """Same l-th letter and the same abelianized prefix of length l in every sigma^k(a)."""
    m = rule.m
    for k in range(1, max_power + 1):
        words = [st.superword(rule, j, k).astype(np.int64) for j in range(m)]
        L = min(len(w) for w in words)
        if m == 1:
            return CoincidenceResult(True, k, 0, "strong")
        heads = np.stack([w[:L] for w in words])
        same_letter = np.all(heads == heads[0], axis=0)
        # abelianized prefix of length l: counts of each letter in w[:l]
        prefix_counts = []
        for w in heads:
            onehot = np.zeros((L + 1, m), dtype=np.int64)
            np.add.at(onehot, (np.arange(1, L + 1), w), 1)
            prefix_counts.append(np.cumsum(onehot, axis=0)[:L])
        same_prefix = np.all([np.all(pc == prefix_counts[0], axis=1) for pc in prefix_counts], axis=0)
        hit = np.flatnonzero(same_letter & same_prefix)
        if len(hit):
            return CoincidenceResult(True, k, int(hit[0]), "strong")
    return CoincidenceResult(False, None, None, "strong")


@dataclass(frozen=True)
class BijectivityResult:
    bijective: bool
    # table[y][x] (bottom-up; a single row in 1-D) is the map p_k as a tuple: letter j -> table[..][j]
    table: list = field(default_factory=list)

    def permutations_at(self, *coord):
        row = self.table[coord[1]] if len(coord) > 1 else self.table[0]
        return row[coord[0]]


def is_bijective(rule: RuleSpec) -> BijectivityResult:
    if not rule.is_constant_length():
        raise NotConstantLength(f"rule {rule.name!r} is not of constant length")
    imgs = np.array(rule.images, dtype=np.int64)  # (m, K)
    maps = imgs.T  # (K, m): position k maps letter j to maps[k, j]
    bij = all(len(set(row)) == rule.m for row in maps.tolist())
    width = rule.payload.size[0] if rule.kind == "block" else imgs.shape[1]
    rows = [[tuple(r) for r in maps[i : i + width].tolist()] for i in range(0, len(maps), width)]
    return BijectivityResult(bij, rows)


# ---------------------------------------------------------------- eigenvalue tests


@dataclass(frozen=True)
class EigenvalueTestReport:
    alpha: str
    distances: tuple  # (n, max distance over letters / return vectors)
    verdict: str  # pass | fail | inconclusive
    rate: float | None = None
    per_letter: tuple = ()  # (n, (dist per letter)) for Host
    note: str = ""

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "verdict": self.verdict,
            "rate": self.rate,
            "distances": [[n, d] for n, d in self.distances],
            "note": self.note,
        }


def _alpha(alpha, dps: int = 120):
    """Fraction when alpha is rational (int, Fraction, 'p/q' string), else an mpf."""
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, (int, np.integer)):
        return Fraction(int(alpha))
    if isinstance(alpha, str):
        if "/" in alpha or ("." not in alpha and "e" not in alpha.lower()):
            try:
                return Fraction(alpha)
            except ValueError:
                pass
        with mpmath.workdps(dps):
            return mpmath.mpf(alpha)
    if isinstance(alpha, float):
        return mpmath.mpf(alpha)
    return mpmath.mpf(alpha)


def _dist(x) -> float:
    """Distance to the nearest integer."""
    if isinstance(x, Fraction):
        f = x - math.floor(x)
        return float(min(f, 1 - f))
    f = x - mpmath.floor(x)
    return float(min(f, 1 - f))


DECAY_RATE = 0.95  # fitted tail ratio below this counts as still decaying


def _verdict(dists: list[float], tol: float):
    if not dists:
        return "inconclusive", None
    steps = list(zip(dists, dists[1:]))
    nonincr = sum(1 for a, b in steps if b <= a)
    majority = not steps or nonincr * 2 >= len(steps)
    rate = None
    tail = [(i, d) for i, d in enumerate(dists) if d > 0][len(dists) // 2 :]
    if len(tail) >= 2:
        xs = np.array([i for i, _ in tail], dtype=float)
        ys = np.log([d for _, d in tail])
        rate = float(math.exp(np.polyfit(xs, ys, 1)[0]))
    if dists[-1] < tol and majority:
        return "pass", rate
    # still decaying geometrically but not yet below tol: more depth could settle it
    if majority and rate is not None and rate < DECAY_RATE:
        return "inconclusive", rate
    return "fail", rate


def host_test(rule: RuleSpec, alpha, p: int = 1, n_max: int = DEFAULT_NMAX, tol: float = DEFAULT_TOL) -> EigenvalueTestReport:
    """dist(alpha * |sigma^{pn}(a)|, Z) for every letter a and n = 1..n_max.

    Lengths are exact big integers from powers of the transition matrix.
    Pass irrational alpha as an ``mpmath.mpf`` (or a decimal string) carrying
    enough digits; floats are taken at face value.
    """
    a = _alpha(alpha)
    M = tr.transition_matrix(rule)
    Mp = tr.mat_power(M, p)
    P = tr.mat_identity(rule.m)
    dists, per_letter = [], []
    digits = 30
    for n in range(1, n_max + 1):
        P = P.dot(Mp)
        lens = [int(sum(P[:, j])) for j in range(rule.m)]
        if isinstance(a, Fraction):
            ds = [_dist(a * L) for L in lens]
        else:
            digits = max(digits, len(str(max(lens))) + 30)
            with mpmath.workdps(digits):
                ds = [_dist(a * L) for L in lens]
        per_letter.append((n, tuple(ds)))
        dists.append((n, max(ds)))
    verdict, rate = _verdict([d for _, d in dists], tol)
    return EigenvalueTestReport(str(alpha), tuple(dists), verdict, rate, tuple(per_letter))


def _hp_lengths(rule: RuleSpec, dps: int):
    """Natural lengths at high precision, scaled like the rule's own volumes."""
    M = tr.transition_matrix(rule)
    cp = tr.char_poly(M)
    theta0 = tr.perron_data(M).theta
    m = rule.m
    with mpmath.workdps(dps):
        theta = mpmath.findroot(lambda x: mpmath.polyval([mpmath.mpf(c) for c in cp], x), mpmath.mpf(theta0))
        if m == 1:
            l = [mpmath.mpf(1)]
        else:
            # l^T (M - theta I) = 0 with l_0 = 1
            A = mpmath.matrix(m - 1, m - 1)
            b = mpmath.matrix(m - 1, 1)
            for i in range(1, m):
                for j in range(1, m):
                    A[i - 1, j - 1] = mpmath.mpf(int(M[j, i])) - (theta if i == j else 0)
                b[i - 1] = -mpmath.mpf(int(M[0, i]))
            sol = mpmath.lu_solve(A, b)
            l = [mpmath.mpf(1)] + [sol[i] for i in range(m - 1)]
        vol = tr.volumes(rule)
        if rule.kind == "inflation" and rule.payload.lengths is not None:
            scale = mpmath.mpf(float(vol[0])) / l[0]
        else:
            scale = 1 / min(l)
        return theta, [x * scale for x in l]


def return_vectors(rule: RuleSpec, level: int | None = None, max_tiles: int = 10**5) -> list[tuple[int, ...]]:
    """Tile-count vectors between consecutive same-type tiles of a supertile."""
    if level is None:
        level = 1
        while st.superword_length(rule, 0, level + 1) <= max_tiles and level < 60:
            level += 1
    w = st.superword(rule, 0, level).astype(np.int64)
    out = set()
    onehot = np.zeros((len(w) + 1, rule.m), dtype=np.int64)
    np.add.at(onehot, (np.arange(1, len(w) + 1), w), 1)
    cum = np.cumsum(onehot, axis=0)
    for a in range(rule.m):
        pos = np.flatnonzero(w == a)
        if len(pos) > 1:
            diffs = cum[pos[1:]] - cum[pos[:-1]]
            out.update(tuple(r) for r in np.unique(diffs, axis=0).tolist())
    if not out:
        raise EmptyReturnSample(f"no two tiles of the same type at level {level}")
    return sorted(out)


def _lattice_period(rule: RuleSpec):
    """Tiling period when the level-n word is periodic with a short period, else None."""
    level = 1
    while st.superword_length(rule, 0, level + 1) <= 4096 and level < 60:
        level += 1
    w = st.superword(rule, 0, level)
    if len(w) < 8:
        return None
    per = _smallest_period(w, len(w) // 4)
    if per is None:
        return None
    vol = tr.volumes(rule)
    return math.fsum(float(vol[i]) for i in w[:per].tolist()), w[:per]


def selfsimilar_eigen_test(
    rule: RuleSpec, alpha, n_max: int = DEFAULT_NMAX, tol: float = DEFAULT_TOL, level: int | None = None
) -> EigenvalueTestReport:
    """dist(alpha * lambda^n * x, Z) over sampled return vectors x.

    A periodic tiling is tested directly against its period P (alpha is an
    eigenvalue iff alpha * P is an integer), since the substitution's
    expansion can hide the true period.
    """
    a = _alpha(alpha)
    if isinstance(a, Fraction) and a == 0:
        return EigenvalueTestReport(str(alpha), ((0, 0.0),), "pass", None, note="alpha = 0")
    periodic = _lattice_period(rule)
    if periodic is not None:
        P, _ = periodic
        d = _dist(a * Fraction(P).limit_denominator(10**12)) if isinstance(a, Fraction) else _dist(a * mpmath.mpf(P))
        verdict = "pass" if d < tol else "fail"
        return EigenvalueTestReport(str(alpha), ((0, d),), verdict, None, note=f"periodic tiling, period {P!r}")
    xs = return_vectors(rule, level)
    M = tr.transition_matrix(rule)
    dps = 40 + int(n_max * math.log10(max(tr.perron_data(M).theta, 1.0))) + 5
    with mpmath.workdps(dps):
        _, lengths = _hp_lengths(rule, dps)
        am = mpmath.mpf(a.numerator) / a.denominator if isinstance(a, Fraction) else mpmath.mpf(a)
        dists = []
        cols = [np.array(x, dtype=object) for x in xs]
        Mn = tr.mat_identity(rule.m)
        for n in range(1, n_max + 1):
            Mn = Mn.dot(M)
            worst = 0.0
            for c in cols:
                # lambda^n (l . c) = l . (M^n c) since l is a left eigenvector
                v = Mn.dot(c)
                y = mpmath.fsum(lengths[i] * int(v[i]) for i in range(rule.m))
                worst = max(worst, _dist(am * y))
            dists.append((n, worst))
    verdict, rate = _verdict([d for _, d in dists], tol)
    return EigenvalueTestReport(str(alpha), tuple(dists), verdict, rate, note=f"{len(xs)} return vectors")


def eigen_scan(rule: RuleSpec, alphas, n_lo: int = 15, n_hi: int = 25, tol: float = 1e-3, level: int | None = None) -> np.ndarray:
    """Vectorized binary64 screen of many alpha values; True where every
    dist(alpha * lambda^n * x, Z) with n_lo <= n <= n_hi stays below tol."""
    alphas = np.asarray(alphas, dtype=np.float64)
    xs = return_vectors(rule, level)
    M = tr.transition_matrix(rule)
    lengths = np.array([float(x) for x in _hp_lengths(rule, 30)[1]])
    ok = np.ones(alphas.shape, dtype=bool)
    Mn = tr.mat_power(M, n_lo)
    for _ in range(n_lo, n_hi + 1):
        for c in xs:
            v = Mn.dot(np.array(c, dtype=object))
            y = math.fsum(float(lengths[i]) * int(v[i]) for i in range(rule.m))
            t = alphas * y
            ok &= np.abs(t - np.round(t)) < tol
        Mn = Mn.dot(M)
    return ok


def eigenfunction_profile(rule_or_q, n: int, j):
    """exp(2 pi i (j mod q^n) / q^n): the level-n eigenfunction along the fixed point."""
    q = rule_or_q if isinstance(rule_or_q, int) else rule_or_q.constant_length()
    Q = q**n
    red = np.mod(np.asarray(j, dtype=np.int64), Q)
    val = np.exp(2j * np.pi * red / Q)
    return complex(val) if np.ndim(val) == 0 else val


# ---------------------------------------------------------------- report


def spectral_report(rule: RuleSpec, alpha=None, p: int = 1, n_max: int = DEFAULT_NMAX, tol: float = DEFAULT_TOL) -> dict:
    """Everything that applies to the rule, as a JSON-ready dict."""
    M = tr.transition_matrix(rule)
    av = algebraic_verdict(M)
    out = {
        "char_poly": list(av.char_poly),
        "perron_root": av.perron_root,
        "conjugate_moduli": list(av.conjugate_moduli),
        "classification": av.classification,
        "irreducible_over_Q": av.irreducible_over_Q,
    }
    one_d = rule.kind in ("symbolic", "inflation")
    if rule.is_constant_length():
        out["coincidence"] = coincidence(rule).to_dict()
        out["bijective"] = is_bijective(rule).bijective
        if one_d:
            try:
                out["height"] = dekking_height(rule).height
            except Exception as exc:  # no fixed point, unstable gcd
                out["height"] = None
                out["height_error"] = str(exc)
    if one_d:
        out["strong_coincidence"] = strong_coincidence(rule).to_dict()
        out["weak_mixing"] = weak_mixing_verdict(rule)
        if alpha is not None:
            out["host"] = {"p": p, **host_test(rule, alpha, p, n_max, tol).to_dict()}
    return out
