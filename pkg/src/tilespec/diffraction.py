"""Weighted Dirac combs, correlations, autocorrelation and diffraction intensities.

Windows are one-sided boxes [0, N)^d taken from supertiles grown from the
origin. Scatterers sit at the left endpoint of each interval tile or at the
lattice coordinate of each cell.
"""

from __future__ import annotations

import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import supertile as st
from .errors import NotConverged
from .rulespec import RuleSpec

CAUCHY_TOL = 1e-3


# ---------------------------------------------------------------- weights


_NUM = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX_RE = re.compile(rf"^(?:(?P<re>{_NUM})(?P<im>[+-](?:\d+(?:\.\d*)?|\.\d+)?(?:[eE][+-]?\d+)?)i|(?P<only_re>{_NUM})|(?P<only_im>[+-]?(?:\d+(?:\.\d*)?|\.\d+)?(?:[eE][+-]?\d+)?)i)$")


def parse_complex(text: str) -> complex:
    """``re``, ``re+imi``, ``re-imi`` or ``imi``; ``i`` alone means 1i."""
    m = _COMPLEX_RE.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse weight {text!r}")

    def im_part(s):
        return float(s + "1") if s in ("", "+", "-") else float(s)

    if m.group("only_re") is not None:
        return complex(float(m.group("only_re")), 0.0)
    if m.group("only_im") is not None:
        return complex(0.0, im_part(m.group("only_im")))
    return complex(float(m.group("re")), im_part(m.group("im")))


def parse_weights(rule: RuleSpec, spec) -> np.ndarray:
    """Per-symbol complex weights from ``"a=1,b=-1"`` or a mapping. Unlisted symbols weigh 0."""
    if isinstance(spec, str):
        items = {}
        for part in filter(None, (p.strip() for p in spec.split(","))):
            if "=" not in part:
                raise ValueError(f"weight {part!r} is not SYM=VALUE")
            k, v = part.split("=", 1)
            items[k.strip()] = parse_complex(v)
        spec = items
    w = np.zeros(rule.m, dtype=np.complex128)
    for k, v in spec.items():
        w[rule.alphabet.index(k)] = complex(v)
    return w


def _exact(z: complex) -> tuple[Fraction, Fraction]:
    return Fraction(z.real), Fraction(z.imag)


# ---------------------------------------------------------------- combs


@dataclass(frozen=True, eq=False)
class WeightedComb:
    positions: np.ndarray  # (P,) reals/ints in 1-D, (P, d) ints otherwise
    weights: np.ndarray  # (P,) complex
    lo: tuple
    hi: tuple  # window is the box [lo, hi)

    @property
    def dim(self) -> int:
        return 1 if self.positions.ndim == 1 else self.positions.shape[1]

    @property
    def integer(self) -> bool:
        return np.issubdtype(self.positions.dtype, np.integer)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def __len__(self):
        return len(self.weights)

    def window(self, N) -> "WeightedComb":
        """Restriction to the box [0, N)^d."""
        pos = self.positions
        mask = (pos >= 0) & (pos < N)
        if pos.ndim > 1:
            mask = np.all(mask, axis=1)
        d = self.dim
        return WeightedComb(pos[mask], self.weights[mask], (0,) * d, (N,) * d)


def comb_from_patch(patch, weights) -> WeightedComb:
    """One scatterer per tile: word index, cell coordinate, or left endpoint."""
    weights = np.asarray(weights, dtype=np.complex128)
    if isinstance(patch, st.Block):
        idx = np.indices(patch.cells.shape).reshape(len(patch.extents), -1)[::-1].T  # x first
        syms = patch.cells.ravel()
        return WeightedComb(idx.astype(np.int64), weights[syms.astype(np.int64)], (0,) * len(patch.extents), patch.extents)
    if isinstance(patch, st.IntervalPatch):
        return WeightedComb(patch.lefts.copy(), weights[patch.symbols.astype(np.int64)], (0.0,), (patch.total_length,))
    if isinstance(patch, st.LatticePatch):
        lo, hi = patch.extent()
        return WeightedComb(patch.coords.copy(), weights[patch.symbols.astype(np.int64)], tuple(lo.tolist()), tuple((hi + 1).tolist()))
    word = np.asarray(patch)
    return WeightedComb(np.arange(len(word), dtype=np.int64), weights[word.astype(np.int64)], (0,), (len(word),))


# ---------------------------------------------------------------- correlation


def correlation(rule: RuleSpec, weights, k: int, N: int, word: np.ndarray | None = None) -> complex:
    """C(k) = (1/N) sum_{n<N} w(x(n+|k|)) conj(w(x(n))), and conj of that for k < 0.

    Letter-pair counts are exact; the weights are combined as exact rationals.
    """
    weights = np.asarray(weights, dtype=np.complex128)
    kk = abs(int(k))
    if word is None:
        word, _, _ = st.fixed_point_prefix(rule, N + kk)
    x = word[: N + kk].astype(np.int64)
    if len(x) < N + kk:
        raise ValueError("word is shorter than N + |k|")
    m = rule.m
    pairs = np.bincount(x[kk : kk + N] * m + x[:N], minlength=m * m).reshape(m, m)
    wx = [_exact(complex(z)) for z in weights]
    re = im = Fraction(0)
    for i in range(m):
        for j in range(m):
            c = int(pairs[i, j])
            if c:
                (a, b), (cr, ci) = wx[i], wx[j]
                # (a + bi)(cr - ci i)
                re += c * (a * cr + b * ci)
                im += c * (b * cr - a * ci)
    val = complex(float(re / N), float(im / N))
    return val.conjugate() if k < 0 else val


@dataclass(frozen=True)
class CorrelationTable:
    entries: dict  # k -> complex at the largest window
    by_window: dict  # N -> {k: complex}
    windows: tuple
    gaps: dict  # k -> max successive |difference| across windows

    def converged(self, tol: float = CAUCHY_TOL) -> bool:
        return all(g <= tol for g in self.gaps.values())

    def limit(self, k, tol: float = CAUCHY_TOL) -> complex:
        """Single C(k), refused unless successive window differences shrink below tol."""
        diffs = [abs(self.by_window[b][k] - self.by_window[a][k]) for a, b in zip(self.windows, self.windows[1:])]
        if not diffs or diffs[-1] > tol or (len(diffs) > 1 and diffs[-1] > diffs[0]):
            raise NotConverged(f"C({k}) window differences {diffs} do not settle below {tol}")
        return self.entries[k]


def correlation_table(rule: RuleSpec, weights, ks, windows) -> CorrelationTable:
    windows = tuple(sorted(windows))
    kmax = max(abs(k) for k in ks)
    word, _, _ = st.fixed_point_prefix(rule, windows[-1] + kmax)
    by_window = {N: {k: correlation(rule, weights, k, N, word) for k in ks} for N in windows}
    gaps = {
        k: max((abs(by_window[a][k] - by_window[b][k]) for a, b in zip(windows, windows[1:])), default=0.0) for k in ks
    }
    return CorrelationTable(dict(by_window[windows[-1]]), by_window, windows, gaps)


# ---------------------------------------------------------------- autocorrelation


@dataclass(frozen=True)
class AutocorrMeasure:
    atoms: dict  # difference (int, tuple of ints, or float) -> complex coefficient
    volume: float

    def coefficient(self, z) -> complex:
        return self.atoms.get(z, 0j)

    def fourier(self, xi) -> complex:
        """sum_z gamma(z) exp(-2 pi i xi.z) over the stored atoms."""
        acc = 0j
        for z, c in sorted(self.atoms.items()):
            acc += c * np.exp(-2j * np.pi * float(np.dot(xi, z)))
        return acc


def autocorrelation(comb: WeightedComb, max_offset, anchor=None, hermitian: bool = False) -> AutocorrMeasure:
    """gamma(z) = (1/Vol) sum over pairs (y, y+z) of w(y+z) conj(w(y)).

    ``anchor`` (a box (lo, hi)) restricts the base point y, and Vol is its
    volume; the partner y+z may then lie anywhere in the comb. By default
    both points lie in the comb's window. With ``hermitian`` the coefficients
    at lexicographically negative z are set to conj(gamma(-z)), the symmetry
    of the limit, so a one-sided window does not bias them.
    """
    if len(comb) == 0:
        return AutocorrMeasure({}, comb.volume)
    if comb.integer:
        meas = _autocorr_lattice(comb, int(max_offset), anchor)
    else:
        meas = _autocorr_real(comb, float(max_offset), anchor)
    if not hermitian:
        return meas

    def neg(z):
        return tuple(-v for v in z) if isinstance(z, tuple) else (-z if z else z)

    def positive(z):
        return (z > tuple(0 for _ in z)) if isinstance(z, tuple) else z > 0

    atoms = {z: c for z, c in meas.atoms.items() if not positive(neg(z))}
    atoms.update({neg(z): c.conjugate() for z, c in atoms.items() if positive(z)})
    return AutocorrMeasure(atoms, meas.volume)


def _autocorr_lattice(comb: WeightedComb, R: int, anchor) -> AutocorrMeasure:
    pos = comb.positions.reshape(len(comb), -1)
    d = pos.shape[1]
    lo = pos.min(axis=0)
    shape = tuple((pos.max(axis=0) - lo + 1).tolist())
    dense = np.zeros(shape, dtype=np.complex128)
    dense[tuple((pos - lo).T)] = comb.weights
    if anchor is None:
        alo, ahi, vol = lo, pos.max(axis=0) + 1, comb.volume
    else:
        alo, ahi = np.broadcast_to(np.asarray(anchor[0]), (d,)), np.broadcast_to(np.asarray(anchor[1]), (d,))
        vol = float(np.prod(ahi - alo))
    base_sl = tuple(slice(max(int(a - l), 0), max(int(b - l), 0)) for a, b, l in zip(alo, ahi, lo))
    atoms = {}
    for z in np.ndindex(*([2 * R + 1] * d)):
        zz = np.array(z) - R
        if np.max(np.abs(zz)) > R:
            continue
        src, dst = [], []
        for k in range(d):
            b0, b1 = base_sl[k].start, min(base_sl[k].stop, shape[k])
            s0, s1 = max(b0, -zz[k]), min(b1, shape[k] - zz[k])
            if s1 <= s0:
                break
            src.append(slice(s0, s1))
            dst.append(slice(s0 + zz[k], s1 + zz[k]))
        else:
            val = complex(np.sum(dense[tuple(dst)] * np.conj(dense[tuple(src)])) / vol)
            if val != 0:
                atoms[int(zz[0]) if d == 1 else tuple(int(v) for v in zz)] = val
    return AutocorrMeasure(atoms, vol)


def _autocorr_real(comb: WeightedComb, R: float, anchor, digits: int = 9) -> AutocorrMeasure:
    order = np.argsort(comb.positions, kind="stable")
    x, w = comb.positions[order], comb.weights[order]
    if anchor is None:
        base = np.ones(len(x), dtype=bool)
        vol = comb.volume
    else:
        base = (x >= anchor[0]) & (x < anchor[1])
        vol = float(anchor[1] - anchor[0])
    atoms: dict[float, complex] = {}
    for i in np.flatnonzero(base):
        j0, j1 = np.searchsorted(x, [x[i] - R - 1e-12, x[i] + R + 1e-12])
        for j in range(j0, j1):
            z = round(float(x[j] - x[i]), digits)
            atoms[z] = atoms.get(z, 0j) + w[j] * np.conj(w[i])
    return AutocorrMeasure({z: complex(v / vol) for z, v in atoms.items()}, vol)


# ---------------------------------------------------------------- intensities


@dataclass(frozen=True)
class IntensityResult:
    xi: tuple
    windows: tuple
    intensities: tuple
    gaps: tuple

    @property
    def value(self) -> float:
        return self.intensities[-1]

    def converged(self, tol: float = CAUCHY_TOL) -> bool:
        return bool(self.gaps) and max(self.gaps) <= tol


def _phases(positions: np.ndarray, xi) -> np.ndarray:
    """exp(-2 pi i xi.x), reducing xi.x mod 1 exactly when possible."""
    xi_t = tuple(xi) if np.ndim(xi) else (xi,)
    pos = positions.reshape(len(positions), -1)
    if np.issubdtype(pos.dtype, np.integer) and all(isinstance(v, (Fraction, int)) for v in xi_t):
        fr = [Fraction(v) for v in xi_t]
        den = math.lcm(*(f.denominator for f in fr))
        num = np.array([int(f * den) for f in fr], dtype=object)
        if den < 2**31 and all(abs(int(n)) < 2**31 for n in num):
            r = np.zeros(len(pos), dtype=np.int64)
            for k in range(pos.shape[1]):
                r = (r + (pos[:, k] % den) * (int(num[k]) % den)) % den
            return np.exp(-2j * np.pi * r / den)
    xs = np.array([float(v) for v in xi_t])
    if not np.issubdtype(pos.dtype, np.integer):
        return np.exp(-2j * np.pi * (pos.astype(np.float64) @ xs))
    # integer positions: only the fractional part of xi matters
    t = np.zeros(len(pos))
    for k in range(pos.shape[1]):
        f = xs[k] - math.floor(xs[k])
        t = np.mod(t + np.mod(pos[:, k].astype(np.float64) * f, 1.0), 1.0)
    return np.exp(-2j * np.pi * t)


def intensity(comb: WeightedComb, xi, windows) -> IntensityResult:
    """|(1/Vol) sum_{x in [0,N)^d} w(x) exp(-2 pi i xi.x)|^2 for each N, plus successive gaps.

    Points are summed in ascending position order, so every window's value
    comes from the same cumulative sum.
    """
    windows = tuple(windows)
    pos = comb.positions
    d = comb.dim
    if d == 1:
        order = np.argsort(pos, kind="stable")
        p_sorted = pos[order]
        terms = comb.weights[order] * _phases(p_sorted, xi)
        csum = np.cumsum(terms)
        vals = []
        for N in windows:
            n = int(np.searchsorted(p_sorted, N, side="left"))
            c = (csum[n - 1] if n else 0j) / N
            vals.append(float(abs(c) ** 2))
    else:
        terms = comb.weights * _phases(pos, xi)
        vals = []
        for N in windows:
            mask = np.all((pos >= 0) & (pos < N), axis=1)
            c = np.sum(terms[mask]) / float(N) ** d
            vals.append(float(abs(c) ** 2))
    gaps = tuple(abs(b - a) for a, b in zip(vals, vals[1:]))
    xi_out = tuple(xi) if np.ndim(xi) else (xi,)
    return IntensityResult(xi_out, windows, tuple(vals), gaps)


@dataclass(frozen=True)
class IntensityGrid:
    xi_values: np.ndarray  # (G,) or (G, d)
    intensities: np.ndarray  # (G, W)
    windows: tuple

    def csv_rows(self):
        """(xi..., intensity, window) rows, windows innermost."""
        xs = self.xi_values.reshape(len(self.xi_values), -1)
        for g in range(len(xs)):
            for w, N in enumerate(self.windows):
                yield tuple(float(v) for v in xs[g]) + (float(self.intensities[g, w]), N)


def intensity_grid(comb: WeightedComb, xis, windows) -> IntensityGrid:
    xis = np.asarray(xis, dtype=np.float64)
    out = np.array([intensity(comb, xi, windows).intensities for xi in xis])
    return IntensityGrid(xis, out, tuple(windows))


# ---------------------------------------------------------------- images


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TILESPEC_THREADS", "")))
    except ValueError:
        return os.cpu_count() or 1


@dataclass(frozen=True, eq=False)
class DiffractionImage:
    intensity: np.ndarray  # (g, g) indexed [v, u] for xi = (u/g, v/g)
    pixels: np.ndarray  # (g, g) uint8, row 0 is the top row of the image (largest v)
    level: int
    grid: int
    gamma: float

    def top_share(self, k: int = 100) -> float:
        flat = np.sort(self.intensity.ravel())
        return float(flat[-k:].sum() / flat.sum())


def _dft_matrix(g: int, n: int) -> np.ndarray:
    """E[u, x] = exp(-2 pi i ((u x) mod g) / g)."""
    r = np.outer(np.arange(g, dtype=np.int64), np.arange(n, dtype=np.int64)) % g
    return np.exp(-2j * np.pi * r / g)


def block_intensity_grid(cells_weights: np.ndarray, g: int, chunk: int = 64) -> np.ndarray:
    """|c^xi|^2 on the grid xi = (u/g, v/g) for a dense 2-D weight array W[y, x]."""
    ny, nx = cells_weights.shape
    Eu = _dft_matrix(g, nx)
    Ev = _dft_matrix(g, ny)
    inner = cells_weights @ Eu.T  # (ny, g_u)
    vol = float(nx * ny)
    rows = [(s, min(s + chunk, g)) for s in range(0, g, chunk)]

    def work(span):
        a, b = span
        c = Ev[a:b] @ inner / vol
        return (c.real**2 + c.imag**2)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        parts = list(pool.map(work, rows))
    return np.concatenate(parts, axis=0)


def diffraction_image(
    rule: RuleSpec, weights, level: int, g: int = 256, gamma: float = 0.5, letter=0
) -> DiffractionImage:
    """Intensity raster over the level-n superblock of a 2-D block rule."""
    if rule.kind != "block" or rule.dim != 2:
        raise TypeError("diffraction images need a 2-D block rule")
    if not 1 <= g <= 2048:
        raise ValueError("grid size must be between 1 and 2048")
    weights = np.asarray(weights, dtype=np.complex128)
    block = st.superblock(rule, letter, level)
    W = weights[block.cells.astype(np.int64)]
    I = block_intensity_grid(W, g)
    pixels = to_pixels(I, gamma)[::-1]
    return DiffractionImage(I, np.ascontiguousarray(pixels), level, g, gamma)


def to_pixels(I: np.ndarray, gamma: float = 0.5) -> np.ndarray:
    """round(255 (I / I_max)^gamma) as uint8; an all-zero raster stays black."""
    top = float(I.max())
    if top <= 0:
        return np.zeros(I.shape, dtype=np.uint8)
    return np.rint(255.0 * np.power(I / top, gamma)).astype(np.uint8)


# ---------------------------------------------------------------- peak scan


@dataclass(frozen=True)
class Peak:
    xi: Fraction
    intensity: float


def peak_scan(
    rule: RuleSpec, weights, level: int, threshold: float = 0.01, depth: int | None = None, letter=0
) -> list[Peak]:
    """Intensities at xi = j / q^depth over the level-n superword of a constant-length rule.

    Returns candidates with intensity above ``threshold * I_ref``, where
    I_ref = max |w|^2 is the intensity of a fully coherent comb, sorted by
    decreasing intensity. The sum over positions is folded into residue
    classes mod q^depth and evaluated with an FFT over those classes.
    """
    q = rule.constant_length()
    depth = level if depth is None else depth
    if not 0 <= depth <= level:
        raise ValueError("need 0 <= depth <= level")
    weights = np.asarray(weights, dtype=np.complex128)
    word = st.superword(rule, letter, level).astype(np.int64)
    N = len(word)
    Q = q**depth
    residues = np.arange(N, dtype=np.int64) % Q
    w = weights[word]
    S = np.bincount(residues, weights=w.real, minlength=Q) + 1j * np.bincount(residues, weights=w.imag, minlength=Q)
    c = np.fft.fft(S) / N  # c[j] = (1/N) sum_r S_r exp(-2 pi i j r / Q)
    I = c.real**2 + c.imag**2
    ref = float(np.max(np.abs(weights)) ** 2)
    hits = np.flatnonzero(I > threshold * ref)
    peaks = [Peak(Fraction(int(j), Q), float(I[j])) for j in hits]
    peaks.sort(key=lambda p: (-p.intensity, p.xi))
    return peaks
