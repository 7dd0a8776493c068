"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one line in RESULTS; the terminal summary (see conftest)
prints them, and running this file directly prints them as well.
"""

import hashlib
import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from tilespec import diffraction as df
from tilespec import shipped_rule, shipped_rules
from tilespec import spectral as sp
from tilespec import supertile as st
from tilespec import transition as tr
from tilespec.pnm import encode_pgm

from conftest import symbolic

RESULTS: dict[int, str] = {}


def record(n, ok, detail, elapsed):
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({detail}; {elapsed:.2f} s)"
    return ok


def R(name):
    return shipped_rule(name)


# ---------------------------------------------------------------- 1


def test_criterion_1_fibonacci_pipeline():
    t0 = time.perf_counter()
    fib = R("fib")
    F = [1, 2]
    while len(F) < 21:
        F.append(F[-1] + F[-2])
    lengths = [len(st.superword(fib, "a", n)) for n in range(21)]
    av = sp.algebraic_verdict(tr.transition_matrix(fib))
    strong = sp.strong_coincidence(fib)
    wm = sp.weak_mixing_verdict(fib)
    elapsed = time.perf_counter() - t0
    err = abs(av.perron_root - (1 + math.sqrt(5)) / 2)
    ok = (lengths == F and err < 1e-12 and av.classification == "pisot" and strong.found
          and wm == "not_weakly_mixing" and elapsed < 1.0)
    record(1, ok, f"|theta - phi| = {err:.1e}, {av.classification}, {wm}", elapsed)
    assert lengths == F
    assert err < 1e-12
    assert av.classification == "pisot"
    assert strong.found
    assert wm == "not_weakly_mixing"
    assert elapsed < 1.0


# ---------------------------------------------------------------- 2


def test_criterion_2_abb_aaa():
    t0 = time.perf_counter()
    r = R("abb_aaa")
    M = tr.transition_matrix(r)
    pd = tr.perron_data(M)
    spec = tr.letter_frequencies(r)
    emp = tr.empirical_frequencies(r, "a", 8)
    coinc = sp.coincidence(r)
    elapsed = time.perf_counter() - t0
    gap = float(np.max(np.abs(spec - emp)))
    # exact count oracle: sigma^8(a) holds (3^9 + 2 * 2^8) / 5 letters a
    exact_a = Fraction(3**9 + 2 * 2**8, 5 * 3**8)
    ok_rest = ([[int(x) for x in row] for row in M.tolist()] == [[1, 3], [2, 0]] and pd.theta_exact == 3
               and pd.theta == 3.0 and spec.tolist() == [0.6, 0.4] and (coinc.k, coinc.l) == (1, 0) and elapsed < 1.0)
    record(2, ok_rest and gap <= 5e-3,
           f"M, theta = 3, (0.6, 0.4), coincidence (1, 0) hold; empirical gap at n = 8 is {gap:.4f} "
           f"= 0.4 (2/3)^8 exactly, above the stated 5e-3", elapsed)
    assert [[int(x) for x in row] for row in M.tolist()] == [[1, 3], [2, 0]]
    assert pd.theta_exact == 3 and pd.theta == 3.0
    assert spec.tolist() == [0.6, 0.4]
    assert emp[0] == float(exact_a)
    assert (coinc.found, coinc.k, coinc.l) == (True, 1, 0)
    assert elapsed < 1.0


@pytest.mark.xfail(strict=True, reason="freq(a) in sigma^8(a) is 0.6 + 0.4 (2/3)^8 = 0.6156; 5e-3 is first met at n = 11")
def test_criterion_2_empirical_tolerance_at_n8():
    r = R("abb_aaa")
    gap = float(np.max(np.abs(tr.letter_frequencies(r) - tr.empirical_frequencies(r, "a", 8))))
    assert gap <= 5e-3


# ---------------------------------------------------------------- 3


def test_criterion_3_non_pisot_family():
    t0 = time.perf_counter()
    r = R("noble3")
    av = sp.algebraic_verdict(tr.transition_matrix(r))
    wm = sp.weak_mixing_verdict(r)
    elapsed = time.perf_counter() - t0
    err = abs(av.perron_root - (1 + math.sqrt(13)) / 2)
    ok = err < 1e-9 and max(av.conjugate_moduli) > 1 and av.classification == "non_pisot" and wm == "weakly_mixing"
    record(3, ok, f"|theta - (1+sqrt13)/2| = {err:.1e}, conjugate {max(av.conjugate_moduli):.4f}, {wm}", elapsed)
    assert err < 1e-9
    assert max(av.conjugate_moduli) > 1
    assert av.classification == "non_pisot"
    assert wm == "weakly_mixing"


# ---------------------------------------------------------------- 4


def test_criterion_4_tm2d():
    t0 = time.perf_counter()
    r = R("tm2d")
    rows = st.superblock(r, "0", 2).rows()
    bij = sp.is_bijective(r)
    pd = tr.perron_data(tr.transition_matrix(r))
    coinc = sp.coincidence(r, max_power=8)
    elapsed = time.perf_counter() - t0
    figure = [[0, 1, 1, 0], [1, 0, 0, 1], [1, 0, 0, 1], [0, 1, 1, 0]]
    ok = rows == figure and bij.bijective and pd.right_exact == (Fraction(1, 2), Fraction(1, 2)) and not coinc.found
    record(4, ok, "level-2 block matches, bijective, frequencies exactly 1/2, no coincidence up to k = 8", elapsed)
    assert rows == figure
    assert bij.bijective
    assert pd.right_exact == (Fraction(1, 2), Fraction(1, 2))
    assert tr.letter_frequencies(r).tolist() == [0.5, 0.5]
    assert not coinc.found


# ---------------------------------------------------------------- 5


def _stationary_equivalence(maps, levels=5):
    body = ["repeat"]
    for s, img in maps.items():
        body.append(f"super {s} :")
        body += [f"place {c} at {i}" for i, c in enumerate(img)]
    from conftest import make_rule

    fusion = make_rule("rule f", "kind fusion", "dim 1", "alphabet " + " ".join(maps), *body)
    sym = symbolic("s", maps)
    return all(
        np.array_equal(st.fusion_word(fusion, s, n), st.superword(sym, s, n)) for n in range(levels + 1) for s in maps
    )


def test_criterion_5_chacon():
    t0 = time.perf_counter()
    r = R("chacon")
    lengths = [len(st.fusion_supertile(r, "a", n)) for n in range(4)]
    prim = tr.is_primitive(r).verdict
    suite = [{"a": "ab", "b": "a"}, {"a": "abb", "b": "aaa"}, {"a": "aaba", "b": "b"}, {"0": "01", "1": "10"},
             {"a": "abbb", "b": "a"}]
    equiv = all(_stationary_equivalence(m) for m in suite)
    # the shipped stationary Fibonacci fusion against the shipped substitution
    ff, fib = R("fib_fusion"), R("fib")
    equiv &= all(np.array_equal(st.fusion_word(ff, s, n), st.superword(fib, s, n)) for n in range(6) for s in "ab")
    elapsed = time.perf_counter() - t0
    ok = lengths == [1, 4, 13, 40] and prim == "not_primitive" and equiv
    record(5, ok, f"lengths {lengths}, {prim}, stationary equivalence {'holds' if equiv else 'broken'}", elapsed)
    assert lengths == [1, 4, 13, 40]
    assert prim == "not_primitive"
    assert equiv


# ---------------------------------------------------------------- 6


def test_criterion_6_eigenfunction_and_dyadic_host():
    t0 = time.perf_counter()
    tm = R("tm")
    j = np.arange(0, 10**4 + 1)
    dev = 0.0
    for n in range(1, 11):
        f = sp.eigenfunction_profile(tm, n, j)
        dev = max(dev, float(np.max(np.abs(f[1:] - np.exp(2j * np.pi / 2**n) * f[:-1]))))
    failures = [(jj, n) for n in range(1, 11) for jj in range(2**n)
                if sp.host_test(tm, Fraction(jj, 2**n)).verdict != "pass"]
    elapsed = time.perf_counter() - t0
    ok = dev < 1e-12 and not failures
    record(6, ok, f"max deviation {dev:.1e}; Host passes for all {2**11 - 2} dyadic alphas", elapsed)
    assert dev < 1e-12
    assert not failures


# ---------------------------------------------------------------- 7


def test_criterion_7_host_geometric_decay():
    t0 = time.perf_counter()
    with mpmath.workdps(70):
        phi = mpmath.nstr((1 + mpmath.sqrt(5)) / 2, 60)
    rep = sp.host_test(R("fib"), phi, n_max=40)
    phi_f = (1 + math.sqrt(5)) / 2
    # per_letter[n-1][1][0] is dist(phi * |sigma^n(a)|, Z) with |sigma^n(a)| = F_{n+2}
    bad = [n for n, ds in rep.per_letter if 5 <= n <= 40 and not ds[0] < phi_f**-n]
    elapsed = time.perf_counter() - t0
    record(7, not bad, f"dist(phi F_(n+2), Z) < phi^-n for n = 5..40, last {rep.per_letter[-1][1][0]:.2e}", elapsed)
    assert not bad
    assert rep.verdict == "pass"


# ---------------------------------------------------------------- 8


def test_criterion_8_diffraction_exactness():
    t0 = time.perf_counter()
    Nmax = 2**12
    lat = df.WeightedComb(np.arange(Nmax, dtype=np.int64), np.ones(Nmax, dtype=complex), (0,), (Nmax,))
    even = [2**k for k in range(1, 13)]
    i0 = df.intensity(lat, Fraction(0), even).intensities
    ih = df.intensity(lat, Fraction(1, 2), even).intensities
    lattice_err = max(max(abs(v - 1) for v in i0), max(ih))
    peaks = df.peak_scan(R("period2"), [1, -1], 12)
    peak_ok = [(p.xi, p.intensity) for p in peaks] == [(Fraction(1, 2), 1.0)]

    tm = R("tm")
    N = 2**20
    word, _, _ = st.fixed_point_prefix(tm, N + 1)
    s = np.where(word == 0, 1, -1).astype(np.int64)
    oracle = int(np.dot(s[1 : N + 1], s[:N])) / N  # brute-force integer sum
    c1 = df.correlation(tm, [1, -1], 1, N, word)
    auto = df.autocorrelation(df.comb_from_patch(word, [1, -1]), 1, anchor=(0, N)).coefficient(1)
    table = df.correlation_table(tm, [1, -1], [1], [2**18, 2**19, 2**20])
    gap = table.gaps[1]
    elapsed = time.perf_counter() - t0
    ok = (lattice_err < 1e-12 and peak_ok and abs(c1 - oracle) < 1e-9 and abs(c1 - auto) < 1e-9 and gap < 2e-3)
    record(8, ok, f"lattice error {lattice_err:.1e}; C(1) = {c1.real:.9f}, oracle gap {abs(c1 - oracle):.1e}, "
                  f"autocorrelation gap {abs(c1 - auto):.1e}, Cauchy gap {gap:.1e}", elapsed)
    assert lattice_err < 1e-12
    assert peak_ok
    assert abs(c1 - oracle) < 1e-9
    assert abs(c1 - auto) < 1e-9
    assert gap < 2e-3


# ---------------------------------------------------------------- 9

PINNED = {
    "coinc2d": "904e3863dff0b4012abdd1bbfdef8b9974bd09aab10f22d373cc792bfd9da9f4",
    "tm2d": "b2969498056e8766dba8e46d842e565c1935cd059e420a4302619cb7beadaf50",
}


def test_criterion_9_image_ordering():
    t0 = time.perf_counter()
    shares, hashes = {}, {}
    for name in ["coinc2d", "tm2d", "rs2d"]:
        r = R(name)
        if name == "rs2d":
            sign = {"a": 1, "b": 1, "c": -1, "d": -1}
            w = df.parse_weights(r, {t: sign[t[0]] * sign[t[1]] for t in r.alphabet})
        else:
            w = df.parse_weights(r, "0=1,1=-1")
        img = df.diffraction_image(r, w, 7, 256, 0.5)
        again = df.diffraction_image(r, w, 7, 256, 0.5)
        shares[name] = img.top_share(100)
        hashes[name] = hashlib.sha256(encode_pgm(img.pixels)).hexdigest()
        assert encode_pgm(img.pixels) == encode_pgm(again.pixels)
    elapsed = time.perf_counter() - t0
    ordered = shares["coinc2d"] > shares["tm2d"] > shares["rs2d"]
    pinned = all(hashes[k] == v for k, v in PINNED.items())
    ok = ordered and pinned and elapsed < 60
    record(9, ok, "top-100 shares " + " > ".join(f"{k} {v:.4f}" for k, v in shares.items()) + ", hashes pinned", elapsed)
    assert ordered
    assert pinned
    assert elapsed < 60


# ---------------------------------------------------------------- 10

VOLUME = 10**9  # two-stage counts reach this without holding the whole supertile


def _cells(rule, letter, n):
    if rule.kind == "block":
        return st.superblock(rule, letter, n).cells.ravel()
    return st.superword(rule, letter, n)


def _two_stage_counts(rule, seed, n):
    """Letter counts of sigma^n(seed) = sigma^b applied to every cell of sigma^a(seed), each stage materialized."""
    a = n // 2
    b = n - a
    outer = np.bincount(_cells(rule, seed, a).astype(np.int64), minlength=rule.m)
    inner = [np.bincount(_cells(rule, c, b).astype(np.int64), minlength=rule.m) for c in range(rule.m)]
    total = np.zeros(rule.m, dtype=object)
    for c in range(rule.m):
        total = total + int(outer[c]) * inner[c].astype(object)
    return total


def _level_for(rule, target):
    n = 0
    while True:
        size = rule.constant_length() ** n if rule.is_constant_length() else st.superword_length(rule, 0, n)
        if size >= target:
            return n, size
        n += 1


def _counts_fusion(rule, name, n):
    if rule.kind == "sadic":
        cells = st.sadic_superword(rule, name, n)
    else:
        cells = st.fusion_supertile(rule, name, n).symbols
    return np.bincount(cells.astype(np.int64), minlength=rule.m)


def test_criterion_10_cross_oracle_frequencies():
    t0 = time.perf_counter()
    worst, exact_ok, checked = {}, True, []
    for name in shipped_rules():
        r = R(name)
        if tr.is_primitive(r).verdict != "primitive":
            continue
        checked.append(name)
        if r.kind in ("symbolic", "inflation", "block"):
            spec = tr.letter_frequencies(r)
            n, size = _level_for(r, VOLUME)
            counts = _two_stage_counts(r, 0, n)
            vol = tr.volumes(r)
            total = math.fsum(int(c) * float(v) for c, v in zip(counts, vol))
            emp = np.array([int(c) / total for c in counts])
            M = tr.transition_matrix(r)
            for k in range(7):
                Mk = tr.mat_power(M, k)
                for j in range(r.m):
                    counts_k = np.bincount(_cells(r, j, k).astype(np.int64), minlength=r.m)
                    exact_ok &= counts_k.tolist() == [int(x) for x in Mk[:, j]]
        elif r.kind == "vector-fusion":
            M = tr.transition_matrix(r)
            spec = tr.perron_data(M).right
            n = 11  # 3^11 = 177147 cells
            emp = _counts_fusion(r, "A", n) / 3**n
            for k in range(7):
                Mk = tr.mat_power(M, k)
                for j, seed in enumerate(r.payload.seeds):
                    exact_ok &= _counts_fusion(r, seed, k).tolist() == [int(x) for x in Mk[:, j]]
        else:
            spec = tr.frequency_sequence(r, 40).rho(0)
            n = 0
            while sum(_counts_fusion(r, 0 if r.kind == "sadic" else "a", n)) < 10**5:
                n += 1
            c = _counts_fusion(r, 0 if r.kind == "sadic" else "a", n)
            emp = c / c.sum()
            for k in range(7):
                P = tr.matrix_product(r, 0, k) if k else tr.mat_identity(r.m)
                names = st.sadic_alphabet(r, k) if r.kind == "sadic" else st.fusion_names(r, k)
                for j, nm in enumerate(names):
                    exact_ok &= _counts_fusion(r, nm if r.kind != "sadic" else j, k).tolist() == [int(x) for x in P[:, j]]
        worst[name] = float(np.max(np.abs(np.asarray(spec, dtype=float) - emp)))
    elapsed = time.perf_counter() - t0
    top = max(worst, key=worst.get)
    ok = all(v < 1e-3 for v in worst.values()) and exact_ok
    record(10, ok, f"{len(checked)} primitive rules, largest gap {worst[top]:.1e} ({top}), M^n columns exact", elapsed)
    assert all(v < 1e-3 for v in worst.values()), worst
    assert exact_ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
