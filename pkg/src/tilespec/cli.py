"""Command-line interface: ``tilespec SUBCOMMAND RULE [options]``.

Exit codes: 0 success, 1 computation error, 2 usage or rule syntax error,
3 rule semantic error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from fractions import Fraction

import numpy as np

from . import SCHEMA_VERSION, diffraction as df, spectral as sp, supertile as st, transition as tr
from .errors import RuleSemanticError, TilespecError
from .rulespec import load_rule, validate

DEFAULT_WINDOWS = "256,512,1024"


# ---------------------------------------------------------------- output helpers


def atomic_write(path: str, data: bytes | str) -> None:
    """Write to a temporary file in the target directory, then rename over the target."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tilespec-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dump_json(payload: dict) -> str:
    """JSON with the schema version first; NaN and infinities are refused."""
    out = {"schema": SCHEMA_VERSION}
    out.update(_jsonable(payload))
    try:
        return json.dumps(out, indent=2, allow_nan=False) + "\n"
    except ValueError as exc:
        raise TilespecError(f"refusing to serialize non-finite number: {exc}") from None


def _fmt(x: float) -> str:
    return repr(float(x) + 0.0)  # no negative zero in text output


def _csv_intensity(rows, d: int) -> str:
    head = ",".join([f"xi_{k + 1}" for k in range(d)] + ["intensity", "window"])
    lines = [head]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r[:-1]) + f",{r[-1]}")
    return "\n".join(lines) + "\n"


def _emit(args, payload: dict, text: str) -> None:
    sys.stdout.write(dump_json(payload) if args.json else text)


def _parse_number(text: str):
    """Exact Fraction for decimal or p/q input, otherwise float."""
    try:
        return Fraction(text.strip())
    except ValueError:
        return float(text)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("windows must be positive integers")
    return vals


# ---------------------------------------------------------------- subcommands


def cmd_validate(args, rule) -> int:
    rep = validate(rule)
    lines = [f"{rule.name}: {'ok' if rep.ok else 'invalid'}"]
    lines += [f"  {i.severity} [{i.code}] {i.location}: {i.message}" for i in rep.issues]
    _emit(args, {"rule": rule.name, "kind": rule.kind, **rep.to_dict()}, "\n".join(lines) + "\n")
    return 0 if rep.ok else RuleSemanticError.exit_code


def _default_type(rule, level):
    if rule.kind == "fusion":
        return st.fusion_names(rule, level)[0]
    if rule.kind == "vector-fusion":
        return rule.payload.seeds[0]
    if rule.kind == "sadic":
        return st.sadic_alphabet(rule, level)[0]
    return rule.alphabet.symbols[0]


def _grow(rule, t, n, cap):
    if rule.kind == "block":
        return st.superblock(rule, t, n, cap)
    if rule.kind == "inflation":
        return st.supertile_interval(rule, t, n, cap=cap)
    if rule.kind in ("fusion", "vector-fusion"):
        return st.fusion_supertile(rule, t, n, cap)
    if rule.kind == "sadic":
        return st.sadic_superword(rule, t, n, cap)
    return st.superword(rule, t, n, cap)


def cmd_grow(args, rule) -> int:
    t = args.type if args.type is not None else _default_type(rule, args.level)
    patch = _grow(rule, t, args.level, args.cap)
    toks = rule.alphabet.symbols
    if isinstance(patch, st.Block):
        text = st.dump_block(rule, patch)
        payload = {"extents": list(patch.extents), "rows": [[toks[i] for i in r] for r in patch.rows()]}
        csv = "x,y,symbol\n" + "".join(
            f"{x},{y},{toks[patch.cells[y, x]]}\n" for y in range(patch.cells.shape[0]) for x in range(patch.cells.shape[1])
        ) if patch.cells.ndim == 2 else text
    elif isinstance(patch, st.IntervalPatch):
        text = st.spell(rule, patch.symbols) + "\n"
        payload = {"tiles": [[toks[s], left, length] for s, left, length in patch.tiles], "total_length": patch.total_length}
        csv = "symbol,left,length\n" + "".join(f"{toks[s]},{_fmt(a)},{_fmt(b)}\n" for s, a, b in patch.tiles)
    elif isinstance(patch, st.LatticePatch):
        text = st.dump_lattice(rule, patch)
        payload = {"cells": [[*c, toks[s]] for c, s in zip(patch.coords.tolist(), patch.symbols.tolist())]}
        csv = ",".join(["x", "y", "z"][: patch.coords.shape[1]] + ["symbol"]) + "\n" + text.replace(" ", ",")
    else:
        text = st.spell(rule, patch) + "\n"
        payload = {"word": [toks[i] for i in patch.tolist()], "length": int(len(patch))}
        csv = "position,symbol\n" + "".join(f"{i},{toks[s]}\n" for i, s in enumerate(patch.tolist()))
    payload = {"rule": rule.name, "type": t, "level": args.level, **payload}
    body = {"text": text, "json": dump_json(payload), "csv": csv}[args.format]
    if args.json:
        body = dump_json(payload)
    if args.out:
        atomic_write(args.out, body)
        sys.stdout.write(f"wrote {args.out}\n")
    else:
        sys.stdout.write(body)
    if args.plot:
        from .plotting import plot_patch

        plot_patch(rule, patch, args.plot, title=f"{rule.name}: level {args.level} supertile of {t}")
    return 0


def cmd_words(args, rule) -> int:
    lang = st.legal_words(rule, args.length, args.horizon)
    words = sorted(lang.strings())
    payload = {
        "rule": rule.name,
        "length": args.length,
        "horizon": args.horizon,
        "saturated": lang.saturated,
        "complexity": len(words),
        "words": words,
    }
    text = f"{len(words)} words of length {args.length} (horizon {args.horizon}, saturated={lang.saturated})\n"
    text += "".join(w + "\n" for w in words)
    _emit(args, payload, text)
    return 0


def _perron_payload(M):
    try:
        return tr.perron_data(M).to_dict()
    except TilespecError as exc:
        return {"error": str(exc)}


def cmd_matrix(args, rule) -> int:
    if args.to is not None:
        M = tr.matrix_product(rule, args.level or 0, args.to)
    else:
        M = tr.transition_matrix(rule, args.level)
    prim = tr.is_primitive(rule, args.horizon)
    payload = {"rule": rule.name, "matrix": M.tolist(), "primitive": prim.to_dict()}
    if M.shape[0] == M.shape[1]:
        payload.update(_perron_payload(M))
    text = "\n".join(" ".join(str(x) for x in row) for row in M.tolist()) + "\n"
    text += f"primitive: {prim.verdict}" + (f" (N={prim.N})" if prim.N else "") + "\n"
    if "theta" in payload:
        text += f"theta: {payload['theta']!r}\n"
    _emit(args, payload, text)
    return 0


def cmd_freq(args, rule) -> int:
    if rule.kind in ("fusion", "sadic"):
        seq = tr.frequency_sequence(rule, args.nmax, args.tol)
        payload = {"rule": rule.name, **seq.to_dict()}
        text = "".join(f"rho_{n}: {' '.join(_fmt(x) for x in r)}\n" for n, r in seq.levels[:6])
        text += f"max spread: {max(s for _, s in seq.spread)!r} (unique-measure evidence: {seq.unique})\n"
        if args.plot:
            from .plotting import plot_frequencies

            plot_frequencies(seq, args.plot, title=f"{rule.name}: frequency sequence")
        _emit(args, payload, text)
        return 0
    spectral = tr.letter_frequencies(rule)
    seed = args.seed if args.seed is not None else rule.alphabet.symbols[0]
    emp = tr.empirical_frequencies(rule, seed, args.level)
    payload = {
        "rule": rule.name,
        "frequencies": spectral.tolist(),
        "empirical": {"seed": seed, "level": args.level, "frequencies": emp.tolist()},
        "max_difference": float(np.max(np.abs(spectral - emp))),
    }
    text = "".join(f"{s}: {_fmt(a)}  (empirical {_fmt(b)})\n" for s, a, b in zip(rule.alphabet, spectral, emp))
    _emit(args, payload, text)
    return 0


def _alpha_arg(text):
    if text is None:
        return None
    try:
        return Fraction(text) if ("/" in text or text.lstrip("+-").isdigit()) else text
    except ValueError:
        return text


def cmd_spectral(args, rule) -> int:
    alpha = _alpha_arg(args.alpha)
    rep = sp.spectral_report(rule, alpha, args.p, args.nmax, args.tol)
    payload = {"rule": rule.name, **rep}
    text = "".join(f"{k}: {v}\n" for k, v in rep.items() if k != "host")
    if "host" in rep:
        h = rep["host"]
        text += f"host: alpha={h['alpha']} p={h['p']} verdict={h['verdict']} last distance={h['distances'][-1][1]!r}\n"
        if args.plot:
            from .plotting import plot_distances

            plot_distances(sp.host_test(rule, alpha, args.p, args.nmax, args.tol), args.plot, title=f"{rule.name}: host test")
    _emit(args, payload, text)
    return 0


def cmd_analyze(args, rule) -> int:
    rep = validate(rule)
    payload = {"rule": rule.name, "kind": rule.kind, "valid": rep.ok}
    if rule.kind in ("symbolic", "inflation", "block", "vector-fusion"):
        M = tr.transition_matrix(rule)
        payload["matrix"] = M.tolist()
        payload["primitive"] = tr.is_primitive(rule).to_dict()
        payload.update(_perron_payload(M))
        av = sp.algebraic_verdict(M)
        payload.update(av.to_dict())
        if rule.kind != "vector-fusion" and payload["primitive"]["verdict"] == "primitive":
            payload["frequencies"] = tr.letter_frequencies(rule).tolist()
        if rule.kind in ("symbolic", "inflation"):
            payload["weak_mixing"] = sp.weak_mixing_verdict(rule)
            payload["strong_coincidence"] = sp.strong_coincidence(rule).to_dict()
            if rule.kind == "inflation":
                payload["natural_lengths"] = tr.natural_lengths(rule).tolist()
    else:
        payload["primitive"] = tr.is_primitive(rule).to_dict()
        payload["matrix"] = tr.transition_matrix(rule, 1).tolist()
        try:
            seq = tr.frequency_sequence(rule, args.nmax, args.tol)
        except TilespecError as exc:
            payload["frequency_error"] = str(exc)
        else:
            payload["frequencies"] = seq.rho(0).tolist()
            payload["unique_measure_evidence"] = seq.unique
    keys = ("kind", "valid", "primitive", "theta", "perron_root", "classification", "weak_mixing", "frequencies",
            "unique_measure_evidence")
    text = "".join(f"{k}: {payload[k]}\n" for k in keys if k in payload)
    _emit(args, payload, text)
    return 0


def _comb(rule, weights, size: int):
    """A comb covering [0, size)^d grown from the origin."""
    if rule.kind == "block":
        n = 0
        while min(rule.payload.size) ** n < size:
            n += 1
        return df.comb_from_patch(st.superblock(rule, 0, n), weights)
    if rule.kind == "inflation":
        _, t, a = st.fixed_point_prefix(rule, 1)
        n = t
        while st.supertile_interval(rule, a, n).total_length < size:
            n += t
        return df.comb_from_patch(st.supertile_interval(rule, a, n), weights)
    if rule.kind == "fusion" and rule.dim == 1:
        name, n = st.fusion_names(rule, 0)[0], 0
        while st.fusion_volume(rule, name, n) < size:
            n += 1
        return df.comb_from_patch(st.fusion_word(rule, name, n), weights)
    if rule.kind == "sadic":
        n = 0
        while len(st.sadic_superword(rule, 0, n)) < size:
            n += 1
        return df.comb_from_patch(st.sadic_superword(rule, 0, n), weights)
    word, _, _ = st.fixed_point_prefix(rule, size)
    return df.comb_from_patch(word, weights)


def cmd_diffract(args, rule) -> int:
    weights = df.parse_weights(rule, args.weights)
    if args.peaks:
        level = args.level if args.level is not None else 10
        peaks = df.peak_scan(rule, weights, level, args.threshold, args.depth)
        payload = {"rule": rule.name, "level": level, "threshold": args.threshold,
                   "peaks": [{"xi": str(p.xi), "intensity": p.intensity} for p in peaks]}
        text = "".join(f"{p.xi}\t{p.intensity!r}\n" for p in peaks) or "no peaks above threshold\n"
        _emit(args, payload, text)
        return 0
    windows = args.windows
    comb = _comb(rule, weights, max(windows))
    d = comb.dim
    if args.xi:
        xis = [tuple(_parse_number(t) for t in x.split(",")) for x in args.xi]
    else:
        g = args.grid
        xis = [(Fraction(u, g),) for u in range(g)] if d == 1 else [(Fraction(u, g), Fraction(v, g)) for v in range(g) for u in range(g)]
    for x in xis:
        if len(x) != d:
            raise argparse.ArgumentTypeError(f"xi needs {d} components")
    results = [df.intensity(comb, x if d > 1 else x[0], windows) for x in xis]
    rows = [tuple(x) + (I, N) for x, r in zip(xis, results) for I, N in zip(r.intensities, r.windows)]
    csv = _csv_intensity(rows, d)
    if args.csv:
        atomic_write(args.csv, csv)
    payload = {
        "rule": rule.name,
        "windows": list(windows),
        "results": [
            {"xi": [float(v) for v in x], "intensities": list(r.intensities), "gaps": list(r.gaps),
             "converged": r.converged()}
            for x, r in zip(xis, results)
        ],
    }
    if args.plot and d == 1:
        from .plotting import plot_intensity

        grid = df.IntensityGrid(np.array([float(x[0]) for x in xis]), np.array([r.intensities for r in results]), tuple(windows))
        plot_intensity(grid, args.plot, title=f"{rule.name}: intensity")
    text = csv if not args.csv else f"wrote {args.csv}\n"
    _emit(args, payload, text)
    return 0


def cmd_image(args, rule) -> int:
    from .pnm import encode_pgm, encode_ppm, false_color

    weights = df.parse_weights(rule, args.weights)
    img = df.diffraction_image(rule, weights, args.level, args.grid, args.gamma)
    data = encode_ppm(false_color(img.pixels)) if args.color else encode_pgm(img.pixels)
    atomic_write(args.out, data)
    if args.csv:
        g = args.grid
        side = rule.payload.size[0] ** args.level
        rows = [(Fraction(u, g), Fraction(v, g), img.intensity[v, u], side) for v in range(g) for u in range(g)]
        atomic_write(args.csv, _csv_intensity(rows, 2))
    if args.plot:
        from .plotting import plot_image

        plot_image(img, args.plot, title=rule.name)
    payload = {
        "rule": rule.name,
        "level": args.level,
        "grid": args.grid,
        "gamma": args.gamma,
        "out": args.out,
        "sha256": hashlib.sha256(data).hexdigest(),
        "top100_share": img.top_share(),
        "max_intensity": float(img.intensity.max()),
    }
    _emit(args, payload, f"wrote {args.out} (sha256 {payload['sha256'][:16]}, top-100 share {payload['top100_share']:.6f})\n")
    return 0


def cmd_autocorr(args, rule) -> int:
    weights = df.parse_weights(rule, args.weights)
    N, R = args.window, args.max_offset
    comb = _comb(rule, weights, N + R)
    d = comb.dim
    anchor = ((0,) * d, (N,) * d) if comb.integer else (0.0, float(N))
    if d == 1 and comb.integer:
        anchor = (0, N)
    meas = df.autocorrelation(comb.window(N + R), R, anchor=anchor, hermitian=True)
    lines = ["z,re,im"]
    for z in sorted(meas.atoms):
        c = meas.atoms[z]
        zs = " ".join(str(v) for v in z) if isinstance(z, tuple) else (str(z) if isinstance(z, int) else _fmt(z))
        lines.append(f"{zs},{_fmt(c.real)},{_fmt(c.imag)}")
    csv = "\n".join(lines) + "\n"
    if args.out:
        atomic_write(args.out, csv)
    if args.plot and d == 1:
        from .plotting import plot_autocorrelation

        plot_autocorrelation(meas, args.plot, title=f"{rule.name}: autocorrelation")
    payload = {"rule": rule.name, "window": N, "max_offset": R,
               "atoms": [{"z": z, "re": c.real, "im": c.imag} for z, c in sorted(meas.atoms.items())]}
    _emit(args, payload, csv if not args.out else f"wrote {args.out}\n")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("rule", help="rule file")
    common.add_argument("--json", action="store_true", help="machine-readable JSON on standard output")
    common.add_argument("--tol", type=float, default=1e-6, help="convergence tolerance (default 1e-6)")
    common.add_argument("--nmax", type=int, default=40, help="truncation depth for limits (default 40)")
    common.add_argument("--plot", metavar="PNG", help="also render a matplotlib figure to this file")

    p = argparse.ArgumentParser(prog="tilespec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tilespec schema {SCHEMA_VERSION}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a rule file")

    g = sub.add_parser("grow", parents=[common], help="generate an n-supertile")
    g.add_argument("--type", help="seed symbol or supertile name (default: first)")
    g.add_argument("--level", type=int, default=3, help="level n (default 3)")
    g.add_argument("--format", choices=("text", "json", "csv"), default="text")
    g.add_argument("--out", help="write here instead of standard output")
    g.add_argument("--cap", type=int, default=st.DEFAULT_CAP, help="maximum number of cells (default 1e8)")

    w = sub.add_parser("words", parents=[common], help="legal words and complexity")
    w.add_argument("--length", type=int, default=2, help="word length (default 2)")
    w.add_argument("--horizon", type=int, default=6, help="deepest supertile level scanned (default 6)")

    m = sub.add_parser("matrix", parents=[common], help="transition matrix, primitivity and Perron data")
    m.add_argument("--level", type=int, help="fusion/sadic level n (M_{n-1,n}); with --to the start level")
    m.add_argument("--to", type=int, help="product M_{level,to}")
    m.add_argument("--horizon", type=int, default=20, help="levels searched for primitivity (default 20)")

    f = sub.add_parser("freq", parents=[common], help="letter frequencies or fusion frequency sequence")
    f.add_argument("--seed", help="seed symbol for the empirical count")
    f.add_argument("--level", type=int, default=8, help="level of the empirical count (default 8)")

    s = sub.add_parser("spectral", parents=[common], help="Pisot, coincidence, height and Host diagnostics")
    s.add_argument("--alpha", help="candidate eigenvalue for the Host test: p/q or a decimal string")
    s.add_argument("--p", type=int, default=1, help="Host test power p (default 1)")

    sub.add_parser("analyze", parents=[common], help="matrix, Perron data and spectral summary")

    d = sub.add_parser("diffract", parents=[common], help="Bombieri-Taylor intensities or a q-adic peak scan")
    d.add_argument("--weights", required=True, help="per-symbol weights, e.g. a=1,b=-1 or a=1+2i")
    d.add_argument("--xi", action="append", help="frequency (comma-separated in 2-D); repeatable")
    d.add_argument("--grid", type=int, default=64, help="uniform grid size when no --xi is given (default 64)")
    d.add_argument("--windows", type=_int_list, default=_int_list(DEFAULT_WINDOWS), help=f"default {DEFAULT_WINDOWS}")
    d.add_argument("--csv", help="write xi,intensity,window rows here")
    d.add_argument("--peaks", action="store_true", help="scan q-adic candidates j/q^depth instead")
    d.add_argument("--level", type=int, help="superword level for --peaks (default 10)")
    d.add_argument("--depth", type=int, help="candidate denominator exponent (default: level)")
    d.add_argument("--threshold", type=float, default=0.01, help="relative to max|w|^2 (default 0.01)")

    i = sub.add_parser("image", parents=[common], help="2-D diffraction image as PGM/PPM")
    i.add_argument("--weights", required=True, help="per-symbol weights, e.g. a=1,b=-1 or a=1+2i")
    i.add_argument("--level", type=int, default=7, help="block level (default 7)")
    i.add_argument("--grid", type=int, default=256, help="pixels per side (default 256)")
    i.add_argument("--gamma", type=float, default=0.5, help="display exponent (default 0.5)")
    i.add_argument("--out", required=True, help="output .pgm (or .ppm with --color)")
    i.add_argument("--color", action="store_true", help="false-color PPM instead of grayscale PGM")
    i.add_argument("--csv", help="also write raw intensities")

    a = sub.add_parser("autocorr", parents=[common], help="autocorrelation coefficients z,re,im")
    a.add_argument("--weights", required=True, help="per-symbol weights, e.g. a=1,b=-1 or a=1+2i")
    a.add_argument("--window", type=int, default=4096, help="anchor window [0,N) (default 4096)")
    a.add_argument("--max-offset", type=int, default=8, help="largest |z| per axis (default 8)")
    a.add_argument("--out", help="write the CSV here")
    return p


COMMANDS = {
    "validate": cmd_validate,
    "grow": cmd_grow,
    "words": cmd_words,
    "matrix": cmd_matrix,
    "freq": cmd_freq,
    "spectral": cmd_spectral,
    "analyze": cmd_analyze,
    "diffract": cmd_diffract,
    "image": cmd_image,
    "autocorr": cmd_autocorr,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rule = load_rule(args.rule)
        return COMMANDS[args.command](args, rule)
    except TilespecError as exc:
        print(f"tilespec: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, TypeError, argparse.ArgumentTypeError) as exc:
        print(f"tilespec: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
