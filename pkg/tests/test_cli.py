import json
import os
from pathlib import Path

import pytest

from tilespec import SCHEMA_VERSION, report_schema_version, shipped_rule_path, shipped_rules
from tilespec.cli import dump_json, run
from tilespec.errors import TilespecError
from tilespec.pnm import decode_pnm

GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("TILESPEC_REGEN_GOLDEN") == "1"


def cli(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rp(name):
    return shipped_rule_path(name)


def test_schema_version():
    assert report_schema_version() == "1.0.0" == SCHEMA_VERSION


def test_analyze_fib(capsys):
    code, out, _ = cli(capsys, "analyze", rp("fib"), "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "1.0.0"
    assert doc["perron_root"] == pytest.approx(1.6180339887498949, abs=1e-12)
    assert doc["classification"] == "pisot"


def test_grow_tm2d_text(capsys):
    code, out, _ = cli(capsys, "grow", rp("tm2d"), "--type", "0", "--level", "2", "--format", "text")
    assert code == 0
    assert out == "0110\n1001\n1001\n0110\n"


def test_grow_coinc2d_is_bottom_up(capsys):
    _, out, _ = cli(capsys, "grow", rp("coinc2d"), "--type", "0", "--level", "1")
    assert out == "00\n10\n"


def test_diffract_period2(capsys):
    code, out, _ = cli(capsys, "diffract", rp("period2"), "--weights", "a=1,b=-1", "--xi", "0.5",
                       "--windows", "256,512,1024")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "xi_1,intensity,window"
    assert lines[1:] == ["0.5,1.0,256", "0.5,1.0,512", "0.5,1.0,1024"]


def test_diffract_csv_file_and_plot(capsys, tmp_path):
    csv, png = tmp_path / "i.csv", tmp_path / "i.png"
    code, _, _ = cli(capsys, "diffract", rp("fib"), "--weights", "a=1,b=-1", "--grid", "16", "--csv", csv,
                     "--plot", png)
    assert code == 0
    rows = csv.read_text().splitlines()
    assert rows[0] == "xi_1,intensity,window" and len(rows) == 1 + 16 * 3
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_diffract_peaks(capsys):
    code, out, _ = cli(capsys, "diffract", rp("period2"), "--weights", "a=1,b=-1", "--peaks", "--level", "10",
                       "--json")
    assert code == 0
    assert json.loads(out)["peaks"] == [{"xi": "1/2", "intensity": 1.0}]


def test_image_pgm_ppm_csv(capsys, tmp_path):
    pgm, ppm, csv = tmp_path / "a.pgm", tmp_path / "a.ppm", tmp_path / "a.csv"
    assert cli(capsys, "image", rp("tm2d"), "--weights", "0=1,1=-1", "--level", "4", "--grid", "16", "--out", pgm,
               "--csv", csv)[0] == 0
    assert decode_pnm(pgm.read_bytes()).shape == (16, 16)
    assert csv.read_text().splitlines()[0] == "xi_1,xi_2,intensity,window"
    assert cli(capsys, "image", rp("tm2d"), "--weights", "0=1,1=-1", "--level", "4", "--grid", "16", "--out", ppm,
               "--color")[0] == 0
    assert decode_pnm(ppm.read_bytes()).shape == (16, 16, 3)


def test_image_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    for p in (a, b):
        cli(capsys, "image", rp("coinc2d"), "--weights", "0=1,1=-1", "--out", p)
    assert a.read_bytes() == b.read_bytes()


def test_autocorr(capsys, tmp_path):
    out = tmp_path / "g.csv"
    assert cli(capsys, "autocorr", rp("period2"), "--weights", "a=1,b=-1", "--window", "64", "--max-offset", "2",
               "--out", out)[0] == 0
    assert out.read_text() == "z,re,im\n-2,1.0,0.0\n-1,-1.0,0.0\n0,1.0,0.0\n1,-1.0,0.0\n2,1.0,0.0\n"


def test_spectral_host(capsys):
    code, out, _ = cli(capsys, "spectral", rp("tm"), "--alpha", "3/1024", "--json")
    doc = json.loads(out)
    assert code == 0 and doc["host"]["verdict"] == "pass" and doc["coincidence"]["found"] is False


def test_freq_fusion(capsys, tmp_path):
    png = tmp_path / "f.png"
    code, out, _ = cli(capsys, "freq", rp("chacon"), "--json", "--plot", png)
    doc = json.loads(out)
    assert code == 0 and doc["unique_measure_evidence"] is True
    assert png.exists()


def test_words(capsys):
    code, out, _ = cli(capsys, "words", rp("fib"), "--length", "2", "--json")
    doc = json.loads(out)
    assert doc["words"] == ["aa", "ab", "ba"] and doc["saturated"] is True


def test_grow_out_is_atomic(capsys, tmp_path):
    target = tmp_path / "w.txt"
    target.write_text("old")
    assert cli(capsys, "grow", rp("fib"), "--level", "4", "--out", target)[0] == 0
    assert target.read_text() == "abaababa\n"
    assert [p.name for p in tmp_path.iterdir()] == ["w.txt"]


def test_grow_plot(capsys, tmp_path):
    for name in ["tm2d", "vfusion", "fib_tiles", "fib"]:
        png = tmp_path / f"{name}.png"
        assert cli(capsys, "grow", rp(name), "--level", "3", "--plot", png)[0] == 0
        assert png.stat().st_size > 0


# ---------------------------------------------------------------- exit codes


def test_exit_codes(capsys, tmp_path):
    bad_syntax = tmp_path / "s.rule"
    bad_syntax.write_text("rule x\nkind symbolic\ndim 1\nalphabet a\nmap a => a\n")
    bad_sem = tmp_path / "m.rule"
    bad_sem.write_text("rule x\nkind symbolic\ndim 1\nalphabet a\nmap a -> b\n")
    assert cli(capsys, "validate", bad_syntax)[0] == 2
    assert cli(capsys, "validate", bad_sem)[0] == 3
    assert cli(capsys, "grow", rp("fib"), "--type", "z")[0] == 3
    assert cli(capsys, "bogus")[0] == 2
    assert cli(capsys, "grow")[0] == 2
    assert cli(capsys, "grow", tmp_path / "missing.rule")[0] == 2
    # runtime computation error: the cap is exceeded
    code, _, err = cli(capsys, "grow", rp("fib"), "--level", "40", "--cap", "1000")
    assert code == 1 and "cap" in err


def test_invalid_rule_validate_exit(capsys, tmp_path):
    f = tmp_path / "o.rule"
    f.write_text("rule o\nkind fusion\ndim 1\nalphabet a b\nlevel 1\nsuper A :\nplace a at 0\nplace b at 0\n")
    code, out, _ = cli(capsys, "validate", f, "--json")
    assert code == 3
    assert json.loads(out)["issues"][0]["code"] == "OverlappingPlacement"


def test_nan_refused():
    with pytest.raises(TilespecError):
        dump_json({"x": float("nan")})


def test_help_mentions_defaults(capsys):
    with pytest.raises(SystemExit):
        from tilespec.cli import build_parser

        build_parser().parse_args(["diffract", "--help"])
    out = capsys.readouterr().out
    assert "256,512,1024" in out and "1e-6" in out


# ---------------------------------------------------------------- golden files


GOLDEN_CASES = [
    ("validate", ["--json"]),
    ("grow", ["--level", "3"]),
    ("matrix", ["--json"]),
    ("analyze", ["--json"]),
]


@pytest.mark.parametrize("name", shipped_rules())
@pytest.mark.parametrize("command,flags", GOLDEN_CASES, ids=[c for c, _ in GOLDEN_CASES])
def test_golden(capsys, name, command, flags):
    code, out, _ = cli(capsys, command, rp(name), *flags)
    assert code == 0
    path = GOLDEN / f"{name}.{command}.txt"
    if REGEN:
        GOLDEN.mkdir(exist_ok=True)
        path.write_text(out)
    assert out == path.read_text()
    if "--json" in flags:
        assert json.loads(out)["schema"] == SCHEMA_VERSION
