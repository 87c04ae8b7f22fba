import csv
import io
import subprocess
import sys

import pytest

from admlat import __version__
from admlat.cli import main


def _table(text):
    header = [line for line in text.splitlines() if line.startswith("#")]
    body = [line for line in text.splitlines() if line and not line.startswith("#")]
    return header, list(csv.DictReader(io.StringIO("\n".join(body))))


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_growth_rows(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["growth", "--field", "fields/sqrt2.fld", "--nmin", "16", "--nmax", "16384", "--out", str(out)]) == 0
    header, rows = _table(out.read_text())
    assert len(rows) == 11
    assert [int(r["N"]) for r in rows] == [2 ** k for k in range(4, 15)]
    assert header[0] == f"# lat {__version__}"
    joined = "\n".join(header)
    for key in ("# command: growth", "# field:", "# seed: 0", "# params:"):
        assert key in joined


def test_missing_field_file():
    proc = subprocess.run([sys.executable, "-m", "admlat.cli", "field", "--field", "no/such/file.fld"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "no/such/file.fld" in proc.stderr
    assert len(proc.stderr.strip().splitlines()) == 1


def test_numeric_guard_exit_code(capsys):
    code, _, err = _run(capsys, "poisson", "--field", "sqrt2", "--N", "8,8", "--shifts", "1")
    assert code == 3 and "dual points" in err


def test_validation_exit_code(capsys):
    code, _, err = _run(capsys, "count", "--field", "sqrt2", "--box", "1,-1")
    assert code == 2 and err


def test_sweep_is_byte_identical(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["lds", "sweep", "--field", "sqrt2", "--nmin", "16", "--nmax", "256", "--seed", "7",
                     "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_sampled_mode_reproducible(tmp_path):
    outs = []
    for name in ("a", "b"):
        p = tmp_path / f"{name}.csv"
        main(["supsearch", "--field", "cubic", "--box", "4,4,4", "--shift", "0.1,0.2,0.3", "--mode", "sampled",
              "--samples", "256", "--seed", "11", "--out", str(p)])
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_plot_written(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["growth", "--field", "sqrt2", "--nmin", "16", "--nmax", "256", "--out", str(out), "--plot"]) == 0
    png = out.with_suffix(".png")
    assert png.exists() and png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_plot_needs_out(capsys):
    code, _, err = _run(capsys, "growth", "--field", "sqrt2", "--nmax", "32", "--plot")
    assert code == 2


def test_count_and_remainder(capsys):
    code, out, _ = _run(capsys, "count", "--field", "Z2", "--box", "2,2")
    _, rows = _table(out)
    assert code == 0 and int(rows[0]["count"]) == 4
    code, out, _ = _run(capsys, "remainder", "--field", "Z2", "--box", "1.5,1.5")
    _, rows = _table(out)
    assert float(rows[0]["remainder"]) == 1.75


def test_poisson_columns(capsys):
    code, out, _ = _run(capsys, "poisson", "--field", "sqrt2", "--N", "8,8", "--tau", "0.015625", "--shifts", "3")
    assert code == 0
    _, rows = _table(out)
    assert len(rows) == 3
    for r in rows:
        assert abs(float(r["R_direct"]) - float(r["R_poisson"])) <= float(r["band"])
        assert float(r["budget"]) <= 0.5


def test_units_and_reduce(capsys):
    code, out, _ = _run(capsys, "units", "count", "--field", "sqrt2", "--t", "2.2034")
    _, rows = _table(out)
    assert code == 0 and {int(r["count"]) for r in rows} == {5}
    code, out, _ = _run(capsys, "reduce", "--field", "sqrt2", "--coeffs", "3,3")
    _, rows = _table(out)
    assert code == 0
    code, out, _ = _run(capsys, "units", "verify", "--field", "cubic")
    assert code == 0


def test_fdomain_enum(capsys):
    code, out, _ = _run(capsys, "fdomain-enum", "--field", "sqrt2", "--max-norm", "10")
    _, rows = _table(out)
    assert code == 0
    assert [int(r["k"]) for r in rows] == list(range(1, len(rows) + 1))
    assert rows[0]["abs_norm"] == "1" and rows[0]["c1"] == "1" and rows[0]["c2"] == "0"


def test_lds_gen_then_dstar(tmp_path, capsys):
    pts = tmp_path / "p.txt"
    assert main(["lds", "gen", "--field", "sqrt2", "--n", "64", "--out", str(pts)]) == 0
    capsys.readouterr()
    code, out, _ = _run(capsys, "lds", "dstar", "--points", str(pts))
    _, rows = _table(out)
    assert code == 0 and 0 < float(rows[0]["d_star"]) < 1


def test_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("LAT_THREADS", "2")
    code, out, _ = _run(capsys, "field", "--field", "sqrt5")
    assert code == 0 and "# params:" in out


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    for name in ("field", "lattice", "count", "remainder", "supsearch", "growth", "poisson", "units", "reduce",
                 "fdomain-enum", "lds"):
        assert name in text
