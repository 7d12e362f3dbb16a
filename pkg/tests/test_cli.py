import csv
import io
import json

import pytest

from gwrdt.cli import build_parser, parse_grid, run

SUBCOMMANDS = [
    "validate", "spectral", "simulate", "enumerate", "measures", "rdcurve",
    "irho", "ball", "verify-aep", "ldp-decay", "stationarity",
]


def _run(argv):
    buf = io.StringIO()
    code = run(argv, stream=buf)
    return code, buf.getvalue()


def _tables(text):
    """Split stdout into CSV tables (each preceded by its '#' header)."""
    blocks, cur = [], []
    for line in text.splitlines():
        if line.startswith("# tool:") and cur:
            blocks.append(cur)
            cur = []
        cur.append(line)
    if cur:
        blocks.append(cur)
    return [list(csv.reader([l for l in b if not l.startswith("#")])) for b in blocks]


def test_validate_mtdna():
    code, out = _run(["validate", "--model", "mtdna", "--alpha", "0.5"])
    assert code == 0
    assert "critical (|lambda-1| <= 1e-09),yes" in out
    assert "weakly irreducible,yes" in out


def test_validate_failure_exit_1(tmp_path):
    cfg = {
        "alphabet": ["x"], "root_law": {"x": 1.0}, "cap": 2,
        "kernel": {"x": [{"children": [], "p": 0.6}, {"children": ["x", "x"], "p": 0.4}]},
    }
    path = tmp_path / "sub.json"
    path.write_text(json.dumps(cfg))
    code, out = _run(["validate", "--config", str(path)])
    assert code == 1 and "verdict,FAIL" in out


def test_rdcurve_value():
    code, out = _run(["rdcurve", "--model", "mtdna", "--alpha", "0.5", "--rho", "type-hamming", "--grid", "0:0.5:0.05"])
    assert code == 0
    rd = [t for t in _tables(out) if t[0] == ["d", "R"]][0]
    vals = {float(d): float(r) for d, r in rd[1:]}
    assert vals[0.25] == pytest.approx(0.130812, abs=1e-6)
    assert vals[0.5] == 0.0 and len(vals) == 11


def test_simulate_parity_exit_1(capsys):
    code = run(["simulate", "--model", "mtdna", "--alpha", "0.5", "--n", "4"], stream=io.StringIO())
    assert code == 1
    assert "NoSuchSize" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["rdcurve", "--grid", "1:0:1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run(["ldp-decay", "--interval", "0.2:0.2"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run(["nope"])
    assert exc.value.code == 2


def test_config_errors_exit_2_with_schema(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert run(["validate", "--config", str(bad)], stream=io.StringIO()) == 2
    err = capsys.readouterr().err
    assert "bad.json:1:" in err and "Model config (JSON)" in err
    assert run(["irho", "--rho", str(tmp_path / "missing.csv")], stream=io.StringIO()) == 2


def test_distortion_table_file(tmp_path):
    table = tmp_path / "rho.csv"
    table.write_text("mark1,mark2,value\n*,*,1\n1|,1|,0\n0|,0|,0\n")
    code, out = _run(["ball", "--tree", "1 1:0", "--d", "0", "--rho", str(table)])
    assert code == 0
    row = _tables(out)[0][1]
    assert float(row[4]) == 1.0 and float(row[5]) == 0.0


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_documents_flags(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        run([sub, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--model", "--alpha", "--config", "--rho", "--seed", "--out", "--tol"):
        assert flag in text
    extra = {
        "simulate": ["--n", "--samples"],
        "enumerate": ["--n"],
        "measures": ["--n"],
        "rdcurve": ["--grid", "--n-list"],
        "irho": ["--grid"],
        "ball": ["--n", "--samples", "--exact", "--mc"],
        "verify-aep": ["--n-list", "--samples"],
        "ldp-decay": ["--n-list", "--samples"],
        "stationarity": ["--n-list", "--samples"],
    }
    for flag in extra.get(sub, []):
        assert flag in text


def test_every_output_has_metadata_header(tmp_path):
    out = tmp_path / "o"
    assert run(["verify-aep", "--d", "0.25", "--n-list", "3,5", "--trees-per-n", "2", "--out", str(out)]) == 0
    csvs = sorted(out.glob("*.csv"))
    assert csvs
    for f in csvs:
        head = f.read_text().splitlines()[:3]
        assert head[0] == "# tool: gwrdt"
        assert head[1].startswith("# version: ")
        assert head[2].startswith("# config_digest: ")
    meta = json.loads((out / "verify_aep.json").read_text())
    assert meta["metadata"]["seed"] == 0
    assert meta["config"]["d"] == 0.25


def test_out_dir_reproducible_across_workers(tmp_path, monkeypatch):
    argv = ["stationarity", "--n-list", "5,7", "--samples", "40", "--seed", "5"]
    monkeypatch.setenv("GWRDT_THREADS", "1")
    assert run(argv + ["--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("GWRDT_THREADS", "2")
    assert run(argv + ["--out", str(tmp_path / "b")]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_all_subcommands_run():
    cases = [
        ["spectral", "--alpha", "0.3"],
        ["simulate", "--n", "5", "--samples", "3"],
        ["simulate", "--samples", "2"],
        ["enumerate", "--n", "3"],
        ["measures", "--n", "5"],
        ["irho", "--model", "uniform-binary", "--grid", "0:1:0.5"],
        ["ball", "--n", "5", "--d", "0.2", "--mc", "--samples", "2000"],
        ["ldp-decay", "--interval", "0:0.1", "--n-list", "3,5"],
    ]
    for argv in cases:
        code, out = _run(argv)
        assert code == 0, argv
        assert out.startswith("# tool: gwrdt")


def test_spectral_output():
    code, out = _run(["spectral", "--alpha", "0.5"])
    tables = _tables(out)
    mat = tables[0]
    assert mat[0] == ["row_pair", "00", "01", "10", "11"]
    assert [float(v) for v in mat[4][1:]] == [0.25, 0.25, 0.25, 0.25]
    pi = tables[1]
    assert [float(r[1]) for r in pi[1:]] == pytest.approx([0.25] * 4, abs=1e-10)


def test_model_y_override():
    code, out = _run(["spectral", "--alpha", "0.2", "--alpha-y", "0.6"])
    assert code == 0
    mat = _tables(out)[0]
    assert float(mat[4][1]) == pytest.approx(0.2 * 0.6)


def test_parse_grid_inclusive():
    assert parse_grid("0:0.5:0.05")[-1] == 0.5
    assert len(parse_grid("0:1:0.125")) == 9


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for sub in SUBCOMMANDS:
        assert sub in text
