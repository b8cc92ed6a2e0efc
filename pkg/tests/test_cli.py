import io
import json

import pytest

from annulus_spectra.cli import (
    EXIT_BAD_CONFIG,
    EXIT_INCONCLUSIVE,
    EXIT_OK,
    EXIT_VIOLATED,
    ConfigError,
    RunConfig,
    config_from_args,
    emit_plot_data,
    main,
    parse_decimal,
    parse_int_list,
    run,
)

AUDIT = ["audit", "--m", "3", "--modulus", "4", "--grids", "129,257"]


def _rows(argv):
    cfg = config_from_args(argv)
    buf = io.StringIO()
    code = run(cfg, stdout=buf)
    return code, buf.getvalue()


def test_parse_decimal():
    assert parse_decimal("0.5") == 0.5
    assert parse_decimal("-2.5E+2") == -250.0
    assert parse_decimal(".25") == 0.25
    for bad in ("1/2", "nan", "inf", "", "0x10", "1e"):
        with pytest.raises(ConfigError):
            parse_decimal(bad)


def test_parse_int_list():
    assert parse_int_list("0..3") == [0, 1, 2, 3]
    assert parse_int_list("129,257") == [129, 257]
    assert parse_int_list("-1..1,5") == [-1, 0, 1, 5]
    for bad in ("3..1", "a,b", ""):
        with pytest.raises(ConfigError):
            parse_int_list(bad)


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"subcommand": "constants", "bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig("nope")
    with pytest.raises(ConfigError):
        RunConfig("gn", grids=[8])
    with pytest.raises(ConfigError):
        RunConfig("gn", jobs=0)
    with pytest.raises(ConfigError):
        RunConfig("gn").num("m")


def test_exit_codes():
    assert main(AUDIT + ["--id", "simple_lm_4", "--alpha", "2"]) == EXIT_OK
    # 1 < alpha < 2 falls outside what the stated constant supports
    assert main(AUDIT + ["--id", "simple_lm_7", "--alpha", "1.5"]) == EXIT_VIOLATED
    assert main(AUDIT + ["--id", "ineq_frak_m-grad", "--gamma", "1.2"]) == EXIT_INCONCLUSIVE
    assert main(AUDIT + ["--id", "nope"]) == EXIT_BAD_CONFIG
    assert main(AUDIT + ["--id", "simple_lm_4", "--alpha", "two"]) == EXIT_BAD_CONFIG
    assert main(["audit", "--frobnicate", "1"]) == EXIT_BAD_CONFIG
    assert main(["thresholds", "--m", "3", "--ids", "bogus"]) == EXIT_BAD_CONFIG
    assert main(["kernel-check", "--operator", "Lx", "--m", "3"]) == EXIT_BAD_CONFIG


def test_json_rerun_is_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        assert main(AUDIT + ["--id", "simple_lm_4", "--alpha", "2", "--output", str(path)]) == EXIT_OK
        outs.append(path.read_bytes())
        meta = json.loads((tmp_path / f"r{i}.json.meta.json").read_text())
        assert {"timestamp", "seed", "version"} <= set(meta)
    assert outs[0] == outs[1]
    data = json.loads(outs[0])
    assert data[0]["anchor"] == "simple_lm_4" and data[0]["status"] == "certified"


def test_csv_line_endings(tmp_path):
    path = tmp_path / "cs.csv"
    assert main(["cs", "--trials", "50", "--format", "csv", "--output", str(path)]) == EXIT_OK
    raw = path.read_bytes()
    assert raw.startswith(b"anchor,id,status,")
    assert raw.count(b"\r\n") == 2 and b"\n" not in raw.replace(b"\r\n", b"")


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("SPECTRA_SEED", "17")
    assert config_from_args(["cs"]).seed == 17
    monkeypatch.setenv("SPECTRA_SEED", "x")
    with pytest.raises(ConfigError):
        config_from_args(["cs"])
    monkeypatch.delenv("SPECTRA_SEED")
    assert config_from_args(["cs", "--seed", "5"]).seed == 5


def test_plot_data(tmp_path):
    code, text = _rows(["kernel-check", "--operator", "Lm", "--m", "3", "--modes", "0"])
    assert code == EXIT_OK
    report = json.loads(text)[0]
    blocks = [b for b in emit_plot_data(report).split("\n\n") if b.strip()]
    assert blocks and all(len(line.split()) == 3 for b in blocks for line in b.splitlines()[1:])
    path = tmp_path / "gn.dat"
    assert main(["gn", "--m", "3", "--beta", "0.45", "--gamma", "0.8", "--plot", str(path)]) == EXIT_OK
    lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    assert lines and all(len(ln.split()) == 2 for ln in lines)
    with pytest.raises(ValueError):
        emit_plot_data({"status": "certified"})


def test_jobs_keep_order():
    argv = ["kernel-check", "--operator", "Lm", "--m", "3", "--modes", "0..2", "--grids", "65,129"]
    serial = _rows(argv)[1]
    parallel = _rows(argv + ["--jobs", "2"])[1]
    assert serial == parallel


def test_willmore_and_constants():
    code, text = _rows(["willmore", "--family", "sphere", "--nodes-r", "32", "--nodes-theta", "48"])
    row = json.loads(text)[0]
    assert code == EXIT_OK and row["energy"] == pytest.approx(12.566370614, rel=1e-6)
    code, text = _rows(["constants"])
    assert code == EXIT_OK
    assert {r["id"] for r in json.loads(text)} == {"m0", "cubic_roots", "f_of_2"}
