import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from starforms.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_IO, EXIT_OK, ConfigError, fmt, load_config, main


def write_config(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fmt_round_trips_floats():
    x = 0.1 + 0.2
    assert float(fmt(x)) == x
    assert fmt(np.float64(1 / 3)) == format(1 / 3, ".17g")
    assert fmt(3) == "3" and fmt(True) == "1" and fmt("no-bc") == "no-bc"


def test_unsupported_dimension_is_config_error(tmp_path):
    cfg = write_config(tmp_path, {"n": 7})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG
    with pytest.raises(ConfigError, match="dimension"):
        load_config("chain", {"n": 7})


def test_bad_config_contents(tmp_path):
    with pytest.raises(ConfigError):
        load_config("moments", {"radius": -1.0})
    with pytest.raises(ConfigError):
        load_config("chain", {"bogus": 1})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["moments", "--config", str(bad), "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG


def test_missing_config_is_io_error(tmp_path):
    assert main(["moments", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "o.csv")]) == EXIT_IO


def test_unwritable_output_is_io_error(tmp_path):
    assert main(["moments", "--out", str(tmp_path / "no_such_dir" / "o.csv")]) == EXIT_IO


def test_moments_output(tmp_path):
    out = tmp_path / "m.csv"
    cfg = write_config(tmp_path, {"degree": 2})
    assert main(["moments", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert rows[0] == ["alpha_1", "alpha_2", "value"]
    table = {(int(a), int(b)): float(v) for a, b, v in rows[1:]}
    assert len(table) == 6
    assert table[(0, 0)] == pytest.approx(1.0, abs=1e-12)
    assert abs(table[(1, 0)]) <= 1e-12 and abs(table[(1, 1)]) <= 1e-12
    assert table[(2, 0)] == pytest.approx(table[(0, 2)], rel=1e-12)


def test_moments_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["moments", "--out", str(a)])
    main(["moments", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_empty_selection_writes_header_only(tmp_path):
    out = tmp_path / "c.csv"
    cfg = write_config(tmp_path, {"modes": ["bc"], "ell": [2]})
    assert main(["chain", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert len(rows) == 1 and rows[0][:3] == ["N", "ell", "mode"]


def test_chain_failing_tolerance(tmp_path):
    out = tmp_path / "c.csv"
    cfg = write_config(tmp_path, {"N": [2], "ell": [1], "tolerances": {"no-bc_dv": 0.0, "no-bc_jump": 1e-8, "bc_dv": 1e-2}})
    assert main(["chain", "--config", cfg, "--out", str(out)]) == EXIT_FAIL
    rows = read_rows(out)
    assert len(rows) == 2 and float(rows[1][3]) > 0


def test_chain_passing_and_deterministic(tmp_path):
    cfg = write_config(tmp_path, {"N": [2], "ell": [1]})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["chain", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["chain", "--config", cfg, "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_bad_worker_count(tmp_path, monkeypatch):
    monkeypatch.setenv("STARFORMS_WORKERS", "many")
    assert main(["moments", "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG


@pytest.mark.slow
def test_verify_end_to_end(tmp_path):
    out = tmp_path / "v.csv"
    proc = subprocess.run([sys.executable, "-m", "starforms.cli", "verify", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
    rows = read_rows(out)
    assert rows[0] == ["suite", "invariant", "residual", "tolerance", "pass"]
    assert {r[0] for r in rows[1:]} == {"algebra", "homotopy", "locality", "trace", "gluing"}
    assert all(r[4] == "1" for r in rows[1:])
