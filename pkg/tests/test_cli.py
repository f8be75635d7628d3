import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from wbltransport.cli import (
    ParseError,
    RunConfig,
    ValidationError,
    config_from_dict,
    dump_config,
    load_config,
    main,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def single_site_dict():
    return json.loads((CONFIGS / "single_site.json").read_text())


def test_single_site_config_parses():
    cfg = load_config(CONFIGS / "single_site.json")
    assert cfg.mode == "transient"
    assert cfg.h0.shape == (1, 1)
    assert cfg.lam_left[0, 0] == 0.1 and cfg.lam_right[0, 0] == 0.1
    assert cfg.bias_right == -2.0
    assert cfg.system().right.asymptotic_shift == 2.0


def test_defaults():
    data = single_site_dict()
    del data["numerics"]
    data["system"]["mu0"] = 0.5
    cfg = config_from_dict(data)
    assert (cfg.dt, cfg.t_end, cfg.eps_min) == (0.02, 25.0, 0.5 - 200.0)


def test_plain_real_matrices_accepted():
    data = single_site_dict()
    data["system"]["h0"] = [[0.0]]
    assert config_from_dict(data).h0[0, 0] == 0.0


def test_missing_lambda_names_field():
    data = single_site_dict()
    del data["system"]["leads"]["R"]["lambda"]
    with pytest.raises(ValidationError, match=r"system\.leads\.R\.lambda"):
        config_from_dict(data)


def test_dt_must_be_positive():
    data = single_site_dict()
    data["numerics"]["dt"] = 0
    with pytest.raises(ValidationError, match="dt must be positive"):
        config_from_dict(data)


def test_physical_validation_delegated():
    data = single_site_dict()
    data["system"]["leads"]["L"]["lambda"] = [[[-0.5, 0.0]]]
    with pytest.raises(ValidationError, match="lambda not non-negative definite"):
        config_from_dict(data)


def test_shape_mismatch():
    data = single_site_dict()
    data["system"]["leads"]["L"]["lambda"] = [[[0.1, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.1, 0.0]]]
    with pytest.raises(ValidationError, match="shape"):
        config_from_dict(data)


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "mode": "steady",\n  "system": {,\n}\n')
    with pytest.raises(ParseError, match="line 3"):
        load_config(path)


def test_bad_types():
    data = single_site_dict()
    data["numerics"]["panels"] = 3.5
    with pytest.raises(ParseError, match="numerics.panels"):
        config_from_dict(data)
    data = single_site_dict()
    data["system"]["h0"] = [["a"]]
    with pytest.raises(ParseError, match="system.h0"):
        config_from_dict(data)


def test_round_trip(tmp_path):
    cfg = load_config(CONFIGS / "chain3.json")
    path = tmp_path / "again.json"
    dump_config(cfg, path)
    again = load_config(path)
    assert isinstance(again, RunConfig)
    assert again == cfg
    np.testing.assert_array_equal(again.h0, cfg.h0)


def test_transient_zero_bias(tmp_path):
    out = tmp_path / "zb.csv"
    assert main(["transient", "--config", str(CONFIGS / "zero_bias.json"), "--out", str(out), "--stride", "25"]) == 0
    header, data = read_csv(out)
    assert header == ["t_fs", "J_L", "J_R", "occupation"]
    assert np.abs(data[:, 1:3]).max() < 1e-8
    assert data[-1, 0] == pytest.approx(25.0)


def test_transient_matches_steady(tmp_path):
    tr, st = tmp_path / "tr.csv", tmp_path / "st.csv"
    assert main(["transient", "--config", str(CONFIGS / "single_site.json"), "--out", str(tr), "--stride", "50"]) == 0
    assert main(["steady", "--config", str(CONFIGS / "single_site.json"), "--out", str(st)]) == 0
    _, tdata = read_csv(tr)
    header, sdata = read_csv(st)
    assert header == ["J_steady", "trace_sigma", "residual"]
    j_steady = sdata[0, 0]
    assert tdata[-1, 1] == pytest.approx(j_steady, rel=1e-2)
    assert tdata[-1, 2] == pytest.approx(-j_steady, rel=1e-2)
    assert sdata[0, 2] < 1e-8


def test_unit_override(tmp_path):
    na, ua = tmp_path / "na.csv", tmp_path / "ua.csv"
    main(["steady", "--config", str(CONFIGS / "single_site.json"), "--out", str(na)])
    main(["steady", "--config", str(CONFIGS / "single_site.json"), "--out", str(ua), "--unit", "uA"])
    assert read_csv(na)[1][0, 0] == pytest.approx(1e3 * read_csv(ua)[1][0, 0], rel=1e-12)


def test_transmission_grid(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["transmission", "--config", str(CONFIGS / "chain3.json"), "--out", str(out)]) == 0
    header, data = read_csv(out)
    assert header == ["eps_eV", "T"]
    assert data.shape == (401, 2)
    assert data[0, 0] == -3.0 and data[-1, 0] == 5.0
    assert np.all(data[:, 1] >= -1e-12) and data[:, 1].max() <= 1.0 + 1e-9


def test_deterministic_and_precise(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        main(["transient", "--config", str(CONFIGS / "single_site.json"), "--out", str(path), "--stride", "100"])
    assert a.read_bytes() == b.read_bytes()
    row = a.read_text().splitlines()[3].split(",")
    assert len(row[2].lstrip("-").replace(".", "").lstrip("0")) >= 12


def test_selftest(capsys):
    assert main(["selftest", "--config", str(CONFIGS / "single_site.json")]) == 0
    out = capsys.readouterr().out
    for name in ("P+(0) = 0", "equilibrium stationarity", "Hermiticity", "trace conservation"):
        assert name in out
    assert "FAIL" not in out


def test_exit_codes(tmp_path, capsys):
    data = single_site_dict()
    data["numerics"]["dt"] = -1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert main(["steady", "--config", str(bad)]) == 1
    assert "dt must be positive" in capsys.readouterr().err
    assert main(["steady", "--config", str(tmp_path / "missing.json")]) == 1
    # a real eigenvalue on the occupied window breaks the energy integrals
    data = single_site_dict()
    data["system"]["h0"] = [[[-1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]
    data["system"]["leads"]["L"]["lambda"] = [[[0.1, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
    data["system"]["leads"]["R"]["lambda"] = [[[0.1, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
    sing = tmp_path / "sing.json"
    sing.write_text(json.dumps(data))
    assert main(["steady", "--config", str(sing)]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "wbltransport.cli", "steady", "--config", str(CONFIGS / "single_site.json"), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
