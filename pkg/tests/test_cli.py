import csv
import json

import numpy as np
import pytest

from varbgk.cli import main
from varbgk.config import ConfigError, parse_config


def base_config(out="out", **solver):
    cfg = {
        "flux": {"dim": 1, "poly": [[0.0, 0.0, 0.5]]},
        "grid": {"x_min": 0.0, "x_max": 2.0, "nx": 40, "eps": 0.1, "n_sub": 2},
        "solver": {"h": 1e-3, "cfl": 0.9, "t_end": 0.1, "snapshot_stride": 5, "boundary": "outflow"},
        "initial": {"type": "riemann", "rho_l": 1.0, "rho_r": 0.0, "x0": 0.5},
        "compare": {"type": "burgers_exact"},
        "output": out,
    }
    cfg["solver"].update(solver)
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_run_smoke(tmp_path, capsys):
    p = write(tmp_path, base_config())
    assert main(["run", str(p)]) == 0
    out = tmp_path / "out"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_snapshots"] >= 2
    assert summary["l1_reference"] < 0.1
    lines = (out / "diagnostics.jsonl").read_text().splitlines()
    assert len(lines) == summary["n_snapshots"]
    assert len(list((out / "macro").glob("macro_*.csv"))) == summary["n_snapshots"]
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["grid"]["n_sub"] == 2
    assert "C_alpha" in json.loads(capsys.readouterr().out)


def test_run_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["run", str(write(tmp_path, base_config(out=name), f"{name}.json"))]) == 0
    for rel in ("summary.json", "diagnostics.jsonl", "macro/macro_00001.csv"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_bad_n_sub_rejected(tmp_path, capsys):
    cfg = base_config()
    cfg["grid"]["nv"] = 27  # M = 2, dv = 2/27, eps/dv not an integer
    assert main(["run", str(write(tmp_path, cfg))]) == 2
    assert "n_sub" in capsys.readouterr().err


def test_config_errors_name_field():
    cfg = base_config()
    cfg["grid"]["M"] = 1.5
    with pytest.raises(ConfigError, match="grid.M"):
        parse_config(cfg)
    cfg = base_config()
    cfg["initial"]["type"] = "bogus"
    with pytest.raises(ConfigError, match="initial.type"):
        parse_config(cfg)


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("VARBGK_OUTPUT_ROOT", str(tmp_path / "root"))
    cfg = parse_config(base_config(out="x"), tmp_path)
    assert cfg.output == tmp_path / "root" / "x"


def column_file(tmp_path, f, dv):
    p = tmp_path / "col.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v", "f"])
        for j, val in enumerate(f):
            w.writerow([(j + 0.5) * dv, val])
    return p


@pytest.mark.parametrize("case", ["half", "indicator", "equilibrium"])
def test_project_examples(tmp_path, capsys, case):
    dv, nv = 0.05, 20
    v = (np.arange(nv) + 0.5) * dv
    f = {"half": np.full(nv, 0.5),
         "indicator": ((v > 0.2) & (v < 0.7)).astype(float),
         "equilibrium": (v < 0.35).astype(float)}[case]
    src = column_file(tmp_path, f, dv)
    assert main(["project", str(src), "--eps", "0.2", "--M", "1.0"]) == 0
    rec = json.loads(capsys.readouterr().out)
    pi = np.loadtxt(tmp_path / "col_pi.csv", delimiter=",", skiprows=1)[:, 1]
    assert pi.sum() * dv == pytest.approx(0.5 if case != "equilibrium" else 0.35)
    if case == "half":
        np.testing.assert_allclose(pi, np.where(v < 0.4, 1, np.where(v < 0.6, 0.5, 0)))
        assert rec["dominated"]
    elif case == "indicator":
        np.testing.assert_allclose(pi, (v < 0.5).astype(float))
        assert not rec["dominated"]
    else:
        np.testing.assert_array_equal(pi, f)
    assert json.loads((tmp_path / "col_pi.json").read_text()) == rec


def test_project_rejects_bad_column(tmp_path, capsys):
    src = column_file(tmp_path, [0.5, 1.5], 0.5)
    assert main(["project", str(src), "--eps", "0.5", "--M", "1.0"]) == 2


@pytest.mark.parametrize("flux,code", [
    ({"dim": 1, "poly": [[0.0, 0.0, 0.5]]}, 0),
    ({"dim": 1, "poly": [[0.0, 1.0]]}, 1),
])
def test_check_flux(tmp_path, capsys, flux, code):
    cfg = base_config()
    cfg["flux"] = flux
    assert main(["check-flux", str(write(tmp_path, cfg))]) == code


def test_single_value_sweep_equals_run(tmp_path):
    p = write(tmp_path, base_config(out="sw"))
    assert main(["sweep", str(p), "--param", "h", "--values", "1e-3"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sw" / "sweep_h.csv")))
    assert len(rows) == 1 and rows[0]["status"] == "ok"
    assert main(["run", str(write(tmp_path, base_config(out="single"), "s.json"))]) == 0
    single = json.loads((tmp_path / "single" / "summary.json").read_text())
    for key in ("l1_reference", "E1", "E2", "C_alpha"):
        assert float(rows[0][key]) == pytest.approx(single[key], rel=1e-15)


def test_compare(tmp_path, capsys):
    p = write(tmp_path, base_config())
    main(["run", str(p)])
    capsys.readouterr()
    macro = sorted((tmp_path / "out" / "macro").glob("*.csv"))
    assert main(["compare", str(macro[0]), str(macro[0])]) == 0
    assert float(capsys.readouterr().out) == 0.0
    assert main(["compare", str(macro[0]), str(macro[-1])]) == 0
    assert float(capsys.readouterr().out) > 0.0
