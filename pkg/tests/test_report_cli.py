import csv
import io
import json
import math
import subprocess
import sys

import pytest

from cellfree_ura import cli
from cellfree_ura.config import SystemConfig
from cellfree_ura.harness import PupeEstimate
from cellfree_ura.report import PupeRow, plot_pupe, pupe_floor


@pytest.fixture
def cfg_file(tmp_path, small_cfg):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(small_cfg.to_dict()))
    return p


def _run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_sweep_writes_rows_and_is_byte_identical(tmp_path, cfg_file, capsys):
    args = ["sweep", "--config", str(cfg_file), "--ka", "4,8,12", "--trials", "3"]
    code, out = _run(args + ["--out", str(tmp_path / "a")], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.out)))
    assert [int(r["K_a"]) for r in rows] == [4, 8, 12]
    for r in rows:
        assert float(r["p_e"]) == pytest.approx(float(r["p_md"]) + float(r["p_fa"]))
    _run(args + ["--out", str(tmp_path / "b")], capsys)
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    assert a.decode() == out.out
    assert (tmp_path / "a" / "sweep.svg").read_bytes() == (tmp_path / "b" / "sweep.svg").read_bytes()
    manifest = json.loads((tmp_path / "a" / "sweep.json").read_text())
    assert manifest["master_seed"] == 7 and manifest["values"] == [4, 8, 12]


def test_simulate_and_dump_env(tmp_path, cfg_file, capsys):
    code, out = _run(["simulate", "--config", str(cfg_file), "--trials", "2", "--out", str(tmp_path)], capsys)
    assert code == 0 and (tmp_path / "simulate.csv").exists()
    code, out = _run(["dump-env", "--config", str(cfg_file), "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "env_trial0.csv")))
    assert len(rows) == 8 * 4
    r = rows[0]
    want = -30.5 - 36.7 * math.log10(max(float(r["distance_m"]), 1.0)) + float(r["shadow_db"])
    assert float(r["beta_db"]) == pytest.approx(want, abs=1e-9)


def test_ebn0_cli_emits_consistent_values(tmp_path, cfg_file, capsys):
    code, out = _run(["ebn0", "--config", str(cfg_file), "--ka", "4", "--trials", "2",
                      "--bracket=-10,10", "--tol", "2", "--out", str(tmp_path)], capsys)
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out.out)))
    lin = (int(row["n_p"]) * float(row["P_p"]) + int(row["n_d"]) * float(row["P_d"])) / (
        int(row["B"]) * float(row["sigma2"]))
    assert float(row["ebn0_db"]) == pytest.approx(10 * math.log10(lin), abs=1e-12)


def test_invalid_config_exit_code(tmp_path, cfg_file, capsys):
    code, out = _run(["simulate", "--config", str(cfg_file), "--ka", "5000"], capsys)
    assert code == 2 and "K_a" in out.err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"Ka": 3}))
    code, out = _run(["simulate", "--config", str(bad)], capsys)
    assert code == 2
    code, out = _run(["simulate", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 1


def test_unwritable_output_exit_code(tmp_path, cfg_file, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, out = _run(["simulate", "--config", str(cfg_file), "--trials", "1",
                      "--out", str(blocker / "sub")], capsys)
    assert code == 1 and "cannot write" in out.err


def test_floor_clamp(tmp_path):
    cfg = SystemConfig(K_a=50)
    rows = [PupeRow("K_a", 50, cfg, PupeEstimate(0.0, 0.0, 0.0, 20, 0.0)),
            PupeRow("K_a", 60, cfg.replace(K_a=60), PupeEstimate(0.1, 0.0, 0.1, 20, 0.01))]
    fig = plot_pupe(rows, tmp_path / "f.svg")
    floor = min(pupe_floor(50, 20), pupe_floor(60, 20))
    ax = fig.axes[0]
    assert ax.get_ylim()[0] == pytest.approx(floor)
    assert min(ax.lines[0].get_ydata()) == pytest.approx(floor)


def test_module_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "cellfree_ura", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "sweep" in out.stdout
