import filecmp
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from robust_policy.cli import main
from robust_policy.experiments import ConfigError, load_config
from robust_policy.synthetic import read_potential_outcomes

TINY = """\
[experiment]
name = toy
objective = maxmin
gammas = 1, 2
p_targets = 0.1, 0.9
seeds = 0, 1

[data]
n_train = 600
n_val = 300
n_test = 400
grid_points = 21

[training]
epochs = 2
batch_size = 200
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return path


def tree_equal(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    if mismatch or errors:
        return False
    return all(tree_equal(os.path.join(a, d), os.path.join(b, d)) for d in cmp.common_dirs)


def test_run_writes_tables_and_is_reproducible(tiny_config, tmp_path, capsys):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(tiny_config), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(tiny_config), "--out", str(out2)]) == 0
    assert tree_equal(out1, out2)
    printed = capsys.readouterr().out
    assert "ru" in printed and "true" in printed
    assert sorted(p.name for p in (out1 / "cells" / "toy-maxmin").iterdir()) == \
        ["g1-s0.csv", "g1-s1.csv", "g2-s0.csv", "g2-s1.csv"]
    assert (out1 / "tables" / "toy-maxmin.csv").is_file()
    assert (out1 / "grids" / "toy-maxmin" / "true-g2.csv").is_file()
    table = (out1 / "tables" / "toy-maxmin.csv").read_text().splitlines()
    assert table[0].startswith("policy,gamma,p_target,n_seeds,value_mean")


def test_manifest_reruns_single_cell(tiny_config, tmp_path):
    out = tmp_path / "full"
    assert main(["run", "--config", str(tiny_config), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifests" / "toy-maxmin.json").read_text())
    assert len(manifest["cells"]) == 4 and manifest["failures"] == []
    assert set(manifest["versions"]) >= {"numpy", "python", "robust_policy"}
    cell = next(c for c in manifest["cells"] if c["gamma"] == 2.0 and c["seed"] == 1)
    target = out / cell["csv"]
    original = target.read_bytes()
    target.unlink()
    args = cell["rerun"].split()[1:]
    proc = subprocess.run([sys.executable, "-m", "robust_policy", *args], cwd=out,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert target.read_bytes() == original


def test_env_var_sets_output(tiny_config, tmp_path, monkeypatch):
    monkeypatch.setenv("ROBUST_POLICY_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", str(tiny_config), "--gamma", "1", "--seeds", "0"]) == 0
    assert (tmp_path / "env" / "cells" / "toy-maxmin" / "g1-s0.csv").is_file()


def test_invalid_gamma_exits_2(tiny_config, tmp_path, capsys):
    code = main(["run", "--config", str(tiny_config), "--gamma", "0.5", "--out", str(tmp_path)])
    assert code == 2
    assert "experiment.gammas" in capsys.readouterr().err


def test_config_errors_name_field(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[data]\nn_train = lots\n")
    with pytest.raises(ConfigError) as info:
        load_config(bad)
    assert info.value.field == "data.n_train"
    with pytest.raises(ConfigError) as info:
        load_config(objective="gain")
    assert info.value.field == "experiment.baseline"
    with pytest.raises(ConfigError) as info:
        load_config(experiment="voting")
    assert info.value.field == "data.path"


def test_reproduce_lists_missing_cells(tiny_config, tmp_path, capsys):
    assert main(["run", "--config", str(tiny_config), "--gamma", "1", "--seeds", "0",
                 "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["reproduce-table", "toy-maxmin", "--out", str(tmp_path), "--seeds", "0,1"]) == 1
    err = capsys.readouterr().err
    assert "toy-maxmin(gamma=1, seed=1)" in err
    assert "toy-maxmin(gamma=2, seed=0)" in err
    assert "toy-maxmin(gamma=1, seed=0)" not in err


def test_reproduce_table_renders_diff(tiny_config, tmp_path, capsys):
    cfg = tiny_config.read_text().replace("gammas = 1, 2", "gammas = 1, 2, 3, 4") \
        .replace("p_targets = 0.1, 0.9", "p_targets = 0.1, 0.2, 0.5, 0.7, 0.9").replace("seeds = 0, 1", "seeds = 0")
    tiny_config.write_text(cfg)
    assert main(["run", "--config", str(tiny_config), "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["reproduce-table", "toy-maxmin", "--out", str(tmp_path), "--seeds", "0"]) == 0
    text = capsys.readouterr().out
    assert "diff" in text
    assert (tmp_path / "tables" / "reproduced-toy-maxmin.csv").is_file()


def test_gen_data_and_eval_policy(tmp_path, capsys):
    data = tmp_path / "toy.csv"
    assert main(["gen-data", "toy", "--p", "0.9", "--n", "500", "--data", str(data)]) == 0
    d = read_potential_outcomes(data)
    assert len(d) == 500 and d.u.mean() > 0.8
    cfg = tmp_path / "c.ini"
    cfg.write_text(TINY)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--gamma", "1", "--seeds", "0", "--out", str(out)]) == 0
    ckpt = next((out / "checkpoints").rglob("*.ckpt"))
    capsys.readouterr()
    assert main(["eval-policy", str(ckpt), "--data", str(data)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "policy,gamma,n,value,treated_fraction"
    fields = lines[1].split(",")
    assert fields[2] == "500" and 0 <= float(fields[4]) <= 1 and np.isfinite(float(fields[3]))


def test_gen_data_rejects_bad_p(tmp_path):
    assert main(["gen-data", "toy", "--p", "1.5", "--out", str(tmp_path)]) == 2


def test_eval_policy_needs_data(tmp_path):
    assert main(["eval-policy", str(tmp_path / "x.ckpt")]) == 2


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "robust_policy", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "reproduce-table" in proc.stdout
