import json
import subprocess
import sys

import pytest

from resrecon.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, main

SMALL = {
    "data_source": {"synthetic": {"grid": {"nx": 12, "nz": 8, "dx_m": 3000.0, "dz_m": 7.5}, "n_train": 20}},
    "methods": ["gappy_pod", "sparse_raw"],
    "k_list": [2],
    "p_list": [4],
    "trials": 1,
}


def write_cfg(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.mark.parametrize("cmd", ["sweep", "fixed", "gen-data"])
def test_subcommands_succeed(tmp_path, cmd):
    cfg = write_cfg(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main([cmd, str(cfg), "-o", str(out)]) == EXIT_OK
    assert (out / ("snapshots.csv" if cmd == "gen-data" else "manifest.json")).exists()


def test_validate(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["validate", str(cfg)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok: n=56")


def test_output_dir_relative_to_config(tmp_path):
    cfg = write_cfg(tmp_path, {**SMALL, "output_dir": "res"})
    assert main(["sweep", str(cfg)]) == EXIT_OK
    assert (tmp_path / "res" / "records.csv").exists()


def test_config_error_exit(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {**SMALL, "trials": 0})
    assert main(["sweep", str(cfg)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_data_error_exit(tmp_path):
    gen = write_cfg(tmp_path, {**SMALL, "conditions": [15.0]})
    assert main(["gen-data", str(gen), "-o", str(tmp_path / "d")]) == EXIT_OK
    csv = tmp_path / "d" / "snapshots.csv"
    lines = csv.read_text().splitlines()
    lines[3] = lines[3].rsplit(",", 1)[0] + ",nan"
    csv.write_text("\n".join(lines) + "\n")
    assert main(["validate", str(tmp_path / "d" / "files_config.json")]) == EXIT_DATA


def test_unwritable_output_exit(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["sweep", str(cfg), "-o", str(blocker / "x")]) == EXIT_DATA


def test_numerical_exit(tmp_path, monkeypatch):
    import numpy as np

    from resrecon import experiments

    def boom(*a, **k):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(experiments, "gappy_reconstruct", boom)
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["sweep", str(cfg), "-o", str(tmp_path / "o")]) == EXIT_NUMERICAL


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    proc = subprocess.run([sys.executable, "-m", "resrecon", "validate", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_missing_subcommand():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
