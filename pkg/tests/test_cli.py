import subprocess
import sys

import pytest

from tests.conftest import TINY_TOML
from vlcsee.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main


@pytest.fixture
def tiny_file(tmp_path):
    p = tmp_path / "tiny.toml"
    p.write_text(TINY_TOML)
    return p


def test_validate(tiny_file, tmp_path, capsys):
    assert main(["validate", str(tiny_file)]) == EXIT_OK
    assert "config hash" in capsys.readouterr().out
    bad = tmp_path / "bad.toml"
    bad.write_text("[scene]\nn_lus = 0\n[power]\nqos = -1.0\n")
    assert main(["validate", str(bad)]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "K >= 1" in err and "qos" in err
    assert main(["validate", str(tmp_path / "absent.toml")]) == EXIT_INVALID


def test_train_twice_is_byte_identical(tiny_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", str(tiny_file), "--seed", "3", "--out", str(a)]) == EXIT_OK
    assert main(["train", str(tiny_file), "--seed", "3", "--out", str(b)]) == EXIT_OK
    name = "curve_ds_ppo_seed3.csv"
    assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "curve_ds_ppo_seed3.ckpt").exists()


def test_train_flags(tiny_file, tmp_path):
    out = tmp_path / "o"
    assert main(["train", str(tiny_file), "--baseline", "eps_greedy", "--steps", "64", "--sdma", "--no-irs",
                 "--out", str(out)]) == EXIT_OK
    text = (out / "curve_eps_greedy_seed0.csv").read_text().splitlines()
    assert text[0].startswith("# kind=eps_greedy seed=0")
    assert text[-1].startswith("64,")


def test_output_env_override(tiny_file, tmp_path, monkeypatch):
    monkeypatch.setenv("VLCSEE_OUT", str(tmp_path / "env_out"))
    assert main(["train", str(tiny_file), "--baseline", "eps_greedy", "--steps", "32"]) == EXIT_OK
    assert (tmp_path / "env_out" / "curve_eps_greedy_seed0.csv").exists()


def test_runtime_failure_exit_code(tiny_file, tmp_path):
    # fewer steps than one update interval: the run produces no rows
    assert main(["train", str(tiny_file), "--steps", "10", "--out", str(tmp_path)]) == EXIT_RUNTIME


def test_sweep_and_plot(tiny_file, tmp_path):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(TINY_TOML + '\n[sweep]\nparam = "irs.n_elements"\nvalues = [2, 4]\n'
                   '[baselines]\nkinds = ["eps_greedy"]\n')
    out = tmp_path / "s"
    assert main(["sweep", str(cfg), "--out", str(out)]) == EXIT_OK
    assert len(list(out.glob("curve_*.csv"))) == 2
    assert main(["plot", str(out)]) == EXIT_OK
    assert (out / "fig_irs-n_elements.svg").exists()
    assert main(["plot", str(tmp_path / "empty")]) == EXIT_INVALID


def test_oracle(tmp_path, capsys):
    small = tmp_path / "small.toml"
    small.write_text("[irs]\nn_elements = 2\n[scene]\nleds = [[1.5, 2, 3], [4.5, 4, 3]]\n")
    assert main(["oracle", str(small)]) == EXIT_OK
    assert "configurations: 25" in capsys.readouterr().out
    big = tmp_path / "big.toml"
    big.write_text("")
    assert main(["oracle", str(big)]) == EXIT_INVALID


def test_module_entry_point(tiny_file):
    proc = subprocess.run([sys.executable, "-m", "vlcsee.cli", "validate", str(tiny_file)], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "ok" in proc.stdout
