import pytest

from sbrnn_imdd.cli import main

from tiny import TINY_MLSD, TINY_SBRNN, write


@pytest.fixture(autouse=True)
def _isolated_cwd(tmp_path, monkeypatch):
    # default checkpoint/output directories are relative to the working directory
    monkeypatch.chdir(tmp_path)


def test_flops_command(capsys):
    assert main(["flops"]) == 0
    out = capsys.readouterr().out
    assert "3600.0" in out and "73728.0" in out and "205336.66666666666" in out


def test_global_flags_before_and_after_subcommand(tmp_path, capsys):
    cfg = write(tmp_path, TINY_MLSD)
    assert main(["--seed", "5", "--config", str(cfg), "show-config"]) == 0
    first = capsys.readouterr().out
    assert main(["show-config", "--seed", "5", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out == first
    assert "seed = 5" in first


def test_mlsd_command_reproducible(tmp_path, capsys):
    cfg = write(tmp_path, TINY_MLSD)
    args = ["mlsd", "--config", str(cfg), "--distance", "20", "--seed", "1", "--out", str(tmp_path / "o")]
    assert main(args) == 0
    a = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == a
    assert a.startswith("system,") and len(a.splitlines()) == 2


def test_eval_without_checkpoint_fails_cleanly(tmp_path, capsys):
    cfg = write(tmp_path, TINY_SBRNN.replace("train_missing = true", "train_missing = false"))
    assert main(["eval", "--config", str(cfg), "--distance", "10", "--out", str(tmp_path)]) == 2
    assert "no checkpoint" in capsys.readouterr().err


def test_train_eval_and_optimizers(tmp_path, capsys):
    cfg = write(tmp_path, TINY_SBRNN)
    ckpt = tmp_path / "m.ckpt"
    assert main(["train", "--config", str(cfg), "--distance", "10", "--checkpoint", str(ckpt)]) == 0
    assert ckpt.exists() and ckpt.with_suffix(".trace.csv").exists()
    capsys.readouterr()
    assert main(["eval", "--config", str(cfg), "--distance", "10", "--checkpoint", str(ckpt)]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 1 + 2 * 2 * 3
    assert main(["optimize-weights", "--config", str(cfg), "--distance", "10", "--checkpoint", str(ckpt)]) == 0
    assert capsys.readouterr().out.count("W=") == 2
    assert main(["optimize-labeling", "--config", str(cfg), "--distance", "10", "--checkpoint", str(ckpt),
                 "--window", "2", "--out", str(tmp_path / "lab")]) == 0
    out = capsys.readouterr().out
    assert "tabu=" in out and list((tmp_path / "lab").rglob("labeling_10km_W2.txt"))


def test_sweep_and_plot(tmp_path, capsys):
    cfg = write(tmp_path, TINY_MLSD)
    out = tmp_path / "res"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--plot"]) == 0
    files = capsys.readouterr().out.split()
    csv = [f for f in files if f.endswith(".csv")][0]
    assert any(f.endswith(".svg") for f in files)
    assert main(["plot", csv, "--output", str(tmp_path / "p.svg"), "--hd-fec", "1e-3"]) == 0
    assert "<polyline" in (tmp_path / "p.svg").read_text()
