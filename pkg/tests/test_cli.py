import csv

from tdmr import cli, grains


def test_tables(capsys):
    assert cli.main(["tables"]) == 0
    out = capsys.readouterr().out
    assert "AA -> CA : P1*P(B)" in out


def test_gen(tmp_path):
    path = tmp_path / "g.txt"
    assert cli.main(["gen", "--p2", "0.25", "--rows", "8", "--cols", "12", "--seed", "3", "--out", str(path)]) == 0
    img = grains.GrainImage.from_text(path.read_text())
    assert img.cells.shape == (8, 12)


def test_gen_bad_size(capsys):
    assert cli.main(["gen", "--p2", "0.25", "--rows", "7"]) == 2
    assert "error" in capsys.readouterr().err


def test_run_with_config_file(tmp_path):
    conf = tmp_path / "sim.conf"
    conf.write_text("p2 = 0.0\nrate = 0.3\nuser_bits = 1024\ncols = 64\nblocks = 3\n")
    out = tmp_path / "res" / "run.csv"
    assert cli.main(["run", "--config", str(conf), "--blocks", "1", "--rate", "0.2", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["rate"] == "0.2" and rows[0]["blocks"] == "1" and rows[0]["user_bits_per_grain"] == "0.4"
    assert (tmp_path / "res" / "run.manifest.json").exists()


def test_sweep_to_stdout(tmp_path, capsys):
    conf = tmp_path / "sim.conf"
    conf.write_text("user_bits = 1024\ncols = 64\n")
    assert cli.main(["sweep", "--config", str(conf), "--p2", "0", "--blocks", "1", "--mode", "non-iterative",
                     "--rate-start", "0.2", "--rate-stop", "0.24", "--rate-step", "0.02", "-v"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("p2,rate,user_bits_per_grain")
    assert len(lines) >= 2
