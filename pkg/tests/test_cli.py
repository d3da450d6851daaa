import csv
import json

import pytest
import yaml

from slowobs.cli import main


def _config(tmp_path, **over):
    raw = {
        "scenario_id": "cli-test",
        "model": "xxz",
        "L": 8,
        "q": 1,
        "recipe": {"kind": "two-subspace", "delta_p": 0.2},
        "seeds": [0],
        "n_points": 10,
    }
    raw.update(over)
    p = tmp_path / "scenario.yaml"
    p.write_text(yaml.safe_dump(raw))
    return p


def test_basis_info(capsys):
    assert main(["basis-info", "-L", "8", "-q", "1"]) == 0
    out = capsys.readouterr().out
    assert "D = 70" in out
    assert "V_x" in out


def test_basis_info_odd_L_exits_2(capsys):
    assert main(["basis-info", "-L", "7"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_exits_2(capsys):
    assert main(["spectrum"]) == 2
    assert "config" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = _config(tmp_path, bogus=1)
    assert main(["spectrum", "--config", str(cfg)]) == 2


def test_spectrum_writes_csv(tmp_path, capsys):
    cfg = _config(tmp_path)
    out = tmp_path / "out"
    assert main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 0
    with open(out / "spectrum.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 70


def test_capacity_exit_3(tmp_path, monkeypatch):
    import slowobs.spectral as spectral

    monkeypatch.setattr(spectral, "MAX_DENSE_DIM", 10, raising=False)
    cfg = _config(tmp_path)
    # capacity errors surface as exit code 3 whichever command hit them
    import slowobs.experiments as ex
    from slowobs.basis import CapacityError

    def boom(config):
        raise CapacityError("dimension exceeds dense capacity")

    monkeypatch.setattr(ex, "build_context", boom)
    monkeypatch.setattr("slowobs.cli.build_context", boom)
    assert main(["spectrum", "--config", str(cfg)]) == 3


def test_empty_subspace_exit_4(tmp_path):
    cfg = _config(
        tmp_path, L=10, q=5, recipe={"kind": "tilted-gaussian", "kappa": 0.1}
    )
    assert main(["ldb", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4


def test_classicality_and_entropy_smoke(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path / "out"
    assert main(["classicality", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "q_tau.csv").exists() and (out / "expectation.csv").exists()
    assert main(["entropy", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "entropy.csv").exists()
    assert main(["ldb", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "delta.csv").exists()


def test_markov_smoke(tmp_path, capsys):
    cfg = _config(tmp_path)
    out = tmp_path / "out"
    assert main(
        ["markov", "--config", str(cfg), "--out", str(out), "--n-samples", "20"]
    ) == 0
    assert (out / "markov_std.csv").exists()
    assert "stationarity residual" in capsys.readouterr().out


def test_eth_synth_smoke(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(
        [
            "eth-synth",
            "--out",
            str(out),
            "--dims",
            "64,128,256",
            "-d",
            "8",
            "--n-seeds",
            "3",
        ]
    ) == 0
    with open(out / "eth_synth.csv") as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == ["D", "M", "d", "term", "magnitude", "seed"]
        rows = list(reader)
    assert len(rows) == 3 * 3 * 4  # dims x seeds x terms
    assert "alpha" in capsys.readouterr().out


def test_sweep_smoke(tmp_path, capsys):
    cfg = _config(tmp_path, n_points=10)
    out = tmp_path / "out"
    assert main(
        ["sweep", "--config", str(cfg), "--out", str(out), "--l-max", "12"]
    ) == 0
    saved = json.loads((out / "sweep.json").read_text())
    assert len(saved["points"]["q_tau"]) == 3  # L = 8, 10, 12


def test_fit_command(tmp_path, capsys):
    p = tmp_path / "points.csv"
    p.write_text("D,value\n64,0.125\n256,0.0625\n1024,0.03125\n")
    assert main(["fit", "--points", str(p)]) == 0
    assert "alpha = 0.5" in capsys.readouterr().out
    bad = tmp_path / "bad.csv"
    bad.write_text("dim,val\n64,1\n")
    assert main(["fit", "--points", str(bad)]) == 2
