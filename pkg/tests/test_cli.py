import csv

import pytest

from stitmix.cli import main


def _cfg(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_simulate_writes_artifacts(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--seed", "3", "--out", str(out)]) == 0
    for f in ("tessellation.json", "tessellation.svg", "cells.csv"):
        assert (out / f).stat().st_size > 0
    rows = list(csv.DictReader((out / "cells.csv").open(newline="")))
    assert sum(float(r["volume"]) for r in rows) == pytest.approx(64.0)


def test_same_seed_same_bytes(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--seed", "11", "--out", str(tmp_path / d)]) == 0
    for f in ("cells.csv", "tessellation.json", "tessellation.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert main(["simulate", "--seed", "12", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "a" / "cells.csv").read_bytes() != (tmp_path / "c" / "cells.csv").read_bytes()


def test_invalid_window_is_config_error(tmp_path, capsys):
    cfg = _cfg(tmp_path, "window: {a: 4, b: 1}\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 2


UNEVEN = ("measure: {kind: discrete, gamma: 2.0, atoms: [[1, 0], [-1, 0], [0, 1]],"
          " weights: [0.25, 0.25, 0.5]}\n")


def test_verify_flags_uneven_law(tmp_path, capsys):
    cfg = _cfg(tmp_path, UNEVEN)
    assert main(["verify", "--config", cfg, "--replicates", "100", "--out", str(tmp_path)]) == 3
    assert "FAIL" in capsys.readouterr().out
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_verify_small_n_skips_statistics(tmp_path, capsys):
    assert main(["verify", "--replicates", "100", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "SKIPPED" in text and "FAIL" not in text
    rows = list(csv.DictReader((tmp_path / "verify.csv").open(newline="")))
    assert {r["status"] for r in rows} <= {"PASS", "SKIPPED"}


def test_bound_csv(tmp_path):
    cfg = _cfg(tmp_path, "replicates: 100\nmixing: {b_grid: [4, 8]}\n")
    assert main(["bound", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "bound.csv").open(newline="")))
    assert len(rows) == 2 * 3 * 2
    assert all(0.0 <= float(r["bound"]) <= 1.0 for r in rows)
    assert all(float(r["simplified_raw"]) >= float(r["bound_raw"]) - 1e-12 for r in rows)


@pytest.mark.slow
def test_estimate_beta_csv(tmp_path):
    cfg = _cfg(tmp_path, "replicates: 300\nmixing: {b_grid: [4, 8]}\n")
    assert main(["estimate-beta", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "decay.csv").open(newline="")))
    assert {r["estimator"] for r in rows} >= {"beta_hat", "bound"}
    assert [r["b"] for r in rows if r["estimator"] == "beta_hat"] == ["4.0", "8.0"]


def test_render_snapshot(tmp_path):
    assert main(["simulate", "--seed", "1", "--out", str(tmp_path / "s")]) == 0
    snap = tmp_path / "s" / "tessellation.json"
    assert main(["render", str(snap), "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "tessellation.svg").read_bytes() == (tmp_path / "s" / "tessellation.svg").read_bytes()
