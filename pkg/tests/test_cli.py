"""CLI driver: validation, exit codes, determinism, CSV format."""

import csv
import filecmp
import os

import pytest

from artifact.cli import ValidationError, load_config, main


def test_unknown_key_is_named(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("grid:\n  point_per_axis: 9\n")
    with pytest.raises(ValidationError, match="point_per_axis"):
        load_config(str(cfg), str(tmp_path), False, None)


def test_unknown_nested_key_exit_code(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("contour:\n  tehta_factor: 0.05\n")
    rc = main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_invalid_grid_exits_1(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("grid:\n  points_per_axis: 8\n")
    rc = main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_missing_config_exits_1(tmp_path):
    rc = main(["spectrum", "--config", str(tmp_path / "nope.yaml"),
               "--out", str(tmp_path / "o")])
    assert rc == 1


def test_quick_profile_overrides(tmp_path):
    cfg = load_config(None, str(tmp_path), True, 7)
    assert cfg.raw["grid"]["points_per_axis"] == 9
    assert cfg.raw["integrator"]["n_max"] == 1
    assert cfg.raw["integrator"]["t_end"] == 10.0
    assert cfg.seed == 7


def test_defaults_without_config(tmp_path):
    cfg = load_config(None, str(tmp_path), False, None)
    assert cfg.raw["grid"]["points_per_axis"] == 15
    assert cfg.seed == 0


@pytest.mark.slow
def test_spectrum_runs_and_is_deterministic(tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["spectrum", "--quick", "--out", out1, "--seed", "3"]) == 0
    assert main(["spectrum", "--quick", "--out", out2, "--seed", "3"]) == 0
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    for name in names:
        assert filecmp.cmp(os.path.join(out1, name), os.path.join(out2, name),
                           shallow=False), name


@pytest.mark.slow
def test_spectrum_csv_format(tmp_path):
    out = str(tmp_path / "o")
    assert main(["spectrum", "--quick", "--out", out]) == 0
    files = [f for f in os.listdir(out) if f.startswith("eigenvalues")]
    assert len(files) == 2
    with open(os.path.join(out, files[0])) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["re", "im"]  # complex values as two real columns
    assert len(rows) == 1 + 729
    float(rows[1][0]), float(rows[1][1])  # parseable numbers
