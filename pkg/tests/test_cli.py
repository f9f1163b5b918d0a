import json

import numpy as np
import pytest

from neurogeom import io as nio
from neurogeom.cli import EXIT_INPUT, EXIT_OK, main

SMALL_KERNEL = ["--n-paths", "600", "--n-steps", "60", "--n-x", "61", "--n-y", "61",
                "--n-theta", "32"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["kernel", "--outdir", str(d), *SMALL_KERNEL]) == EXIT_OK
    assert main(["stimulus", "--outdir", str(d), "--seed", "4"]) == EXIT_OK
    return d


def test_kernel_outputs(workdir):
    info = json.loads((workdir / "kernel.summary.json").read_text())
    assert info["center_of_mass"][0] > 0
    assert info["config"]["n_paths"] == 600
    assert (workdir / "kernel.xy.pgm").read_bytes().startswith(b"P5")
    grid = nio.read_grid(workdir / "kernel.grid")
    assert grid.values.max() == 1.0 and grid.symmetrized


def test_kernel_rerun_byte_identical(workdir, tmp_path):
    assert main(["kernel", "--outdir", str(tmp_path), "--workers", "3", *SMALL_KERNEL]) == EXIT_OK
    assert (tmp_path / "kernel.grid").read_bytes() == (workdir / "kernel.grid").read_bytes()


def test_kernel_few_paths(tmp_path):
    assert main(["kernel", "--outdir", str(tmp_path), "--n-paths", "6"]) == EXIT_OK
    grid = nio.read_grid(tmp_path / "kernel.grid")
    # six sparse paths: most bins are empty
    assert np.mean(grid.values > 0) < 0.2


def test_stimulus_outputs(workdir, tmp_path):
    stim = nio.read_stimulus(workdir / "stimulus.json")
    assert len(stim) == 150 and int(np.sum(stim.label_array() == 1)) == 20
    assert (workdir / "stimulus.ppm").read_bytes().startswith(b"P6")
    assert main(["stimulus", "--outdir", str(tmp_path), "--seed", "5"]) == EXIT_OK
    other = nio.read_stimulus(tmp_path / "stimulus.json")
    assert other.elements[:20] == stim.elements[:20] and other.elements[20:] != stim.elements[20:]
    assert main(["stimulus", "--outdir", str(tmp_path), "--n-total", "20",
                 "--output", "only.json"]) == EXIT_OK
    assert set(nio.read_stimulus(tmp_path / "only.json").labels) == {1}


def test_stimulus_bad_contour(tmp_path):
    assert main(["stimulus", "--outdir", str(tmp_path), "--n-total", "5"]) == EXIT_INPUT
    assert main(["stimulus", "--outdir", str(tmp_path), "--scene", "maze"]) == EXIT_INPUT


def test_group_outputs(workdir):
    assert main(["group", "--outdir", str(workdir)]) == EXIT_OK
    units = nio.read_units(workdir / "group_units.json")
    stim = nio.read_stimulus(workdir / "stimulus.json")
    truth = set(np.nonzero(stim.label_array() == 1)[0].tolist())
    assert len(set(units[0]["member_indices"]) & truth) >= 18
    spectrum = np.loadtxt(workdir / "group_spectrum.csv", skiprows=1)
    assert spectrum[0] > spectrum[1]
    A = nio.read_affinity(workdir / "group_affinity.csv")
    assert A.n == 150
    for name in ("group_affinity.pgm", "group_spectrum.pgm", "group_unit1.ppm", "group_iter1.ppm"):
        assert (workdir / name).exists()


def test_group_two_unit_scene(workdir):
    assert main(["stimulus", "--outdir", str(workdir), "--scene", "two_unit",
                 "--output", "two.json"]) == EXIT_OK
    assert main(["group", "--outdir", str(workdir), "--stimulus", "two.json",
                 "--eigen-stop", "0.5", "--prefix", "two"]) == EXIT_OK
    units = nio.read_units(workdir / "two_units.json")
    assert len(units) == 2
    assert (workdir / "two_iter2.ppm").exists()


def test_group_empty_stimulus_exit_code(workdir, tmp_path):
    (tmp_path / "empty.json").write_text('{"angle_mode": "full", "c": 1, "elements": []}')
    code = main(["group", "--outdir", str(tmp_path), "--stimulus", str(tmp_path / "empty.json"),
                 "--kernel", str(workdir / "kernel.grid")])
    assert code == EXIT_INPUT


def test_group_missing_input(tmp_path):
    assert main(["group", "--outdir", str(tmp_path)]) == EXIT_INPUT


def test_simulate_sweep_flips_at_critical_mu(workdir):
    assert main(["simulate", "--outdir", str(workdir), "--mode", "homogeneous",
                 "--initial", "eigenvector", "--mu-sweep", "0.905:1.095:20", "--t-end", "10"]) == EXIT_OK
    report = json.loads((workdir / "sim_stability.json").read_text())
    assert report["weak_connectivity"]["pass"] and report["reduction_valid"]
    for row in report["mu_sweep"]:
        assert (row["growth_rate"] < 0) == row["stable"]
        assert row["growth_rate"] == pytest.approx(row["predicted_rate"], rel=0.05)
    t, s = nio.read_trajectory(workdir / "sim_trajectory.csv")
    assert s.shape == (len(t), 150)


def test_simulate_outside_check_and_weak_failure(workdir):
    assert main(["stimulus", "--outdir", str(workdir), "--n-total", "30", "--n-contour", "10",
                 "--half-fov", "15", "--output", "small.json"]) == EXIT_OK
    assert main(["simulate", "--outdir", str(workdir), "--stimulus", "small.json",
                 "--check-outside", "true", "--t-end", "20", "--prefix", "out"]) == EXIT_OK
    rep = json.loads((workdir / "out_stability.json").read_text())
    assert rep["outside_domain"]["pass"] and rep["outside_domain"]["max_off_domain"] < 1e-9
    assert main(["simulate", "--outdir", str(workdir), "--mu", "5", "--t-end", "5",
                 "--prefix", "strong"]) == EXIT_OK
    rep = json.loads((workdir / "strong_stability.json").read_text())
    assert not rep["weak_connectivity"]["pass"] and not rep["reduction_valid"]
    assert rep["max_abs_activity"] <= 1 + 1e-6


def test_simulate_bad_options(workdir):
    base = ["simulate", "--outdir", str(workdir), "--t-end", "1"]
    assert main(base + ["--mode", "chaos"]) == EXIT_INPUT
    assert main(base + ["--initial", "random"]) == EXIT_INPUT
    assert main(base + ["--mu-sweep", "1:2"]) == EXIT_INPUT
    assert main(base + ["--alpha", "abc"]) == EXIT_INPUT


def test_lift_bar_and_flat(tmp_path, caplog):
    img = np.zeros((40, 60))
    img[19:21, 10:50] = 1.0
    nio.write_pnm(tmp_path / "bar.pgm", img)
    assert main(["lift", "--outdir", str(tmp_path), "--image", str(tmp_path / "bar.pgm")]) == EXIT_OK
    stim = nio.read_stimulus(tmp_path / "lifted.json")
    xyt = stim.as_array()
    assert len(stim) > 5 and np.ptp(xyt[:, 1]) <= 8
    nio.write_pnm(tmp_path / "flat.pgm", np.full((20, 20), 0.5))
    assert main(["lift", "--outdir", str(tmp_path), "--image", str(tmp_path / "flat.pgm"),
                 "--output", "flat.json"]) == EXIT_OK
    assert len(nio.read_stimulus(tmp_path / "flat.json")) == 0
    assert "no elements" in caplog.text
    sizes = []
    for thr in ("0.3", "1", "3"):
        main(["lift", "--outdir", str(tmp_path), "--image", str(tmp_path / "bar.pgm"),
              "--threshold", thr, "--output", f"t{thr}.json"])
        sizes.append(len(nio.read_stimulus(tmp_path / f"t{thr}.json")))
    assert sizes == sorted(sizes, reverse=True)


def test_lift_errors(tmp_path):
    assert main(["lift", "--outdir", str(tmp_path)]) == EXIT_INPUT
    assert main(["lift", "--outdir", str(tmp_path), "--image", str(tmp_path / "nope.pgm")]) == EXIT_INPUT


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n-total = 60\nseed = 9\n")
    assert main(["stimulus", "--outdir", str(tmp_path), "--config", str(cfg), "--seed", "2"]) == EXIT_OK
    raw = json.loads((tmp_path / "stimulus.json").read_text())
    assert len(raw["elements"]) == 60 and raw["config"]["seed"] == 2
    cfg.write_text("colour = red\n")
    assert main(["stimulus", "--outdir", str(tmp_path), "--config", str(cfg)]) == EXIT_INPUT


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NEUROGEOM_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["stimulus", "--n-total", "30"]) == EXIT_OK
    assert (tmp_path / "env" / "stimulus.json").exists()


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
