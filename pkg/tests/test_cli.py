import json

import pytest
from click.testing import CliRunner

from setconv.cli import main
from setconv.convergence import SetSequence
from setconv.convexification import repeated_average
from setconv.geometry import PointCloud
from setconv.harness import ExperimentConfig
from setconv.random_sets import SimpleRandomSet

TWO_PAIRS = SimpleRandomSet.from_atoms([(0.5, [[0.0], [1.0]]), (0.5, [[0.0], [2.0]])])


@pytest.fixture
def runner():
    return CliRunner()


def write_config(path, **kwargs):
    cfg = ExperimentConfig(TWO_PAIRS, **kwargs)
    path.write_text(json.dumps(cfg.to_json()))
    return path


def test_slln_single_run(runner, tmp_path):
    cfg = write_config(tmp_path / "cfg.json", n_max=256, prune_delta=0.01, epsilon=0.25)
    out = tmp_path / "out"
    res = runner.invoke(main, ["slln", "--config", str(cfg), "--seed", "3", "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert sorted(p.name for p in out.iterdir()) == ["run.csv", "run.json"]
    trailer = json.loads((out / "run.json").read_text())
    assert trailer["seed"] == 3 and trailer["gamma_row"]["holds"]


def test_slln_sweep_and_svg(runner, tmp_path):
    cfg = write_config(tmp_path / "cfg.json", n_max=64, tolerance=0.5)
    out = tmp_path / "out"
    res = runner.invoke(main, ["slln", "--config", str(cfg), "--seeds", "3", "--out", str(out),
                               "--svg"])
    assert res.exit_code == 0, res.output
    summary = json.loads((out / "sweep.json").read_text())
    assert summary["seeds"] == [0, 1, 2]
    assert {p.name for p in out.glob("run_seed*.svg")} == {f"run_seed{i}.svg" for i in range(3)}


def test_slln_sweep_below_pass_fraction_fails(runner, tmp_path):
    # A tolerance nobody can meet after 8 draws.
    cfg = write_config(tmp_path / "cfg.json", n_max=8, tolerance=1e-9)
    res = runner.invoke(main, ["slln", "--config", str(cfg), "--seeds", "2",
                               "--out", str(tmp_path / "o")])
    assert res.exit_code == 1


def test_slln_rejects_bad_config(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"random_set": TWO_PAIRS.to_json(), "n_max": 8, "speed": 1}))
    res = runner.invoke(main, ["slln", "--config", str(bad)])
    assert res.exit_code == 2 and "speed" in res.output


def test_converge(runner, tmp_path):
    seq = SetSequence([repeated_average(PointCloud([[0.0], [1.0]]), n) for n in range(1, 65)])
    (tmp_path / "seq.json").write_text(json.dumps(seq.to_json()))
    (tmp_path / "lim.json").write_text(json.dumps(PointCloud([[0.0], [1.0]]).to_json()))
    out = tmp_path / "out"
    res = runner.invoke(main, ["converge", "--sequence", str(tmp_path / "seq.json"),
                               "--limit", str(tmp_path / "lim.json"), "--convex",
                               "--tolerance", "0.02", "--window", "4", "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert "hausdorff=consistent" in res.output
    assert (out / "convergence.csv").read_text().startswith("n,e_excess")
    res = runner.invoke(main, ["converge", "--sequence", str(tmp_path / "seq.json"),
                               "--limit", str(tmp_path / "lim.json"), "--window", "100",
                               "--out", str(out)])
    assert res.exit_code == 2


@pytest.mark.parametrize("name", ["averaging", "coin-flip", "balls", "spike"])
def test_demos(runner, tmp_path, name):
    res = runner.invoke(main, ["demo", name, "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    assert any(tmp_path.iterdir())


def test_oracle(runner, tmp_path):
    res = runner.invoke(main, ["oracle", "--count", "25", "--seed", "2", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    assert "25/25" in res.output
    assert len((tmp_path / "oracle.csv").read_text().splitlines()) == 26
