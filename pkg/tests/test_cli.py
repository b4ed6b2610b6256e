"""
Tests for the pycorv command line and the experiment runners behind it.
"""

import csv
import json

import pytest

from pycorv.cli import build_parser, main
from pycorv.config import ExperimentConfig
from pycorv.errors import ComputationError
from pycorv.experiments import grid_search_stepsize
from pycorv.nmf import load_ratings_csv

DENSITY = """
kind = "density"
seed = 2

[target]
name = "beta"

[target.params]
alpha = 2.0
beta = 2.0

[density]
n_samples = 2000
n_bins = 20

[[samplers]]
kind = "mirror_sgld"
stepsize = 0.001

[[samplers]]
kind = "corv_sgld"
transform = "sigmoid"
stepsize = 0.01
"""

NORMAL_GRID = """
kind = "density"
seed = 1

[target]
name = "normal"

[density]
n_samples = 500
n_bins = 20

[[samplers]]
kind = "sgld"
stepsize = 0.01
"""

WEAK_ERROR = """
kind = "weak_error"
seed = 5

[target]
name = "gamma"

[target.params]
shape = 0.5
scale = 0.5

[weak_error]
horizon = 0.2
stepsizes = [0.1, 0.05]
n_replicates = 4

[[samplers]]
kind = "corv_sgld"
transform = "softplus"
stepsize = 0.1
"""

INSTABILITY = """
kind = "instability"

[target]
name = "beta"

[instability]
n_draws = 100

[[samplers]]
kind = "corv_sgld"
transform = "sigmoid"
stepsize = 0.001
"""

NMF = """
kind = "nmf_train"
seed = 3

[nmf]
n_users = 20
n_items = 10
true_rank = 2
density = 1.0
rank = 2
batch_size = 50
n_iters = 20
eval_interval = 10

[[samplers]]
kind = "corv_sgld"
transform = "softplus"
stepsize = 0.001

[[samplers]]
kind = "mirror_sgld"
stepsize = 0.001
"""

BENCH = """
kind = "benchmark_overhead"

[nmf]
n_users = 20
n_items = 10
true_rank = 2
density = 0.5

[bench]
batch_sizes = [20]
rank = 2
n_steps = 3
repeats = 1
transforms = ["exp"]
"""


def write_config(tmp_path, text, name="config.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def read_manifest(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    return dict(line.split("=", 1) for line in lines)


class TestParser:
    """Argument parsing."""

    def test_run_with_overrides(self):
        args = build_parser().parse_args(["run", "c.toml", "--seed", "7", "--threads", "2"])
        assert (args.command, args.config, args.seed, args.threads) == ("run", "c.toml", 7, 2)

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestRun:
    """`pycorv run` for each experiment kind."""

    def test_density(self, tmp_path):
        cfg = write_config(tmp_path, DENSITY)
        out = tmp_path / "out"
        assert main(["run", cfg, "--out-dir", str(out)]) == 0
        rows = read_rows(out / "summary.csv")
        assert rows[0][:3] == ["method", "transform", "stepsize"]
        assert [r[0] for r in rows[1:]] == ["mirror_sgld", "corv_sgld"]
        assert all(r[3] == "2000" and r[4] == "ok" for r in rows[1:])
        assert (out / "hist_corv_sgld_sigmoid.csv").is_file()
        assert (out / "chains.csv").is_file()

        manifest = read_manifest(out / "manifest")
        assert manifest["kind"] == "density"
        assert manifest["seed"] == "2"
        assert len(manifest["config_hash"]) == 64
        assert "summary.csv" in manifest["files"].split(",")
        saved = ExperimentConfig.from_file(out / "config.toml")
        assert saved.config_hash() == manifest["config_hash"]

    def test_summary_is_reproducible(self, tmp_path):
        cfg = write_config(tmp_path, DENSITY)
        assert main(["run", cfg, "--out-dir", str(tmp_path / "a")]) == 0
        assert main(["run", cfg, "--out-dir", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "summary.csv").read_bytes()
        b = (tmp_path / "b" / "summary.csv").read_bytes()
        assert a == b

    def test_seed_override_changes_results(self, tmp_path):
        cfg = write_config(tmp_path, DENSITY)
        assert main(["run", cfg, "--out-dir", str(tmp_path / "a")]) == 0
        assert main(["run", cfg, "--out-dir", str(tmp_path / "b"), "--seed", "3"]) == 0
        assert read_manifest(tmp_path / "b" / "manifest")["seed"] == "3"
        a = (tmp_path / "a" / "summary.csv").read_bytes()
        b = (tmp_path / "b" / "summary.csv").read_bytes()
        assert a != b

    def test_weak_error(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", write_config(tmp_path, WEAK_ERROR), "--out-dir", str(out)]) == 0
        assert (out / "weak_error.csv").is_file()
        assert (out / "replicates.csv").is_file()
        assert len(read_rows(out / "summary.csv")) > 1

    def test_instability(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", write_config(tmp_path, INSTABILITY), "--out-dir", str(out)]) == 0
        rows = read_rows(out / "summary.csv")
        assert rows[0][0] == "theta"
        assert len(rows) == 6
        assert (out / "instability.svg").is_file()

    def test_nmf(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", write_config(tmp_path, NMF), "--out-dir", str(out)]) == 0
        for name in ("corv_sgld_softplus", "mirror_sgld"):
            curve = read_rows(out / f"rmse_{name}.csv")
            assert [r[0] for r in curve[1:]] == ["0", "10", "20"]
            assert (out / f"factors.{name}.bin").is_file()
        rows = read_rows(out / "summary.csv")
        assert [r[0] for r in rows[1:]] == ["corv_sgld", "mirror_sgld"]


class TestBench:
    """`pycorv bench`."""

    def test_timings(self, tmp_path):
        out = tmp_path / "out"
        assert main(["bench", write_config(tmp_path, BENCH), "--out-dir", str(out)]) == 0
        rows = read_rows(out / "timings.csv")
        assert rows[0] == ["batch_size", "method", "transform", "seconds_per_step", "relative_overhead"]
        assert [(r[1], r[2]) for r in rows[1:]] == [("mirror_sgld", ""), ("corv_sgld", "exp")]
        assert float(rows[1][4]) == 0.0


class TestGridSearch:
    """Stepsize grid search on the first sampler."""

    def test_diverging_candidate_is_skipped(self):
        config = ExperimentConfig.from_toml(NORMAL_GRID)
        result = grid_search_stepsize(config, [5.0, 0.01])
        assert result.best_stepsize == 0.01
        assert [row["stepsize"] for row in result.table] == [0.01, 5.0]
        assert result.table[1]["status"].startswith("diverged")
        assert not result.endpoint

    def test_edge_of_grid_is_flagged(self):
        config = ExperimentConfig.from_toml(NORMAL_GRID)
        result = grid_search_stepsize(config, [5.0, 10.0, 0.05])
        assert result.best_stepsize == 0.05
        assert result.endpoint

    def test_everything_diverges(self):
        config = ExperimentConfig.from_toml(NORMAL_GRID)
        with pytest.raises(ComputationError):
            grid_search_stepsize(config, [5.0, 10.0])

    def test_command(self, tmp_path):
        text = NORMAL_GRID + "\n[grid]\nstepsizes = [5.0, 0.05, 0.01]\n"
        out = tmp_path / "out"
        assert main(["grid-search", write_config(tmp_path, text), "--out-dir", str(out)]) == 0
        grid = read_rows(out / "grid.csv")
        assert [r[0] for r in grid[1:]] == ["0.01", "0.05", "5.0"]
        assert grid[3][2].startswith("diverged")
        summary = read_rows(out / "summary.csv")
        assert summary[0] == ["objective", "best_stepsize", "best_objective", "endpoint"]
        assert summary[1][0] == "tv_distance"


class TestGenData:
    """`pycorv gen-data`."""

    def test_writes_loadable_csv(self, tmp_path):
        args = ["gen-data", "--users", "20", "--items", "10", "--rank", "2", "--density", "1.0",
                "--out", "ratings.csv", "--out-dir", str(tmp_path)]
        assert main(args) == 0
        dataset = load_ratings_csv(tmp_path / "ratings.csv", "csv_header")
        assert (dataset.n_users, dataset.n_items, dataset.n_entries) == (20, 10, 200)


class TestErrors:
    """Exit status and error.json."""

    def test_unknown_sampler_kind(self, tmp_path):
        cfg = write_config(tmp_path, DENSITY.replace('kind = "mirror_sgld"', 'kind = "hmc"'))
        out = tmp_path / "out"
        assert main(["run", cfg, "--out-dir", str(out)]) == 2
        report = json.loads((out / "error.json").read_text(encoding="utf-8"))
        assert report["error"] == "ConfigError"
        assert any(p.startswith("samplers[0].kind") for p in report["problems"])

    def test_missing_config(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", str(tmp_path / "nope.toml"), "--out-dir", str(out)]) == 2
        assert (out / "error.json").is_file()

    def test_all_candidates_diverge(self, tmp_path):
        text = NORMAL_GRID + "\n[grid]\nstepsizes = [5.0, 10.0]\n"
        out = tmp_path / "out"
        assert main(["grid-search", write_config(tmp_path, text), "--out-dir", str(out)]) == 2
        report = json.loads((out / "error.json").read_text(encoding="utf-8"))
        assert report["error"] == "ComputationError"
        assert report["problems"] == []
