"""
Tests for experiment configuration files.
"""

from pathlib import Path

import pytest

from pycorv.config import EXPERIMENT_KINDS, ExperimentConfig, SamplerSection
from pycorv.errors import ConfigError
from pycorv.samplers import SamplerKind
from pycorv.targets import GammaTarget

CONFIGS = sorted((Path(__file__).resolve().parent.parent / "configs").glob("*.toml"))

MINIMAL = """
kind = "density"
seed = 4

[target]
name = "gamma"

[target.params]
shape = 0.5
scale = 1.0

[[samplers]]
kind = "corv_sgld"
transform = "softplus"
stepsize = 0.01
"""


def test_presets_exist():
    names = {p.stem for p in CONFIGS}
    assert {"density_gamma", "weak_error_gamma", "instability", "nmf_synthetic", "benchmark"} <= names


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_preset_parses_and_round_trips(path):
    config = ExperimentConfig.from_file(path)
    assert config.kind in EXPERIMENT_KINDS
    text = config.to_toml()
    again = ExperimentConfig.from_toml(text)
    assert again == config
    assert again.to_toml() == text


class TestParsing:
    """TOML to ExperimentConfig."""

    def test_minimal(self):
        config = ExperimentConfig.from_toml(MINIMAL)
        assert config.seed == 4
        assert config.threads == 1
        assert config.samplers == [SamplerSection("corv_sgld", "softplus", 0.01)]
        assert config.build_target() == GammaTarget(0.5, 1.0)

    def test_integer_accepted_for_float(self):
        config = ExperimentConfig.from_toml(MINIMAL.replace("scale = 1.0", "scale = 2"))
        assert config.target.params["scale"] == 2.0
        assert isinstance(config.target.params["scale"], float)

    def test_invalid_toml(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml("kind = ")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "nope.toml")

    def test_unknown_sampler_kind_names_the_field(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_toml(MINIMAL.replace('kind = "corv_sgld"', 'kind = "hmc"'))
        assert any(p.startswith("samplers[0].kind") for p in info.value.problems)

    def test_every_problem_reported(self):
        text = MINIMAL.replace("seed = 4", "seed = -1\ncolour = \"red\"").replace(
            "stepsize = 0.01", "stepsize = \"big\"")
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_toml(text)
        problems = info.value.problems
        assert "colour: unknown key" in problems
        assert any(p.startswith("samplers[0].stepsize") for p in problems)

    def test_semantic_problems_collected(self):
        text = MINIMAL.replace("seed = 4", "seed = -1").replace('transform = "softplus"',
                                                                'transform = "sigmoid"')
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_toml(text)
        problems = info.value.problems
        assert any(p.startswith("seed") for p in problems)
        assert any(p.startswith("samplers[0]: transform") for p in problems)

    def test_unknown_experiment_kind(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(MINIMAL.replace('kind = "density"', 'kind = "bogus"'))

    def test_samplers_required(self):
        text = MINIMAL.split("[[samplers]]")[0]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(text)

    def test_weak_error_grid_must_decrease(self):
        text = MINIMAL + "\n[weak_error]\nstepsizes = [0.01, 0.1]\n"
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(text)


class TestCanonicalForm:
    """to_toml, hashing and overrides."""

    def test_hash_is_stable(self):
        a = ExperimentConfig.from_toml(MINIMAL)
        b = ExperimentConfig.from_toml(MINIMAL.replace("\n\n", "\n\n# comment\n", 1))
        assert a.config_hash() == b.config_hash()
        assert len(a.config_hash()) == 64

    def test_hash_follows_content(self):
        a = ExperimentConfig.from_toml(MINIMAL)
        assert a.config_hash() != a.with_overrides(seed=5).config_hash()

    def test_overrides(self):
        config = ExperimentConfig.from_toml(MINIMAL).with_overrides(seed=9, out_dir="x", threads=2)
        assert (config.seed, config.out_dir, config.threads) == (9, "x", 2)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(MINIMAL).with_overrides(threads=0)

    def test_to_file(self, tmp_path):
        config = ExperimentConfig.from_toml(MINIMAL)
        config.to_file(tmp_path / "c.toml")
        assert ExperimentConfig.from_file(tmp_path / "c.toml") == config


class TestBuilders:
    """Runtime objects from config sections."""

    def test_sampler_resolved_on_target_domain(self):
        config = ExperimentConfig.from_toml(MINIMAL)
        target = config.build_target()
        spec = config.build_sampler(config.samplers[0], target)
        assert spec.kind is SamplerKind.CORV_SGLD
        assert spec.transform.name == "softplus"
        assert spec.stepsize == 0.01

    def test_stepsize_override(self):
        config = ExperimentConfig.from_toml(MINIMAL)
        spec = config.build_sampler(config.samplers[0], config.build_target(), stepsize=0.5)
        assert spec.stepsize == 0.5

    def test_nmf_samplers_map_onto_positive_reals(self):
        config = ExperimentConfig.from_file([p for p in CONFIGS if p.stem == "nmf_synthetic"][0])
        spec = config.build_sampler(config.samplers[0])
        assert spec.transform.codomain.lower == 0.0

    def test_noisy_oracle(self):
        text = MINIMAL + '\n[oracle]\nnoise_std = 1.0\nmode = "additive-noise"\n'
        config = ExperimentConfig.from_toml(text)
        oracle = config.build_oracle(config.build_target())
        assert oracle.noisy
