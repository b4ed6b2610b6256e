"""
pycorv.config - Experiment configuration

One TOML file per experiment, parsed into nested dataclass sections. Every
problem in a file is collected with its field path and reported at once.
to_toml() writes the canonical form, whose SHA-256 is the config hash.
"""

import hashlib
import json
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin, get_type_hints

from .errors import ConfigError
from .samplers import SAMPLER_KINDS, ConstantStepsize, SamplerKind, SamplerSpec
from .targets import GradientOracle, OracleMode, TARGET_NAMES, TargetDensity, make_target
from .transforms import POSITIVE_REALS, TRANSFORM_NAMES, resolve_transform

EXPERIMENT_KINDS = (
    "density",
    "weak_error",
    "instability",
    "nmf_train",
    "benchmark_overhead",
)

GRID_OBJECTIVES = ("tv_distance", "validation_rmse")


@dataclass
class TargetSection:
    name: str = "gamma"
    params: Dict[str, float] = field(default_factory=dict)


@dataclass
class OracleSection:
    noise_std: float = 0.0
    mode: str = "exact"


@dataclass
class SamplerSection:
    kind: str = "corv_sgld"
    transform: Optional[str] = None
    stepsize: float = 1e-3
    burn_in: Optional[int] = None
    thinning: int = 1


@dataclass
class DensitySection:
    n_samples: int = 100_000
    n_bins: int = 50
    initial_phi: float = 0.0


@dataclass
class WeakErrorSection:
    horizon: float = 10.0
    stepsizes: List[float] = field(default_factory=lambda: [1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    n_replicates: int = 200
    test_function: str = "identity"
    initial_phi: float = 0.0
    # "direct" or "coupled"
    estimator: str = "direct"
    refine: int = 4
    require_powered: bool = False


@dataclass
class InstabilitySection:
    thetas: List[float] = field(default_factory=lambda: [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    stepsize: float = 1e-3
    n_draws: int = 1000


@dataclass
class NMFSection:
    # "synthetic" or a path to a ratings file
    dataset: str = "synthetic"
    format: str = "ml_tab"
    n_users: int = 200
    n_items: int = 100
    true_rank: int = 5
    density: float = 0.5
    rank: int = 5
    rate_w: float = 1.0
    rate_h: float = 1.0
    batch_size: int = 2000
    n_iters: int = 5000
    eval_interval: int = 100
    burn_in: Optional[int] = None
    # snapshot prefix to resume from (<prefix>.<label>.bin)
    resume: Optional[str] = None


@dataclass
class GridSection:
    stepsizes: List[float] = field(default_factory=list)
    objective: str = "tv_distance"


@dataclass
class BenchSection:
    batch_sizes: List[int] = field(default_factory=lambda: [2000, 4000])
    rank: int = 20
    n_steps: int = 200
    repeats: int = 3
    transforms: List[str] = field(default_factory=lambda: ["exp", "softplus", "icll"])


_SECTIONS = {
    "bench": BenchSection,
    "density": DensitySection,
    "grid": GridSection,
    "instability": InstabilitySection,
    "nmf": NMFSection,
    "oracle": OracleSection,
    "target": TargetSection,
    "weak_error": WeakErrorSection,
}


def _coerce(value: Any, hint: Any, path: str, problems: List[str]) -> Any:
    origin = get_origin(hint)
    if origin is Union:
        if value is None:
            return None
        inner = [a for a in get_args(hint) if a is not type(None)][0]
        return _coerce(value, inner, path, problems)
    if origin in (list, List):
        (inner,) = get_args(hint)
        if not isinstance(value, list):
            problems.append(f"{path}: expected a list, got {value!r}")
            return []
        return [_coerce(v, inner, f"{path}[{i}]", problems) for i, v in enumerate(value)]
    if origin in (dict, Dict):
        _, inner = get_args(hint)
        if not isinstance(value, dict):
            problems.append(f"{path}: expected a table, got {value!r}")
            return {}
        return {k: _coerce(v, inner, f"{path}.{k}", problems) for k, v in value.items()}
    if hint is bool:
        if not isinstance(value, bool):
            problems.append(f"{path}: expected true/false, got {value!r}")
        return bool(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{path}: expected an integer, got {value!r}")
            return 0
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{path}: expected a number, got {value!r}")
            return math.nan
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            problems.append(f"{path}: expected a string, got {value!r}")
            return ""
        return value
    return value


def _parse_section(cls, table: Any, path: str, problems: List[str]):
    if not isinstance(table, dict):
        problems.append(f"{path}: expected a table")
        return cls()
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    for key in sorted(set(table) - known):
        problems.append(f"{path}.{key}: unknown key")
    values = {k: _coerce(table[k], hints[k], f"{path}.{k}", problems) for k in known & set(table)}
    return cls(**values)


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot write {value!r} as TOML")


def _section_lines(header: str, section) -> List[str]:
    lines = [header]
    nested = []
    for f in fields(section):
        value = getattr(section, f.name)
        if value is None:
            continue
        if isinstance(value, dict):
            nested.append((f.name, value))
            continue
        lines.append(f"{f.name} = {_toml_value(value)}")
    for name, table in nested:
        inner = header.strip("[]")
        lines.append("")
        lines.append(f"[{inner}.{name}]")
        lines.extend(f"{k} = {_toml_value(table[k])}" for k in sorted(table))
    return lines


@dataclass
class ExperimentConfig:
    """One experiment: what to run, on which target, with which samplers."""

    kind: str = "density"
    seed: int = 0
    threads: int = 1
    out_dir: str = "results"
    target: TargetSection = field(default_factory=TargetSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    samplers: List[SamplerSection] = field(default_factory=list)
    density: DensitySection = field(default_factory=DensitySection)
    weak_error: WeakErrorSection = field(default_factory=WeakErrorSection)
    instability: InstabilitySection = field(default_factory=InstabilitySection)
    nmf: NMFSection = field(default_factory=NMFSection)
    grid: GridSection = field(default_factory=GridSection)
    bench: BenchSection = field(default_factory=BenchSection)

    # -- parsing --------------------------------------------------------------

    @classmethod
    def from_toml(cls, text: str) -> 'ExperimentConfig':
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"config is not valid TOML: {err}") from None

        problems: List[str] = []
        top = {"kind": str, "seed": int, "threads": int, "out_dir": str}
        known = set(top) | set(_SECTIONS) | {"samplers"}
        for key in sorted(set(raw) - known):
            problems.append(f"{key}: unknown key")
        values: Dict[str, Any] = {}
        for key, hint in top.items():
            if key in raw:
                values[key] = _coerce(raw[key], hint, key, problems)
        for key, section_cls in _SECTIONS.items():
            if key in raw:
                values[key] = _parse_section(section_cls, raw[key], key, problems)
        samplers = raw.get("samplers", [])
        if not isinstance(samplers, list):
            problems.append("samplers: expected an array of tables ([[samplers]])")
            samplers = []
        values["samplers"] = [
            _parse_section(SamplerSection, table, f"samplers[{i}]", problems)
            for i, table in enumerate(samplers)
        ]
        if problems:
            raise ConfigError("invalid config", problems)
        config = cls(**values)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> 'ExperimentConfig':
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        return cls.from_toml(text)

    # -- validation -----------------------------------------------------------

    def problems(self) -> List[str]:
        found: List[str] = []
        if self.kind not in EXPERIMENT_KINDS:
            found.append(f"kind: unknown experiment kind {self.kind!r}; "
                         f"expected one of {', '.join(EXPERIMENT_KINDS)}")
        if self.seed < 0:
            found.append(f"seed: must be >= 0, got {self.seed}")
        if self.threads < 1:
            found.append(f"threads: must be >= 1, got {self.threads}")

        target = None
        if self.target.name not in TARGET_NAMES:
            found.append(f"target.name: unknown target {self.target.name!r}; "
                         f"expected one of {', '.join(TARGET_NAMES)}")
        else:
            try:
                target = make_target(self.target.name, self.target.params)
            except ConfigError as err:
                found.extend(err.problems or [str(err)])

        if self.oracle.mode not in {m.value for m in OracleMode}:
            found.append(f"oracle.mode: unknown mode {self.oracle.mode!r}")
        if not self.oracle.noise_std >= 0.0:
            found.append(f"oracle.noise_std: must be >= 0, got {self.oracle.noise_std}")

        if self.kind != "benchmark_overhead" and not self.samplers:
            found.append("samplers: at least one [[samplers]] table is required")
        for i, s in enumerate(self.samplers):
            found.extend(self._sampler_problems(i, s, target))

        if self.density.n_samples < 1:
            found.append(f"density.n_samples: must be >= 1, got {self.density.n_samples}")
        if self.density.n_bins < 10:
            found.append(f"density.n_bins: must be >= 10, got {self.density.n_bins}")
        steps = self.weak_error.stepsizes
        if not steps or any(e <= 0.0 for e in steps) or any(a <= b for a, b in zip(steps, steps[1:])):
            found.append("weak_error.stepsizes: must be positive and strictly decreasing")
        if not self.weak_error.horizon > 0.0:
            found.append(f"weak_error.horizon: must be > 0, got {self.weak_error.horizon}")
        if self.weak_error.n_replicates < 2:
            found.append(f"weak_error.n_replicates: must be >= 2, got {self.weak_error.n_replicates}")
        if self.weak_error.test_function not in ("identity", "square"):
            found.append(f"weak_error.test_function: unknown test function {self.weak_error.test_function!r}")
        if self.weak_error.estimator not in ("direct", "coupled"):
            found.append(f"weak_error.estimator: expected direct or coupled, got {self.weak_error.estimator!r}")
        if self.weak_error.refine < 2:
            found.append(f"weak_error.refine: must be >= 2, got {self.weak_error.refine}")
        if not self.instability.thetas or any(not 0.0 < t < 1.0 for t in self.instability.thetas):
            found.append("instability.thetas: need values in (0, 1)")
        if not self.instability.stepsize > 0.0:
            found.append(f"instability.stepsize: must be > 0, got {self.instability.stepsize}")
        if self.instability.n_draws < 1:
            found.append(f"instability.n_draws: must be >= 1, got {self.instability.n_draws}")
        found.extend(self._nmf_problems())
        if self.grid.objective not in GRID_OBJECTIVES:
            found.append(f"grid.objective: unknown objective {self.grid.objective!r}; "
                         f"expected one of {', '.join(GRID_OBJECTIVES)}")
        if any(e <= 0.0 for e in self.grid.stepsizes):
            found.append("grid.stepsizes: must be positive")
        if not self.bench.batch_sizes or any(b < 1 for b in self.bench.batch_sizes):
            found.append("bench.batch_sizes: need positive batch sizes")
        if self.bench.rank < 1 or self.bench.n_steps < 1 or self.bench.repeats < 1:
            found.append("bench: rank, n_steps and repeats must be >= 1")
        for i, name in enumerate(self.bench.transforms):
            if name not in TRANSFORM_NAMES:
                found.append(f"bench.transforms[{i}]: unknown transform {name!r}")
        return found

    def _sampler_problems(self, i: int, s: SamplerSection, target: Optional[TargetDensity]) -> List[str]:
        path = f"samplers[{i}]"
        if s.kind not in SAMPLER_KINDS:
            return [f"{path}.kind: unknown sampler kind {s.kind!r}; expected one of {', '.join(SAMPLER_KINDS)}"]
        if s.transform is not None and s.transform not in TRANSFORM_NAMES:
            return [f"{path}.transform: unknown transform {s.transform!r}; "
                    f"expected one of {', '.join(TRANSFORM_NAMES)}"]
        if target is None:
            return []
        try:
            self.build_sampler(s, target)
        except ConfigError as err:
            return [f"{path}: {p}" for p in err.problems] or [f"{path}: {err}"]
        return []

    def _nmf_problems(self) -> List[str]:
        n = self.nmf
        found = []
        if n.dataset == "synthetic":
            if min(n.n_users, n.n_items) < 1 or n.true_rank < 0:
                found.append("nmf: n_users, n_items must be >= 1 and true_rank >= 0")
            if not 0.0 < n.density <= 1.0:
                found.append(f"nmf.density: must lie in (0, 1], got {n.density}")
        if n.format not in ("ml_tab", "csv_header"):
            found.append(f"nmf.format: unknown ratings format {n.format!r}")
        if n.rank < 1:
            found.append(f"nmf.rank: must be >= 1, got {n.rank}")
        if not (n.rate_w > 0.0 and n.rate_h > 0.0):
            found.append("nmf.rate_w, nmf.rate_h: must be > 0")
        if n.batch_size < 1:
            found.append(f"nmf.batch_size: must be >= 1, got {n.batch_size}")
        if n.n_iters < 0:
            found.append(f"nmf.n_iters: must be >= 0, got {n.n_iters}")
        if n.eval_interval < 1:
            found.append(f"nmf.eval_interval: must be >= 1, got {n.eval_interval}")
        return found

    def validate(self) -> None:
        found = self.problems()
        if found:
            raise ConfigError("invalid config", found)

    # -- runtime objects ------------------------------------------------------

    def build_target(self) -> TargetDensity:
        return make_target(self.target.name, self.target.params)

    def build_oracle(self, target: TargetDensity) -> GradientOracle:
        return GradientOracle(target, self.oracle.noise_std, self.oracle.mode)

    def build_sampler(self, s: SamplerSection, target: Optional[TargetDensity] = None,
                      stepsize: Optional[float] = None) -> SamplerSpec:
        """SamplerSpec for a section; NMF runs resolve transforms onto (0, inf)."""
        kind = SamplerKind(s.kind)
        if self.kind == "nmf_train" or target is None:
            domain = POSITIVE_REALS
        else:
            domain = target.domain
        transform = resolve_transform(s.transform, domain) if s.transform else None
        spec = SamplerSpec(kind, ConstantStepsize(s.stepsize if stepsize is None else stepsize),
                           transform, s.burn_in, s.thinning)
        if target is not None and self.kind != "nmf_train":
            spec.validate(target)
        elif not spec.stepsize > 0.0:
            raise ConfigError("invalid sampler", [f"stepsize: must be > 0, got {spec.stepsize}"])
        return spec

    # -- writing --------------------------------------------------------------

    def to_toml(self) -> str:
        lines = [f"kind = {_toml_value(self.kind)}",
                 f"seed = {_toml_value(self.seed)}",
                 f"threads = {_toml_value(self.threads)}",
                 f"out_dir = {_toml_value(self.out_dir)}"]
        for name in sorted(_SECTIONS):
            lines.append("")
            lines.extend(_section_lines(f"[{name}]", getattr(self, name)))
        for s in self.samplers:
            lines.append("")
            lines.extend(_section_lines("[[samplers]]", s))
        return "\n".join(lines) + "\n"

    def to_file(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_toml(), encoding="utf-8")

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_toml().encode("utf-8")).hexdigest()

    def with_overrides(self, seed: Optional[int] = None, out_dir: Optional[str] = None,
                       threads: Optional[int] = None) -> 'ExperimentConfig':
        changes = {k: v for k, v in (("seed", seed), ("out_dir", out_dir), ("threads", threads))
                   if v is not None}
        config = replace(self, **changes)
        config.validate()
        return config
