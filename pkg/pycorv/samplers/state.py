"""
pycorv.samplers.state - Chain state, sampler specs and traces
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from ..errors import ConfigError
from ..targets import TargetDensity
from ..transforms import Transform


class SamplerKind(str, Enum):
    SGLD = "sgld"
    MIRROR_SGLD = "mirror_sgld"
    ITO_LMC = "ito_lmc"
    CORV_SGLD = "corv_sgld"


SAMPLER_KINDS = tuple(k.value for k in SamplerKind)

_NEEDS_TRANSFORM = (SamplerKind.ITO_LMC, SamplerKind.CORV_SGLD)


@dataclass(frozen=True)
class ConstantStepsize:
    """epsilon_t = eps0 for every step."""
    eps0: float

    def __call__(self, step: int) -> float:
        return self.eps0


@dataclass(frozen=True)
class SamplerSpec:
    kind: SamplerKind
    stepsize_schedule: ConstantStepsize
    transform: Optional[Transform] = None
    # None means 10% of the run length
    burn_in: Optional[int] = None
    thinning: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", SamplerKind(self.kind))
        except ValueError:
            raise ConfigError(
                f"unknown sampler kind {self.kind!r}; expected one of {', '.join(SAMPLER_KINDS)}") from None

    @property
    def stepsize(self) -> float:
        return self.stepsize_schedule(0)

    @property
    def label(self) -> str:
        if self.transform is None:
            return self.kind.value
        return f"{self.kind.value}[{self.transform.name}]"

    def resolved_burn_in(self, n_steps: int) -> int:
        return n_steps // 10 if self.burn_in is None else self.burn_in

    def problems(self, target: TargetDensity) -> List[str]:
        """Everything that makes this spec unusable on `target`."""
        found = []
        domain = target.domain
        if not self.stepsize > 0.0:
            found.append(f"stepsize: must be > 0, got {self.stepsize}")
        if self.burn_in is not None and self.burn_in < 0:
            found.append(f"burn_in: must be >= 0, got {self.burn_in}")
        if self.thinning < 1:
            found.append(f"thinning: must be >= 1, got {self.thinning}")
        if self.kind in _NEEDS_TRANSFORM:
            if self.transform is None:
                found.append(f"transform: required by {self.kind.value}")
            elif self.transform.codomain != domain:
                found.append(
                    f"transform: codomain {self.transform.codomain} of {self.transform.name} "
                    f"does not match the target domain {domain}")
        if self.kind is SamplerKind.MIRROR_SGLD and domain.is_unconstrained:
            found.append("kind: mirror_sgld needs a domain with a finite boundary")
        if self.kind is SamplerKind.SGLD and not domain.is_unconstrained:
            found.append(f"kind: sgld cannot keep samples inside {domain}; use mirror_sgld or corv_sgld")
        return found

    def validate(self, target: TargetDensity) -> None:
        found = self.problems(target)
        if found:
            raise ConfigError(f"sampler {self.label} is incompatible with {target}", found)


@dataclass(frozen=True)
class ChainState:
    """One chain at step t. phi is None for the mirror sampler."""
    phi: Any
    theta: Any
    step: int
    stepsize: float
    rng: np.random.Generator = field(repr=False, compare=False)
    boundary_events: int = 0

    def advance(self, phi, theta, events: int = 0) -> "ChainState":
        return ChainState(phi, theta, self.step + 1, self.stepsize, self.rng,
                          self.boundary_events + events)

    def snapshot(self) -> Dict[str, Any]:
        return {
            "phi": self.phi,
            "theta": self.theta,
            "step": self.step,
            "stepsize": self.stepsize,
            "boundary_events": self.boundary_events,
        }


@dataclass
class SampleTrace:
    """Kept samples of one chain (after burn-in and thinning)."""
    thetas: np.ndarray
    phis: Optional[np.ndarray]
    n_boundary_events: int
    wall_time: float
    spec: SamplerSpec
    seed: int
    n_steps: int

    def __len__(self) -> int:
        return len(self.thetas)

    @property
    def final_theta(self) -> float:
        return float(self.thetas[-1])
