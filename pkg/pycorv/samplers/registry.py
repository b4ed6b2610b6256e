"""Dispatch table behind ChainRunner.

Each sampler kind is advanced by exactly one ChainRunner method, declared with
`@steps(<SamplerKind>)`. The kinds the engine can run are therefore exactly the
kinds named in those decorators.
"""

from typing import Callable, Dict

from .state import SamplerKind

# Attribute the decorator stamps on a step method.
_KINDS_ATTR = '_sampler_kinds'


def steps(*kinds) -> Callable:
    """Register the decorated method as the step for `kinds`."""

    def decorate(fn: Callable) -> Callable:
        setattr(fn, _KINDS_ATTR, tuple(SamplerKind(k) for k in kinds))
        return fn

    return decorate


def collect_step_names(cls: type) -> Dict[SamplerKind, str]:
    """sampler kind -> method name, for every @steps method on `cls`'s MRO."""
    table: Dict[SamplerKind, str] = {}
    for klass in reversed(cls.__mro__):
        for name, attr in vars(klass).items():
            kinds = getattr(attr, _KINDS_ATTR, None)
            if not kinds:
                continue
            for kind in kinds:
                existing = table.get(kind)
                if existing is not None and existing != name:
                    raise RuntimeError(
                        f"sampler kind {kind.value} is stepped by both {existing} and {name}")
                table[kind] = name
    return table
