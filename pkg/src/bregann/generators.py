"""Scalar convex generators: the 1-D atoms of decomposable divergences.

Each generator carries a strictly convex function ``phi`` together with its
first and second derivatives and the open interval on which it is valid.
The three built-in generators are parameter free and have compiled kernels;
custom generators supply analytic callables and run on the Python backend.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Tuple


class GeneratorKind(enum.Enum):
    SQUARED_NORM = "sqeuclidean"
    KL = "kl"
    ITAKURA_SAITO = "itakura-saito"
    CUSTOM = "custom"


# Integer ids used by the dispatch in the kernel backends. Custom generators
# get -1 and always take the Python path.
GEN_ID = {
    GeneratorKind.SQUARED_NORM: 0,
    GeneratorKind.KL: 1,
    GeneratorKind.ITAKURA_SAITO: 2,
    GeneratorKind.CUSTOM: -1,
}


@dataclass(frozen=True)
class ScalarGenerator:
    """A 1-D strictly convex generator with analytic derivatives.

    ``validity`` is the open interval where phi is strictly convex and
    differentiable; domain boxes must sit strictly inside it.
    """

    kind: GeneratorKind
    phi: Callable[[float], float]
    dphi: Callable[[float], float]
    d2phi: Callable[[float], float]
    validity: Tuple[float, float]
    gen_id: int = field(default=-1)

    def __post_init__(self):
        lo, hi = self.validity
        if not lo < hi:
            raise ValueError(f"validity interval must be nonempty, got {self.validity}")

    def contains(self, x: float) -> bool:
        lo, hi = self.validity
        return lo < x < hi


def squared_norm_generator() -> ScalarGenerator:
    """phi(t) = t^2; the squared-Euclidean atom, valid everywhere."""
    return ScalarGenerator(
        kind=GeneratorKind.SQUARED_NORM,
        phi=lambda t: t * t,
        dphi=lambda t: 2.0 * t,
        d2phi=lambda t: 2.0,
        validity=(-math.inf, math.inf),
        gen_id=GEN_ID[GeneratorKind.SQUARED_NORM],
    )


def kl_generator() -> ScalarGenerator:
    """phi(t) = t log t; gives the (generalized) KL divergence per coordinate."""
    return ScalarGenerator(
        kind=GeneratorKind.KL,
        phi=lambda t: t * math.log(t),
        dphi=lambda t: math.log(t) + 1.0,
        d2phi=lambda t: 1.0 / t,
        validity=(0.0, math.inf),
        gen_id=GEN_ID[GeneratorKind.KL],
    )


def itakura_saito_generator() -> ScalarGenerator:
    """phi(t) = -log t; gives the Itakura-Saito distance per coordinate."""
    return ScalarGenerator(
        kind=GeneratorKind.ITAKURA_SAITO,
        phi=lambda t: -math.log(t),
        dphi=lambda t: -1.0 / t,
        d2phi=lambda t: 1.0 / (t * t),
        validity=(0.0, math.inf),
        gen_id=GEN_ID[GeneratorKind.ITAKURA_SAITO],
    )


def custom_generator(phi, dphi, d2phi, validity) -> ScalarGenerator:
    """Wrap user-supplied analytic phi, phi' and phi'' into a generator.

    No automatic differentiation is attempted: the curvature ratio and the
    distance-marching initializer both need phi'' directly.
    """
    return ScalarGenerator(
        kind=GeneratorKind.CUSTOM,
        phi=phi,
        dphi=dphi,
        d2phi=d2phi,
        validity=(float(validity[0]), float(validity[1])),
        gen_id=-1,
    )


_FACTORIES = {
    "sqeuclidean": squared_norm_generator,
    "kl": kl_generator,
    "itakura-saito": itakura_saito_generator,
}


def generator_by_name(name: str) -> ScalarGenerator:
    """Look up a built-in generator by its CLI/config name."""
    try:
        return _FACTORIES[name]()
    except KeyError:
        raise ValueError(
            f"unknown generator {name!r}; expected one of {sorted(_FACTORIES)}"
        ) from None
