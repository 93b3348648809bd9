"""Approximate nearest-neighbor search under decomposable Bregman divergences.

The pipeline: a ring-separator tree supplies a rough near neighbor, an
orthogonal range reporter answers box-emptiness-with-witness, and a
divergence-gridded (or precomputed Euclidean) quadtree refines the rough
candidate to a (1+eps)-approximate nearest neighbor.
"""

from ._backend import backend_name
from .ann_index import AnnIndex, BuildParams, build_index, exact_nn, load_index, save_index
from .divergence import (
    DivergenceSpec,
    DomainBox,
    Kind,
    Side,
    StructuralConstants,
    compute_c0,
    estimate_constants,
    estimate_mu,
    eval_divergence,
    lower_bound_to_box,
    spec_from_config,
)
from .generators import (
    GeneratorKind,
    ScalarGenerator,
    custom_generator,
    generator_by_name,
    itakura_saito_generator,
    kl_generator,
    squared_norm_generator,
)
from .numeric import Breakpoints, Precision, bisect_interval, grid_interval, point_at_distance

__version__ = "0.1.0"

__all__ = [
    "AnnIndex",
    "Breakpoints",
    "BuildParams",
    "DivergenceSpec",
    "DomainBox",
    "GeneratorKind",
    "Kind",
    "Precision",
    "ScalarGenerator",
    "Side",
    "StructuralConstants",
    "backend_name",
    "bisect_interval",
    "build_index",
    "compute_c0",
    "custom_generator",
    "estimate_constants",
    "estimate_mu",
    "eval_divergence",
    "exact_nn",
    "generator_by_name",
    "grid_interval",
    "itakura_saito_generator",
    "kl_generator",
    "load_index",
    "lower_bound_to_box",
    "point_at_distance",
    "save_index",
    "spec_from_config",
    "squared_norm_generator",
]
