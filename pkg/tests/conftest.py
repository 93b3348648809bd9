import numpy as np
import pytest

from bregann.divergence import DivergenceSpec, DomainBox, Kind, Side
from bregann.generators import (
    itakura_saito_generator,
    kl_generator,
    squared_norm_generator,
)


def make_spec(gen_name, lo, hi, kind=Kind.SYMMETRIZED, rooted=True, side=Side.RIGHT):
    factory = {
        "kl": kl_generator,
        "sqeuclidean": squared_norm_generator,
        "itakura-saito": itakura_saito_generator,
    }[gen_name]
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    gens = [factory() for _ in range(lo.size)]
    return DivergenceSpec(gens, DomainBox(lo, hi), kind, rooted, side)


@pytest.fixture(scope="session")
def kl_sym_rooted_1d():
    return make_spec("kl", [0.1], [0.9])


@pytest.fixture(scope="session")
def kl_sym_rooted_2d():
    return make_spec("kl", [0.1, 0.1], [0.9, 0.9])


@pytest.fixture(scope="session")
def sqe_sym_rooted_2d():
    return make_spec("sqeuclidean", [0.0, 0.0], [1.0, 1.0])


@pytest.fixture(scope="session")
def kl_primal_rooted_2d():
    return make_spec("kl", [0.1, 0.1], [0.9, 0.9], kind=Kind.PRIMAL)
