import numpy as np
import pytest

from hdivles import cases, timestepping as ts
from hdivles.mesh import PERIODIC, build_cartesian_mesh


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def periodic_square():
    return build_cartesian_mesh(2, (4, 4), ((-1, 1), (-1, 1)),
                                (PERIODIC, PERIODIC))


@pytest.fixture(scope="session")
def lattice_problem_k1():
    """Small periodic lattice discretization shared across form tests."""
    return ts.discretize(cases.lattice2d(1e-2), k=1, cells=4)


@pytest.fixture(scope="session")
def lattice_problem_k2():
    return ts.discretize(cases.lattice2d(1e-2), k=2, cells=4)


def divfree_sample(problem, rng, solver=None):
    """A random exactly divergence-free coefficient vector."""
    raw = rng.standard_normal(problem.ops.n_u)
    return ts.leray_project(problem.ops, raw)
