import numpy as np
import pytest

from dbarkit import (
    Exhaustion,
    FundamentalSolution,
    WeightFamily,
    geometry_for,
    neg_reciprocal,
)
from dbarkit.quadrature import pairwise_kernel_sum


@pytest.fixture(scope="session", autouse=True)
def _warm_numba():
    # compile the jitted kernels once so individual tests time only themselves
    pts = np.asarray([0.1 + 0.2j])
    src = np.asarray([1.0 + 1.0j])
    vals = np.asarray([1.0 + 0.0j])
    pairwise_kernel_sum(pts, src, vals, 1.0, "one")
    pairwise_kernel_sum(pts, src, vals, 1.0, "gauss")


@pytest.fixture(scope="session")
def ball_exh():
    return Exhaustion(kind="compact_balls")


@pytest.fixture(scope="session")
def strip_exh():
    return Exhaustion(kind="strip")


@pytest.fixture(scope="session")
def halfplane_exh():
    return Exhaustion(kind="strip", omega="half_planes")


@pytest.fixture(scope="session")
def disk_exh():
    return Exhaustion(kind="compact_balls", omega=("disk", 1.0))


@pytest.fixture(scope="session")
def unit_weights():
    return WeightFamily(kind="constant_one")


@pytest.fixture(scope="session")
def exp_weights():
    return WeightFamily(kind="exp_power", a=neg_reciprocal, gamma=1.0, q=2)


@pytest.fixture(scope="session")
def ball_geom(ball_exh):
    return geometry_for(ball_exh)


@pytest.fixture(scope="session")
def strip_geom(strip_exh):
    return geometry_for(strip_exh)


@pytest.fixture(scope="session")
def ball_fs_family(ball_geom):
    return lambda lvl: FundamentalSolution.at_level("one", lvl, ball_geom)


@pytest.fixture(scope="session")
def strip_fs_family(strip_geom):
    return lambda lvl: FundamentalSolution.at_level("one", lvl, strip_geom)
