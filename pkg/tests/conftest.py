import numpy as np
import pytest

from jointmpc.kinematics import FIXTURES, load_chain


@pytest.fixture(scope="session")
def planar2():
    return load_chain(FIXTURES / "planar2.chain")


@pytest.fixture(scope="session")
def arm7():
    return load_chain(FIXTURES / "arm7.chain")


@pytest.fixture(scope="session")
def slider1():
    return load_chain(FIXTURES / "slider1.chain")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_q(chain, rng, n=1, margin=0.05):
    """Configurations uniformly inside the joint limits, away from the walls."""
    lo = chain.joint_limits[:, 0]
    hi = chain.joint_limits[:, 1]
    span = hi - lo
    q = rng.uniform(lo + margin * span, hi - margin * span, size=(n, chain.dof))
    return q[0] if n == 1 else q
